# app/core/phase_space.py
import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.optimize import curve_fit

from app.config import settings
from app.core.collective_spin import atomic_wigner_bloch, dicke_state, excited_state, ground_state
from app.core.errors import ArgumentError, CapabilityError
from app.core.quantum_statistics import correlation_measures
from app.models.modes import HarmonicMode
from app.models.phase_space import VACUUM_STD, EnsembleSummary, ThetaDistribution, TrajectoryEnsemble
from app.models.spin import CollectiveState, TwistingParams
from app.models.statistics import JointStatistics, PhotonStatistics, WignerGrid

logger = logging.getLogger(__name__)

# family -> (theta0, a1, a2)
FAMILIES = {
    "up": (0.0, 0.8887, 0.4741),
    "half": (np.pi / 2.0, 0.8956, 0.9549),
    "down": (np.pi, 0.8887, 0.4741),
    "right": (0.0, 0.8887, 0.4741),
}

N_BATCHES = 20


# ---------------------------------------------------------------------------
# Angular distribution
# ---------------------------------------------------------------------------

def _family_state(family: str, N: int) -> CollectiveState:
    if family in ("up", "right"):
        return excited_state(N)
    if family == "down":
        return ground_state(N)
    if N % 2:
        raise ArgumentError(f"Half-excited family needs even N, got N={N}.")
    return dicke_state(N, N // 2)


def _check_family(family: str) -> None:
    if family not in FAMILIES:
        raise CapabilityError(f"No phase-space distribution for family '{family}'. Supported: {sorted(FAMILIES)}.")


def bloch_w_theta(family: str, N: int, theta: np.ndarray) -> np.ndarray:
    """|sin theta| W(theta) of the family's exact state; all families are azimuthally symmetric."""
    _check_family(family)
    theta = np.asarray(theta, dtype=float)
    W = atomic_wigner_bloch(_family_state(family, N), theta, np.zeros(1))[:, 0]
    return np.abs(np.sin(theta)) * W


def _fit_sigma(family: str, N: int, theta0: float, sigma_guess: float) -> float:
    lo = max(0.0, theta0 - 6.0 * sigma_guess)
    hi = min(np.pi, theta0 + 6.0 * sigma_guess)
    theta = np.linspace(lo, hi, 400)
    w = bloch_w_theta(family, N, theta)

    def model(th, amplitude, sigma):
        return amplitude * np.abs(np.sin(th)) * np.exp(-0.5 * ((th - theta0) / sigma) ** 2)

    peak = float(np.abs(w).max()) / max(float(np.abs(np.sin(theta)).max()), 1e-12)
    (_, sigma), _ = curve_fit(model, theta, w, p0=[peak, sigma_guess], bounds=([0.0, 1e-6], [np.inf, np.pi]))
    return float(sigma)


def fit_theta_distribution(family: str, N: int, refit: bool = False) -> ThetaDistribution:
    """
    Default coefficients per family; refit=True fits sigma to the exact Bloch Wigner at this N
    (keeping a2 and adjusting a1), available up to the Bloch Wigner size limit.
    """
    _check_family(family)
    theta0, a1, a2 = FAMILIES[family]
    sigma = a1 * N ** (-a2)
    if refit:
        if N > settings.wigner_overflow_n:
            raise CapabilityError(f"Refit needs the exact Bloch Wigner, limited to N <= {settings.wigner_overflow_n}.")
        sigma = _fit_sigma(family, N, theta0, sigma)
        a1 = sigma * N ** a2
        logger.info("Refit %s family at N=%d: sigma=%.5g", family, N, sigma)
    return ThetaDistribution(family=family, theta0=theta0, sigma=sigma, a1=a1, a2=a2)


def fit_sigma_scaling(family: str, Ns: Sequence[int]) -> Tuple[float, float]:
    """(a1, a2) from a log-log fit of refitted sigma over several N."""
    if len(Ns) < 2:
        raise ArgumentError("Scaling fit needs at least two atom counts.")
    sigmas = [fit_theta_distribution(family, int(N), refit=True).sigma for N in Ns]
    slope, intercept = np.polyfit(np.log(np.asarray(Ns, dtype=float)), np.log(sigmas), 1)
    return float(np.exp(intercept)), float(-slope)


# ---------------------------------------------------------------------------
# Sampling and classical fields
# ---------------------------------------------------------------------------

def _rejection_theta(dist: ThetaDistribution, R: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = dist.support()
    if hi - lo < 1e-300:
        return np.full(R, dist.theta0)
    mesh = np.linspace(lo, hi, 2001)
    bound = 1.05 * float(dist.density(mesh).max())
    out = np.empty(R)
    filled = 0
    while filled < R:
        want = R - filled
        batch = max(2 * want, 1024)
        theta = rng.uniform(lo, hi, batch)
        accept = rng.uniform(0.0, bound, batch) < dist.density(theta)
        taken = theta[accept][:want]
        out[filled:filled + taken.size] = taken
        filled += taken.size
    return out


def sample_initial_conditions(dist: ThetaDistribution, N: int, R: int, seed: int) -> TrajectoryEnsemble:
    if R < 1:
        raise ArgumentError(f"Need at least one trajectory, got R={R}.")
    rng = np.random.default_rng(seed)
    theta = _rejection_theta(dist, R, rng)
    phi = rng.uniform(0.0, 2.0 * np.pi, R)
    S = N * np.column_stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    if dist.family == "right":
        # rotate the north-pole cloud onto +x: (x, y, z) -> (z, y, -x)
        S = np.column_stack([S[:, 2], S[:, 1], -S[:, 0]])
    logger.debug("Sampled %d trajectories for family %s (sigma=%.4g)", R, dist.family, dist.sigma)
    return TrajectoryEnsemble(N=N, S_points=S, seeds={"sampling": int(seed)})


def twist_ensemble(ens: TrajectoryEnsemble, params: TwistingParams, N: int) -> TrajectoryEnsemble:
    """Classical one-axis twisting: precession about z at rate omega0 + 4 omegaJ S_z / N."""
    if ens.N != N:
        raise ArgumentError(f"Ensemble has N={ens.N}, twisting requested for N={N}.")
    S = ens.S_points
    angle = (params.omega0 + 4.0 * params.omegaJ * S[:, 2] / N) * params.t_h
    c, s = np.cos(angle), np.sin(angle)
    twisted = np.column_stack([c * S[:, 0] - s * S[:, 1], s * S[:, 0] + c * S[:, 1], S[:, 2]])
    return TrajectoryEnsemble(N=N, S_points=twisted, seeds=dict(ens.seeds))


def classical_fields(
    ens: TrajectoryEnsemble,
    mode: HarmonicMode,
    seed: int,
    vacuum_std: float = VACUUM_STD,
) -> np.ndarray:
    """alpha^(r) = vacuum noise + alpha_n + (u + i v) . S^(r); stored on the ensemble under mode.n."""
    if mode.N != ens.N:
        raise ArgumentError(f"Mode built for N={mode.N}, ensemble has N={ens.N}.")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, vacuum_std, ens.R) + 1j * rng.normal(0.0, vacuum_std, ens.R)
    alpha = noise + mode.alpha + ens.S_points @ (mode.u + 1j * mode.v)
    ens.alpha_fields[mode.n] = alpha
    ens.seeds[f"noise_{mode.n}"] = int(seed)
    return alpha


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def _intensity_moments(alpha: np.ndarray, vacuum_std: float) -> Tuple[float, float, float, float]:
    """(intensity, nbar, g2, Q) with the vacuum-noise contribution removed from the moments."""
    s = 2.0 * vacuum_std ** 2
    a2 = float(np.mean(np.abs(alpha) ** 2))
    a4 = float(np.mean(np.abs(alpha) ** 4))
    nbar = a2 - s
    second = a4 - 4.0 * s * a2 + 2.0 * s ** 2
    if nbar <= 0:
        return a2, nbar, float("nan"), 0.0
    g2 = second / nbar ** 2
    return a2, nbar, g2, nbar * (g2 - 1.0)


def batch_standard_error(samples: np.ndarray, estimator: Callable[[np.ndarray], float], n_batches: int = N_BATCHES) -> float:
    n_batches = min(n_batches, samples.shape[0])
    if n_batches < 2:
        return float("nan")
    values = np.array([estimator(chunk) for chunk in np.array_split(samples, n_batches)])
    values = values[np.isfinite(values)]
    if values.size < 2:
        return float("nan")
    return float(values.std(ddof=1) / np.sqrt(values.size))


def _photon_counts(alpha: np.ndarray) -> np.ndarray:
    return np.rint(np.abs(alpha) ** 2).astype(int)


def scatter_density(alpha: np.ndarray, bins: int = 101, smooth: Optional[float] = None) -> WignerGrid:
    """Normalized 2-D histogram of the samples over the auto-extent rule used for quantum grids."""
    center = complex(alpha.mean())
    half = 4.0 * max(1.0, float(alpha.real.std()), float(alpha.imag.std()))
    edges_re = np.linspace(center.real - half, center.real + half, bins + 1)
    edges_im = np.linspace(center.imag - half, center.imag + half, bins + 1)
    H, _, _ = np.histogram2d(alpha.real, alpha.imag, bins=[edges_re, edges_im])
    if smooth:
        H = gaussian_filter(H, sigma=smooth)
    dA = (edges_re[1] - edges_re[0]) * (edges_im[1] - edges_im[0])
    H = H / (alpha.size * dA)
    re = 0.5 * (edges_re[1:] + edges_re[:-1])
    im = 0.5 * (edges_im[1:] + edges_im[:-1])
    return WignerGrid(re=re, im=im, values=H.T)


def _joint_counts(k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    P = np.zeros((k1.max() + 1, k2.max() + 1))
    np.add.at(P, (k1, k2), 1.0)
    return P / k1.size


def classical_statistics(
    alpha: np.ndarray,
    second: Optional[np.ndarray] = None,
    vacuum_std: float = VACUUM_STD,
    bins: int = 101,
    smooth: Optional[float] = None,
) -> EnsembleSummary:
    alpha = np.asarray(alpha, dtype=complex)
    R = alpha.size
    if R < 100:
        logger.warning("Only %d trajectories; ensemble statistics will be noisy", R)

    intensity, nbar, g2, q = _intensity_moments(alpha, vacuum_std)
    counts = _photon_counts(alpha)
    p = np.bincount(counts) / R

    joint = None
    pearson_se = None
    if second is not None:
        second = np.asarray(second, dtype=complex)
        if second.size != R:
            raise ArgumentError(f"Paired fields differ in size: {R} vs {second.size}.")
        P = _joint_counts(counts, _photon_counts(second))
        pearson, mutual = correlation_measures(P)
        joint = JointStatistics(p=P, pearson=pearson, mutual_information=mutual)
        pairs = np.column_stack([counts, _photon_counts(second)]).astype(float)
        pearson_se = batch_standard_error(pairs, _pearson_of_pairs)

    return EnsembleSummary(
        R=R,
        nbar=nbar,
        nbar_se=batch_standard_error(alpha, lambda a: _intensity_moments(a, vacuum_std)[1]),
        g2=g2,
        g2_se=batch_standard_error(alpha, lambda a: _intensity_moments(a, vacuum_std)[2]),
        mandel_q=q,
        mandel_q_se=batch_standard_error(alpha, lambda a: _intensity_moments(a, vacuum_std)[3]),
        intensity=intensity,
        intensity_se=batch_standard_error(alpha, lambda a: float(np.mean(np.abs(a) ** 2))),
        statistics=PhotonStatistics(p=p),
        density=scatter_density(alpha, bins=bins, smooth=smooth),
        joint=joint,
        pearson_se=pearson_se,
    )


def _pearson_of_pairs(pairs: np.ndarray) -> float:
    a, b = pairs[:, 0], pairs[:, 1]
    if a.std() == 0 or b.std() == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])
