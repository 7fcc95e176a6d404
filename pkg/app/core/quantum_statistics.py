# app/core/quantum_statistics.py
import logging
import warnings
from typing import Iterator, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import comb, factorial, gammaln
from scipy.stats import poisson

from app.core.collective_spin import expectation, state_blocks
from app.core.errors import (
    ArgumentError,
    ConvergenceError,
    InstabilityError,
    NumericalInstabilityWarning,
    QuadratureExtentError,
    TruncationError,
    UndefinedG2Error,
)
from app.models.spin import CollectiveState
from app.models.statistics import (
    JointStatistics,
    ModeReconstruction,
    MomentTable,
    PhotonStatistics,
    StatisticsPolicy,
    WignerGrid,
    WignerGridSpec,
)

logger = logging.getLogger(__name__)

CANCELLATION_LIMIT = 1e8


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def moments(
    op: sp.spmatrix,
    state: CollectiveState,
    m_max: int,
    center: bool = False,
) -> MomentTable:
    """
    Normally ordered moments <a^dag^m a^l> = <a^m psi | a^l psi>.

    center=True computes the moments of a - <a> directly and records <a> as the shift,
    which keeps high orders in range when the mean field is large.
    """
    if op.shape != (state.N + 1, state.N + 1):
        raise ArgumentError(f"Operator shape {op.shape} does not match N={state.N}.")
    shift = expectation(op, state) if center else 0j
    L = m_max + 1
    gram = np.zeros((L, L), dtype=complex)
    op = sp.csr_matrix(op)
    for lo, hi, X in state_blocks(state, reach=m_max):
        sub = op[lo:hi, lo:hi]
        if shift != 0:
            sub = sub - shift * sp.identity(hi - lo, format="csr")
        powers = [X]
        for _ in range(m_max):
            powers.append(sub @ powers[-1])
        flat = np.stack([p.ravel() for p in powers])
        with np.errstate(over="ignore", invalid="ignore"):
            gram += flat.conj() @ flat.T
    if not np.all(np.isfinite(gram)):
        raise TruncationError(
            f"Moments overflow below order {m_max}; center the operator (mean shift) or lower m_max."
        )
    return MomentTable(values=gram, shift=complex(shift))


def _displace(values: np.ndarray, delta: complex) -> np.ndarray:
    """Moments of (a + delta) from moments of a."""
    L = values.shape[0]
    idx = np.arange(L)
    binom = comb(idx[:, None], idx[None, :])
    gap = np.clip(idx[:, None] - idx[None, :], 0, None)
    left = np.tril(binom * np.conj(delta) ** gap)
    right = np.tril(binom * delta ** gap)
    return left @ values @ right.T


def mean_shift(table: MomentTable) -> Tuple[MomentTable, complex]:
    beta = complex(table.values[0, 1])
    if beta == 0:
        return table, 0j
    shifted = _displace(table.values, -beta)
    shifted[0, 1] = shifted[1, 0] = 0.0
    return MomentTable(values=shifted, shift=table.shift + beta), beta


def unshift(table: MomentTable) -> MomentTable:
    if table.shift == 0:
        return table
    return MomentTable(values=_displace(table.values, table.shift), shift=0j)


# ---------------------------------------------------------------------------
# Wigner function
# ---------------------------------------------------------------------------

def _xi_column(m: int, x: np.ndarray, alpha_powers: np.ndarray, base: np.ndarray) -> Iterator[Tuple[int, np.ndarray]]:
    """
    Yield (l, xi_lm) for l = 0..m.

    xi_lm = base * (2^m/m!) * alpha^(m-l) * kappa_l(x), with x = 2|alpha|^2, kappa_0 = 1,
    kappa_1 = x - m and kappa_l = -(x kappa_{l-2} + (m - l + 1 - x) kappa_{l-1}) / l.
    """
    scale = np.exp(m * np.log(2.0) - gammaln(m + 1))
    kappa_prev = None
    kappa = np.ones_like(x)
    for l in range(m + 1):
        if l == 1:
            kappa_prev, kappa = kappa, x - m
        elif l >= 2:
            kappa_prev, kappa = kappa, -(x * kappa_prev + (m - l + 1 - x) * kappa) / l
        yield l, base * scale * alpha_powers[m - l] * kappa


def xi_matrix(alpha: np.ndarray, m_max: int) -> np.ndarray:
    """Full xi[l, m](alpha) up to m_max, using xi_lm(alpha) = xi_ml(conj(alpha)) above the diagonal."""
    alpha = np.asarray(alpha, dtype=complex)
    x = 2.0 * np.abs(alpha) ** 2
    base = (2.0 / np.pi) * np.exp(-x)
    powers = alpha[None, ...] ** np.arange(m_max + 1).reshape((-1,) + (1,) * alpha.ndim)
    out = np.empty((m_max + 1, m_max + 1) + alpha.shape, dtype=complex)
    for m in range(m_max + 1):
        for l, xi in _xi_column(m, x, powers, base):
            out[l, m] = xi
            out[m, l] = np.conj(xi)
    return out


def direct_xi(l: int, m: int, alpha: complex) -> complex:
    """Closed k-sum for xi_lm; alpha must be non-zero when l > m."""
    x = 2.0 * abs(alpha) ** 2
    total = 0.0
    for k in range(max(0, l - m), l + 1):
        total += (-1) ** k * x ** k / (factorial(l - k) * factorial(m - l + k) * factorial(k))
    return complex((2.0 / np.pi) * np.exp(-x) * (-1) ** l * 2.0 ** m * alpha ** (m - l) * total)


def _wigner_sum(values: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    m_max = values.shape[0] - 1
    x = 2.0 * np.abs(alpha) ** 2
    base = (2.0 / np.pi) * np.exp(-x)
    powers = np.empty((m_max + 1,) + alpha.shape, dtype=complex)
    powers[0] = 1.0
    for p in range(1, m_max + 1):
        powers[p] = powers[p - 1] * alpha
    W = np.zeros(alpha.shape)
    for m in range(m_max + 1):
        for l, xi in _xi_column(m, x, powers, base):
            term = values[m, l] * xi
            W += term.real if l == m else 2.0 * term.real
    return W


def auto_grid(table: MomentTable, n_points: int = 201) -> WignerGridSpec:
    """Centered on <a>, half-width 4 max(1, std of each quadrature)."""
    centered, beta = mean_shift(table)
    v = centered.values
    if table.m_max >= 2:
        var_re = 0.25 * (2.0 * v[1, 1].real + 2.0 * v[0, 2].real + 1.0)
        var_im = 0.25 * (2.0 * v[1, 1].real - 2.0 * v[0, 2].real + 1.0)
    else:
        var_re = var_im = 0.25
    spread = np.sqrt(max(var_re, var_im, 0.0))
    return WignerGridSpec(center=centered.shift, half_width=4.0 * max(1.0, spread), n_points=n_points)


def wigner_from_moments(
    table: MomentTable,
    grid: Optional[WignerGridSpec] = None,
    check_convergence: bool = True,
) -> WignerGrid:
    grid = grid or auto_grid(table)
    re, im = grid.axes()
    alpha_phys = re[None, :] + 1j * im[:, None]
    alpha = alpha_phys - table.shift
    W = _wigner_sum(table.values, alpha)
    result = WignerGrid(re=re, im=im, values=W, shift=table.shift)

    if check_convergence and table.m_max >= 10:
        lower = _wigner_sum(table.values[:table.m_max - 4, :table.m_max - 4], alpha)
        drift = abs(result.norm() - float(lower.sum() * result.dA))
        if drift > 1e-3:
            raise ConvergenceError(
                f"Wigner norm drifts by {drift:.3e} between m_max={table.m_max - 5} and {table.m_max}.",
                drift=drift,
            )
    return result


# ---------------------------------------------------------------------------
# Photon statistics
# ---------------------------------------------------------------------------

def _clip_negative(p: np.ndarray, tolerance: float) -> Tuple[np.ndarray, float]:
    worst = float(p.min())
    if worst < -tolerance:
        raise InstabilityError(f"Photon probability {worst:.3e} is below -{tolerance:.0e}.")
    clipped = float(-p[p < 0].sum())
    p = np.clip(p, 0.0, None)
    return p / p.sum(), clipped


def photon_statistics_from_wigner(
    W: WignerGrid,
    k_max: Optional[int] = None,
    negative_tolerance: float = 1e-6,
) -> PhotonStatistics:
    """
    p_n = integral of W(alpha) g_n(alpha), g_n = 2 (-1)^n e^{-2|alpha|^2} L_n(4|alpha|^2),
    the Wigner function of |n><n| scaled by pi.
    """
    alpha = W.alpha
    r2 = np.abs(alpha) ** 2
    if k_max is None:
        nbar = max(float((W.values * r2).sum() * W.dA) - 0.5, 0.0)
        k_max = int(np.ceil(nbar + 10.0 * np.sqrt(nbar + 1.0) + 10.0))

    y = 4.0 * r2
    weight = 2.0 * np.exp(-2.0 * r2) * W.values * W.dA
    p = np.empty(k_max + 1)
    lag_prev, lag = np.zeros_like(y), np.ones_like(y)
    for n in range(k_max + 1):
        if n == 1:
            lag_prev, lag = lag, 1.0 - y
        elif n >= 2:
            lag_prev, lag = lag, ((2 * n - 1 - y) * lag - (n - 1) * lag_prev) / n
        p[n] = (-1) ** n * float((weight * lag).sum())

    total = float(p.sum())
    if not 0.99 <= total <= 1.01:
        raise QuadratureExtentError(
            f"Photon probabilities sum to {total:.4f}; enlarge the Wigner grid or k_max."
        )
    p, clipped = _clip_negative(p, negative_tolerance)
    return PhotonStatistics(p=p, clipped_mass=clipped)


def photon_statistics_from_moments(
    table: MomentTable,
    k_max: Optional[int] = None,
    negative_tolerance: float = 1e-6,
) -> PhotonStatistics:
    """Alternating-sum inversion p_n = sum_m (-1)^(m-n) <a^dag^m a^m> / (n! (m-n)!)."""
    diag = unshift(table).values.diagonal().real
    m_max = diag.size - 1
    k_max = m_max if k_max is None else min(k_max, m_max)

    p = np.zeros(k_max + 1)
    severity = 1.0
    for n in range(k_max + 1):
        m = np.arange(n, m_max + 1)
        terms = (-1.0) ** (m - n) * diag[n:] / (factorial(n) * factorial(m - n))
        p[n] = terms.sum()
        peak = np.abs(terms).max()
        if peak > 0 and abs(p[n]) > 1e-300:
            severity = max(severity, peak / abs(p[n]))

    authoritative = severity <= CANCELLATION_LIMIT
    if not authoritative:
        warnings.warn(
            f"Alternating-sum inversion lost precision (cancellation {severity:.2e}).",
            NumericalInstabilityWarning,
        )
        logger.warning("Moment-route photon statistics flagged non-authoritative (cancellation %.2e)", severity)
        clipped = float(-p[p < 0].sum())
        return PhotonStatistics(p=np.clip(p, 0.0, None), cancellation=severity,
                                authoritative=False, clipped_mass=clipped)
    p, clipped = _clip_negative(p, negative_tolerance)
    return PhotonStatistics(p=p, cancellation=severity, clipped_mass=clipped)


def g2_and_mandel(table: MomentTable) -> Tuple[float, float, float]:
    """Returns (g2, Q, nbar)."""
    if table.m_max < 2:
        raise ArgumentError("g2 needs moments up to second order.")
    v = unshift(table).values
    nbar = float(v[1, 1].real)
    if nbar <= 0:
        raise UndefinedG2Error(f"Mean photon number is {nbar:.3e}; g2 is undefined.")
    g2 = float(v[2, 2].real) / nbar ** 2
    return g2, nbar * (g2 - 1.0), nbar


def poisson_reference(nbar: float, k_max: int) -> np.ndarray:
    return poisson.pmf(np.arange(k_max + 1), nbar)


# ---------------------------------------------------------------------------
# Two modes
# ---------------------------------------------------------------------------

def joint_moments(
    opA: sp.spmatrix,
    opB: sp.spmatrix,
    state: CollectiveState,
    k_max: int,
    l_max: int,
) -> np.ndarray:
    """J[k, l] = <A^dag^k A^k B^dag^l B^l>, operators applied in exactly that order."""
    J = np.zeros((k_max + 1, l_max + 1), dtype=complex)
    opA, opB = sp.csr_matrix(opA), sp.csr_matrix(opB)
    for lo, hi, X in state_blocks(state, reach=k_max + 2 * l_max):
        A = opA[lo:hi, lo:hi]
        B = opB[lo:hi, lo:hi]
        Bd = B.conj().T.tocsr()
        left = [X]
        for _ in range(k_max):
            left.append(A @ left[-1])
        for l in range(l_max + 1):
            chi = X
            for _ in range(l):
                chi = B @ chi
            for _ in range(l):
                chi = Bd @ chi
            right = chi
            for k in range(k_max + 1):
                J[k, l] += np.vdot(left[k], right)
                right = A @ right
    if not np.all(np.isfinite(J)):
        raise TruncationError("Joint moments overflow; lower k_max or l_max.")
    return J


def _inversion_matrix(size: int) -> np.ndarray:
    n = np.arange(size)
    gap = n[None, :] - n[:, None]
    C = np.where(gap >= 0, (-1.0) ** np.abs(gap), 0.0)
    return C / (factorial(n)[:, None] * factorial(np.clip(gap, 0, None)))


def correlation_measures(p: np.ndarray) -> Tuple[float, float]:
    """Pearson coefficient and mutual information (nats) of a joint count table."""
    pn = p.sum(axis=1)
    pm = p.sum(axis=0)
    kn = np.arange(p.shape[0])
    km = np.arange(p.shape[1])
    mean_n, mean_m = kn @ pn, km @ pm
    cov = kn @ p @ km - mean_n * mean_m
    var_n = (kn ** 2) @ pn - mean_n ** 2
    var_m = (km ** 2) @ pm - mean_m ** 2
    pearson = float(cov / np.sqrt(var_n * var_m)) if var_n > 0 and var_m > 0 else 0.0

    outer = np.outer(pn, pm)
    mask = (p > 0) & (outer > 0)
    mutual = float(np.sum(p[mask] * np.log(p[mask] / outer[mask])))
    return pearson, max(mutual, 0.0)


def joint_statistics(jm: np.ndarray, negative_tolerance: float = 1e-6) -> JointStatistics:
    jm = np.real_if_close(np.asarray(jm), tol=1e6).real
    P = _inversion_matrix(jm.shape[0]) @ jm @ _inversion_matrix(jm.shape[1]).T
    worst = float(P.min())
    if worst < -negative_tolerance:
        raise InstabilityError(f"Joint probability {worst:.3e} is below -{negative_tolerance:.0e}.")
    P = np.clip(P, 0.0, None)
    P = P / P.sum()
    pearson, mutual = correlation_measures(P)
    return JointStatistics(p=P, pearson=pearson, mutual_information=mutual)


# ---------------------------------------------------------------------------
# Full single-mode reconstruction
# ---------------------------------------------------------------------------

def reconstruct_mode(
    op: sp.spmatrix,
    state: CollectiveState,
    policy: Optional[StatisticsPolicy] = None,
) -> ModeReconstruction:
    """
    Moments of the centered operator up to the cap, then Wigner and photon statistics at
    m_max = start, start + step, ... until both change by less than the tolerance.
    """
    policy = policy or StatisticsPolicy()
    full = moments(op, state, policy.m_max_cap, center=True)
    g2, q, nbar = _safe_g2(full.truncated(2))

    previous: Optional[Tuple[WignerGrid, PhotonStatistics]] = None
    converged = False
    notes = []
    m_max = policy.m_max_start
    while True:
        table = full.truncated(m_max)
        grid = auto_grid(table, policy.grid_points)
        W = wigner_from_moments(table, grid, check_convergence=False)
        try:
            stats = photon_statistics_from_wigner(W, negative_tolerance=policy.negative_tolerance)
        except (QuadratureExtentError, InstabilityError) as exc:
            if m_max >= policy.m_max_cap:
                raise
            notes.append(f"m_max={m_max}: {exc}")
            stats = None
        if stats is not None and previous is not None:
            dnorm = abs(W.norm() - previous[0].norm())
            size = max(stats.p.size, previous[1].p.size)
            dp = np.abs(np.pad(stats.p, (0, size - stats.p.size)) - np.pad(previous[1].p, (0, size - previous[1].p.size))).max()
            if dnorm < policy.tolerance and dp < policy.tolerance:
                converged = True
                break
        if m_max >= policy.m_max_cap:
            break
        if stats is not None:
            previous = (W, stats)
        m_max = min(m_max + policy.m_max_step, policy.m_max_cap)
        logger.info("Growing m_max to %d", m_max)

    if not converged:
        logger.warning("Reconstruction not converged at m_max=%d", m_max)
        notes.append(f"not converged at m_max={m_max}")

    from_moments = None
    if nbar <= 5.0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NumericalInstabilityWarning)
            try:
                from_moments = photon_statistics_from_moments(table, k_max=stats.p.size - 1)
            except InstabilityError as exc:
                notes.append(f"moment route: {exc}")

    return ModeReconstruction(
        moments=table,
        wigner=W,
        statistics=stats,
        nbar=nbar,
        g2=g2,
        mandel_q=q,
        m_max=m_max,
        converged=converged,
        statistics_from_moments=from_moments,
        notes=notes,
    )


def _safe_g2(table: MomentTable) -> Tuple[float, float, float]:
    try:
        return g2_and_mandel(table)
    except UndefinedG2Error:
        return float("nan"), 0.0, 0.0
