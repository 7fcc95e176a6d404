# app/core/collective_spin.py
import logging
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln, xlogy

from app.config import settings
from app.core.errors import ArgumentError, CapabilityError, IntegratorError, UnsupportedStateError
from app.models.spin import (
    CollectiveState,
    SpinOperators,
    SpinSpace,
    SuperradianceParams,
    SuperradianceResult,
    TwistingParams,
)

logger = logging.getLogger(__name__)

PROTOCOLS = ("ground", "pi", "pi2", "dicke-half", "twisting", "superradiance")


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def build_spin_ops(N: int) -> SpinOperators:
    """
    Pauli-unit collective operators on the symmetric ladder |k>, k = 0..N excited.
    S+ |k> = 2 sqrt((k+1)(N-k)) |k+1>.
    """
    space = SpinSpace(N)
    k = np.arange(N)
    raise_amp = 2.0 * np.sqrt((k + 1.0) * (N - k))
    splus = sp.diags(raise_amp, -1, shape=(N + 1, N + 1), format="csr")
    sminus = splus.T.tocsr()
    sz = sp.diags(space.sz_values, 0, format="csr")
    sx = ((splus + sminus) * 0.5).tocsr()
    sy = ((splus - sminus) * (-0.5j)).tocsr()
    return SpinOperators(space=space, sx=sx, sy=sy, sz=sz, splus=splus, sminus=sminus)


def bilinear_coefficients(o: np.ndarray, N: int) -> np.ndarray:
    """
    Coefficients of b^dag o b over the basis (1, S_z, S+, S-), with b = (b_g, b_e).
    """
    o = np.asarray(o, dtype=complex)
    return np.array([
        0.5 * (o[0, 0] + o[1, 1]) * N,
        0.5 * (o[1, 1] - o[0, 0]),
        0.5 * o[1, 0],
        0.5 * o[0, 1],
    ])


def collective_operator(o: np.ndarray, ops: SpinOperators) -> sp.csr_matrix:
    """Sparse ladder representation of sum_i (o)_{ab} |a><b|_i for a 2x2 single-atom matrix."""
    c = bilinear_coefficients(o, ops.space.N)
    identity = sp.identity(ops.space.dim, dtype=complex, format="csr")
    return (c[0] * identity + c[1] * ops.sz + c[2] * ops.splus + c[3] * ops.sminus).tocsr()


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

def ground_state(N: int) -> CollectiveState:
    psi = np.zeros(N + 1, dtype=complex)
    psi[0] = 1.0
    return CollectiveState.pure(psi)


def excited_state(N: int) -> CollectiveState:
    psi = np.zeros(N + 1, dtype=complex)
    psi[N] = 1.0
    return CollectiveState.pure(psi)


def dicke_state(N: int, k: int) -> CollectiveState:
    if not 0 <= k <= N:
        raise ArgumentError(f"Dicke excitation k={k} outside 0..{N}.")
    psi = np.zeros(N + 1, dtype=complex)
    psi[k] = 1.0
    return CollectiveState.pure(psi)


def coherent_spin_state(N: int, theta: float, phi: float = 0.0) -> CollectiveState:
    """Product state with every atom along the Bloch direction (theta, phi), theta in [0, pi]; theta=0 is all excited."""
    k = np.arange(N + 1)
    log_binom = 0.5 * (gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1))
    log_amp = (
        log_binom
        + 0.5 * xlogy(2 * k, abs(np.cos(theta / 2.0)))
        + 0.5 * xlogy(2 * (N - k), abs(np.sin(theta / 2.0)))
    )
    psi = np.exp(log_amp) * np.exp(-1j * k * phi)
    return CollectiveState.pure(psi / np.linalg.norm(psi))


def uniform_mixture(N: int) -> CollectiveState:
    return CollectiveState.diagonal(np.full(N + 1, 1.0 / (N + 1)))


# ---------------------------------------------------------------------------
# Expectation values through purification blocks
# ---------------------------------------------------------------------------

def state_blocks(
    state: CollectiveState, reach: int, chunk: int = 256
) -> Iterator[Tuple[int, int, np.ndarray]]:
    """
    Yield (lo, hi, X) with X a dense block of purification columns supported on rows lo:hi.

    For a pure state there is one column, the state itself. For a diagonal state each
    populated level k contributes sqrt(p_k)|k>, and the row window is widened by `reach`
    so that up to `reach` tridiagonal operator applications stay exact inside it.
    """
    dim = state.N + 1
    if state.is_pure:
        yield 0, dim, state.data.reshape(dim, 1).astype(complex)
        return
    populated = np.flatnonzero(state.data > 0)
    for start in range(0, populated.size, chunk):
        cols = populated[start:start + chunk]
        lo = max(0, int(cols[0]) - reach)
        hi = min(dim, int(cols[-1]) + reach + 1)
        X = np.zeros((hi - lo, cols.size), dtype=complex)
        X[cols - lo, np.arange(cols.size)] = np.sqrt(state.data[cols])
        yield lo, hi, X


def operator_gram(state: CollectiveState, operators: Sequence[sp.spmatrix]) -> np.ndarray:
    """G[i, j] = <O_i^dag O_j> in the state."""
    n = len(operators)
    G = np.zeros((n, n), dtype=complex)
    for lo, hi, X in state_blocks(state, reach=1):
        Y = np.stack([(op[lo:hi, lo:hi] @ X).ravel() for op in operators])
        G += Y.conj() @ Y.T
    return G


def expectation(op: sp.spmatrix, state: CollectiveState) -> complex:
    total = 0j
    for lo, hi, X in state_blocks(state, reach=1):
        total += np.vdot(X, op[lo:hi, lo:hi] @ X)
    return complex(total)


def spin_vector(state: CollectiveState, ops: Optional[SpinOperators] = None) -> np.ndarray:
    ops = ops or build_spin_ops(state.N)
    return np.array([expectation(o, state).real for o in (ops.sx, ops.sy, ops.sz)])


# ---------------------------------------------------------------------------
# Preparation
# ---------------------------------------------------------------------------

def rotation_pulse(state: CollectiveState, axis: str, angle: float) -> CollectiveState:
    """Apply exp(-i angle S_axis / 2)."""
    if not state.is_pure:
        raise UnsupportedStateError("Rotation pulses act on pure states only.")
    if axis == "z":
        sz = SpinSpace(state.N).sz_values
        return CollectiveState.pure(np.exp(-0.5j * angle * sz) * state.data)
    ops = build_spin_ops(state.N)
    generator = {"x": ops.sx, "y": ops.sy}.get(axis)
    if generator is None:
        raise ArgumentError(f"Rotation axis must be x, y or z, got '{axis}'.")
    return CollectiveState.pure(expm_multiply((-0.5j * angle) * generator.tocsc(), state.data))


def one_axis_twisting(state: CollectiveState, p: TwistingParams, N: int) -> CollectiveState:
    if not state.is_pure:
        raise UnsupportedStateError("One-axis twisting acts on pure states only.")
    if state.N != N:
        raise ArgumentError(f"State has N={state.N}, twisting requested for N={N}.")
    sz = SpinSpace(N).sz_values
    phase = (0.5 * p.omega0 * sz + (p.omegaJ / N) * sz ** 2) * p.t_h
    return CollectiveState.pure(np.exp(-1j * phase) * state.data)


def decay_rates(N: int) -> np.ndarray:
    """<k|S+S-|k> = N(N+2) - s_z^2 + 2 s_z."""
    sz = SpinSpace(N).sz_values
    return N * (N + 2.0) - sz ** 2 + 2.0 * sz


def _lindblad_rhs(p: np.ndarray, gamma: float, c: np.ndarray) -> np.ndarray:
    flow = c * p
    rhs = -flow
    rhs[:-1] += flow[1:]
    return gamma * rhs


def superradiance_evolve(
    p: SuperradianceParams,
    N: int,
    checkpoints: Optional[Sequence[float]] = None,
) -> SuperradianceResult:
    """
    Collective decay from the fully inverted state, integrated on the ladder diagonal
    with fixed-step RK4 over the hold time. Profiles are reported on t in [-t_h, 0].

    checkpoints: extra hold times; the state after each is captured from the same run.
    """
    c = decay_rates(N)
    sz = SpinSpace(N).sz_values
    dt = p.step(N)
    marks = sorted({float(t) for t in (checkpoints or [])} | {p.t_h})
    if marks[0] < 0:
        raise ArgumentError(f"Checkpoint hold times must be non-negative, got {marks[0]}.")
    horizon = marks[-1]

    probs = np.zeros(N + 1)
    probs[N] = 1.0
    elapsed = 0.0
    times: List[float] = [0.0]
    magnetization: List[float] = [float(sz @ probs)]
    intensity: List[float] = [float(p.gamma * c @ probs)]
    snapshots = {}
    step_index = 0
    stride = max(1, int(np.ceil(horizon / dt)) // 4000)

    for mark in marks:
        span = mark - elapsed
        n_steps = int(np.ceil(span / dt - 1e-12)) if span > 0 else 0
        h = span / n_steps if n_steps else 0.0
        for _ in range(n_steps):
            k1 = _lindblad_rhs(probs, p.gamma, c)
            k2 = _lindblad_rhs(probs + 0.5 * h * k1, p.gamma, c)
            k3 = _lindblad_rhs(probs + 0.5 * h * k2, p.gamma, c)
            k4 = _lindblad_rhs(probs + h * k3, p.gamma, c)
            probs = probs + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            elapsed += h
            step_index += 1
            leak = abs(probs.sum() - 1.0)
            if leak > 1e-9:
                raise IntegratorError(
                    f"Probability leakage {leak:.3e} at t={elapsed:.6g}; reduce dt_ode (now {h:.3e})."
                )
            if step_index % stride == 0:
                times.append(elapsed)
                magnetization.append(float(sz @ probs))
                intensity.append(float(p.gamma * c @ probs))
        elapsed = mark
        snapshots[mark] = _as_diagonal_state(probs)

    logger.info("Superradiance N=%d integrated to t_h=%.4g in %d steps", N, horizon, step_index)

    # Report profiles on t in [-t_h, 0] for the requested hold time.
    times_arr = np.asarray(times)
    keep = times_arr <= p.t_h + 1e-12
    return SuperradianceResult(
        state=snapshots[p.t_h],
        times=times_arr[keep] - p.t_h,
        magnetization=np.asarray(magnetization)[keep],
        intensity=np.asarray(intensity)[keep],
        checkpoints=snapshots,
    )


def _as_diagonal_state(probs: np.ndarray) -> CollectiveState:
    cleaned = np.clip(probs, 0.0, None)
    return CollectiveState.diagonal(cleaned / cleaned.sum())


def prepare_state(
    protocol: str,
    N: int,
    twisting: Optional[TwistingParams] = None,
    superradiance: Optional[SuperradianceParams] = None,
) -> CollectiveState:
    if protocol == "ground":
        return ground_state(N)
    if protocol == "pi":
        return excited_state(N)
    if protocol == "pi2":
        return coherent_spin_state(N, np.pi / 2.0, 0.0)
    if protocol == "dicke-half":
        if N % 2:
            raise ArgumentError(f"Half-excited Dicke state needs even N, got N={N}.")
        return dicke_state(N, N // 2)
    if protocol == "twisting":
        return one_axis_twisting(coherent_spin_state(N, np.pi / 2.0, 0.0), twisting or TwistingParams(), N)
    if protocol == "superradiance":
        if superradiance is None:
            raise ArgumentError("Superradiance protocol needs decay parameters.")
        return superradiance_evolve(superradiance, N).state
    raise ArgumentError(f"Unknown preparation protocol '{protocol}'. Expected one of {PROTOCOLS}.")


# ---------------------------------------------------------------------------
# Bloch-sphere Wigner function
# ---------------------------------------------------------------------------

def _multipole_kernel(N: int) -> np.ndarray:
    """
    North-pole kernel sum_K sqrt((2K+1)/4pi) T_K0 on the ladder diagonal.

    The diagonals of T_K0 are the orthonormal polynomials of degree K on the nodes
    m = -N/2..N/2 with uniform weight; they are the eigenvectors of the Jacobi matrix
    of that weight, sign-fixed so that the degree-0 entry is positive.
    """
    n = N + 1
    K = np.arange(1, n)
    beta = K ** 2 * (n ** 2 - K ** 2) / (4.0 * (4.0 * K ** 2 - 1.0))
    nodes, vectors = scipy.linalg.eigh_tridiagonal(np.zeros(n), np.sqrt(beta))
    vectors = vectors * np.sign(vectors[0, :])
    weights = np.sqrt((2.0 * np.arange(n) + 1.0) / (4.0 * np.pi))
    # eigh_tridiagonal returns nodes ascending, matching the ladder order k = 0..N
    return weights @ vectors


def atomic_wigner_bloch(state: CollectiveState, theta_grid: np.ndarray, phi_grid: np.ndarray) -> np.ndarray:
    """
    W(theta, phi) on the Bloch sphere, shape (len(theta_grid), len(phi_grid)).
    Integrates to sqrt(4 pi / (N+1)) over the sphere for every state.
    """
    N = state.N
    if N > settings.wigner_overflow_n:
        raise CapabilityError(
            f"Bloch Wigner is limited to N <= {settings.wigner_overflow_n} (got N={N}); "
            "use the phase-space sampler for larger ensembles."
        )
    theta_grid = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    phi_grid = np.atleast_1d(np.asarray(phi_grid, dtype=float))
    kernel = _multipole_kernel(N)

    jy = build_spin_ops(N).sy.toarray() * 0.5
    eigvals, eigvecs = scipy.linalg.eigh(jy)
    k = np.arange(N + 1)
    m = k - N / 2.0

    W = np.empty((theta_grid.size, phi_grid.size))
    for i, theta in enumerate(theta_grid):
        rot = ((eigvecs * np.exp(-1j * theta * eigvals)) @ eigvecs.conj().T).real
        if state.is_pure:
            phased = np.exp(1j * np.outer(m, phi_grid)) * state.data[:, None]
            rotated = rot.T @ phased
            W[i, :] = kernel @ np.abs(rotated) ** 2
        else:
            W[i, :] = kernel @ ((rot ** 2).T @ state.data)
    return W


def bloch_grid(n_theta: int = 91, n_phi: int = 180) -> Tuple[np.ndarray, np.ndarray]:
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    return theta, phi
