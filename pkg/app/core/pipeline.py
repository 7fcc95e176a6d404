# app/core/pipeline.py
import logging
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app import __version__
from app.config import settings
from app.core.atomic_model import solve_atom, validate_grid
from app.core.collective_spin import (
    atomic_wigner_bloch,
    bloch_grid,
    ground_state,
    prepare_state,
    spin_vector,
    superradiance_evolve,
)
from app.core.errors import (
    ArgumentError,
    CacheFormatError,
    CapabilityError,
    HHGError,
    InstabilityError,
    StageError,
)
from app.core.harmonic_modes import build_mode_matrix, commutator_check, mode_from_matrix, photonic_operator
from app.core.phase_space import (
    classical_fields,
    classical_statistics,
    fit_theta_distribution,
    sample_initial_conditions,
    twist_ensemble,
)
from app.core.pulse_propagation import emission_spectrum, harmonic_axis, propagate, spectral_dipole
from app.core.quantum_statistics import (
    joint_moments,
    joint_statistics,
    poisson_reference,
    reconstruct_mode,
)
from app.db.stage_cache import StageCache
from app.models.atomic import AtomicSpectrum, GridSpec
from app.models.modes import HarmonicMode
from app.models.pulse import DynamicalMatrixSeries
from app.models.run_config import RunConfig
from app.models.run_log import OutputFile, RunManifest, StageRecord
from app.models.spin import CollectiveState, SpinSpace
from app.models.statistics import WignerGrid
from app.utils import plotting
from app.utils.io_formats import file_sha256, write_table
from app.utils.units import codata_record

logger = logging.getLogger(__name__)

STAGES = ("atom", "propagate", "modes", "prepare", "stats", "twa")

DEPENDS: Dict[str, Tuple[str, ...]] = {
    "atom": (),
    "propagate": ("atom",),
    "modes": ("propagate",),
    "prepare": (),
    "stats": ("modes", "prepare"),
    "twa": ("modes",),
}

# preparation protocol -> phase-space family
TWA_FAMILIES = {"ground": "down", "pi": "up", "pi2": "right", "dicke-half": "half", "twisting": "right"}

Artifact = Tuple[Dict, Dict[str, np.ndarray]]


def resolve_stages(requested: Sequence[str]) -> List[str]:
    """Requested stages plus everything upstream, in pipeline order."""
    unknown = [s for s in requested if s not in STAGES]
    if unknown:
        raise ArgumentError(f"Unknown stage(s) {unknown}. Expected among {STAGES}.")
    needed = set()
    stack = list(requested)
    while stack:
        stage = stack.pop()
        if stage not in needed:
            needed.add(stage)
            stack.extend(DEPENDS[stage])
    return [s for s in STAGES if s in needed]


def seed_for(base: int, *labels: int) -> int:
    return int(np.random.SeedSequence([base, *labels]).generate_state(1)[0])


class Pipeline:
    """
    Runs the stages of one configuration, reusing cached artifacts, and writes text outputs
    plus a manifest into `output_dir`.
    """

    def __init__(
        self,
        config: RunConfig,
        cache: Optional[StageCache] = None,
        output_dir: Optional[Path] = None,
        on_progress: Optional[Callable[[int, int], None]] = None,
        plots: bool = False,
    ):
        self.config = config
        self.cache = cache or StageCache()
        self.output_dir = Path(output_dir or Path(settings.output_dir) / f"run-{config.config_hash()[:12]}")
        self.on_progress = on_progress
        self.plots = plots
        self.records: List[StageRecord] = []
        self._artifacts: Dict[str, Artifact] = {}
        self._outputs: List[Path] = []

    # ------------------------------------------------------------------
    # Orchestration
    # ------------------------------------------------------------------

    def run(self, stages: Optional[Sequence[str]] = None) -> RunManifest:
        if stages is None:
            stages = ["stats", "twa"] if self.config.twa.enabled else ["stats"]
        order = resolve_stages(stages)
        completed: List[str] = []
        for index, name in enumerate(order, start=1):
            try:
                self.stage(name)
            except HHGError as exc:
                self._write_manifest(completed=False)
                raise StageError(name, exc, completed) from exc
            completed.append(name)
            if self.on_progress is not None:
                self.on_progress(index, len(order))
        return self._write_manifest(completed=True)

    def stage(self, name: str) -> Artifact:
        """Artifact of one stage: memoized, then cache, then computed."""
        if name in self._artifacts:
            return self._artifacts[name]
        for upstream in DEPENDS[name]:
            self.stage(upstream)

        key = self.config.stage_key(name)
        start_time = time.perf_counter()
        artifact = self.cache.get(name, key)
        cache_hit = artifact is not None
        error: Optional[str] = None
        written: List[Path] = []
        try:
            if artifact is None:
                logger.info("Running stage %s", name)
                artifact = getattr(self, f"_compute_{name}")()
                self.cache.put(name, key, *artifact)
            self._artifacts[name] = artifact
            written = getattr(self, f"_write_{name}")(*artifact)
            self._outputs.extend(written)
        except HHGError as exc:
            error = str(exc)
            raise
        finally:
            duration = time.perf_counter() - start_time
            self.records.append(StageRecord(
                name=name,
                key=key,
                cache_hit=cache_hit,
                duration_seconds=duration,
                error=error,
                outputs=[str(p) for p in written],
            ))
        logger.info("Stage %s done in %.3f s (cache %s)", name, duration, "hit" if cache_hit else "miss")
        return artifact

    def _write_manifest(self, completed: bool) -> RunManifest:
        seeds = {"run": self.config.seed}
        if self.config.twa.enabled:
            seeds["twa"] = self.config.twa.seed if self.config.twa.seed is not None else self.config.seed
        manifest = RunManifest(
            version=__version__,
            config_hash=self.config.config_hash(),
            config=self.config.model_dump(mode="json"),
            seeds=seeds,
            codata=codata_record(),
            stages=self.records,
            outputs=[
                OutputFile(path=str(p.relative_to(self.output_dir)), sha256=file_sha256(p), nbytes=p.stat().st_size)
                for p in self._outputs
            ],
            completed=completed,
        )
        self.output_dir.mkdir(parents=True, exist_ok=True)
        (self.output_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
        return manifest

    def _table(self, name: str, df: pd.DataFrame, title: str, units: Optional[Dict[str, str]] = None) -> Path:
        return write_table(self.output_dir / name, df, title, units)

    # ------------------------------------------------------------------
    # Typed views of stage artifacts
    # ------------------------------------------------------------------

    def spectrum(self) -> AtomicSpectrum:
        meta, arrays = self.stage("atom")
        return AtomicSpectrum(grid=self._atom_grid(meta), energies=arrays["energies"],
                              states=arrays["states"], D=arrays["D"])

    def _atom_grid(self, meta: Dict) -> GridSpec:
        """Grid recorded in an atom artifact; it must match the configured one."""
        try:
            grid = GridSpec.from_box(L=meta["L"], dx=meta["dx"], x0=meta.get("x0"))
        except KeyError as exc:
            raise CacheFormatError(f"Atom artifact header lacks {exc.args[0]!r}.") from exc
        expected = self.config.atom.grid()
        if grid.M != meta.get("M") or not (
            np.isclose(grid.dx, expected.dx, rtol=1e-12, atol=0.0)
            and np.isclose(grid.L, expected.L, rtol=1e-12, atol=0.0)
            and grid.M == expected.M
        ):
            raise CacheFormatError(
                f"Atom artifact was built on L={grid.L}, dx={grid.dx}, M={meta.get('M')}; "
                f"the run is configured for L={expected.L}, dx={expected.dx}, M={expected.M}."
            )
        return grid

    def dipole_series(self) -> DynamicalMatrixSeries:
        _, arrays = self.stage("propagate")
        return DynamicalMatrixSeries(times=arrays["times"], values=arrays["values"])

    def modes(self, N: Optional[int] = None) -> List[HarmonicMode]:
        _, arrays = self.stage("modes")
        N = N or self.config.preparation.N
        return [mode_from_matrix(int(n), dn, N) for n, dn in zip(arrays["orders"], arrays["dn"])]

    def state(self) -> CollectiveState:
        meta, arrays = self.stage("prepare")
        return CollectiveState(N=meta["N"], kind=meta["kind"], data=arrays["data"])

    # ------------------------------------------------------------------
    # Stage 1: atom
    # ------------------------------------------------------------------

    def _compute_atom(self) -> Artifact:
        grid = self.config.atom.grid()
        params = self.config.atom.params()
        validate_grid(grid, params, self.config.pulse.omega_d).raise_for_failure()
        spectrum = solve_atom(grid, params)
        meta = {
            "M": grid.M,
            "L": grid.L,
            "dx": grid.dx,
            "x0": grid.x0,
            "ionization_potential": spectrum.ionization_potential,
            "bound_count": spectrum.bound_count,
        }
        return meta, {"energies": spectrum.energies, "states": spectrum.states, "D": spectrum.D}

    def _write_atom(self, meta: Dict, arrays: Dict[str, np.ndarray]) -> List[Path]:
        self._atom_grid(meta)
        energies = arrays["energies"]
        df = pd.DataFrame({"level": np.arange(energies.size), "energy": energies})
        title = f"atomic levels; M={meta['M']}; I_p={meta['ionization_potential']:.17g}"
        return [self._table("atom_levels.tsv", df, title, {"energy": "au"})]

    # ------------------------------------------------------------------
    # Stage 2: propagation and spectrum
    # ------------------------------------------------------------------

    def _compute_propagate(self) -> Artifact:
        spectrum = self.spectrum()
        pulse = self.config.pulse.pulse()
        (series,) = propagate(spectrum, pulse, self.config.pulse.propagation())
        omegas = harmonic_axis(pulse.omega_d, self.config.pulse.max_harmonic)
        dipole = spectral_dipole(series, omegas)
        emitted = emission_spectrum(dipole, ground_state(1), 1)
        meta = {"cutoff_harmonic": pulse.cutoff_harmonic(spectrum.ionization_potential)}
        arrays = {
            "times": series.times,
            "values": series.values,
            "frequencies": omegas,
            "emission": emitted,
        }
        return meta, arrays

    def _write_propagate(self, meta: Dict, arrays: Dict[str, np.ndarray]) -> List[Path]:
        omega_d = self.config.pulse.omega_d
        orders = arrays["frequencies"] / omega_d
        df = pd.DataFrame({"omega": arrays["frequencies"], "order": orders, "emission": arrays["emission"]})
        written = [self._table(
            "spectrum.tsv", df, f"single-atom ground-state emission; cutoff order {meta['cutoff_harmonic']}",
            {"omega": "au", "emission": "au"},
        )]
        values = arrays["values"]
        series = pd.DataFrame({
            "t": arrays["times"],
            "d11": values[:, 0, 0], "d12": values[:, 0, 1],
            "d21": values[:, 1, 0], "d22": values[:, 1, 1],
        })
        written.append(self._table("dynamical_dipole.tsv", series, "dipole dynamical matrix", {"t": "au"}))
        if self.plots:
            written.append(plotting.plot_spectrum(
                self.output_dir / "spectrum.svg", orders, arrays["emission"], meta["cutoff_harmonic"]))
        return written

    # ------------------------------------------------------------------
    # Stage 3: harmonic modes
    # ------------------------------------------------------------------

    def _compute_modes(self) -> Artifact:
        omega_d = self.config.pulse.omega_d
        orders = np.asarray(self.config.detection.harmonics, dtype=int)
        dipole = spectral_dipole(self.dipole_series(), orders * omega_d)
        det = self.config.detection.detector(omega_d)
        dn = np.stack([build_mode_matrix(dipole, int(n), det, omega_d) for n in orders])
        return {"domega": det.domega, "dOmega": det.dOmega}, {"orders": orders, "dn": dn}

    def _write_modes(self, meta: Dict, arrays: Dict[str, np.ndarray]) -> List[Path]:
        records = [mode.as_record() for mode in self.modes()]
        df = pd.DataFrame.from_records(records)
        return [self._table("modes.tsv", df, f"harmonic modes for N={self.config.preparation.N}")]

    # ------------------------------------------------------------------
    # Stage 4: atomic preparation
    # ------------------------------------------------------------------

    def _compute_prepare(self) -> Artifact:
        prep = self.config.preparation
        arrays: Dict[str, np.ndarray] = {}
        if prep.protocol == "superradiance":
            result = superradiance_evolve(prep.superradiance(), prep.N)
            state = result.state
            arrays.update(profile_t=result.times, magnetization=result.magnetization, intensity=result.intensity)
        else:
            state = prepare_state(prep.protocol, prep.N, twisting=prep.twisting())
        arrays["data"] = state.data
        meta = {"N": state.N, "kind": state.kind, "spin_vector": spin_vector(state).tolist()}
        return meta, arrays

    def _write_prepare(self, meta: Dict, arrays: Dict[str, np.ndarray]) -> List[Path]:
        state = self.state()
        k = np.arange(state.N + 1)
        columns = {"k": k, "s_z": SpinSpace(state.N).sz_values, "probability": state.probabilities}
        if state.is_pure:
            columns["amplitude"] = state.data
        written = [self._table("state.tsv", pd.DataFrame(columns),
                               f"{self.config.preparation.protocol} state, N={state.N}")]
        if "profile_t" in arrays:
            profile = pd.DataFrame({
                "t": arrays["profile_t"], "magnetization": arrays["magnetization"], "intensity": arrays["intensity"],
            })
            written.append(self._table("superradiance_profile.tsv", profile, "superradiant decay", {"t": "au"}))
        if state.N <= settings.wigner_overflow_n:
            theta, phi = bloch_grid()
            W = atomic_wigner_bloch(state, theta, phi)
            written.append(write_bloch_wigner(self.output_dir / "bloch_wigner.tsv", theta, phi, W))
            if self.plots:
                written.append(plotting.plot_bloch_wigner(self.output_dir / "bloch_wigner.svg", theta, phi, W))
        return written

    # ------------------------------------------------------------------
    # Stages 5-7: moments, Wigner functions, photon statistics
    # ------------------------------------------------------------------

    def _compute_stats(self) -> Artifact:
        return analyze_state(self.modes(), self.state(), self.config)

    def _write_stats(self, meta: Dict, arrays: Dict[str, np.ndarray]) -> List[Path]:
        return write_statistics(self.output_dir, meta, arrays, self.plots)

    def _compute_twa(self) -> Artifact:
        return run_phase_space(self.modes(), self.config)

    def _write_twa(self, meta: Dict, arrays: Dict[str, np.ndarray]) -> List[Path]:
        return write_phase_space(self.output_dir, meta, arrays, self.plots)


# ---------------------------------------------------------------------------
# Stage bodies shared with the figure presets
# ---------------------------------------------------------------------------

def analyze_state(modes: Sequence[HarmonicMode], state: CollectiveState, config: RunConfig) -> Artifact:
    policy = config.statistics.policy()
    space = SpinSpace(state.N)
    operators = {}
    summary = []
    arrays: Dict[str, np.ndarray] = {}
    for mode in modes:
        op = photonic_operator(mode.dn, space)
        operators[mode.n] = op
        rec = reconstruct_mode(op, state, policy)
        stats = rec.statistics
        summary.append({
            "n": mode.n,
            "nbar": rec.nbar,
            "g2": rec.g2,
            "mandel_q": rec.mandel_q,
            "m_max": rec.m_max,
            "converged": rec.converged,
            "wigner_norm": rec.wigner.norm(),
            "commutator": commutator_check(mode.dn, state, space),
            "notes": rec.notes,
        })
        arrays[f"p_{mode.n}"] = stats.p
        if rec.statistics_from_moments is not None:
            arrays[f"p_moments_{mode.n}"] = rec.statistics_from_moments.p
        arrays[f"wigner_{mode.n}"] = rec.wigner.values
        arrays[f"re_{mode.n}"] = rec.wigner.re
        arrays[f"im_{mode.n}"] = rec.wigner.im

    correlations = []
    K = config.statistics.joint_order
    for a, b in config.detection.pairs:
        jm = joint_moments(operators[a], operators[b], state, K, K)
        try:
            joint = joint_statistics(jm, config.statistics.negative_tolerance)
        except InstabilityError as exc:
            logger.warning("Joint statistics (%d, %d) unstable at order %d: %s", a, b, K, exc)
            correlations.append({"n": a, "m": b, "pearson": float("nan"), "mutual_information": float("nan")})
            continue
        arrays[f"joint_{a}_{b}"] = joint.p
        correlations.append({"n": a, "m": b, "pearson": joint.pearson, "mutual_information": joint.mutual_information})
    return {"summary": summary, "correlations": correlations}, arrays


def write_statistics(out: Path, meta: Dict, arrays: Dict[str, np.ndarray], plots: bool = False) -> List[Path]:
    written = []
    summary = pd.DataFrame([{k: v for k, v in row.items() if k != "notes"} for row in meta["summary"]])
    written.append(write_table(out / "summary.tsv", summary, "per-harmonic photon statistics"))
    for row in meta["summary"]:
        n = row["n"]
        p = arrays[f"p_{n}"]
        columns = {"k": np.arange(p.size), "p": p, "p_poisson": poisson_reference(row["nbar"], p.size - 1)}
        if f"p_moments_{n}" in arrays:
            alt = np.zeros(p.size)
            q = arrays[f"p_moments_{n}"][:p.size]
            alt[:q.size] = q
            columns["p_moments"] = alt
        written.append(write_table(out / f"photon_statistics_n{n}.tsv", pd.DataFrame(columns),
                                   f"harmonic {n} photon-number distribution"))
        grid = WignerGrid(re=arrays[f"re_{n}"], im=arrays[f"im_{n}"], values=arrays[f"wigner_{n}"])
        written.append(write_wigner(out / f"wigner_n{n}.tsv", grid, f"harmonic {n} Wigner function"))
        if plots:
            written.append(plotting.plot_wigner(out / f"wigner_n{n}.svg", grid, f"n = {n}"))
            written.append(plotting.plot_photon_statistics(
                out / f"photon_statistics_n{n}.svg", p, columns["p_poisson"], f"n = {n}"))
    if meta["correlations"]:
        written.append(write_table(out / "correlations.tsv", pd.DataFrame(meta["correlations"]),
                                   "harmonic-pair correlations", {"mutual_information": "nats"}))
    for name, P in arrays.items():
        if name.startswith("joint_"):
            kn, km = np.meshgrid(np.arange(P.shape[0]), np.arange(P.shape[1]), indexing="ij")
            df = pd.DataFrame({"k_n": kn.ravel(), "k_m": km.ravel(), "p": P.ravel()})
            written.append(write_table(out / f"{name}.tsv", df, f"joint photon statistics {name[6:]}"))
    return written


def write_wigner(path: Path, grid: WignerGrid, title: str) -> Path:
    re, im = np.meshgrid(grid.re, grid.im)
    df = pd.DataFrame({"re_alpha": re.ravel(), "im_alpha": im.ravel(), "W": grid.values.ravel()})
    return write_table(path, df, title)


def write_bloch_wigner(path: Path, theta: np.ndarray, phi: np.ndarray, W: np.ndarray, title: str = "Bloch-sphere Wigner function") -> Path:
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    df = pd.DataFrame({"theta": th.ravel(), "phi": ph.ravel(), "W": W.ravel()})
    return write_table(path, df, title, {"theta": "rad", "phi": "rad"})


def run_phase_space(modes: Sequence[HarmonicMode], config: RunConfig) -> Artifact:
    prep = config.preparation
    family = config.twa.family or TWA_FAMILIES.get(prep.protocol)
    if family is None:
        raise CapabilityError(f"The phase-space sampler has no classical dynamics for protocol '{prep.protocol}'.")
    seed = config.twa.seed if config.twa.seed is not None else config.seed
    dist = fit_theta_distribution(family, prep.N, refit=config.twa.refit)
    ens = sample_initial_conditions(dist, prep.N, config.twa.R, seed)
    if prep.protocol == "twisting" and config.twa.family is None:
        ens = twist_ensemble(ens, prep.twisting(), prep.N)

    fields = {mode.n: classical_fields(ens, mode, seed_for(seed, mode.n), config.twa.vacuum_std) for mode in modes}
    summary = []
    arrays: Dict[str, np.ndarray] = {"S": ens.S_points}
    for mode in modes:
        result = classical_statistics(fields[mode.n], vacuum_std=config.twa.vacuum_std,
                                      bins=config.twa.bins, smooth=config.twa.smooth)
        summary.append({
            "n": mode.n, "R": result.R,
            "nbar": result.nbar, "nbar_se": result.nbar_se,
            "g2": result.g2, "g2_se": result.g2_se,
            "mandel_q": result.mandel_q, "mandel_q_se": result.mandel_q_se,
            "intensity": result.intensity, "intensity_se": result.intensity_se,
        })
        arrays[f"alpha_{mode.n}"] = fields[mode.n]
        arrays[f"p_{mode.n}"] = result.statistics.p
        arrays[f"density_{mode.n}"] = result.density.values
        arrays[f"re_{mode.n}"] = result.density.re
        arrays[f"im_{mode.n}"] = result.density.im

    correlations = []
    for a, b in config.detection.pairs:
        result = classical_statistics(fields[a], fields[b], vacuum_std=config.twa.vacuum_std, bins=config.twa.bins)
        correlations.append({
            "n": a, "m": b,
            "pearson": result.joint.pearson, "pearson_se": result.pearson_se,
            "mutual_information": result.joint.mutual_information,
        })
    meta = {"family": family, "sigma": dist.sigma, "a1": dist.a1, "a2": dist.a2, "seed": seed,
            "summary": summary, "correlations": correlations}
    return meta, arrays


def write_phase_space(out: Path, meta: Dict, arrays: Dict[str, np.ndarray], plots: bool = False) -> List[Path]:
    title = f"phase-space ensemble, family {meta['family']}, sigma={meta['sigma']:.17g}"
    written = [write_table(out / "twa_summary.tsv", pd.DataFrame(meta["summary"]), title)]
    for row in meta["summary"]:
        n = row["n"]
        p = arrays[f"p_{n}"]
        written.append(write_table(out / f"twa_statistics_n{n}.tsv",
                                   pd.DataFrame({"k": np.arange(p.size), "p": p}),
                                   f"harmonic {n} rounded-intensity histogram"))
        grid = WignerGrid(re=arrays[f"re_{n}"], im=arrays[f"im_{n}"], values=arrays[f"density_{n}"])
        written.append(write_wigner(out / f"twa_density_n{n}.tsv", grid, f"harmonic {n} sample density"))
        alpha = arrays[f"alpha_{n}"]
        written.append(write_table(out / f"twa_scatter_n{n}.tsv", pd.DataFrame({"alpha": alpha}),
                                   f"harmonic {n} trajectory fields"))
        if plots:
            written.append(plotting.plot_scatter_density(out / f"twa_density_n{n}.svg", alpha, grid, f"n = {n}"))
    if meta["correlations"]:
        written.append(write_table(out / "twa_correlations.tsv", pd.DataFrame(meta["correlations"]),
                                   "harmonic-pair correlations from trajectories", {"mutual_information": "nats"}))
    return written

