# app/core/figures.py
"""
Figure presets: each tag loads its caption parameters and writes panel data (and plain SVGs on request).
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from app.config import settings
from app.core.collective_spin import atomic_wigner_bloch, bloch_grid, prepare_state, superradiance_evolve
from app.core.errors import ArgumentError
from app.core.phase_space import FAMILIES, bloch_w_theta, fit_sigma_scaling, fit_theta_distribution
from app.core.pipeline import Pipeline, analyze_state, write_bloch_wigner, write_statistics
from app.db.stage_cache import StageCache
from app.models.run_config import RunConfig
from app.models.spin import SuperradianceParams, TwistingParams
from app.utils import plotting
from app.utils.io_formats import write_table
from app.utils.units import to_atomic_units

logger = logging.getLogger(__name__)

FIG2_HARMONICS = [15, 21, 55]
BLOCH_N = 100


@dataclass
class FigureContext:
    base: RunConfig
    out: Path
    cache: StageCache
    scale_n: Optional[int]
    plots: bool

    def n(self, caption_n: int) -> int:
        return self.scale_n or caption_n

    def pipeline(self, config: RunConfig, sub: str) -> Pipeline:
        return Pipeline(config, cache=self.cache, output_dir=self.out / sub, plots=self.plots)


@dataclass(frozen=True)
class FigurePreset:
    tag: str
    description: str
    build: Callable[[FigureContext], List[Path]]


def _bloch_panel(ctx: FigureContext, sub: str, state, title: str) -> List[Path]:
    theta, phi = bloch_grid()
    W = atomic_wigner_bloch(state, theta, phi)
    written = [write_bloch_wigner(ctx.out / sub / f"bloch_wigner_N{state.N}.tsv", theta, phi, W, title)]
    if ctx.plots:
        written.append(plotting.plot_bloch_wigner(ctx.out / sub / f"bloch_wigner_N{state.N}.svg", theta, phi, W, title))
    return written


def _curves_table(ctx: FigureContext, x_name: str, x_unit: str, rows: List[Dict], title: str) -> List[Path]:
    df = pd.DataFrame(rows)
    written = [write_table(ctx.out / "curves.tsv", df, title, {x_name: x_unit})]
    if ctx.plots:
        for n in sorted(df["n"].unique()):
            part = df[df["n"] == n]
            written.append(plotting.plot_curves(
                ctx.out / f"curves_n{n}.svg", part[x_name].to_numpy(),
                {"g2": part["g2"].to_numpy(), "Q": part["mandel_q"].to_numpy()}, x_name, f"n = {n}"))
    return written


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _fig1(ctx: FigureContext) -> List[Path]:
    manifest = ctx.pipeline(ctx.base, "").run(["propagate"])
    return [ctx.out / o.path for o in manifest.outputs]


def _initial_conditions(ctx: FigureContext, protocols: List[str], twa: bool = False) -> List[Path]:
    N = ctx.n(62000)
    written: List[Path] = []
    for protocol in protocols:
        config = ctx.base.updated(
            preparation={"protocol": protocol, "N": N},
            detection={"harmonics": FIG2_HARMONICS, "pairs": []},
            twa={"enabled": twa, "R": 20000} if twa else {"enabled": False},
        )
        manifest = ctx.pipeline(config, protocol).run(["twa"] if twa else ["stats"])
        written.extend(ctx.out / protocol / o.path for o in manifest.outputs)
        written.extend(_bloch_panel(ctx, protocol, prepare_state(protocol, BLOCH_N), f"{protocol}, N={BLOCH_N}"))
    return written


def _fig2(ctx: FigureContext) -> List[Path]:
    return _initial_conditions(ctx, ["ground", "pi2", "dicke-half"])


def _figS6(ctx: FigureContext) -> List[Path]:
    return _initial_conditions(ctx, ["ground", "pi", "pi2", "dicke-half"])


def _figS8(ctx: FigureContext) -> List[Path]:
    return _initial_conditions(ctx, ["ground", "pi2", "dicke-half"], twa=True)


def _superradiance(ctx: FigureContext) -> List[Path]:
    N = ctx.n(37000)
    config = ctx.base.updated(
        preparation={"protocol": "superradiance", "N": N, "gamma_N": 0.1, "gamma": None},
        detection={"harmonics": FIG2_HARMONICS, "pairs": []},
    )
    modes = ctx.pipeline(config, "shared").modes(N)
    params = config.preparation.superradiance()
    t_m = params.peak_time(N)
    multiples = [0.0, 0.5, 1.0, 1.3, 2.0, 3.0, 5.0]
    result = superradiance_evolve(SuperradianceParams(gamma=params.gamma, t_h=multiples[-1] * t_m), N,
                                  checkpoints=[m * t_m for m in multiples])
    written = [write_table(
        ctx.out / "superradiance_profile.tsv",
        pd.DataFrame({"t": result.times, "magnetization": result.magnetization, "intensity": result.intensity}),
        f"superradiant decay, N={N}, t_m={t_m:.17g}", {"t": "au"},
    )]
    rows = []
    for index, m in enumerate(multiples):
        state = result.checkpoints[m * t_m]
        meta, arrays = analyze_state(modes, state, config)
        written.extend(write_statistics(ctx.out / f"hold_{index:02d}", meta, arrays, ctx.plots))
        rows.extend({"t_h_over_t_m": m, **{k: r[k] for k in ("n", "nbar", "g2", "mandel_q")}} for r in meta["summary"])
        logger.info("Superradiant hold %.2f t_m done", m)
    written.extend(_curves_table(ctx, "t_h_over_t_m", "t_m", rows, f"g2 and Q vs hold time, N={N}"))
    small = SuperradianceParams(gamma=0.1 / BLOCH_N, t_h=0.0)
    bloch = superradiance_evolve(SuperradianceParams(gamma=small.gamma, t_h=1.3 * small.peak_time(BLOCH_N)), BLOCH_N)
    written.extend(_bloch_panel(ctx, "", bloch.state, f"superradiance N={BLOCH_N}, t_h=1.3 t_m"))
    return written


def _twisting(ctx: FigureContext, pairs: bool) -> List[Path]:
    N = ctx.n(37000)
    omegaJ = to_atomic_units(2.7, "eV")
    omega0 = 0.49
    config = ctx.base.updated(
        preparation={"protocol": "twisting", "N": N, "omega0": omega0, "omegaJ": omegaJ},
        detection={"harmonics": FIG2_HARMONICS, "pairs": [(15, 21), (21, 55)] if pairs else []},
    )
    modes = ctx.pipeline(config, "shared").modes(N)
    cycles = [0.0, 5.0, 10.0, 20.0, 40.0, 80.0, 120.0, 160.0]
    rows, correlation_rows = [], []
    written: List[Path] = []
    for index, c in enumerate(cycles):
        t_h = 2.0 * np.pi * c / omega0
        state = prepare_state("twisting", N, twisting=TwistingParams(omega0=omega0, omegaJ=omegaJ, t_h=t_h))
        meta, arrays = analyze_state(modes, state, config)
        written.extend(write_statistics(ctx.out / f"hold_{index:02d}", meta, arrays, ctx.plots))
        rows.extend({"t_h_cycles": c, **{k: r[k] for k in ("n", "nbar", "g2", "mandel_q")}} for r in meta["summary"])
        correlation_rows.extend({"t_h_cycles": c, **r} for r in meta["correlations"])
    if N % 2 == 0:
        reference = prepare_state("dicke-half", N)
        meta, arrays = analyze_state(modes, reference, config)
        written.extend(write_statistics(ctx.out / "reference_dicke_half", meta, arrays, ctx.plots))
    written.extend(_curves_table(ctx, "t_h_cycles", "2pi/omega0", rows, f"g2 and Q vs hold time, N={N}"))
    if correlation_rows:
        written.append(write_table(ctx.out / "correlations_vs_hold.tsv", pd.DataFrame(correlation_rows),
                                   "Pearson coefficient and mutual information vs hold time",
                                   {"mutual_information": "nats"}))
    bloch = prepare_state("twisting", BLOCH_N, twisting=TwistingParams(omega0=omega0, omegaJ=omegaJ, t_h=50.0 / omegaJ))
    written.extend(_bloch_panel(ctx, "", bloch, f"twisting N={BLOCH_N}, omegaJ t_h=50"))
    return written


def _fig4(ctx: FigureContext) -> List[Path]:
    return _twisting(ctx, pairs=False)


def _fig5(ctx: FigureContext) -> List[Path]:
    return _twisting(ctx, pairs=True)


def _figS1(ctx: FigureContext) -> List[Path]:
    written: List[Path] = []
    for index, wt in enumerate([0.0, 1.0, 2.0, 5.0, 10.0, 50.0]):
        params = TwistingParams(omega0=0.495, omegaJ=0.01, t_h=wt / 0.01)
        state = prepare_state("twisting", BLOCH_N, twisting=params)
        written.extend(_bloch_panel(ctx, f"snapshot_{index:02d}", state, f"omegaJ t_h = {wt:g}"))
    return written


def _figS2(ctx: FigureContext) -> List[Path]:
    params = SuperradianceParams(gamma=0.1 / BLOCH_N, t_h=0.0)
    t_m = params.peak_time(BLOCH_N)
    multiples = [0.0, 1.0, 1.2, 5.0]
    result = superradiance_evolve(SuperradianceParams(gamma=params.gamma, t_h=multiples[-1] * t_m), BLOCH_N,
                                  checkpoints=[m * t_m for m in multiples])
    written = []
    for index, m in enumerate(multiples):
        written.extend(_bloch_panel(ctx, f"snapshot_{index:02d}", result.checkpoints[m * t_m], f"t_h = {m:g} t_m"))
    return written


def _figS7(ctx: FigureContext) -> List[Path]:
    written: List[Path] = []
    for family in ("up", "half"):
        default = fit_theta_distribution(family, BLOCH_N)
        fitted = fit_theta_distribution(family, BLOCH_N, refit=True)
        lo, hi = max(0.0, default.theta0 - 6 * default.sigma), min(np.pi, default.theta0 + 6 * default.sigma)
        theta = np.linspace(lo, hi, 400)
        w = bloch_w_theta(family, BLOCH_N, theta)
        model = fitted.density(theta)
        model *= float(trapezoid(w, theta) / trapezoid(model, theta)) if trapezoid(model, theta) else 0.0
        written.append(write_table(
            ctx.out / f"w_theta_{family}.tsv", pd.DataFrame({"theta": theta, "w": w, "fit": model}),
            f"{family}: sigma fit {fitted.sigma:.17g}, default {default.sigma:.17g}", {"theta": "rad"}))
    sizes = [n for n in (20, 40, 60, 100, 150, 200, 300, 400) if n <= settings.wigner_overflow_n]
    rows = []
    for family in ("up", "half"):
        a1, a2 = fit_sigma_scaling(family, sizes)
        for n in sizes:
            rows.append({"family": family, "N": n, "sigma": fit_theta_distribution(family, n, refit=True).sigma,
                         "a1": a1, "a2": a2, "a1_default": FAMILIES[family][1], "a2_default": FAMILIES[family][2]})
    written.append(write_table(ctx.out / "sigma_scaling.tsv", pd.DataFrame(rows), "angular width vs atom count"))
    return written


PRESETS: Dict[str, FigurePreset] = {p.tag: p for p in [
    FigurePreset("fig1", "single-atom spectrum with cutoff marker", _fig1),
    FigurePreset("fig2", "ground, pi/2 and half-excited initial conditions, harmonics 15/21/55", _fig2),
    FigurePreset("fig3", "superradiant preparation, hold-time sweep", _superradiance),
    FigurePreset("fig4", "one-axis twisting preparation, hold-time sweep", _fig4),
    FigurePreset("fig5", "harmonic-pair correlations under twisting", _fig5),
    FigurePreset("figS1", "twisting Bloch Wigner snapshots", _figS1),
    FigurePreset("figS2", "superradiance Bloch Wigner snapshots", _figS2),
    FigurePreset("figS4", "superradiant photon statistics with Poisson reference", _superradiance),
    FigurePreset("figS5", "twisting photon statistics with Poisson reference", _fig4),
    FigurePreset("figS6", "fig2 with the fully excited initial condition added", _figS6),
    FigurePreset("figS7", "angular-distribution fits and width scaling", _figS7),
    FigurePreset("figS8", "fig2 through the phase-space sampler", _figS8),
]}


def reproduce_figure(
    tag: str,
    base: Optional[RunConfig] = None,
    output_dir: Optional[Path] = None,
    cache: Optional[StageCache] = None,
    scale_n: Optional[int] = None,
    plots: bool = False,
) -> List[Path]:
    preset = PRESETS.get(tag)
    if preset is None:
        raise ArgumentError(f"Unknown figure tag '{tag}'. Known tags: {', '.join(PRESETS)}.")
    out = Path(output_dir or Path(settings.output_dir) / tag)
    ctx = FigureContext(base=base or RunConfig(), out=out, cache=cache or StageCache(), scale_n=scale_n, plots=plots)
    logger.info("Reproducing %s: %s", tag, preset.description)
    return preset.build(ctx)
