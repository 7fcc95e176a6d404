# app/ui/cli.py
"""
Command-line front end: one subcommand per pipeline stage, plus run, figure and cache.
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from app import __version__
from app.config import settings
from app.core.errors import HHGError, StageError

logger = logging.getLogger(__name__)

STAGE_COMMANDS = ("atom", "propagate", "modes", "prepare", "stats", "twa")
PROTOCOLS = ("ground", "pi", "pi2", "dicke-half", "twisting", "superradiance")
THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from exc


def _pair_list(text: str) -> List[List[int]]:
    """'15:21,21:55' -> [[15, 21], [21, 55]]"""
    pairs = []
    for part in text.split(","):
        a, sep, b = part.partition(":")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected pairs like 15:21, got '{part}'")
        pairs.append([int(a), int(b)])
    return pairs


def _override_parser() -> argparse.ArgumentParser:
    """Flags shared by the stage subcommands; each one overrides a config field."""
    p = argparse.ArgumentParser(add_help=False)
    atom = p.add_argument_group("atom")
    atom.add_argument("--a", type=float, help="soft-core parameter [au]")
    atom.add_argument("--L", type=float, help="box half-width [au]")
    atom.add_argument("--dx", type=float, help="grid spacing [au]")
    atom.add_argument("--cab", type=float, help="absorbing-boundary strength")
    pulse = p.add_argument_group("pulse")
    pulse.add_argument("--E0", type=float, help="peak field [GV/m]")
    pulse.add_argument("--omega-d", type=float, help="driving photon energy [eV]")
    pulse.add_argument("--cycles", type=int, help="pulse length in optical cycles")
    prep = p.add_argument_group("preparation")
    prep.add_argument("--protocol", choices=PROTOCOLS)
    prep.add_argument("--N", type=int, help="number of atoms")
    prep.add_argument("--t-h", type=float, help="hold time [au]")
    prep.add_argument("--omegaJ", type=float, help="twisting strength [eV]")
    prep.add_argument("--gamma-N", type=float, help="collective decay rate gamma*N [au]")
    det = p.add_argument_group("detection")
    det.add_argument("--harmonics", type=_int_list, help="e.g. 15,21,55")
    det.add_argument("--pairs", type=_pair_list, help="harmonic pairs for joint statistics, e.g. 15:21,21:55")
    stats = p.add_argument_group("statistics")
    stats.add_argument("--m-max", type=int, help="moment order cap")
    stats.add_argument("--grid-points", type=int, help="Wigner grid points per axis")
    twa = p.add_argument_group("twa")
    twa.add_argument("--R", type=int, help="trajectories")
    twa.add_argument("--family", choices=("up", "half", "down", "right"))
    twa.add_argument("--refit", action="store_true", help="refit the angular width at this N")
    p.add_argument("--plots", action="store_true", help="also write SVG figures")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hhg-quantum",
        description="Quantum-optical high-harmonic generation from correlated emitters.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--cache-dir", type=Path, default=Path(settings.cache_dir))
    parser.add_argument("--output-dir", type=Path, help="run directory (default: under HHG_OUTPUT_DIR)")
    parser.add_argument("--seed", type=int, help="base seed (default: HHG_SEED)")
    parser.add_argument("--threads", type=int, default=settings.threads, help="BLAS/OpenMP threads")
    parser.add_argument("--log-level", default=settings.log_level)

    overrides = _override_parser()
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_COMMANDS:
        sub.add_parser(name, parents=[overrides], help=f"run the {name} stage (and whatever it needs)")

    run = sub.add_parser("run", parents=[overrides], help="run the whole pipeline")
    run.add_argument("--twa", action="store_true", help="include the phase-space stage")

    fig = sub.add_parser("figure", help="emit the data of one figure preset")
    fig.add_argument("tag")
    fig.add_argument("--scale-n", type=int, help="run the preset at this atom count")
    fig.add_argument("--plots", action="store_true")

    sub.add_parser("figures", help="list figure presets")
    sub.add_parser("cache", help="list cached artifacts")
    return parser


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Map flags onto RunConfig blocks; unset flags leave the config untouched."""
    get = lambda name: getattr(args, name, None)  # noqa: E731
    blocks: Dict[str, Dict[str, Any]] = {
        "atom": {"a": get("a"), "L": get("L"), "dx": get("dx"), "cab": get("cab")},
        "pulse": {
            "E0": {"value": get("E0"), "unit": "GV/m"} if get("E0") is not None else None,
            "omega_d": {"value": get("omega_d"), "unit": "eV"} if get("omega_d") is not None else None,
            "n_cycles": get("cycles"),
        },
        "preparation": {
            "protocol": get("protocol"),
            "N": get("N"),
            "t_h": get("t_h"),
            "omegaJ": {"value": get("omegaJ"), "unit": "eV"} if get("omegaJ") is not None else None,
            "gamma_N": get("gamma_N"),
        },
        "detection": {"harmonics": get("harmonics"), "pairs": get("pairs")},
        "statistics": {"m_max_cap": get("m_max"), "grid_points": get("grid_points")},
        "twa": {"R": get("R"), "family": get("family"), "refit": get("refit") or None},
    }
    if get("twa"):
        blocks["twa"]["enabled"] = True
    if args.command == "twa":
        blocks["twa"]["enabled"] = True
    out: Dict[str, Any] = {}
    for block, fields in blocks.items():
        fields = {k: v for k, v in fields.items() if v is not None}
        if fields:
            out[block] = fields
    if args.seed is not None:
        out["seed"] = args.seed
    return out


def load_config(args: argparse.Namespace):
    from app.models.run_config import RunConfig

    base = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = config_overrides(args)
    if overrides:
        base = base.updated(**overrides)
    return base


def _limit_threads(threads: int) -> None:
    # must run before numpy loads its BLAS
    for name in THREAD_VARIABLES:
        os.environ.setdefault(name, str(threads))


def _print_progress(current: int, total: int) -> None:
    print(f"[{current}/{total}] stages done", flush=True)


def _run_stages(args: argparse.Namespace, stages: Sequence[str]) -> int:
    from app.core.pipeline import Pipeline
    from app.db.stage_cache import StageCache

    config = load_config(args)
    pipeline = Pipeline(
        config,
        cache=StageCache(args.cache_dir),
        output_dir=args.output_dir,
        on_progress=_print_progress,
        plots=args.plots,
    )
    manifest = pipeline.run(stages)
    for record in manifest.stages:
        status = "cached" if record.cache_hit else f"{record.duration_seconds:.2f} s"
        print(f"  {record.name:<10} {status}")
    print(f"Wrote {len(manifest.outputs)} files to {pipeline.output_dir}")
    return 0


def _run_figure(args: argparse.Namespace) -> int:
    from app.core.figures import reproduce_figure
    from app.db.stage_cache import StageCache

    written = reproduce_figure(
        args.tag,
        base=load_config(args),
        output_dir=args.output_dir,
        cache=StageCache(args.cache_dir),
        scale_n=args.scale_n,
        plots=args.plots,
    )
    print(f"{args.tag}: wrote {len(written)} files")
    for path in written:
        print(f"  {path}")
    return 0


def _list_figures() -> int:
    from app.core.figures import PRESETS

    for preset in PRESETS.values():
        print(f"{preset.tag:<7} {preset.description}")
    return 0


def _list_cache(args: argparse.Namespace) -> int:
    from app.db.stage_cache import StageCache

    entries = StageCache(args.cache_dir).entries()
    if entries.empty:
        print("Cache is empty.")
    else:
        entries["key"] = entries["key"].str[:12]
        print(entries.drop(columns=["path"]).to_string(index=False))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _limit_threads(args.threads)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command in STAGE_COMMANDS:
            return _run_stages(args, [args.command])
        if args.command == "run":
            return _run_stages(args, ["stats", "twa"] if args.twa else ["stats"])
        if args.command == "figure":
            return _run_figure(args)
        if args.command == "figures":
            return _list_figures()
        return _list_cache(args)
    except StageError as exc:
        done = ", ".join(exc.completed) or "none"
        print(f"error: {exc} (cached stages: {done})", file=sys.stderr)
        return 2
    except HHGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
