import json

from app.ui.cli import build_parser, config_overrides, main

TINY = {
    "atom": {"L": 20.0, "dx": 0.5},
    "pulse": {"E0": 0.02, "omega_d": 0.3, "n_cycles": 4, "steps_per_period": 32, "max_harmonic": 5},
    "preparation": {"protocol": "ground", "N": 4},
}


def test_flags_map_onto_config_blocks():
    args = build_parser().parse_args(
        ["--seed", "3", "prepare", "--N", "10", "--E0", "60", "--protocol", "pi2", "--harmonics", "15,21"]
    )
    overrides = config_overrides(args)
    assert overrides["preparation"] == {"protocol": "pi2", "N": 10}
    assert overrides["pulse"] == {"E0": {"value": 60.0, "unit": "GV/m"}}
    assert overrides["detection"] == {"harmonics": [15, 21]}
    assert overrides["seed"] == 3
    assert "atom" not in overrides


def test_twa_subcommand_enables_the_sampler():
    args = build_parser().parse_args(["twa", "--R", "100", "--pairs", "15:21"])
    overrides = config_overrides(args)
    assert overrides["twa"] == {"R": 100, "enabled": True}
    assert overrides["detection"] == {"pairs": [[15, 21]]}


def test_prepare_writes_state(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps(TINY), encoding="utf-8")
    out = tmp_path / "out"
    code = main(["--config", str(config), "--cache-dir", str(tmp_path / "cache"), "--output-dir", str(out), "prepare"])
    assert code == 0
    assert (out / "state.tsv").exists()
    assert "prepare" in capsys.readouterr().out


def test_errors_exit_with_status_two(tmp_path, capsys):
    code = main(["--config", str(tmp_path / "missing.json"), "--cache-dir", str(tmp_path), "atom"])
    assert code == 2
    assert capsys.readouterr().err.startswith("error: Config file not found")


def test_unknown_figure_tag(tmp_path, capsys):
    code = main(["--cache-dir", str(tmp_path), "--output-dir", str(tmp_path / "f"), "figure", "fig9"])
    assert code == 2
    assert "Unknown figure tag" in capsys.readouterr().err


def test_cache_listing(tmp_path, capsys):
    assert main(["--cache-dir", str(tmp_path), "cache"]) == 0
    assert "Cache is empty." in capsys.readouterr().out
