import json

import pytest

from app.core.errors import ArgumentError, CacheFormatError, StageError
from app.core.pipeline import Pipeline, resolve_stages, seed_for
from app.db.stage_cache import StageCache
from app.models.run_config import RunConfig

TINY = {
    "atom": {"L": 20.0, "dx": 0.5},
    "pulse": {"E0": 0.02, "omega_d": 0.3, "n_cycles": 4, "steps_per_period": 32, "max_harmonic": 5},
    "preparation": {"protocol": "ground", "N": 4},
    "detection": {"harmonics": [1, 3], "pairs": [[1, 3]]},
    "statistics": {"m_max_start": 10, "m_max_step": 10, "m_max_cap": 20, "grid_points": 41, "joint_order": 4},
    "twa": {"R": 400},
}


@pytest.fixture
def tiny_config() -> RunConfig:
    return RunConfig.from_dict(TINY)


def _run(config, cache_dir, out, stages=None):
    pipeline = Pipeline(config, cache=StageCache(cache_dir), output_dir=out)
    return pipeline, pipeline.run(stages)


def test_stage_resolution():
    assert resolve_stages(["stats"]) == ["atom", "propagate", "modes", "prepare", "stats"]
    assert resolve_stages(["twa"]) == ["atom", "propagate", "modes", "twa"]
    assert resolve_stages(["prepare"]) == ["prepare"]
    with pytest.raises(ArgumentError):
        resolve_stages(["fit"])


def test_seed_streams_are_stable_and_distinct():
    assert seed_for(1, 15) == seed_for(1, 15)
    assert seed_for(1, 15) != seed_for(1, 21)
    assert seed_for(1, 15) != seed_for(2, 15)


def test_full_run_writes_outputs_and_manifest(tmp_path, tiny_config):
    progress = []
    pipeline = Pipeline(tiny_config, cache=StageCache(tmp_path / "cache"), output_dir=tmp_path / "run",
                        on_progress=lambda i, n: progress.append((i, n)))
    manifest = pipeline.run()
    assert manifest.completed
    assert manifest.recomputed == ["atom", "propagate", "modes", "prepare", "stats"]
    assert progress[-1] == (5, 5)
    for name in ("atom_levels.tsv", "spectrum.tsv", "dynamical_dipole.tsv", "modes.tsv", "state.tsv",
                 "bloch_wigner.tsv", "summary.tsv", "photon_statistics_n1.tsv", "wigner_n3.tsv", "correlations.tsv"):
        assert (tmp_path / "run" / name).exists(), name
    listed = {o.path for o in manifest.outputs}
    assert "summary.tsv" in listed
    on_disk = json.loads((tmp_path / "run" / "manifest.json").read_text(encoding="utf-8"))
    assert on_disk["config_hash"] == tiny_config.config_hash()
    assert on_disk["seeds"]["run"] == tiny_config.seed


def test_second_run_is_all_cache_hits_and_byte_identical(tmp_path, tiny_config):
    _, first = _run(tiny_config, tmp_path / "cache", tmp_path / "a")
    _, second = _run(tiny_config, tmp_path / "cache", tmp_path / "b")
    assert second.recomputed == []
    assert all(s.cache_hit for s in second.stages)
    assert {o.path: o.sha256 for o in first.outputs} == {o.path: o.sha256 for o in second.outputs}


def test_changing_n_reuses_the_single_atom_stages(tmp_path, tiny_config):
    _run(tiny_config, tmp_path / "cache", tmp_path / "a")
    _, manifest = _run(tiny_config.updated(preparation={"N": 6}), tmp_path / "cache", tmp_path / "b")
    assert manifest.recomputed == ["prepare", "stats"]


def test_changing_the_grid_recomputes_everything(tmp_path, tiny_config):
    _run(tiny_config, tmp_path / "cache", tmp_path / "a")
    _, manifest = _run(tiny_config.updated(atom={"dx": 0.4}), tmp_path / "cache", tmp_path / "b")
    assert manifest.recomputed == ["atom", "propagate", "modes", "stats"]


def test_modes_bind_to_any_atom_count(tmp_path, tiny_config):
    pipeline, _ = _run(tiny_config, tmp_path / "cache", tmp_path / "a", ["modes"])
    small, large = pipeline.modes(4)[0], pipeline.modes(400)[0]
    assert large.alpha == pytest.approx(100.0 * small.alpha)


def test_failing_stage_keeps_the_cached_prefix(tmp_path, tiny_config):
    config = tiny_config.updated(preparation={"protocol": "dicke-half", "N": 5})
    with pytest.raises(StageError) as info:
        _run(config, tmp_path / "cache", tmp_path / "run")
    assert info.value.stage == "prepare"
    assert info.value.completed == ["atom", "propagate", "modes"]
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["completed"] is False
    assert StageCache(tmp_path / "cache").get("modes", config.stage_key("modes")) is not None


def test_phase_space_stage(tmp_path, tiny_config):
    config = tiny_config.updated(twa={"enabled": True})
    _, manifest = _run(config, tmp_path / "cache", tmp_path / "run", ["twa"])
    assert manifest.seeds["twa"] == config.seed
    for name in ("twa_summary.tsv", "twa_statistics_n1.tsv", "twa_density_n3.tsv", "twa_scatter_n1.tsv",
                 "twa_correlations.tsv"):
        assert (tmp_path / "run" / name).exists(), name


def test_plots_are_written_next_to_the_tables(tmp_path, tiny_config):
    pipeline = Pipeline(tiny_config, cache=StageCache(tmp_path / "cache"), output_dir=tmp_path / "run", plots=True)
    manifest = pipeline.run(["propagate", "prepare"])
    svgs = sorted(o.path for o in manifest.outputs if o.path.endswith(".svg"))
    assert svgs == ["bloch_wigner.svg", "spectrum.svg"]
    assert (tmp_path / "run" / "spectrum.svg").read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_atom_artifact_records_its_grid(tmp_path, tiny_config):
    pipeline, _ = _run(tiny_config, tmp_path / "cache", tmp_path / "a", ["atom"])
    meta, _ = StageCache(tmp_path / "cache").get("atom", tiny_config.stage_key("atom"))
    assert (meta["L"], meta["dx"], meta["M"]) == (20.0, 0.5, 80)
    assert pipeline.spectrum().grid == tiny_config.atom.grid()


def test_atom_artifact_from_another_grid_is_rejected(tmp_path, tiny_config):
    cache = StageCache(tmp_path / "cache")
    _run(tiny_config, tmp_path / "cache", tmp_path / "a", ["atom"])
    key = tiny_config.stage_key("atom")
    meta, arrays = cache.get("atom", key)
    cache.put("atom", key, {**meta, "dx": 0.25, "M": 160}, arrays)
    with pytest.raises(StageError) as info:
        _run(tiny_config, tmp_path / "cache", tmp_path / "b", ["atom"])
    assert isinstance(info.value.__cause__, CacheFormatError)
    assert "dx=0.25" in str(info.value.__cause__)


def test_atom_artifact_without_grid_header_is_rejected(tmp_path, tiny_config):
    cache = StageCache(tmp_path / "cache")
    _run(tiny_config, tmp_path / "cache", tmp_path / "a", ["atom"])
    key = tiny_config.stage_key("atom")
    meta, arrays = cache.get("atom", key)
    cache.put("atom", key, {k: v for k, v in meta.items() if k != "dx"}, arrays)
    with pytest.raises(CacheFormatError):
        Pipeline(tiny_config, cache=cache, output_dir=tmp_path / "b").spectrum()
