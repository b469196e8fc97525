import json
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srchvac.errors import ConfigError, ParameterError
from srchvac.harness import (ResultRow, emit_results, from_mapping, load_config,
                             read_rows, run_experiment, summarize)
from srchvac.harness.cli import main
from srchvac.harness.results import sem

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def power_cfg(**kw):
    raw = {"experiment": "projection_power_study", "retained_fractions": [0.1, 0.3],
           "projection_methods": ["svd_top_singular", "svd_random_columns", "gaussian"],
           "seeds": [0, 1], "classifier": {"power_dictionaries": 3, "power_shape": [10, 30]}}
    raw.update(kw)
    return from_mapping(raw)


# ---------------------------------------------------------------- config

def test_shipped_configs_validate():
    names = sorted(f for f in os.listdir(CONFIGS) if f.endswith(".toml"))
    assert len(names) == 5
    for name in names:
        load_config(os.path.join(CONFIGS, name))


def test_relative_dataset_path(tmp_path):
    (tmp_path / "c.toml").write_text('experiment = "har_engineered"\ndataset_path = "data/har"\n')
    cfg = load_config(tmp_path / "c.toml")
    assert cfg.dataset_path == tmp_path / "data" / "har"
    assert cfg.classifier_params["tol"] == 1e-4 and cfg.classifier_params["knn_k"] == 5


@pytest.mark.parametrize("raw, msg", [
    ({"experiment": "nope"}, "experiment"),
    ({}, "experiment"),
    ({"experiment": "har_engineered"}, "dataset_path"),
    ({"experiment": "projection_power_study", "seeds": []}, "seeds"),
    ({"experiment": "projection_power_study", "retained_fractions": [0.0]}, "retained"),
    ({"experiment": "projection_power_study", "retained_fractions": [1.5]}, "retained"),
    ({"experiment": "projection_power_study", "projection_methods": ["pca"]}, "projection"),
    ({"experiment": "projection_power_study", "folds": 1}, "folds"),
    ({"experiment": "projection_power_study", "colour": 1}, "colour"),
    ({"experiment": "projection_power_study", "classifier": {"k": 3}}, "unknown keys"),
    ({"experiment": "occupancy_fusion", "modalities": ["gyro"]}, "modalities"),
    ({"experiment": "occupancy_fusion", "windows_s": [2.5]}, "windows_s"),
    ({"experiment": "occupancy_fusion", "classifier": {"fusion_beta": 1.0}}, "beta"),
])
def test_invalid_configs(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        from_mapping(raw)


def test_bad_toml(tmp_path):
    (tmp_path / "c.toml").write_text("experiment = \n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.toml")


# ---------------------------------------------------------------- results

def sample_rows():
    return [ResultRow.from_confusion([[3, 1], [0, 4]], experiment="x", method="m", seed=0),
            ResultRow.from_confusion([[2, 2], [1, 3]], experiment="x", method="m", seed=1,
                                     wall_time_ms=1.5, note="a,b \"q\"")]


def test_single_row_csv(tmp_path):
    paths = emit_results(sample_rows()[:1], tmp_path)
    assert len(paths["results"].read_text().splitlines()) == 2


def test_emission_is_deterministic(tmp_path):
    a = emit_results(sample_rows(), tmp_path / "a", "csv", {"k": 1})
    b = emit_results(sample_rows(), tmp_path / "b", "csv", {"k": 1})
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_round_trip(tmp_path, fmt):
    rows = sample_rows()
    paths = emit_results(rows, tmp_path, fmt)
    assert read_rows(paths["results"]) == rows
    assert json.loads(paths["metadata"].read_text()) == {}


def test_emit_errors(tmp_path):
    with pytest.raises(ParameterError):
        emit_results([], tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_results(sample_rows(), blocker / "sub")


def test_summary_sem():
    s = summarize(sample_rows())
    assert len(s) == 1 and s[0]["n"] == 2
    assert s[0]["accuracy_mean"] == pytest.approx((7 / 8 + 5 / 8) / 2)
    assert s[0]["accuracy_sem"] == pytest.approx(np.std([7 / 8, 5 / 8], ddof=1) / np.sqrt(2))
    assert sem([0.5]) == 0.0


@given(st.lists(st.lists(st.integers(0, 50), min_size=3, max_size=3), min_size=3, max_size=3))
def test_accuracy_recomputable_from_confusion(M):
    M = np.array(M)
    if M.sum() == 0:
        M[0, 0] = 1
    r = ResultRow.from_confusion(M, experiment="x", method="m", seed=0)
    C = np.array(r.confusion)
    assert r.accuracy == np.trace(C) / C.sum()
    for i, acc in enumerate(r.per_class_accuracy):
        assert acc is None or acc == C[i, i] / C[i].sum()


# ---------------------------------------------------------------- experiments

@pytest.mark.invariant
def test_power_study_deterministic_and_optimal():
    rows1, meta = run_experiment(power_cfg())
    rows2, _ = run_experiment(power_cfg())
    assert [r.signal_power for r in rows1] == [r.signal_power for r in rows2]
    by = {}
    for r in rows1:
        by.setdefault((r.seed, r.fold, r.d), {})[r.method] = r.signal_power
    for cell in by.values():
        assert cell["svd_top_singular"] == pytest.approx(cell["top_d_sigma2_sum"], rel=1e-10)
        assert cell["svd_top_singular"] >= cell["svd_random_columns"] * (1 - 1e-12)
        assert cell["svd_top_singular"] >= cell["gaussian"]
    assert meta["config"]["experiment"] == "projection_power_study"


def test_resume_skips_finished_seeds(tmp_path):
    seen = []
    run_experiment(power_cfg(seeds=[0]), tmp_path, progress=seen.append)
    first = len(seen)
    seen.clear()
    rows, _ = run_experiment(power_cfg(seeds=[0, 1]), tmp_path, progress=seen.append)
    assert {r.seed for r in seen} == {1} and len(seen) == first
    assert [r.seed for r in rows] == [0] * first + [1] * first
    # a changed configuration starts over
    seen.clear()
    run_experiment(power_cfg(seeds=[0], retained_fractions=[0.2]), tmp_path,
                   progress=seen.append)
    assert {r.seed for r in seen} == {0}


def test_interrupted_seed_is_rerun(tmp_path):
    cfg = power_cfg(seeds=[0])
    rows, _ = run_experiment(cfg, tmp_path)
    log = tmp_path / "rows.jsonl"
    # simulate a crash mid-seed: rows on disk, seed not marked complete
    (tmp_path / "completed_seeds.json").write_text(json.dumps(
        {"fingerprint": json.loads((tmp_path / "completed_seeds.json").read_text())["fingerprint"],
         "seeds": []}))
    log.write_text(log.read_text() + '{"torn')
    again, _ = run_experiment(cfg, tmp_path)
    assert [r.signal_power for r in again] == [r.signal_power for r in rows]


@pytest.mark.invariant
def test_har_engineered_on_fixture(har_dir):
    cfg = from_mapping({"experiment": "har_engineered", "dataset_path": str(har_dir),
                        "retained_fractions": [0.05], "seeds": [0, 1],
                        "projection_methods": ["svd_top_singular", "gaussian"],
                        "baselines": ["knn"]})
    rows, meta = run_experiment(cfg)
    assert {r.method for r in rows} == {"src_svd_top_singular", "src_gaussian", "knn"}
    for r in rows:
        C = np.array(r.confusion)
        assert C.sum() == 60 and r.accuracy == np.trace(C) / C.sum()
    top = [r.accuracy for r in rows if r.method == "src_svd_top_singular"]
    assert top[0] == top[1] and top[0] >= 0.9
    again, _ = run_experiment(cfg)
    assert [r.accuracy for r in again] == [r.accuracy for r in rows]


def test_har_kfold_and_baseline_projection(har_dir):
    cfg = from_mapping({"experiment": "har_raw_axis", "dataset_path": str(har_dir),
                        "retained_fractions": [0.1], "seeds": [0], "folds": 3,
                        "axes": ["y"], "projection_methods": ["svd_top_singular"],
                        "baselines": ["knn", "svm"],
                        "classifier": {"baseline_projection": "svd_top_singular",
                                       "max_per_class": 20}})
    rows, meta = run_experiment(cfg)
    assert sorted({r.fold for r in rows}) == [0, 1, 2]
    assert all(r.axis == "y" for r in rows)
    assert {r.d for r in rows} == {12}
    assert "svm" in meta["resolved_hyperparameters"]


def test_occupancy_rows():
    cfg = from_mapping({"experiment": "occupancy_fusion", "subjects": [0], "seeds": [0],
                        "classifier": {"block_s": 20, "blocks": 1}})
    rows, meta = run_experiment(cfg)
    assert {r.axis for r in rows} == {"accel_z", "audio_zcr", "fusion"}
    assert "fusion_weights" in meta["resolved_hyperparameters"]


# ---------------------------------------------------------------- CLI

def test_cli_list(capsys):
    assert main(["list-experiments"]) == 0
    assert "har_engineered" in capsys.readouterr().out


def test_cli_validate(tmp_path, capsys):
    assert main(["validate", os.path.join(CONFIGS, "occupancy_fusion.toml")]) == 0
    (tmp_path / "bad.toml").write_text('experiment = "x"\n')
    assert main(["validate", "--config", str(tmp_path / "bad.toml")]) == 2


def test_cli_run_and_exit_codes(tmp_path):
    cfg = tmp_path / "p.toml"
    cfg.write_text('experiment = "projection_power_study"\nretained_fractions = [0.2]\n'
                   '[classifier]\npower_dictionaries = 2\npower_shape = [8, 20]\n')
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out-dir", str(out), "--seeds", "0-2", "--format", "json"]) == 0
    rows = read_rows(out / "results.json")
    assert sorted({r.seed for r in rows}) == [0, 1, 2]
    assert (out / "metadata.json").exists() and (out / "summary.json").exists()
    assert main(["run", str(tmp_path / "missing.toml")]) == 4
    har = tmp_path / "h.toml"
    har.write_text(f'experiment = "har_engineered"\ndataset_path = "{tmp_path / "none"}"\n')
    assert main(["run", str(har), "--out-dir", str(tmp_path / "o2")]) == 3
    assert main(["run", str(cfg), "--jobs", "0", "--out-dir", str(out)]) == 2
