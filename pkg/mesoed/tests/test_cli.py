"""
Tests for the command line scenario runner
"""
import importlib
import json
from pathlib import Path

import numpy as np
import pytest

import mesoed
from mesoed import cli
from mesoed.devices import GaussianDeviceSpec, PoissonDetectorSpec
from mesoed.network import AuditResult
from mesoed.util.io import CSVResultsHandler

SAMPLES = Path(mesoed.__file__).parent / "data" / "sample"


def sample(name):
    return str(SAMPLES / name)


def rows(out_dir, quantity):
    table = CSVResultsHandler().load_results(str(out_dir / "results.csv"))
    return table[table["quantity"] == quantity]


def test_list_experiments(capsys):
    assert cli.main(["list-experiments"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    for kind in cli.EXPERIMENTS:
        assert kind in out


def test_version(capsys):
    assert cli.main(["--version"]) == cli.EXIT_OK
    assert mesoed.__version__ in capsys.readouterr().out


def test_bad_arguments():
    assert cli.main([]) == cli.EXIT_INVALID
    assert cli.main(["frobnicate"]) == cli.EXIT_INVALID
    assert cli.main(["run", sample("dress_white.json"), "--reps", "many"]) == cli.EXIT_INVALID


def test_validate_sample(capsys):
    assert cli.main(["validate", sample("compose_pair.json")]) == cli.EXIT_OK
    assert "valid" in capsys.readouterr().out


def test_validate_invalid(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"experiment": "dress", "devices": []}))
    assert cli.main(["validate", str(path)]) == cli.EXIT_INVALID
    assert "grid" in capsys.readouterr().out
    path.write_text("{not json")
    assert cli.main(["validate", str(path)]) == cli.EXIT_INVALID


def test_run_invalid_scenario(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"experiment": "dress", "grid": {"dt": -1.0, "n_steps": 4}}))
    assert cli.main(["run", str(path), "--out", str(tmp_path / "out")]) == cli.EXIT_INVALID
    assert not (tmp_path / "out").exists()
    assert cli.main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path / "out")]) == cli.EXIT_INVALID


def test_appendix_a(tmp_path):
    assert cli.main(["run", sample("appendix_a.json"), "--out", str(tmp_path)]) == cli.EXIT_OK
    assert rows(tmp_path, "normalization_instantaneous")["value"][0] == pytest.approx(2.0, abs=1e-6)
    assert rows(tmp_path, "normalization_causal")["value"][0] == pytest.approx(1.0, abs=1e-6)
    assert rows(tmp_path, "factorization_residual")["value"][0] < 1e-10
    assert not (tmp_path / "verdicts.csv").exists()


def test_appendix_a_earlier_field(tmp_path):
    raw = json.loads((SAMPLES / "appendix_a.json").read_text())
    raw["parameters"]["A_e_earlier"] = 2.0
    scenario = tmp_path / "earlier.json"
    scenario.write_text(json.dumps(raw))
    out = tmp_path / "out"
    assert cli.main(["run", str(scenario), "--out", str(out)]) == cli.EXIT_OK
    # E[J1] = chi A_e' = 1, so E[J2] = chi g E[J1] = 0.5
    assert rows(out, "later_mean")["value"][0] == pytest.approx(0.5, abs=1e-6)
    assert rows(out, "normalization_causal")["value"][0] == pytest.approx(1.0, abs=1e-6)


def test_meta(tmp_path):
    assert cli.main(["run", sample("appendix_a.json"), "--out", str(tmp_path), "--seed", "9"]) == cli.EXIT_OK
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["experiment"] == "appendix-a"
    assert meta["seed"] == 9
    assert meta["version"] == mesoed.__version__
    assert meta["grid"]["n_steps"] == 2
    assert meta["accuracy_warnings"] == []
    assert set(meta["manifest"]) == {
        "normalization_instantaneous",
        "normalization_causal",
        "factorization_residual",
        "later_mean",
        "later_variance",
        "later_covariance",
    }
    table = CSVResultsHandler().load_results(str(tmp_path / "results.csv"))
    for quantity in set(table["quantity"]):
        entry = meta["manifest"][quantity]
        assert entry["description"]
        assert entry["relation"]
        assert entry["reference"].startswith("mesoed.")


@pytest.mark.parametrize("quantity", sorted(cli.MANIFEST))
def test_manifest_reference_resolves(quantity):
    module_name, _, rest = cli.MANIFEST[quantity]["reference"].partition(".")
    obj = importlib.import_module(module_name)
    for part in rest.split("."):
        obj = getattr(obj, part, None) or importlib.import_module(f"{obj.__name__}.{part}")
    assert obj is not None


def test_audit_passes(tmp_path):
    assert cli.main(["run", sample("audit_causality.json"), "--out", str(tmp_path)]) == cli.EXIT_OK
    verdicts = (tmp_path / "verdicts.csv").read_text().splitlines()
    assert verdicts[0] == "experiment,target,step,passed,max_deviation"
    assert len(verdicts) == 17
    assert all(line.split(",")[3] == "pass" for line in verdicts[1:])
    assert np.all(rows(tmp_path, "audit_passed")["value"] == 1.0)


def test_failed_audit_exit_code(tmp_path, monkeypatch):
    def failing(target, step, **kwargs):
        return AuditResult(step < 5, step, step, 0.0 if step < 5 else 1.0)

    monkeypatch.setattr(cli, "causality_audit", failing)
    assert cli.main(["run", sample("audit_causality.json"), "--out", str(tmp_path)]) == cli.EXIT_AUDIT_FAILED
    verdicts = (tmp_path / "verdicts.csv").read_text().splitlines()
    assert verdicts[6].split(",")[3] == "fail"


def test_reruns_are_byte_identical(tmp_path):
    for name in ("first", "second"):
        args = ["run", sample("dress_white.json"), "--out", str(tmp_path / name), "--reps", "200"]
        assert cli.main(args) == cli.EXIT_OK
    first = (tmp_path / "first" / "results.csv").read_bytes()
    assert first == (tmp_path / "second" / "results.csv").read_bytes()
    assert b"\r\n" not in first


def test_threads_do_not_change_results(tmp_path):
    for threads in ("1", "3"):
        args = ["run", sample("compose_pair.json"), "--out", str(tmp_path / threads), "--threads", threads]
        assert cli.main(args) == cli.EXIT_OK
    assert (tmp_path / "1" / "results.csv").read_bytes() == (tmp_path / "3" / "results.csv").read_bytes()
    assert rows(tmp_path / "1", "commutation_identical")["value"][0] == 1.0


def test_dress_matches_closed_form(tmp_path):
    args = ["run", sample("dress_white.json"), "--out", str(tmp_path), "--reps", "20000"]
    assert cli.main(args) == cli.EXIT_OK
    sampled = rows(tmp_path, "dressed_mean")
    closed = rows(tmp_path, "closed_form_mean")
    deviation = np.abs(np.array(sampled["value"]) - np.array(closed["value"]))
    assert np.all(deviation < 5 * np.array(sampled["std_err"]))


def test_detect(tmp_path):
    assert cli.main(["run", sample("detect_cascade.json"), "--out", str(tmp_path), "--reps", "500"]) == cli.EXIT_OK
    assert rows(tmp_path, "mean_count")["value"][0] > 0
    assert len(rows(tmp_path, "photocurrent_mean")) == 64
    assert set(rows(tmp_path, "photocurrent_mean")["mode"]) == {1}


def test_susceptibility(tmp_path):
    assert cli.main(["run", sample("susceptibility.json"), "--out", str(tmp_path)]) == cli.EXIT_OK
    values = rows(tmp_path, "susceptibility")
    assert len(values) == 16 * 16
    future = values[values["step2"] > values["step"]]
    assert np.max(np.abs(future["value"])) < 1e-10


def test_oracle_compare(tmp_path):
    args = ["run", sample("oracle_compare.json"), "--out", str(tmp_path), "--reps", "20000"]
    assert cli.main(args) == cli.EXIT_OK
    assert rows(tmp_path, "max_mean_sigma")["value"][0] < 5
    assert rows(tmp_path, "max_cov_sigma")["value"][0] < 6


def test_timenormal(tmp_path):
    args = ["run", sample("timenormal_thermal.json"), "--out", str(tmp_path), "--reps", "2000"]
    assert cli.main(args) == cli.EXIT_OK
    assert len(rows(tmp_path, "time_normal_moment")) == 64 * 64
    assert rows(tmp_path, "leakage_residual")["value"][0] < 1e-10
    assert rows(tmp_path, "kubo_deviation")["value"][0] < 1e-10


def test_build_scenario():
    raw = json.loads((SAMPLES / "detect_cascade.json").read_text())
    scenario = cli.build_scenario(raw, base_dir=str(SAMPLES))
    source, counter = scenario.devices
    assert isinstance(source, GaussianDeviceSpec)
    assert isinstance(counter, PoissonDetectorSpec)
    assert counter.output_mode == 1
    assert scenario.grid.n_modes == 2
    assert scenario.G.strict
    assert scenario.network().device_ids == ["source", "counter"]


def test_unknown_experiment():
    raw = json.loads((SAMPLES / "appendix_a.json").read_text())
    scenario = cli.build_scenario(raw)
    scenario.experiment = "levitate"
    with pytest.raises(KeyError):
        cli.run_experiment(scenario)
