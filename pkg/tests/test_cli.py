import io
import json

import jsonschema
import numpy as np
import pytest

from pmmfp.cli import EXIT_ERROR, EXIT_OK, EXIT_USAGE, EXIT_WARNINGS, main, resolve_config
from pmmfp.errors import InvalidConfig, UnknownExperiment
from pmmfp.laws import ErrorLaw
from pmmfp.report import ReportEnvelope, jsonable, validate
from pmmfp.streams import stream


def write_csv(path, n=300, law="negmix", shift=0.0, missing=0, seed=1):
    rng = stream(seed, 60)
    x = rng.uniform(0.5, 5, n) - shift
    z = rng.standard_normal(n)
    y = 1 + 2 * (x + shift) + 0.3 * z + ErrorLaw.parse(law).sample(rng, n)
    lines = ["y,x,z"]
    for i in range(n):
        lines.append(f"{float(y[i])!r},{'NA' if i < missing else repr(float(x[i]))},{float(z[i])!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def run(argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def test_fit_fixed_block_report(tmp_path):
    data = write_csv(tmp_path / "d.csv", missing=3)
    report = tmp_path / "r.json"
    code, text = run(["fit", data, "--response", "y", "--x", "x", "--covariates", "z",
                      "--powers", "{1}", "--out", report])
    assert code == EXIT_OK
    doc = json.loads(report.read_text())
    validate(doc)
    assert doc["payload"]["kind"] == "fit"
    assert doc["payload"]["n"] == 297 and doc["payload"]["n_dropped"] == 3
    pmm = [r for r in doc["payload"]["coefficients"] if r["estimator"] == "pmm"]
    assert [r["term"] for r in pmm] == ["intercept", "x^1", "z"]
    assert all(r["se_ratio_vs_ols"] < 1 for r in pmm)
    assert "se/ols" in text
    env = ReportEnvelope.from_json(report.read_text())
    assert env.to_dict() == doc


def test_fit_auto_sweep_with_csv_tables(tmp_path):
    data = write_csv(tmp_path / "d.csv")
    code, text = run(["fit", data, "--response", "y", "--x", "x", "--csv-dir", tmp_path / "t",
                      "--out", tmp_path / "r.json", "--diagnose-formb"])
    assert code in (EXIT_OK, EXIT_WARNINGS)
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["payload"]["kind"] == "selection"
    assert len(doc["payload"]["selection"]["candidates"]) == 30
    assert set(doc["payload"]["formb"]) == {"B2", "track_a", "track_b"}
    assert (tmp_path / "t" / "selection.csv").read_text().startswith("rank,block")
    assert "best block" in text


def test_symmetric_data_gets_informational_note(tmp_path):
    data = write_csv(tmp_path / "d.csv", law="gaussian(0.5)", n=400)
    code, text = run(["fit", data, "--response", "y", "--x", "x", "--powers", "1",
                      "--out", tmp_path / "r.json"])
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "r.json").read_text())
    notes = [w for w in doc["warnings"] if w["code"] == "symmetric_residuals"]
    assert notes and notes[0]["severity"] == "info"
    assert "symmetric" in text


def test_nonpositive_covariate_hint(tmp_path, capsys):
    data = write_csv(tmp_path / "d.csv", shift=2.0)
    code, _ = run(["fit", data, "--response", "y", "--x", "x", "--powers", "1"])
    assert code == EXIT_ERROR
    assert "--shift" in capsys.readouterr().err
    code, _ = run(["fit", data, "--response", "y", "--x", "x", "--powers", "1",
                   "--shift", "auto", "--out", tmp_path / "r.json"])
    assert code == EXIT_OK
    assert json.loads((tmp_path / "r.json").read_text())["payload"]["x_offset"] > 0


def test_missing_column_and_file(tmp_path, capsys):
    data = write_csv(tmp_path / "d.csv")
    assert run(["fit", data, "--response", "w", "--x", "x"])[0] == EXIT_ERROR
    assert "ColumnMissing" in capsys.readouterr().err
    assert run(["fit", tmp_path / "nope.csv", "--response", "y", "--x", "x"])[0] == EXIT_ERROR


def test_bootstrap_command_is_reproducible(tmp_path):
    data = write_csv(tmp_path / "d.csv", n=200)
    payloads = []
    for threads in (1, 8):
        out = tmp_path / f"b{threads}.json"
        code, text = run(["bootstrap", data, "--response", "y", "--x", "x", "--powers", "1",
                          "-B", 100, "--seed", 5, "--threads", threads, "--out", out])
        assert code == EXIT_OK
        env = ReportEnvelope.from_json(out.read_text())
        payloads.append(env.payload_json())
    assert payloads[0] == payloads[1]
    doc = json.loads(payloads[0])
    assert doc["kind"] == "bootstrap" and doc["bootstrap"]["B"] == 100
    assert "variance ratio" in text


def test_bootstrap_selection_stability_flag(tmp_path):
    data = write_csv(tmp_path / "d.csv", n=200)
    code, _ = run(["bootstrap", data, "--response", "y", "--x", "x", "--powers", "1",
                   "-B", 100, "--estimators", "ols", "--selection-stability",
                   "--max-terms", 1, "--csv-dir", tmp_path / "t"])
    assert code == EXIT_OK
    assert (tmp_path / "t" / "selection_frequency.csv").exists()


def test_bootstrap_rejects_small_B(tmp_path):
    data = write_csv(tmp_path / "d.csv", n=50)
    code, _ = run(["bootstrap", data, "--response", "y", "--x", "x", "--powers", "1", "-B", 50])
    assert code == EXIT_USAGE


def test_simulate_unknown_experiment_and_key(tmp_path):
    assert run(["simulate", "table9"])[0] == EXIT_USAGE
    assert run(["simulate", "matched_basis", "--set", "bogus=1"])[0] == EXIT_USAGE
    cfg = tmp_path / "c.toml"
    cfg.write_text("[matched_basis]\nM = 60\nwat = 2\n")
    assert run(["simulate", "matched_basis", "--config", cfg])[0] == EXIT_USAGE
    with pytest.raises(UnknownExperiment):
        resolve_config("nope", "desk", None, [])
    with pytest.raises(InvalidConfig):
        resolve_config("fma", "desk", None, ["solver.nonsense=3"])


def test_resolve_config_layers(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[matched_basis]\nM = 80\nlaws = ["gamma(3)"]\n[solver]\nmax_iter = 50\n')
    opts, solver = resolve_config("matched_basis", "desk", str(cfg), ["M=70", "solver.tol=1e-9"])
    assert opts["M"] == 70 and opts["laws"] == ["gamma(3)"] and opts["n_grid"] == (100, 200, 500)
    assert solver == {"max_iter": 50, "tol": 1e-9}


def test_simulate_matched_basis_writes_outputs(tmp_path):
    args = ["simulate", "matched_basis", "--set", "M=50", "--set", "n_grid=[60]",
            "--set", 'laws=["gamma(3)"]', "--out-dir", tmp_path / "o"]
    code, text = run(args)
    assert code == EXIT_OK
    assert text.startswith("law,n,M")
    doc = json.loads((tmp_path / "o" / "matched_basis.json").read_text())
    validate(doc)
    assert doc["payload"]["cells"][0]["M"] == 50
    run(args[:-2] + ["--threads", 8, "--out-dir", tmp_path / "p"])
    doc2 = json.loads((tmp_path / "p" / "matched_basis.json").read_text())
    assert doc2["payload"] == doc["payload"]


def test_simulate_timings():
    code, text = run(["simulate", "timings", "--set", "repeats=3", "--set", "warmup=0",
                      "--set", "n_values=[50, 100]"])
    assert code == EXIT_OK
    assert text.splitlines()[0] == "estimator,n,k,law,median_ms,sd_ms,n_timed"


def test_schema_rejects_bad_documents():
    env = ReportEnvelope(payload={"kind": "fit", "n": 3, "n_dropped": 0, "fits": [], "coefficients": []},
                         seed=1)
    doc = json.loads(env.to_json())
    validate(doc)
    bad = dict(doc, schema_version="2")
    with pytest.raises(jsonschema.ValidationError):
        validate(bad)
    del doc["payload"]["kind"]
    with pytest.raises(jsonschema.ValidationError):
        validate(doc)


def test_jsonable_handles_numpy_and_nonfinite():
    out = jsonable({"a": np.float64(1.5), "b": np.array([1, 2]), "c": float("inf"),
                    "d": (np.int64(3), np.bool_(True))})
    assert out == {"a": 1.5, "b": [1, 2], "c": None, "d": [3, True]}


def test_version_and_usage():
    assert run(["--version"])[0] == 0
    assert run([])[0] == EXIT_USAGE
