import csv
import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from taskdecomp.cli import main
from taskdecomp.tvt import read_tensor_file, write_tensor_file

DOCS = Path(__file__).resolve().parents[1] / "docs"


def schema(name):
    return json.loads((DOCS / name).read_text())


def make_manifest(tmp_path, vectors, base=None, **extra):
    entries = []
    for name, tv in vectors.items():
        write_tensor_file(tmp_path / f"{name}.tvt", tv)
        entries.append({"name": name, "path": f"{name}.tvt"})
    d = {"task_vectors": entries, "output_dir": "out", **extra}
    if base is not None:
        write_tensor_file(tmp_path / "base.tvt", base)
        d["base_model"] = "base.tvt"
    jsonschema.validate(d, schema("manifest.schema.json"))
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(d))
    return path


def planted_layers(seed=0):
    rng = np.random.default_rng(seed)
    q = np.linalg.qr(rng.standard_normal((12, 12)))[0]
    shared = q[:, :2]
    out = {}
    for i, name in enumerate(["a", "b", "c"]):
        u = q[:, 2 + 3 * i: 5 + 3 * i]
        basis = np.hstack([shared, u])
        out[name] = {
            "enc.w": basis @ rng.standard_normal((5, 8)),
            "enc.b": rng.standard_normal(12),
            "conv": (basis @ rng.standard_normal((5, 6))).reshape(12, 2, 3),
        }
    return out


def test_decompose_identical_square_vectors(tmp_path):
    m = np.random.default_rng(0).standard_normal((5, 5))
    path = make_manifest(tmp_path, {"x": {"w": m}, "y": {"w": m.copy()}})
    assert main(["decompose", str(path)]) == 0
    merged = read_tensor_file(tmp_path / "out" / "merged_shared.tvt")["w"]
    np.testing.assert_allclose(merged, m, rtol=0, atol=1e-10 * np.abs(m).max())
    (layer,) = json.loads((tmp_path / "out" / "report.json").read_text())["layers"]
    assert len(layer["eigenvalues"]) == 5
    assert all(abs(v - 1) <= 1e-8 for v in layer["eigenvalues"])


def test_decompose_identical_vectors(tmp_path):
    # rectangular input: eigenvalues are 1 on the column space, 0 off it
    m = np.random.default_rng(0).standard_normal((5, 4))
    path = make_manifest(tmp_path, {"x": {"w": m}, "y": {"w": m.copy()}})
    assert main(["decompose", str(path)]) == 0
    out = tmp_path / "out"
    merged = read_tensor_file(out / "merged_shared.tvt")["w"]
    np.testing.assert_allclose(merged, m, rtol=0, atol=1e-10 * np.abs(m).max())
    report = json.loads((out / "report.json").read_text())
    jsonschema.validate(report, schema("report.schema.json"))
    (layer,) = report["layers"]
    assert layer["r_shared"] == 4
    assert all(abs(v - 1) <= 1e-8 for v in layer["eigenvalues"][:4])
    assert all(abs(v) <= 1e-8 for v in layer["eigenvalues"][4:])
    for f in report["outputs"]:
        assert (out / f).exists()
    for f in ("shared_x.tvt", "unique_x.tvt", "shared_y.tvt", "unique_y.tvt"):
        read_tensor_file(out / f)


def test_decompose_mixed_layers_chain(tmp_path):
    path = make_manifest(tmp_path, planted_layers(), seed=4)
    assert main(["decompose", str(path)]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    jsonschema.validate(report, schema("report.schema.json"))
    layers = {l["name"]: l for l in report["layers"]}
    assert sorted(layers) == ["conv", "enc.b", "enc.w"]
    assert report["undecomposed"] == ["enc.b"]
    assert layers["enc.w"]["r_shared"] == 2 and layers["conv"]["r_shared"] == 2
    assert layers["enc.w"]["order_drift"] is not None
    assert max(layers["enc.w"]["residuals"]) <= 1e-10
    shared_a = read_tensor_file(tmp_path / "out" / "shared_a.tvt")
    assert shared_a["conv"].shape == (12, 2, 3)


def test_decompose_pairwise(tmp_path):
    path = make_manifest(tmp_path, planted_layers(), mode="pairwise")
    assert main(["decompose", str(path)]) == 0
    out = tmp_path / "out"
    report = json.loads((out / "report.json").read_text())
    jsonschema.validate(report, schema("report.schema.json"))
    assert report["params"]["mode"] == "pairwise"
    assert (out / "merged_shared_a__b.tvt").exists() and (out / "merged_shared_b__c.tvt").exists()
    pairs = {tuple(p["pair"]): p["r_shared"] for p in report["layers"][0]["pairs"]}
    assert pairs == {("a", "b"): 2, ("a", "c"): 2, ("b", "c"): 2}


def test_reports_are_byte_identical(tmp_path):
    vecs = planted_layers(1)
    a = make_manifest(tmp_path, vecs)
    assert main(["decompose", str(a), "--out", str(tmp_path / "r1")]) == 0
    assert main(["decompose", str(a), "--out", str(tmp_path / "r2")]) == 0
    for f in sorted(p.name for p in (tmp_path / "r1").iterdir()):
        if f == "timing.json":
            continue
        assert (tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes(), f


def test_report_digest_tracks_inputs(tmp_path):
    vecs = planted_layers(2)
    path = make_manifest(tmp_path, vecs)
    main(["decompose", str(path)])
    first = json.loads((tmp_path / "out" / "report.json").read_text())["inputs"]["digest"]
    vecs["a"]["enc.b"] = vecs["a"]["enc.b"] + 1
    path = make_manifest(tmp_path, vecs)
    main(["decompose", str(path)])
    assert json.loads((tmp_path / "out" / "report.json").read_text())["inputs"]["digest"] != first


def test_recompose_zero_coefficients_is_base(tmp_path):
    vecs = planted_layers(3)
    base = {k: np.random.default_rng(9).standard_normal(v.shape) for k, v in vecs["a"].items()}
    path = make_manifest(tmp_path, vecs, base=base)
    coeffs = "shared=0,unique:a=0,unique:b=0,unique:c=0"
    assert main(["recompose", str(path), "--coeffs", coeffs]) == 0
    out = read_tensor_file(tmp_path / "out" / "recomposed.tvt")
    for k in base:
        assert out[k].tobytes() == base[k].tobytes()


def test_recompose_full_components_restore_vector(tmp_path):
    vecs = planted_layers(3)
    base = {k: np.zeros(v.shape) for k, v in vecs["a"].items()}
    path = make_manifest(tmp_path, vecs, base=base)
    assert main(["recompose", str(path), "--coeffs", "shared_part:a=1,unique:a=1"]) == 0
    out = read_tensor_file(tmp_path / "out" / "recomposed.tvt")
    for k, v in vecs["a"].items():
        np.testing.assert_allclose(out[k], v, atol=1e-10 * np.abs(v).max())


def test_recompose_errors(tmp_path, capsys):
    vecs = planted_layers(3)
    path = make_manifest(tmp_path, vecs)
    assert main(["recompose", str(path), "--coeffs", "shared=1"]) == 2  # no base_model
    path = make_manifest(tmp_path, vecs, base={k: np.zeros(v.shape) for k, v in vecs["a"].items()})
    assert main(["recompose", str(path), "--coeffs", "bogus=1"]) == 2
    assert main(["recompose", str(path), "--coeffs", "shared"]) == 2
    assert "unknown components" in capsys.readouterr().err


def test_angles_command(tmp_path, capsys):
    write_tensor_file(tmp_path / "a.tvt", {"w": np.eye(4)[:, :2], "b": np.ones(3)})
    write_tensor_file(tmp_path / "b.tvt", {"w": np.eye(4)[:, [0, 2]], "b": np.ones(3)})
    assert main(["angles", str(tmp_path / "a.tvt"), str(tmp_path / "b.tvt")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert list(out["layers"]) == ["w"]
    np.testing.assert_allclose(out["layers"]["w"]["angles_rad"], [0, np.pi / 2], atol=1e-12)


def test_synth_noise_free_default(tmp_path):
    out = tmp_path / "s"
    assert main(["synth", "--sweep", "0", "--trials", "1", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "sweep.csv")))
    assert len(rows) == 1 and float(rows[0]["mean_angle_rad"]) <= 1e-6
    assert int(rows[0]["recovered_dim"]) == 100
    hist = list(csv.DictReader(open(out / "hist_sigma_0.csv")))
    assert list(hist[0]) == ["bin_lo", "bin_hi", "count"]
    assert sum(int(r["count"]) for r in hist) == 512
    assert int(hist[-1]["count"]) == 100


def test_synth_bad_spec():
    assert main(["synth", "--spec", "nonsense=3"]) == 2
    assert main(["synth", "--spec", "ambient_dim=10"]) == 2
    assert main(["synth", "--sweep", "a,b"]) == 2


def test_validate_synthetic(tmp_path):
    out = tmp_path / "v.json"
    args = ["validate", "--trials", "3", "--spec", "ambient_dim=80,cols=40,shared_dim=10,unique_dim=10",
            "--out", str(out)]
    assert main(args) == 0
    summary = json.loads(out.read_text())
    assert summary["count"] == 3 and summary["within_6deg"] == 3


def test_validate_files(tmp_path, capsys):
    m = np.random.default_rng(1).standard_normal((6, 6))
    write_tensor_file(tmp_path / "a.tvt", {"w": m})
    write_tensor_file(tmp_path / "b.tvt", {"w": m})
    assert main(["validate", str(tmp_path / "a.tvt"), str(tmp_path / "b.tvt")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["count"] == 1 and summary["max_angle_rad"] <= 1e-10
    assert main(["validate", str(tmp_path / "a.tvt")]) == 2


def test_toylab_transfer(tmp_path):
    assert main(["toylab", "--scenario", "transfer", "--seed", "0", "--out", str(tmp_path)]) == 0
    for name in ("sweep_target.csv", "sweep_corrupted.csv"):
        rows = list(csv.DictReader(open(tmp_path / name)))
        assert list(rows[0]) == ["component_id", "lambda", "accuracy", "loss"]
        assert {r["component_id"] for r in rows} == {"shared", "unique:source0", "unique:source1"}


def test_toylab_negation(tmp_path):
    assert main(["toylab", "--scenario", "negation", "--seed", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sweep_removed.csv").exists() and (tmp_path / "sweep_control.csv").exists()


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["decompose"],
    ["decompose", "m.json", "--bogus"],
    ["toylab", "--scenario", "other"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_input_errors_exit_2(tmp_path):
    assert main(["decompose", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["decompose", str(tmp_path / "bad.json")]) == 2
    one = make_manifest(tmp_path, {"x": {"w": np.eye(3)}})
    assert main(["decompose", str(one)]) == 2
    two = make_manifest(tmp_path, {"x": {"w": np.eye(3)}, "y": {"w": np.eye(3)}})
    assert main(["decompose", str(two), "--tau", "1.5"]) == 2
    (tmp_path / "x.tvt").write_bytes(b"junk")
    assert main(["decompose", str(two)]) == 2


def test_mismatched_layers_exit_2(tmp_path):
    path = make_manifest(tmp_path, {"x": {"w": np.eye(3)}, "y": {"v": np.eye(3)}})
    assert main(["decompose", str(path)]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "taskdecomp", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "decompose" in r.stdout
    r = subprocess.run([sys.executable, "-m", "taskdecomp", "nope"], capture_output=True, text=True)
    assert r.returncode == 2
