"""Command-line entry point: ``taskdecomp <subcommand> ...``.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import fields
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .angles import cross_validate, principal_angles
from .decompose import DecompositionResult, decompose_set
from .errors import InputError, NumericalError
from .manifest import Manifest, build_report, dump_json
from .synth import PlantSpec, eig_histogram, noise_sweep, sweep_means
from .tvt import read_tensor_file, write_tensor_file

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class UsageError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _load_vectors(manifest: Manifest) -> List[Dict[str, np.ndarray]]:
    return [read_tensor_file(e.path) for e in manifest.task_vectors]


def _apply_overrides(m: Manifest, args) -> Manifest:
    if getattr(args, "tau", None) is not None:
        if not (0.0 < args.tau <= 1.0):
            raise UsageError(f"--tau must lie in (0, 1], got {args.tau}")
        m.tau = args.tau
    if getattr(args, "rank_tol", None) is not None:
        m.rank_tol = args.rank_tol
    if getattr(args, "mode", None) is not None:
        m.mode = args.mode
    if getattr(args, "seed", None) is not None:
        m.seed = args.seed
    if getattr(args, "out", None) is not None:
        m.output_dir = Path(args.out)
    return m


def _decompose(m: Manifest):
    vectors = _load_vectors(m)
    if len(vectors) < 2:
        raise UsageError("decomposition needs at least two task vectors")
    result = decompose_set(vectors, tau=m.tau, rank_tol=m.rank_tol, mode=m.mode,
                           names=[e.name for e in m.task_vectors], drift_seed=m.seed)
    return vectors, result


def _components(result: DecompositionResult, vectors) -> Dict[str, Dict[str, np.ndarray]]:
    comps: Dict[str, Dict[str, np.ndarray]] = {}
    if result.mode == "chain":
        comps["shared"] = result.merged_shared()
    else:
        for i, j in result.pair_list:
            comps[f"shared:{result.names[i]}+{result.names[j]}"] = result.pair_shared((i, j))
    for i, name in enumerate(result.names):
        comps[f"unique:{name}"] = result.unique_vector(i)
        comps[f"shared_part:{name}"] = result.shared_vector(i)
        comps[f"tv:{name}"] = vectors[i]
    return comps


def cmd_decompose(args) -> int:
    m = _apply_overrides(Manifest.load(args.manifest), args)
    t0 = time.perf_counter()
    vectors, result = _decompose(m)
    out = m.output_dir
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, name in enumerate(result.names):
        for kind, tv in (("shared", result.shared_vector(i)), ("unique", result.unique_vector(i))):
            fname = f"{kind}_{name}.tvt"
            write_tensor_file(out / fname, tv)
            written.append(fname)
    if result.mode == "chain":
        write_tensor_file(out / "merged_shared.tvt", result.merged_shared())
        written.append("merged_shared.tvt")
    else:
        for i, j in result.pair_list:
            fname = f"merged_shared_{result.names[i]}__{result.names[j]}.tvt"
            write_tensor_file(out / fname, result.pair_shared((i, j)))
            written.append(fname)
    report = build_report(result, vectors, m, written + ["report.json"])
    dump_json(report, out / "report.json")
    timing = {"total_seconds": time.perf_counter() - t0,
              "layers": {n: layer.seconds for n, layer in result.layers.items()}}
    dump_json(timing, out / "timing.json")
    print(f"decomposed {len(vectors)} task vectors, {len(result.layers)} layers -> {out}")
    return EXIT_OK


def _parse_coeffs(text: str) -> Dict[str, float]:
    coeffs = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise UsageError(f"coefficient {item!r} is not of the form name=value")
        name, _, val = item.rpartition("=")
        try:
            coeffs[name.strip()] = float(val)
        except ValueError:
            raise UsageError(f"coefficient {item!r} has a non-numeric value") from None
    return coeffs


def cmd_recompose(args) -> int:
    from .toy import apply_edit_params

    m = _apply_overrides(Manifest.load(args.manifest), args)
    if m.base_model is None:
        raise UsageError("recompose needs base_model in the manifest")
    base = read_tensor_file(m.base_model)
    vectors, result = _decompose(m)
    comps = _components(result, vectors)
    coeffs = _parse_coeffs(args.coeffs)
    unknown = set(coeffs) - set(comps)
    if unknown:
        raise UsageError(f"unknown components {sorted(unknown)}; available: {sorted(comps)}")
    edited = apply_edit_params(base, [(comps[k], v) for k, v in coeffs.items()])
    m.output_dir.mkdir(parents=True, exist_ok=True)
    path = m.output_dir / "recomposed.tvt"
    write_tensor_file(path, edited)
    print(f"wrote {path}")
    return EXIT_OK


def _angle_layers(fa, fb):
    a, b = read_tensor_file(fa), read_tensor_file(fb)
    common = [n for n in a if n in b]
    if not common:
        raise UsageError("the two files share no tensor names")
    return a, b, common


def cmd_angles(args) -> int:
    a, b, common = _angle_layers(args.file_a, args.file_b)
    out = {}
    for n in common:
        x, y = np.asarray(a[n]), np.asarray(b[n])
        if x.ndim < 2:
            continue
        if x.ndim > 2:
            x, y = x.reshape(x.shape[0], -1), y.reshape(y.shape[0], -1)
        out[n] = principal_angles(x, y).to_dict()
    _emit({"layers": out}, args.out)
    return EXIT_OK


def _emit(obj, out: Optional[str]):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _float_list(text: str) -> List[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from None


def _plant_spec(text: Optional[str]) -> PlantSpec:
    if not text:
        return PlantSpec()
    types = {f.name: f.type for f in fields(PlantSpec)}
    kw = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, _, val = item.partition("=")
        key = key.strip().replace("-", "_")
        if key == "unique_dim_per_vector":
            key = "unique_dim"
        if key not in types:
            raise UsageError(f"unknown spec field {key!r}; expected one of {sorted(types)}")
        try:
            kw[key] = float(val) if key == "coeff_scale" else int(val)
        except ValueError:
            raise UsageError(f"bad value for {key}: {val!r}") from None
    return PlantSpec(**kw)


def cmd_synth(args) -> int:
    spec = _plant_spec(args.spec)
    sigmas = _float_list(args.sweep)
    reports = noise_sweep(spec, sigmas, trials=args.trials, tau=args.tau, seed=args.seed,
                          rank_tol=args.rank_tol, keep_eigenvalues=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sigma", "trial", "mean_angle_rad", "max_angle_rad", "recovered_dim"])
        for r in reports:
            w.writerow([repr(r.sigma), r.trial, repr(r.mean_angle_rad), repr(r.max_angle_rad), r.recovered_dim])
    for r in reports:
        if r.trial != 0 or r.eigenvalues is None:
            continue
        hist = eig_histogram(r.eigenvalues, args.bins)
        with open(out / f"hist_sigma_{r.sigma:g}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in hist.rows():
                w.writerow([repr(lo), repr(hi), c])
    for sigma, mean in sweep_means(reports).items():
        print(f"sigma={sigma:g} mean_angle={mean:.6g} rad ({math.degrees(mean):.3f} deg)")
    return EXIT_OK


def _write_curve(path: Path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component_id", "lambda", "accuracy", "loss"])
        for p in curve.points:
            w.writerow([p.component, repr(p.lam), repr(p.accuracy), repr(p.loss)])


def cmd_toylab(args) -> int:
    from .scenarios import negation_scenario, transfer_scenario

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.scenario == "transfer":
        for corrupted, label in ((False, "target"), (True, "corrupted")):
            o = transfer_scenario(args.seed, corrupted=corrupted, tau=args.tau)
            _write_curve(out / f"sweep_{label}.csv", o.curve)
            bests = ", ".join(f"{c}={o.best(c):.3f}" for c in o.curve.components)
            print(f"{label}: base={o.base_accuracy:.3f} best: {bests}")
    else:
        o = negation_scenario(args.seed, tau=args.tau)
        for task, curve in o.curves.items():
            _write_curve(out / f"sweep_{task}.csv", curve)
            print(f"{task}: base={o.base_accuracy[task]:.3f}")
    return EXIT_OK


def cmd_validate(args) -> int:
    if (args.file_a is None) != (args.file_b is None):
        raise UsageError("validate takes two files or none")
    if args.file_a is not None:
        a, b, common = _angle_layers(args.file_a, args.file_b)
        reps = cross_validate([{n: a[n] for n in common}, {n: b[n] for n in common}], tau=args.tau,
                              trials=args.trials, seed=args.seed, rank_tol=args.rank_tol)
    else:
        spec = _plant_spec(args.spec)
        reps = cross_validate(None, tau=args.tau, trials=args.trials, seed=args.seed, spec=spec,
                              sigma=args.sigma, rank_tol=args.rank_tol)
    maxes = [r.max_rad for r in reps]
    summary = {
        "count": len(reps),
        "max_angle_rad": max(maxes) if maxes else 0.0,
        "mean_of_max_rad": float(np.mean(maxes)) if maxes else 0.0,
        "within_6deg": sum(x <= math.radians(6) for x in maxes),
        "both_empty": sum(r.note == "both-empty" for r in reps),
        "reports": [r.to_dict() for r in reps],
    }
    _emit(summary, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="taskdecomp", description="Shared/unique task-vector decomposition toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, seed_default=None):
        sp.add_argument("--tau", type=float, default=None)
        sp.add_argument("--rank-tol", type=float, default=None)
        sp.add_argument("--seed", type=int, default=seed_default)

    d = sub.add_parser("decompose", help="split task vectors listed in a manifest")
    d.add_argument("manifest")
    common(d)
    d.add_argument("--mode", choices=["chain", "pairwise"], default=None)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_decompose)

    r = sub.add_parser("recompose", help="apply decomposed components to the base model")
    r.add_argument("manifest")
    r.add_argument("--coeffs", required=True, help="name=lambda,... e.g. shared=0.5,unique:a=-1")
    common(r)
    r.add_argument("--mode", choices=["chain", "pairwise"], default=None)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_recompose)

    a = sub.add_parser("angles", help="principal angles between matching layers of two TVT1 files")
    a.add_argument("file_a")
    a.add_argument("file_b")
    a.add_argument("--out", default=None)
    a.set_defaults(func=cmd_angles)

    s = sub.add_parser("synth", help="planted-subspace noise sweep")
    s.add_argument("--spec", default=None, help="PlantSpec overrides, e.g. ambient_dim=256,cols=200")
    s.add_argument("--sweep", default="0,0.05,0.1,0.2,0.3,0.4")
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--tau", type=float, default=0.85)
    s.add_argument("--rank-tol", type=float, default=1e-10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--bins", type=int, default=20)
    s.add_argument("--out", default="synth_out")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("toylab", help="toy task-arithmetic scenarios")
    t.add_argument("--scenario", choices=["transfer", "negation"], required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--tau", type=float, default=0.85)
    t.add_argument("--out", default="toylab_out")
    t.set_defaults(func=cmd_toylab)

    v = sub.add_parser("validate", help="cross-check chain vs principal-angle shared subspaces")
    v.add_argument("file_a", nargs="?")
    v.add_argument("file_b", nargs="?")
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--tau", type=float, default=0.85)
    v.add_argument("--rank-tol", type=float, default=1e-10)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--sigma", type=float, default=0.1)
    v.add_argument("--spec", default=None)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (InputError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
