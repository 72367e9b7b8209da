"""Manifest parsing and report assembly for the CLI pipeline."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__
from .decompose import DEFAULT_TAU, DecompositionResult
from .errors import InputError
from .linalg import DEFAULT_RANK_TOL


class ManifestError(InputError):
    pass


@dataclass
class VectorEntry:
    name: str
    path: Path


@dataclass
class Manifest:
    task_vectors: List[VectorEntry]
    output_dir: Path
    base_model: Optional[Path] = None
    tau: float = DEFAULT_TAU
    rank_tol: float = DEFAULT_RANK_TOL
    mode: str = "chain"
    seed: int = 0
    source: Optional[Path] = field(default=None, repr=False)

    @classmethod
    def from_dict(cls, d: Dict[str, Any], root: Path = Path(".")) -> "Manifest":
        if not isinstance(d, dict):
            raise ManifestError("manifest must be a JSON object")
        known = {"base_model", "task_vectors", "tau", "rank_tol", "mode", "output_dir", "seed"}
        extra = set(d) - known
        if extra:
            raise ManifestError(f"unknown manifest keys: {sorted(extra)}")
        tvs = d.get("task_vectors")
        if not isinstance(tvs, list) or not tvs:
            raise ManifestError("task_vectors must be a nonempty list")
        entries = []
        for i, tv in enumerate(tvs):
            if not isinstance(tv, dict) or not isinstance(tv.get("name"), str) or not isinstance(tv.get("path"), str):
                raise ManifestError(f"task_vectors[{i}] needs string 'name' and 'path'")
            entries.append(VectorEntry(tv["name"], root / tv["path"]))
        names = [e.name for e in entries]
        if len(set(names)) != len(names):
            raise ManifestError("task vector names must be unique")
        if "output_dir" not in d or not isinstance(d["output_dir"], str):
            raise ManifestError("output_dir is required")
        tau = float(d.get("tau", DEFAULT_TAU))
        if not (0.0 < tau <= 1.0):
            raise ManifestError(f"tau must lie in (0, 1], got {tau}")
        rank_tol = float(d.get("rank_tol", DEFAULT_RANK_TOL))
        if rank_tol < 0:
            raise ManifestError("rank_tol must be nonnegative")
        mode = d.get("mode", "chain")
        if mode not in ("chain", "pairwise"):
            raise ManifestError(f"mode must be 'chain' or 'pairwise', got {mode!r}")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ManifestError("seed must be an integer")
        base = d.get("base_model")
        return cls(
            task_vectors=entries,
            output_dir=root / d["output_dir"],
            base_model=root / base if base else None,
            tau=tau,
            rank_tol=rank_tol,
            mode=mode,
            seed=seed,
        )

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ManifestError(f"{path}: invalid JSON ({e})") from None
        m = cls.from_dict(d, root=path.parent)
        m.source = path
        return m


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def input_digest(manifest: Manifest) -> Dict[str, Any]:
    files = [{"name": e.name, "sha256": sha256_file(e.path)} for e in manifest.task_vectors]
    h = hashlib.sha256()
    for f in files:
        h.update(f["name"].encode() + b"\0" + f["sha256"].encode() + b"\n")
    base = None
    if manifest.base_model is not None and manifest.base_model.exists():
        base = sha256_file(manifest.base_model)
        h.update(b"base\0" + base.encode())
    return {"digest": h.hexdigest(), "files": files, "base_model_sha256": base}


def _floats(a) -> List[float]:
    return [float(x) for x in np.asarray(a).ravel()]


def build_report(result: DecompositionResult, originals: List[Dict[str, np.ndarray]], manifest: Manifest,
                 outputs: List[str]) -> Dict[str, Any]:
    """Deterministic JSON-ready report (no wall-clock values)."""
    layers = []
    for name, layer in result.layers.items():
        entry: Dict[str, Any] = {
            "name": name,
            "shape": list(layer.shape),
            "status": layer.status,
            "residuals": layer.residuals([np.asarray(o[name], dtype=np.float64) for o in originals]),
        }
        if layer.spectrum is not None:
            entry["eigenvalues"] = _floats(layer.spectrum.values)
        if layer.basis is not None:
            entry["r_shared"] = layer.basis.dim
            entry["retained_eigenvalues"] = _floats(layer.basis.source_values)
        else:
            entry["r_shared"] = 0
            entry["retained_eigenvalues"] = []
        entry["order_drift"] = layer.order_drift
        if layer.pairs:
            entry["pairs"] = [
                {
                    "pair": [result.names[i], result.names[j]],
                    "r_shared": ps.basis.dim,
                    "retained_eigenvalues": _floats(ps.basis.source_values),
                }
                for (i, j), ps in layer.pairs.items()
            ]
        layers.append(entry)
    return {
        "toolkit": {"name": "taskdecomp", "version": __version__},
        "inputs": input_digest(manifest),
        "params": {"tau": result.tau, "rank_tol": result.rank_tol, "mode": result.mode, "seed": manifest.seed},
        "task_vectors": list(result.names),
        "layers": layers,
        "undecomposed": result.undecomposed,
        "outputs": sorted(outputs),
    }


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
