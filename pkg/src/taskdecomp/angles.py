"""Principal angles between subspaces, computed independently of the projector chain.

Both inputs are orthonormalized with pivoted QR; the cosines of the angles
are the singular values of ``Q_a^T Q_b``. Small angles are recovered from
sines instead (singular values of the part of ``Q_b`` outside span(Q_a)),
since ``arccos`` loses about half the digits near 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, InvalidMatrix, NeedTwoVectors, ZeroSubspace
from .linalg import DEFAULT_RANK_TOL, as_matrix, qr_orthonormal


@dataclass(frozen=True)
class AngleReport:
    angles_rad: np.ndarray
    mean_rad: float
    max_rad: float
    dims: Tuple[int, int]
    note: str = ""
    layer: Optional[str] = None
    trial: Optional[int] = None

    def to_dict(self) -> dict:
        d = {
            "angles_rad": [float(x) for x in self.angles_rad],
            "mean_rad": self.mean_rad,
            "max_rad": self.max_rad,
            "dims": list(self.dims),
            "note": self.note,
        }
        if self.layer is not None:
            d["layer"] = self.layer
        if self.trial is not None:
            d["trial"] = self.trial
        return d


def _angles_from_bases(qa: np.ndarray, qb: np.ndarray) -> np.ndarray:
    # qa is the larger basis (p >= q); returns q angles ascending
    cos = np.linalg.svd(qa.T @ qb, compute_uv=False)
    cos = np.clip(cos, 0.0, 1.0)
    resid = qb - qa @ (qa.T @ qb)
    sin = np.linalg.svd(resid, compute_uv=False)
    sin = np.clip(np.sort(sin), 0.0, 1.0)
    # resid has q singular values; pad defensively if LAPACK returns fewer
    if sin.shape[0] < cos.shape[0]:
        sin = np.concatenate([np.zeros(cos.shape[0] - sin.shape[0]), sin])
    small = cos**2 >= 0.5
    theta = np.where(small, np.arcsin(sin[: cos.shape[0]]), np.arccos(cos))
    return np.sort(theta)


def principal_angles(a, b, rank_tol: float = DEFAULT_RANK_TOL) -> AngleReport:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    qa = qr_orthonormal(a, rank_tol)
    qb = qr_orthonormal(b, rank_tol)
    if qa.shape[1] == 0 or qb.shape[1] == 0:
        raise ZeroSubspace("cannot measure angles to a zero-dimensional subspace")
    if qa.shape[1] < qb.shape[1]:
        qa, qb = qb, qa
    theta = _angles_from_bases(qa, qb)
    return AngleReport(
        angles_rad=theta,
        mean_rad=float(theta.mean()),
        max_rad=float(theta.max()),
        dims=(qa.shape[1], qb.shape[1]),
    )


def subspace_distance(a, b) -> float:
    """Mean principal angle in radians."""
    return principal_angles(a, b).mean_rad


def intersection_basis(a, b, tau: float, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Shared directions by thresholding principal angles.

    Keeps the b-side principal vectors whose angle satisfies cos^2 > tau.
    """
    qa = qr_orthonormal(as_matrix(a, "a"), rank_tol)
    qb = qr_orthonormal(as_matrix(b, "b"), rank_tol)
    n = qb.shape[0]
    if qa.shape[1] == 0 or qb.shape[1] == 0:
        return np.zeros((n, 0))
    _, cos, zt = np.linalg.svd(qa.T @ qb, full_matrices=False)
    g = qb @ zt.T
    keep = np.clip(cos, 0.0, 1.0) ** 2 > tau
    return qr_orthonormal(g[:, keep]) if keep.any() else np.zeros((n, 0))


def compare_bases(za: np.ndarray, zb: np.ndarray) -> AngleReport:
    """Principal angles between two recovered bases, tolerating empty ones."""
    if za.shape[1] == 0 and zb.shape[1] == 0:
        return AngleReport(np.zeros(0), 0.0, 0.0, (0, 0), note="both-empty")
    if za.shape[1] == 0 or zb.shape[1] == 0:
        p = max(za.shape[1], zb.shape[1])
        half = math.pi / 2
        return AngleReport(np.full(0, half), half, half, (p, 0), note="one-empty")
    return principal_angles(za, zb)


def _pair_reports(wa: Mapping, wb: Mapping, tau, rank_tol) -> List[AngleReport]:
    from .decompose import decompose_matrices

    if set(wa) != set(wb):
        raise DimensionMismatch("task vectors have different layer sets")
    out = []
    for name in wa:
        a = np.asarray(wa[name], dtype=np.float64)
        b = np.asarray(wb[name], dtype=np.float64)
        if a.ndim < 2:
            continue
        if a.ndim > 2:
            a, b = a.reshape(a.shape[0], -1), b.reshape(b.shape[0], -1)
        if not np.any(a) or not np.any(b):
            z_chain = z_qr = np.zeros((a.shape[0], 0))
        else:
            basis, _, _, _ = decompose_matrices([a, b], tau, rank_tol)
            z_chain = basis.z
            z_qr = intersection_basis(a, b, tau, rank_tol)
        rep = compare_bases(z_chain, z_qr)
        out.append(AngleReport(rep.angles_rad, rep.mean_rad, rep.max_rad, rep.dims, rep.note, layer=name))
    return out


def cross_validate(
    vectors: Optional[Sequence[Mapping[str, np.ndarray]]] = None,
    tau: float = 0.85,
    trials: int = 1,
    seed: int = 0,
    *,
    spec=None,
    sigma: float = 0.1,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> List[AngleReport]:
    """Compare the projector-chain shared subspace with the principal-angle one.

    With ``vectors`` (exactly two task vectors) every matrix layer yields
    one report and ``trials`` is not used. Without them, ``trials``
    planted pairs are generated from ``spec`` (default PlantSpec), noise
    ``sigma`` is added, and one report per trial is returned.
    """
    if trials < 1:
        raise InvalidMatrix("trials must be >= 1")
    if vectors is not None:
        if len(vectors) != 2:
            raise NeedTwoVectors("cross_validate compares exactly two task vectors")
        return _pair_reports(vectors[0], vectors[1], tau, rank_tol)

    from .synth import PlantSpec, add_noise, plant, trial_seed

    spec = spec or PlantSpec()
    reports = []
    for t in range(trials):
        s = trial_seed(seed, t)
        inst = plant(spec, s)
        mats = [add_noise(v, sigma, s + 1 + i) for i, v in enumerate(inst.vectors[:2])]
        (rep,) = _pair_reports({"w": mats[0]}, {"w": mats[1]}, tau, rank_tol)
        reports.append(AngleReport(rep.angles_rad, rep.mean_rad, rep.max_rad, rep.dims, rep.note, trial=t))
    return reports
