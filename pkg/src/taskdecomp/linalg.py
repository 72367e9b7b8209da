"""Dense float64 matrix primitives.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. Every
factorization returned here is sign-canonicalized (the largest-magnitude
entry of each column is made nonnegative) so repeated calls on the same
input produce bitwise-identical output.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidMatrix, NotSymmetric

DEFAULT_RANK_TOL = 1e-10
SYMMETRY_TOL = 1e-8


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and convert ``m`` to a finite 2-D float64 array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidMatrix(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] == 0:
        raise InvalidMatrix(f"{name} has no rows")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return a


def _canonical_signs(cols: np.ndarray) -> np.ndarray:
    # +1/-1 per column so that the entry of largest magnitude is >= 0
    if cols.shape[1] == 0:
        return np.ones(0)
    idx = np.argmax(np.abs(cols), axis=0)
    lead = cols[idx, np.arange(cols.shape[1])]
    return np.where(lead < 0, -1.0, 1.0)


@dataclass(frozen=True)
class SvdFactors:
    u: np.ndarray  # n x r
    s: np.ndarray  # r, descending
    v: np.ndarray  # m x r

    @property
    def rank(self) -> int:
        return self.s.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


@dataclass(frozen=True)
class EigFactors:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns orthonormal

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def svd(m, rank_tol: float = DEFAULT_RANK_TOL) -> SvdFactors:
    """Thin SVD truncated to singular values above ``rank_tol * s_max``."""
    a = as_matrix(m)
    if rank_tol < 0:
        raise InvalidMatrix("rank_tol must be nonnegative")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    smax = s[0] if s.size else 0.0
    r = int(np.count_nonzero(s > rank_tol * smax)) if smax > 0 else 0
    u, s, v = u[:, :r], s[:r], vt[:r].T
    signs = _canonical_signs(u)
    return SvdFactors(u=u * signs, s=s.copy(), v=v * signs)


def sym_eig(m) -> EigFactors:
    """Full eigendecomposition of a symmetric matrix, values descending."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"matrix is not square: {a.shape}")
    asym = np.linalg.norm(a - a.T)
    if asym > SYMMETRY_TOL * np.linalg.norm(a):
        raise NotSymmetric(f"asymmetry {asym:.3e} exceeds tolerance")
    values, vectors = np.linalg.eigh(a)
    values = values[::-1].copy()
    vectors = vectors[:, ::-1]
    vectors = vectors * _canonical_signs(vectors)
    return EigFactors(values=values, vectors=np.ascontiguousarray(vectors))


def qr_orthonormal(m, rel_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column space of ``m`` via pivoted QR.

    The numerical rank is the number of diagonal entries of R whose
    magnitude exceeds ``rel_tol`` times the largest one. A zero matrix
    yields an ``n x 0`` basis.
    """
    a = as_matrix(m)
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], 0))
    q, r, _ = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros((a.shape[0], 0))
    rank = int(np.count_nonzero(diag > rel_tol * diag[0]))
    q = q[:, :rank]
    return np.ascontiguousarray(q * _canonical_signs(q))


def frobenius_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m, dtype=np.float64)))


def gram_schmidt(cols: np.ndarray) -> np.ndarray:
    """Gram-Schmidt with reorthogonalization ("twice is enough").

    Columns are assumed linearly independent; in practice they come from
    an orthonormal eigenbasis and only need rounding drift removed.
    """
    q = np.array(cols, dtype=np.float64, copy=True)
    for j in range(q.shape[1]):
        v = q[:, j]
        for _ in range(2):
            v -= q[:, :j] @ (q[:, :j].T @ v)
        v /= np.linalg.norm(v)
    return q
