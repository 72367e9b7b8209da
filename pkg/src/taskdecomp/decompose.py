"""Shared/unique decomposition of task vectors via chained column projectors.

For each layer, every task vector's weight delta ``W_i`` gets a projector
``P_i = U_i U_i^T`` onto its column space. The ordered product
``M = P_1 P_2 ... P_k`` fixes exactly the directions common to all column
spaces. We eigendecompose the symmetric Gram form ``M^T M`` (for k = 2 its
spectrum is the squared cosines of the principal angles between the two
column spaces), keep eigenvectors whose eigenvalue exceeds ``tau``, and
split each ``W_i`` into its projection onto that shared basis and the
remainder.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    InvalidMatrix,
    InvalidThreshold,
    LayerMismatch,
    NeedTwoProjectors,
    NeedTwoVectors,
    ZeroTaskVector,
)
from .linalg import (
    DEFAULT_RANK_TOL,
    as_matrix,
    frobenius_norm,
    gram_schmidt,
    qr_orthonormal,
    svd,
    sym_eig,
)

DEFAULT_TAU = 0.85

# A task vector maps layer names to weight-delta arrays (any ndim).
TaskVector = Dict[str, np.ndarray]


@dataclass(frozen=True)
class Projector:
    p: np.ndarray
    basis: np.ndarray  # orthonormal columns spanning the range

    @property
    def dim(self) -> int:
        return self.p.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def from_basis(cls, basis: np.ndarray) -> "Projector":
        return cls(p=basis @ basis.T, basis=basis)


@dataclass(frozen=True)
class ChainSpectrum:
    values: np.ndarray
    vectors: np.ndarray
    k: int
    order: Tuple[int, ...]
    symmetrized: bool = True


@dataclass(frozen=True)
class SharedBasis:
    z: np.ndarray  # n x r_shared
    tau: float
    source_values: np.ndarray

    @property
    def dim(self) -> int:
        return self.z.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.z.shape[0]

    def projector(self) -> Projector:
        return Projector.from_basis(self.z)


@dataclass
class PairShare:
    """Result of the k = 2 pipeline for one unordered pair in pairwise mode."""

    pair: Tuple[int, int]
    basis: SharedBasis
    spectrum: ChainSpectrum
    merged_shared: np.ndarray


@dataclass
class LayerDecomposition:
    name: str
    shape: Tuple[int, ...]
    shared_parts: List[np.ndarray]
    unique_parts: List[np.ndarray]
    merged_shared: Optional[np.ndarray]
    basis: Optional[SharedBasis] = None
    spectrum: Optional[ChainSpectrum] = None
    decomposed: bool = True
    status: str = "decomposed"
    order_drift: Optional[float] = None
    pairs: Dict[Tuple[int, int], PairShare] = field(default_factory=dict)
    seconds: float = 0.0

    def residuals(self, originals: Sequence[np.ndarray]) -> List[float]:
        """Relative Frobenius error of shared + unique against each original."""
        out = []
        for w, s, u in zip(originals, self.shared_parts, self.unique_parts):
            denom = max(frobenius_norm(w), np.finfo(float).tiny)
            out.append(frobenius_norm(s + u - w) / denom)
        return out


@dataclass
class DecompositionResult:
    names: List[str]
    layers: Dict[str, LayerDecomposition]
    mode: str
    tau: float
    rank_tol: float

    @property
    def undecomposed(self) -> List[str]:
        return [n for n, layer in self.layers.items() if not layer.decomposed]

    def shared_vector(self, i: int) -> TaskVector:
        return {n: layer.shared_parts[i] for n, layer in self.layers.items()}

    def unique_vector(self, i: int) -> TaskVector:
        return {n: layer.unique_parts[i] for n, layer in self.layers.items()}

    def merged_shared(self) -> TaskVector:
        if self.mode != "chain":
            raise ValueError("merged_shared() is only defined in chain mode; use pair_shared()")
        return {n: layer.merged_shared for n, layer in self.layers.items()}

    def pair_shared(self, pair: Tuple[int, int]) -> TaskVector:
        out = {}
        for n, layer in self.layers.items():
            if pair in layer.pairs:
                out[n] = layer.pairs[pair].merged_shared
            else:
                out[n] = np.zeros(layer.shape)
        return out

    @property
    def pair_list(self) -> List[Tuple[int, int]]:
        return list(itertools.combinations(range(len(self.names)), 2))


def column_projector(w, rank_tol: float = DEFAULT_RANK_TOL) -> Projector:
    """Orthogonal projector onto the column space of ``w``."""
    f = svd(w, rank_tol)
    if f.rank == 0:
        raise ZeroTaskVector("zero matrix has no column space")
    return Projector.from_basis(f.u)


def chain_projectors(ps: Sequence[Projector], order: Optional[Sequence[int]] = None) -> ChainSpectrum:
    """Eigendecomposition of the chained product of projectors.

    With ``M = P_{o1} ... P_{ok}`` (``o`` = ``order``, ascending by default)
    the returned spectrum is that of ``M^T M``. Its eigenvalues lie in
    [0, 1]; the eigenvalue-1 eigenspace is the intersection of all ranges.
    """
    k = len(ps)
    if k < 2:
        raise NeedTwoProjectors(f"need at least two projectors, got {k}")
    n = ps[0].dim
    if any(p.dim != n for p in ps):
        raise DimensionMismatch("projectors have different dimensions")
    order = tuple(range(k)) if order is None else tuple(int(i) for i in order)
    if sorted(order) != list(range(k)):
        raise ValueError(f"order {order} is not a permutation of range({k})")

    m = ps[order[0]].p
    for i in order[1:]:
        m = m @ ps[i].p
    g = m.T @ m
    g = 0.5 * (g + g.T)
    eig = sym_eig(g)
    return ChainSpectrum(values=eig.values, vectors=eig.vectors, k=k, order=order)


def shared_basis(spectrum: ChainSpectrum, tau: float = DEFAULT_TAU) -> SharedBasis:
    """Keep eigenvectors whose eigenvalue is strictly greater than ``tau``."""
    if not (0.0 < tau <= 1.0):
        raise InvalidThreshold(f"tau must lie in (0, 1], got {tau}")
    keep = spectrum.values > tau
    z = gram_schmidt(spectrum.vectors[:, keep])
    return SharedBasis(z=z, tau=float(tau), source_values=spectrum.values[keep].copy())


def split(w, basis: SharedBasis) -> Tuple[np.ndarray, np.ndarray]:
    w = as_matrix(w)
    if w.shape[0] != basis.ambient_dim:
        raise DimensionMismatch(f"matrix has {w.shape[0]} rows, basis lives in R^{basis.ambient_dim}")
    z = basis.z
    shared = z @ (z.T @ w)
    return shared, w - shared


def merge_shared(shared_parts: Sequence[np.ndarray]) -> np.ndarray:
    """Frobenius-norm weighted average of the per-vector shared parts."""
    if len(shared_parts) == 0:
        raise EmptyInput("merge_shared needs at least one matrix")
    shape = np.shape(shared_parts[0])
    if any(np.shape(s) != shape for s in shared_parts):
        raise DimensionMismatch("shared parts have different shapes")
    norms = [frobenius_norm(s) for s in shared_parts]
    total = sum(norms)
    if total == 0.0:
        return np.zeros(shape)
    acc = np.zeros(shape)
    for wgt, s in zip(norms, shared_parts):
        acc += wgt * np.asarray(s, dtype=np.float64)
    return acc / total


def _basis_projector(w, rank_tol):
    try:
        return column_projector(w, rank_tol)
    except ZeroTaskVector:
        return None


def decompose_matrices(
    mats: Sequence[np.ndarray],
    tau: float = DEFAULT_TAU,
    rank_tol: float = DEFAULT_RANK_TOL,
    order: Optional[Sequence[int]] = None,
) -> Tuple[SharedBasis, Optional[ChainSpectrum], List[np.ndarray], List[np.ndarray]]:
    """Chain-mode pipeline for one layer of 2-D matrices.

    A zero matrix has no column space, so if any input is zero the shared
    basis is empty and the spectrum is None.
    """
    if len(mats) < 2:
        raise NeedTwoVectors(f"need at least two matrices, got {len(mats)}")
    mats = [as_matrix(w) for w in mats]
    n = mats[0].shape[0]
    projs = [_basis_projector(w, rank_tol) for w in mats]
    if any(p is None for p in projs):
        basis = SharedBasis(z=np.zeros((n, 0)), tau=float(tau), source_values=np.zeros(0))
        spectrum = None
    else:
        spectrum = chain_projectors(projs, order)
        basis = shared_basis(spectrum, tau)
    shared, unique = zip(*(split(w, basis) for w in mats))
    return basis, spectrum, list(shared), list(unique)


def _order_drift(projs, values, seed, trials=3):
    # max eigenvalue change over random product orderings (k > 2 only)
    rng = np.random.default_rng(seed)
    drift = 0.0
    for _ in range(trials):
        perm = rng.permutation(len(projs))
        other = chain_projectors(projs, perm).values
        drift = max(drift, float(np.max(np.abs(other - values))))
    return drift


def _check_layers(vectors: Sequence[Mapping[str, np.ndarray]]) -> List[str]:
    names = list(vectors[0].keys())
    ref = set(names)
    for i, v in enumerate(vectors[1:], start=1):
        if set(v.keys()) != ref:
            missing = ref.symmetric_difference(v.keys())
            raise LayerMismatch(f"vector {i} layer set differs: {sorted(missing)}")
        for n in names:
            if np.shape(v[n]) != np.shape(vectors[0][n]):
                raise LayerMismatch(f"layer {n!r} shape {np.shape(v[n])} != {np.shape(vectors[0][n])}")
    return names


def _as_2d(a: np.ndarray) -> np.ndarray:
    # (out_channels) x (everything else) for ndim > 2
    return a.reshape(a.shape[0], -1) if a.ndim > 2 else a


def _decompose_layer_chain(name, arrays, tau, rank_tol, drift_seed):
    shape = arrays[0].shape
    mats = [_as_2d(a) for a in arrays]
    if any(not np.any(m) for m in mats):
        status = "zero-delta"
    else:
        status = "decomposed"
    basis, spectrum, shared, unique = decompose_matrices(mats, tau, rank_tol)
    drift = None
    if spectrum is not None and len(arrays) > 2 and drift_seed is not None:
        projs = [column_projector(m, rank_tol) for m in mats]
        drift = _order_drift(projs, spectrum.values, drift_seed)
    merged = merge_shared(shared)
    return LayerDecomposition(
        name=name,
        shape=shape,
        shared_parts=[s.reshape(shape) for s in shared],
        unique_parts=[u.reshape(shape) for u in unique],
        merged_shared=merged.reshape(shape),
        basis=basis,
        spectrum=spectrum,
        status=status,
        order_drift=drift,
    )


def _decompose_layer_pairwise(name, arrays, tau, rank_tol):
    shape = arrays[0].shape
    mats = [as_matrix(_as_2d(a)) for a in arrays]
    n = mats[0].shape[0]
    k = len(mats)
    pairs: Dict[Tuple[int, int], PairShare] = {}
    per_vector: List[List[np.ndarray]] = [[] for _ in range(k)]
    zero = any(not np.any(m) for m in mats)
    for i, j in itertools.combinations(range(k), 2):
        basis, spectrum, shared, _ = decompose_matrices([mats[i], mats[j]], tau, rank_tol)
        pairs[(i, j)] = PairShare(
            pair=(i, j), basis=basis, spectrum=spectrum,
            merged_shared=merge_shared(shared).reshape(shape),
        )
        if basis.dim:
            per_vector[i].append(basis.z)
            per_vector[j].append(basis.z)
    shared_parts, unique_parts = [], []
    for i, w in enumerate(mats):
        if per_vector[i]:
            z = qr_orthonormal(np.hstack(per_vector[i]))
        else:
            z = np.zeros((n, 0))
        union = SharedBasis(z=z, tau=float(tau), source_values=np.zeros(0))
        s, u = split(w, union)
        shared_parts.append(s.reshape(shape))
        unique_parts.append(u.reshape(shape))
    return LayerDecomposition(
        name=name,
        shape=shape,
        shared_parts=shared_parts,
        unique_parts=unique_parts,
        merged_shared=None,
        status="zero-delta" if zero else "decomposed",
        pairs=pairs,
    )


def _passthrough(name, arrays):
    shape = np.shape(arrays[0])
    return LayerDecomposition(
        name=name,
        shape=shape,
        shared_parts=[np.zeros(shape) for _ in arrays],
        unique_parts=[np.array(a, dtype=np.float64, copy=True) for a in arrays],
        merged_shared=np.zeros(shape),
        decomposed=False,
        status="undecomposed",
    )


def decompose_set(
    vectors: Sequence[Mapping[str, np.ndarray]],
    tau: float = DEFAULT_TAU,
    rank_tol: float = DEFAULT_RANK_TOL,
    mode: str = "chain",
    names: Optional[Sequence[str]] = None,
    drift_seed: Optional[int] = 0,
) -> DecompositionResult:
    """Decompose a pool of task vectors layer by layer.

    Parameters
    ----------
    vectors : sequence of task vectors
        Mappings from layer name to weight delta. All must share layer
        names and shapes.
    tau : float
        Eigenvalue threshold; directions with eigenvalue > tau are shared.
    rank_tol : float
        Relative singular-value cutoff defining each column space.
    mode : {"chain", "pairwise"}
        ``chain`` intersects all k vectors at once. ``pairwise`` runs the
        two-vector pipeline for every unordered pair; each vector's unique
        part is then its residual against the union of its pairwise bases.
    drift_seed : int or None
        Seed for the product-order sensitivity check (chain mode, k > 2).
        None skips the check.

    Layers with fewer than two dimensions are passed through untouched to
    the unique parts and flagged ``undecomposed``.
    """
    if len(vectors) < 2:
        raise NeedTwoVectors(f"need at least two task vectors, got {len(vectors)}")
    if mode not in ("chain", "pairwise"):
        raise ValueError(f"unknown mode {mode!r}")
    if not (0.0 < tau <= 1.0):
        raise InvalidThreshold(f"tau must lie in (0, 1], got {tau}")
    layer_names = _check_layers(vectors)
    names = list(names) if names is not None else [f"v{i}" for i in range(len(vectors))]

    layers: Dict[str, LayerDecomposition] = {}
    for lname in layer_names:
        t0 = time.perf_counter()
        arrays = [np.asarray(v[lname], dtype=np.float64) for v in vectors]
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise InvalidMatrix(f"layer {lname!r} has non-finite entries")
        if arrays[0].ndim < 2 or arrays[0].shape[0] == 0 or arrays[0].size == 0:
            layer = _passthrough(lname, arrays)
        elif mode == "chain":
            layer = _decompose_layer_chain(lname, arrays, tau, rank_tol, drift_seed)
        else:
            layer = _decompose_layer_pairwise(lname, arrays, tau, rank_tol)
        layer.seconds = time.perf_counter() - t0
        layers[lname] = layer
    return DecompositionResult(names=names, layers=layers, mode=mode, tau=float(tau), rank_tol=float(rank_tol))

