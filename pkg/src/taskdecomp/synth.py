"""Planted shared-subspace experiments.

A planted instance draws a random orthonormal basis of R^n and carves it
into one shared block and one unique block per vector. Vector i is
``S A_i + U_i B_i`` with Gaussian coefficient matrices, so its column
space is exactly span(S, U_i) before noise.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .angles import principal_angles
from .decompose import DEFAULT_TAU, ChainSpectrum, SharedBasis, decompose_matrices
from .errors import DimensionMismatch, InvalidSpec
from .linalg import DEFAULT_RANK_TOL

TRIAL_STRIDE = 1000003


def trial_seed(seed: int, trial: int) -> int:
    return int(seed) + TRIAL_STRIDE * int(trial)


@dataclass(frozen=True)
class PlantSpec:
    ambient_dim: int = 512
    cols: int = 512
    shared_dim: int = 100
    unique_dim: int = 100
    num_vectors: int = 2
    coeff_scale: float = 1.0

    def __post_init__(self):
        if self.ambient_dim < 1 or self.cols < 1 or self.unique_dim < 1:
            raise InvalidSpec("ambient_dim, cols and unique_dim must be positive")
        if self.shared_dim < 0:
            raise InvalidSpec("shared_dim must be nonnegative")
        if self.num_vectors < 2:
            raise InvalidSpec("num_vectors must be >= 2")
        if self.coeff_scale <= 0:
            raise InvalidSpec("coeff_scale must be positive")
        need = self.shared_dim + self.num_vectors * self.unique_dim
        if need > self.ambient_dim:
            raise InvalidSpec(f"planted subspaces need {need} dims, ambient is {self.ambient_dim}")


@dataclass(frozen=True)
class PlantedInstance:
    vectors: List[np.ndarray]
    truth_shared: np.ndarray
    truth_uniques: List[np.ndarray]
    seed: int
    spec: PlantSpec


@dataclass(frozen=True)
class RecoveryReport:
    mean_angle_rad: float
    max_angle_rad: float
    recovered_dim: int
    true_dim: int
    sigma: float
    trial: int = 0
    eigenvalues: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    def rows(self):
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            yield float(lo), float(hi), int(c)


def plant(spec: PlantSpec, seed: int) -> PlantedInstance:
    rng = np.random.default_rng(seed)
    n, r, u, k = spec.ambient_dim, spec.shared_dim, spec.unique_dim, spec.num_vectors
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    shared = q[:, :r]
    uniques = [q[:, r + i * u: r + (i + 1) * u] for i in range(k)]
    vectors = []
    for ui in uniques:
        a = rng.standard_normal((r, spec.cols)) * spec.coeff_scale
        b = rng.standard_normal((u, spec.cols)) * spec.coeff_scale
        vectors.append(shared @ a + ui @ b)
    return PlantedInstance(
        vectors=vectors,
        truth_shared=np.ascontiguousarray(shared),
        truth_uniques=[np.ascontiguousarray(x) for x in uniques],
        seed=int(seed),
        spec=spec,
    )


def add_noise(m: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    if sigma < 0:
        raise InvalidSpec("sigma must be nonnegative")
    m = np.asarray(m, dtype=np.float64)
    if sigma == 0:
        return m.copy()
    rng = np.random.default_rng(seed)
    return m + sigma * rng.standard_normal(m.shape)


def recovery_report(instance: PlantedInstance, recovered, sigma: float, trial: int = 0,
                    eigenvalues: Optional[np.ndarray] = None) -> RecoveryReport:
    """Principal angles between the planted and the recovered shared basis.

    An empty recovery against a nonempty truth (or the reverse) scores the
    worst case, pi/2.
    """
    z = recovered.z if isinstance(recovered, SharedBasis) else np.asarray(recovered, dtype=np.float64)
    truth = instance.truth_shared
    if z.shape[0] != truth.shape[0]:
        raise DimensionMismatch(f"recovered basis lives in R^{z.shape[0]}, truth in R^{truth.shape[0]}")
    true_dim, rec_dim = truth.shape[1], z.shape[1]
    if true_dim == 0 and rec_dim == 0:
        mean = mx = 0.0
    elif true_dim == 0 or rec_dim == 0:
        mean = mx = math.pi / 2
    else:
        rep = principal_angles(truth, z)
        mean, mx = rep.mean_rad, rep.max_rad
    return RecoveryReport(mean, mx, rec_dim, true_dim, float(sigma), trial, eigenvalues)


def eig_histogram(spectrum, bins: int = 20) -> Histogram:
    if bins < 2:
        raise InvalidSpec("bins must be >= 2")
    values = spectrum.values if isinstance(spectrum, ChainSpectrum) else np.asarray(spectrum, dtype=np.float64)
    lo = min(0.0, float(values.min())) if values.size else 0.0
    hi = max(1.0, float(values.max())) if values.size else 1.0
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return Histogram(bin_edges=edges, counts=counts)


def recover(instance: PlantedInstance, sigma: float = 0.0, tau: float = DEFAULT_TAU,
            rank_tol: float = DEFAULT_RANK_TOL, noise_seed: Optional[int] = None):
    """Add noise to every vector and run the chain decomposition."""
    base = instance.seed if noise_seed is None else noise_seed
    mats = [add_noise(v, sigma, base + 1 + i) for i, v in enumerate(instance.vectors)]
    basis, spectrum, _, _ = decompose_matrices(mats, tau, rank_tol)
    return basis, spectrum


def noise_sweep(spec: PlantSpec, sigmas: Sequence[float], trials: int = 10, tau: float = DEFAULT_TAU,
                seed: int = 0, rank_tol: float = DEFAULT_RANK_TOL,
                keep_eigenvalues: bool = False) -> List[RecoveryReport]:
    """One RecoveryReport per (sigma, trial); see :func:`sweep_means` for per-sigma means.

    Trial t uses the same planted instance for every sigma, so the sweep
    compares noise levels on common random numbers.
    """
    if trials < 1:
        raise InvalidSpec("trials must be >= 1")
    if any(s < 0 for s in sigmas):
        raise InvalidSpec("sigmas must be nonnegative")
    out = []
    for t in range(trials):
        s = trial_seed(seed, t)
        inst = plant(spec, s)
        for sigma in sigmas:
            basis, spectrum = recover(inst, sigma, tau, rank_tol)
            eig = spectrum.values if (keep_eigenvalues and spectrum is not None) else None
            out.append(recovery_report(inst, basis, sigma, trial=t, eigenvalues=eig))
    out.sort(key=lambda r: (list(sigmas).index(r.sigma), r.trial))
    return out


def sweep_means(reports: Sequence[RecoveryReport]) -> Dict[float, float]:
    """Mean recovery angle per sigma, in first-seen sigma order."""
    acc: Dict[float, List[float]] = defaultdict(list)
    for r in reports:
        acc[r.sigma].append(r.mean_angle_rad)
    return {s: float(np.mean(v)) for s, v in acc.items()}
