"""Shared/unique decomposition of task vectors."""

__version__ = "0.1.0"

from .decompose import (  # noqa: E402
    DEFAULT_TAU,
    ChainSpectrum,
    DecompositionResult,
    LayerDecomposition,
    Projector,
    SharedBasis,
    chain_projectors,
    column_projector,
    decompose_set,
    merge_shared,
    shared_basis,
    split,
)
from .angles import AngleReport, cross_validate, principal_angles, subspace_distance  # noqa: E402

__all__ = [
    "DEFAULT_TAU",
    "AngleReport",
    "ChainSpectrum",
    "DecompositionResult",
    "LayerDecomposition",
    "Projector",
    "SharedBasis",
    "chain_projectors",
    "column_projector",
    "cross_validate",
    "decompose_set",
    "merge_shared",
    "principal_angles",
    "shared_basis",
    "split",
    "subspace_distance",
]
