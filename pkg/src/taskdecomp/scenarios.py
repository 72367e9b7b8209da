"""Ready-made toy experiments built on :mod:`taskdecomp.toy`.

Both scenarios fine-tune only the first weight matrix of a shared base
model. The classification head and the first-layer bias stay frozen, so task
vectors describe the feature extractor the way encoder-only task vectors do
for image classifiers, and every nonzero delta is one the decomposition can
split (a bias delta would otherwise pass straight into the unique part).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence

from .decompose import DEFAULT_TAU, DecompositionResult, TaskVector, decompose_set
from .toy import (
    DEFAULT_GRID,
    SweepCurve,
    ToyModel,
    WorldSpec,
    coefficient_sweep,
    evaluate,
    init_model,
    make_task,
    task_vector,
    train,
)

FT_STEPS = 300
FT_LR = 0.5
FROZEN = (1, "layer0.bias")


@dataclass
class TransferOutcome:
    seed: int
    base_accuracy: float
    curve: SweepCurve
    decomposition: DecompositionResult
    components: Dict[str, TaskVector]

    def best(self, component: str) -> float:
        return self.curve.best(component).accuracy

    @property
    def unique_ids(self):
        return [c for c in self.components if c.startswith("unique:")]


def source_vectors(seed: int, spec: WorldSpec, base: ToyModel, steps: int = FT_STEPS, lr: float = FT_LR):
    vecs = []
    for idx in (0, 1):
        task = make_task("shared-structure", seed, idx, spec)
        ft = train(base, task, steps, lr, frozen=FROZEN)
        vecs.append(task_vector(ft, base))
    return vecs


def transfer_scenario(seed: int, corrupted: bool = False, tau: float = DEFAULT_TAU,
                      grid: Sequence[float] = DEFAULT_GRID, spec: WorldSpec = WorldSpec()) -> TransferOutcome:
    """Two source tasks sharing structure with a held-out target.

    Sweeps the merged shared component and each source's unique component
    over ``grid`` on the target (or its corrupted variant).
    """
    base = init_model(spec.features, spec.num_classes, 16, seed)
    va, vb = source_vectors(seed, spec, base)
    dec = decompose_set([va, vb], tau=tau, names=["source0", "source1"])
    comps = {
        "shared": dec.merged_shared(),
        "unique:source0": dec.unique_vector(0),
        "unique:source1": dec.unique_vector(1),
    }
    target = make_task("corrupted" if corrupted else "target", seed, spec=spec)
    curve = coefficient_sweep(base, comps, grid, target)
    return TransferOutcome(seed, evaluate(base, target)[0], curve, dec, comps)


@dataclass
class NegationOutcome:
    seed: int
    base_accuracy: Dict[str, float]
    curves: Dict[str, SweepCurve]  # evaluation task -> curve
    decomposition: DecompositionResult


def negation_scenario(seed: int, tau: float = DEFAULT_TAU, grid: Sequence[float] = None,
                      spec: WorldSpec = WorldSpec()) -> NegationOutcome:
    """Negate one source's full task vector or only its unique component.

    The base model is pre-trained on the target ("control") task. Source 0
    plays the behavior to remove; source 1 is the second member of the
    pool. Curves are reported on both the removed task and the control.
    """
    if grid is None:
        grid = [g for g in DEFAULT_GRID if g <= 0]
    control = make_task("target", seed, spec=spec)
    base = train(init_model(spec.features, spec.num_classes, 16, seed), control, FT_STEPS, FT_LR)
    va, vb = source_vectors(seed, spec, base)
    dec = decompose_set([va, vb], tau=tau, names=["source0", "source1"])
    comps = {"full:source0": va, "unique:source0": dec.unique_vector(0)}
    removed = make_task("shared-structure", seed, 0, spec)
    curves = {
        "removed": coefficient_sweep(base, comps, grid, removed),
        "control": coefficient_sweep(base, comps, grid, control),
    }
    base_acc = {"removed": evaluate(base, removed)[0], "control": evaluate(base, control)[0]}
    return NegationOutcome(seed, base_acc, curves, dec)
