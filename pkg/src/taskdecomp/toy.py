"""Tiny MLPs on synthetic Gaussian-cluster tasks for task-arithmetic experiments.

Weights are stored as ``(fan_in, fan_out)`` and applied as ``x @ W + b``,
so the column space of a weight delta lives in the layer's input space.
A first-layer delta therefore only spans directions the training inputs
actually occupy, which is what makes shared input structure show up as a
shared column space.

Task generator
--------------
``make_task(kind, seed, index)`` builds every task of one "world" from the
same seed. The world fixes a random orthonormal basis of the feature space,
split into a shared block, one block per source task, a target block and a
spare block. Class ``c`` of any task has mean ``S m_c + U_t o_{t,c}``: the
shared part ``m_c`` is common to all tasks, ``o_{t,c}`` is task specific.
Within-class noise lives in span(S, U_t) only.

``corrupted`` is the target task with a fixed perturbation: every sample
gets a constant, class-independent offset in the spare block plus a fixed
random rotation of its target-block coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ArchitectureMismatch, DimensionMismatch, DivergedTraining, InvalidSpec

Layer = Tuple[np.ndarray, np.ndarray]
TaskVector = Dict[str, np.ndarray]

KINDS = ("shared-structure", "target", "corrupted")


@dataclass(frozen=True)
class WorldSpec:
    features: int = 16
    num_classes: int = 4
    shared_dim: int = 3
    task_dim: int = 3
    samples_per_class: int = 50
    shared_sep: float = 1.5
    task_sep: float = 1.5
    noise: float = 1.0
    corruption: float = 3.0

    def __post_init__(self):
        if self.shared_dim + 4 * self.task_dim > self.features:
            raise InvalidSpec("features too small for shared + 3 task blocks + spare block")
        if self.num_classes < 2 or self.samples_per_class < 1 or self.features < 1:
            raise InvalidSpec("need >= 2 classes, >= 1 sample per class and >= 1 feature")


@dataclass(frozen=True)
class ToyTask:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.inputs.shape[1] == 0:
            raise InvalidSpec("inputs must be a (samples, features) matrix with >= 1 feature")
        if self.labels.shape != (self.inputs.shape[0],):
            raise InvalidSpec("one label per sample required")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise InvalidSpec("labels out of range")
        if self.inputs.shape[0] < self.num_classes:
            raise InvalidSpec("fewer samples than classes")

    @property
    def features(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class ToyModel:
    layers: Tuple[Layer, ...]
    activation: str = "tanh"

    def __post_init__(self):
        for (w, b), (w2, _) in zip(self.layers, self.layers[1:]):
            if w.shape[1] != w2.shape[0]:
                raise ArchitectureMismatch(f"layer shapes do not compose: {w.shape} -> {w2.shape}")
        for w, b in self.layers:
            if b.shape != (w.shape[1],):
                raise ArchitectureMismatch(f"bias shape {b.shape} does not match weight {w.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ArchitectureMismatch("non-finite parameters")

    @property
    def shapes(self):
        return [(w.shape, b.shape) for w, b in self.layers]

    def params(self) -> TaskVector:
        out = {}
        for i, (w, b) in enumerate(self.layers):
            out[f"layer{i}.weight"] = w
            out[f"layer{i}.bias"] = b
        return out

    @classmethod
    def from_params(cls, params: Mapping[str, np.ndarray]) -> "ToyModel":
        n = len(params) // 2
        layers = tuple(
            (np.asarray(params[f"layer{i}.weight"], dtype=np.float64),
             np.asarray(params[f"layer{i}.bias"], dtype=np.float64))
            for i in range(n)
        )
        return cls(layers)


@dataclass
class EditRecipe:
    entries: List[Tuple[Mapping[str, np.ndarray], float]] = field(default_factory=list)

    def add(self, component, lam: float) -> "EditRecipe":
        self.entries.append((component, float(lam)))
        return self


@dataclass(frozen=True)
class SweepPoint:
    component: str
    lam: float
    accuracy: float
    loss: float


@dataclass
class SweepCurve:
    points: List[SweepPoint]

    def curve(self, component: str) -> List[SweepPoint]:
        return [p for p in self.points if p.component == component]

    def best(self, component: str) -> SweepPoint:
        # ties resolved toward the smallest |lambda|, then the smaller lambda
        pts = self.curve(component)
        return max(pts, key=lambda p: (p.accuracy, -abs(p.lam), -p.lam))

    @property
    def components(self) -> List[str]:
        seen = []
        for p in self.points:
            if p.component not in seen:
                seen.append(p.component)
        return seen


DEFAULT_GRID = tuple(np.round(np.arange(-2.0, 2.0 + 1e-9, 0.25), 2))


def _world(seed: int, spec: WorldSpec):
    rng = np.random.default_rng([int(seed), 0x5EED])
    q, _ = np.linalg.qr(rng.standard_normal((spec.features, spec.features)))
    s = spec.shared_dim
    t = spec.task_dim
    blocks = {
        "shared": q[:, :s],
        "source0": q[:, s: s + t],
        "source1": q[:, s + t: s + 2 * t],
        "target": q[:, s + 2 * t: s + 3 * t],
        "spare": q[:, s + 3 * t: s + 4 * t],
    }
    shared_means = rng.standard_normal((spec.num_classes, s)) * spec.shared_sep
    return rng, blocks, shared_means


def make_task(kind: str, seed: int, index: int = 0, spec: Optional[WorldSpec] = None) -> ToyTask:
    """Deterministic synthetic classification task.

    ``index`` picks which source task of the world (0 or 1) when
    ``kind == "shared-structure"``; it is ignored otherwise.
    """
    if kind not in KINDS:
        raise InvalidSpec(f"unknown task kind {kind!r}; expected one of {KINDS}")
    spec = spec or WorldSpec()
    _, blocks, shared_means = _world(seed, spec)
    if kind == "shared-structure":
        if index not in (0, 1):
            raise InvalidSpec("source index must be 0 or 1")
        block_name = f"source{index}"
    else:
        block_name = "target"
    rng = np.random.default_rng([int(seed), 0x7A5C, KINDS.index(kind) if kind != "corrupted" else 1, int(index)])
    basis_s, basis_t = blocks["shared"], blocks[block_name]
    task_means = rng.standard_normal((spec.num_classes, spec.task_dim)) * spec.task_sep

    c, k = spec.num_classes, spec.samples_per_class
    labels = np.repeat(np.arange(c), k)
    zs = shared_means[labels] + spec.noise * rng.standard_normal((c * k, spec.shared_dim))
    zt = task_means[labels] + spec.noise * rng.standard_normal((c * k, spec.task_dim))
    if kind == "corrupted":
        crng = np.random.default_rng([int(seed), 0xC0AA])
        rot, _ = np.linalg.qr(crng.standard_normal((spec.task_dim, spec.task_dim)))
        offset = crng.standard_normal(spec.task_dim)
        offset *= spec.corruption / np.linalg.norm(offset)
        zt = zt @ rot
        x = zs @ basis_s.T + zt @ basis_t.T + offset @ blocks["spare"].T
    else:
        x = zs @ basis_s.T + zt @ basis_t.T
    name = f"{kind}{index if kind == 'shared-structure' else ''}-s{seed}"
    return ToyTask(inputs=x, labels=labels, num_classes=c, name=name)


def init_model(features: int, num_classes: int, hidden: int = 16, seed: int = 0, scale: float = 1.0) -> ToyModel:
    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal((features, hidden)) * scale / np.sqrt(features)
    w2 = rng.standard_normal((hidden, num_classes)) * scale / np.sqrt(hidden)
    return ToyModel(((w1, np.zeros(hidden)), (w2, np.zeros(num_classes))))


def forward(model: ToyModel, x: np.ndarray) -> np.ndarray:
    h = x
    last = len(model.layers) - 1
    for i, (w, b) in enumerate(model.layers):
        h = h @ w + b
        if i < last:
            h = np.tanh(h)
    return h


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def loss_and_grads(model: ToyModel, x: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy and its gradient for every layer."""
    acts = [x]
    pre = []
    h = x
    last = len(model.layers) - 1
    for i, (w, b) in enumerate(model.layers):
        z = h @ w + b
        pre.append(z)
        h = np.tanh(z) if i < last else z
        acts.append(h)
    logp = _log_softmax(acts[-1])
    n = x.shape[0]
    loss = -float(logp[np.arange(n), y].mean())

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads: List[Layer] = [None] * len(model.layers)
    for i in range(last, -1, -1):
        w, _ = model.layers[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ w.T) * (1.0 - acts[i] ** 2)
    return loss, grads


def train(init: ToyModel, task: ToyTask, steps: int = 500, lr: float = 0.1, seed: Optional[int] = None,
          frozen: Sequence[Union[int, str]] = ()) -> ToyModel:
    """Full-batch gradient descent on softmax cross-entropy.

    Entries of ``frozen`` keep their initial values: an integer freezes a
    whole layer, a parameter name such as ``"layer0.bias"`` freezes one
    tensor. ``seed`` is
    accepted for interface symmetry; full-batch descent draws no
    randomness, so the result depends only on ``init`` and ``task``.
    """
    if lr <= 0 or steps < 1:
        raise InvalidSpec("need lr > 0 and steps >= 1")
    if task.features != init.layers[0][0].shape[0]:
        raise DimensionMismatch("task features do not match model input")
    layers = [(w.copy(), b.copy()) for w, b in init.layers]
    x, y = task.inputs, task.labels
    # overflow shows up as a non-finite loss, which is reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(steps):
            loss, grads = loss_and_grads(_unchecked(layers), x, y)
            if not np.isfinite(loss):
                raise DivergedTraining(step, loss)
            for i, ((w, b), (gw, gb)) in enumerate(zip(layers, grads)):
                if i in frozen:
                    continue
                if f"layer{i}.weight" not in frozen:
                    w -= lr * gw
                if f"layer{i}.bias" not in frozen:
                    b -= lr * gb
        loss, _ = loss_and_grads(_unchecked(layers), x, y)
    if not np.isfinite(loss):
        raise DivergedTraining(steps, loss)
    return ToyModel(tuple(layers), init.activation)


def _unchecked(layers) -> ToyModel:
    # skip validation inside the training loop
    m = object.__new__(ToyModel)
    object.__setattr__(m, "layers", tuple(layers))
    object.__setattr__(m, "activation", "tanh")
    return m


def evaluate(model: ToyModel, task: ToyTask) -> Tuple[float, float]:
    if task.features != model.layers[0][0].shape[0]:
        raise DimensionMismatch("task features do not match model input")
    logits = forward(model, task.inputs)
    pred = np.argmax(logits, axis=1)  # first max wins on ties
    acc = float(np.mean(pred == task.labels))
    logp = _log_softmax(logits)
    loss = -float(logp[np.arange(task.labels.shape[0]), task.labels].mean())
    return acc, loss


def task_vector(ft: ToyModel, pre: ToyModel) -> TaskVector:
    if ft.shapes != pre.shapes:
        raise ArchitectureMismatch(f"architectures differ: {ft.shapes} vs {pre.shapes}")
    a, b = ft.params(), pre.params()
    return {k: a[k] - b[k] for k in a}


def apply_edit_params(base: Mapping[str, np.ndarray],
                      entries: Sequence[Tuple[Mapping[str, np.ndarray], float]]) -> Dict[str, np.ndarray]:
    """``base + sum(lam * component)`` over named arrays; zero coefficients are skipped."""
    params = {k: np.array(v, dtype=np.float64, copy=True) for k, v in base.items()}
    for component, lam in entries:
        if set(component) != set(params):
            raise ArchitectureMismatch("component layers do not match the base model")
        if lam == 0:
            continue
        for k, v in component.items():
            v = np.asarray(v, dtype=np.float64)
            if v.shape != params[k].shape:
                raise ArchitectureMismatch(f"layer {k}: shape {v.shape} vs {params[k].shape}")
            params[k] += lam * v
    return params


def apply_edit(base: ToyModel, recipe: Union[EditRecipe, Sequence[Tuple[Mapping[str, np.ndarray], float]]]) -> ToyModel:
    entries = recipe.entries if isinstance(recipe, EditRecipe) else list(recipe)
    return ToyModel.from_params(apply_edit_params(base.params(), entries))


def coefficient_sweep(base: ToyModel, components: Union[Mapping[str, TaskVector], Sequence[TaskVector]],
                      grid: Sequence[float] = DEFAULT_GRID, task: Optional[ToyTask] = None) -> SweepCurve:
    """Evaluate ``base + lam * component`` on ``task`` for every component and grid point."""
    if task is None:
        raise InvalidSpec("coefficient_sweep needs a task")
    if len(grid) == 0:
        raise InvalidSpec("grid must be nonempty")
    if not isinstance(components, Mapping):
        components = {f"c{i}": c for i, c in enumerate(components)}
    points = []
    for cid, comp in components.items():
        for lam in grid:
            acc, loss = evaluate(apply_edit(base, [(comp, float(lam))]), task)
            points.append(SweepPoint(cid, float(lam), acc, loss))
    return SweepCurve(points)
