"""L2-regularized logistic regression trained by seeded stochastic gradient descent.

Objective: sum_i log(1 + exp(-y_i (w.x_i + b))) + (lam/2) ||w||^2, minimized
one example at a time with step size eta_t = 1/(lam * t), t counting
cumulative steps (so incremental updates continue the schedule). Weights are
kept as scale * direction internally so the per-step shrink stays O(nnz).
The bias is not regularized. The linear form is clamped to [-30, 30] before
the sigmoid; that cannot change any ranking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import FeatureVector

CLAMP = 30.0

PROVENANCES = ("human_judgment", "synthetic_seed", "pseudo_negative")


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1e-4
    epochs: int = 5
    seed: int = 0
    mode: str = "scratch"  # scratch | incremental

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.mode not in ("scratch", "incremental"):
            raise ValueError(f"unknown training mode {self.mode!r}")


@dataclass(frozen=True)
class LabeledExample:
    features: FeatureVector
    label: int  # +1 positive, -1 negative
    provenance: str = "human_judgment"

    def __post_init__(self):
        if self.label not in (1, -1):
            raise ValueError("label must be +1 or -1")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance == "synthetic_seed" and self.label != 1:
            raise ValueError("synthetic seed examples must be positive")


class Model:
    """Trained linear model; treat as immutable once returned by train()."""

    def __init__(self, width: int):
        self.w = np.zeros(width, dtype=np.float64)
        self.bias = 0.0
        self.steps_taken = 0

    @property
    def width(self) -> int:
        return len(self.w)

    @property
    def weights(self) -> dict[int, float]:
        """Sparse view: feature index -> nonzero weight."""
        nz = np.flatnonzero(self.w)
        return {int(i): float(self.w[i]) for i in nz}

    def copy(self) -> "Model":
        m = Model(self.width)
        m.w = self.w.copy()
        m.bias = self.bias
        m.steps_taken = self.steps_taken
        return m

    def linear(self, features: FeatureVector) -> float:
        ids, vals = features.combined_arrays()
        total = float(np.dot(self.w[ids], vals)) if len(ids) else 0.0
        return total + self.bias


def _required_width(examples: list[LabeledExample]) -> int:
    width = 0
    for ex in examples:
        ids, _ = ex.features.combined_arrays()
        if len(ids):
            width = max(width, int(ids.max()) + 1)
    return width


def train(examples: list[LabeledExample], config: TrainConfig,
          prior: Model | None = None, width: int | None = None) -> Model:
    """Run config.epochs of seeded SGD over the examples.

    scratch zero-initializes and ignores prior; incremental continues from
    prior's weights and step count. Single-class input is allowed.
    """
    if not examples:
        raise ValueError("no training examples")
    if config.mode == "incremental":
        if prior is None:
            raise ValueError("incremental training requires a prior model")
        model = prior.copy()
        if width is not None and width != model.width:
            raise ValueError("width mismatch with prior model")
    else:
        model = Model(width if width is not None else _required_width(examples))

    arrays = []
    for ex in examples:
        ids, vals = ex.features.combined_arrays()
        arrays.append((ids if len(ids) else None, vals, float(ex.label)))

    rng = np.random.default_rng(config.seed)
    lam = config.lam
    v = model.w  # scale-factor representation: logical w = s * v
    s = 1.0
    b = model.bias
    t = model.steps_taken
    exp = math.exp
    dot_ = np.dot
    for _ in range(config.epochs):
        order = rng.permutation(len(arrays)).tolist()
        for i in order:
            ids, vals, y = arrays[i]
            t += 1
            eta = 1.0 / (lam * t)
            z = s * dot_(v[ids], vals).item() + b if ids is not None else b
            if z > CLAMP:
                z = CLAMP
            elif z < -CLAMP:
                z = -CLAMP
            g = 1.0 / (1.0 + exp(y * z))  # sigmoid(-margin), d(-loss)/d(margin)
            s *= 1.0 - 1.0 / t  # eta*lam, written so the t=1 shrink is exactly zero
            if s == 0.0:
                v[:] = 0.0
                s = 1.0
            if ids is not None:
                v[ids] += (eta * g * y / s) * vals
            b += eta * g * y
    model.w = v * s
    model.bias = b
    model.steps_taken = t
    return model


def score(model: Model, features: FeatureVector) -> float:
    """sigmoid of the clamped linear form; in (0, 1)."""
    z = model.linear(features)
    return float(sigmoid(np.clip(z, -CLAMP, CLAMP)))


def score_dual(model_sparse: Model, model_dense: Model, features: FeatureVector) -> float:
    """Dual-model score: sparse-part sigmoid + dense-part sigmoid, in (0, 2)."""
    if features.dense is None:
        raise ValueError("dual scoring requires a dense part")
    if features.dense_offset != 0:
        raise ValueError("dual scoring expects the dense block at offset 0")
    sparse_part = FeatureVector(features.ids, features.vals)
    dense_part = FeatureVector(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64),
                               dense=features.dense, dense_offset=0)
    return score(model_sparse, sparse_part) + score(model_dense, dense_part)


@dataclass(frozen=True)
class SparseGradient:
    w: dict[int, float]
    bias: float


def loss_and_gradient(model: Model, example: LabeledExample,
                      lam: float = 0.0) -> tuple[float, SparseGradient]:
    """Regularized logistic loss and its exact gradient at the model.

    The gradient covers the union of the example support and (for lam > 0)
    the model's nonzero weights; the bias is never regularized.
    """
    ids, vals, y = *example.features.combined_arrays(), float(example.label)
    z = model.linear(example.features)
    zc = float(np.clip(z, -CLAMP, CLAMP))
    m = y * zc
    loss = float(np.log1p(np.exp(-m)))
    g = -float(sigmoid(-m)) * y
    grad: dict[int, float] = {int(i): g * float(x) for i, x in zip(ids, vals)}
    if lam > 0.0:
        loss += 0.5 * lam * float(np.dot(model.w, model.w))
        for i in np.flatnonzero(model.w):
            grad[int(i)] = grad.get(int(i), 0.0) + lam * float(model.w[i])
    return loss, SparseGradient(grad, g)


MODEL_HEADER = "calrank-model v1"


def save_model(model: Model, path: str | Path) -> None:
    """Snapshot: versioned header, width, steps, bias, then index/weight pairs."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(MODEL_HEADER + "\n")
        fh.write(f"width\t{model.width}\n")
        fh.write(f"steps\t{model.steps_taken}\n")
        fh.write(f"bias\t{model.bias!r}\n")
        for i in np.flatnonzero(model.w):
            fh.write(f"{int(i)}\t{float(model.w[i])!r}\n")


def load_model(path: str | Path) -> Model:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != MODEL_HEADER:
            raise ValueError(f"{path}: unrecognized model header {header!r}")
        fields = {}
        for key in ("width", "steps", "bias"):
            name, value = fh.readline().rstrip("\n").split("\t", 1)
            if name != key:
                raise ValueError(f"{path}: expected {key!r} line, got {name!r}")
            fields[key] = value
        model = Model(int(fields["width"]))
        model.steps_taken = int(fields["steps"])
        model.bias = float(fields["bias"])
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            idx, weight = line.split("\t", 1)
            model.w[int(idx)] = float(weight)
    return model
