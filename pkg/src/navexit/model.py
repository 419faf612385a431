"""Layered classifiers with a shared head.

Two backends implement the same small protocol (``embed``, ``step``,
``head_logits``/``label_at``):

* ``SyntheticTransformer`` runs a real numeric forward pass through pre-norm
  transformer blocks. Its weights are generated from a seed with a portable
  PRNG, and task-specific stabilization depths are planted into the residual
  stream so tests know the right answer.
* ``PredictionTable`` stores per-layer predicted labels directly and is the
  exact oracle backend for selection logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InputShapeError, LayerIndexError, SpecValidationError
from .rng import SplitMix64, derive_key

DECOY_SCALE = 1.0  # class-channel value of the decoy label written by the embedding
REVEAL_SCALE = 8.0  # written to the true class at the planted depth
FLIP_SCALE = 16.0  # written to the wrong class at the over-thinking layer; must exceed REVEAL_SCALE + DECOY_SCALE
GATE_GAIN = 1.0e4  # saturates the ReLU6 gates, so planted writes are exactly 0 or 1
GATE_PENALTY = 2.0
RMS_EPS = 1e-6


@dataclass(frozen=True)
class Sample:
    sample_id: str
    task_id: str
    label: str
    features: np.ndarray | None = None
    row: str | None = None

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        same_features = (
            (self.features is None and other.features is None)
            or (
                self.features is not None
                and other.features is not None
                and np.array_equal(self.features, other.features)
            )
        )
        return (
            self.sample_id == other.sample_id
            and self.task_id == other.task_id
            and self.label == other.label
            and self.row == other.row
            and same_features
        )

    __hash__ = None


@dataclass(frozen=True)
class HiddenState:
    activations: np.ndarray
    layer_index: int
    ref: str | None = None  # table backend: the row this state belongs to


@dataclass
class LayerCounter:
    """Call-local instrumentation: number of layer applications performed."""

    count: int = 0


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def rms_norm(h: np.ndarray) -> np.ndarray:
    return h / np.sqrt(np.mean(h * h, axis=-1, keepdims=True) + RMS_EPS)


def relu6(x: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, 0.0), 6.0)


# --------------------------------------------------------------------------
# synthetic transformer


@dataclass
class SyntheticSpec:
    hidden_dim: int = 64
    num_layers: int = 12
    num_classes: int = 4
    seed: int = 0
    planted_depths: dict[str, int] | None = None
    overthink_rate: float = 0.0
    samples_per_task: int = 100
    seq_len: int = 8
    mlp_ratio: int = 4
    noise_features: int = 8
    overthink_layer: int | None = None  # defaults to the last layer
    head_scale: float = 1.0

    def tasks(self) -> dict[str, int]:
        if self.planted_depths:
            return {k: int(v) for k, v in sorted(self.planted_depths.items())}
        return {"task0": max(1, self.num_layers // 2)}

    def reserved_channels(self) -> int:
        return 3 * self.num_classes + len(self.tasks()) + 1

    def validate(self) -> None:
        bad: dict[str, str] = {}
        if not isinstance(self.num_layers, int) or self.num_layers < 1:
            bad["num_layers"] = "must be an integer >= 1"
        if not isinstance(self.num_classes, int) or self.num_classes < 2:
            bad["num_classes"] = "must be an integer >= 2"
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            bad["seed"] = "must be an unsigned 64-bit integer"
        if not 0.0 <= float(self.overthink_rate) <= 1.0:
            bad["overthink_rate"] = "must lie in [0, 1]"
        if not isinstance(self.samples_per_task, int) or self.samples_per_task < 1:
            bad["samples_per_task"] = "must be an integer >= 1"
        if not isinstance(self.seq_len, int) or self.seq_len < 1:
            bad["seq_len"] = "must be an integer >= 1"
        if not isinstance(self.mlp_ratio, int) or self.mlp_ratio < 1:
            bad["mlp_ratio"] = "must be an integer >= 1"
        if not isinstance(self.noise_features, int) or self.noise_features < 0:
            bad["noise_features"] = "must be an integer >= 0"
        if self.head_scale <= 0:
            bad["head_scale"] = "must be positive"
        if "num_layers" not in bad:
            if self.planted_depths is not None:
                for task, depth in self.planted_depths.items():
                    if not task:
                        bad["planted_depths"] = "task ids must be nonempty"
                    elif not isinstance(depth, int) or not 1 <= depth <= self.num_layers:
                        bad["planted_depths"] = f"depth for {task!r} must lie in [1, {self.num_layers}]"
            if self.overthink_layer is not None and not 1 <= self.overthink_layer <= self.num_layers:
                bad["overthink_layer"] = f"must lie in [1, {self.num_layers}]"
        if "num_classes" not in bad and "planted_depths" not in bad:
            need = self.reserved_channels() + 4
            if not isinstance(self.hidden_dim, int) or self.hidden_dim < need:
                bad["hidden_dim"] = f"must be an integer >= {need} for this class/task count"
        if bad:
            raise SpecValidationError(bad)


@dataclass(frozen=True)
class ChannelLayout:
    """Where the planted signals live in the residual stream and the input vector."""

    num_classes: int
    tasks: tuple[str, ...]
    noise_features: int

    @property
    def cls(self) -> slice:
        return slice(0, self.num_classes)

    @property
    def truth(self) -> slice:
        return slice(self.num_classes, 2 * self.num_classes)

    @property
    def wrong(self) -> slice:
        return slice(2 * self.num_classes, 3 * self.num_classes)

    def task(self, index: int) -> int:
        return 3 * self.num_classes + index

    @property
    def keep(self) -> int:
        # set to 1 for ordinary samples, 0 for samples planted to over-think
        return 3 * self.num_classes + len(self.tasks)

    @property
    def reserved(self) -> int:
        return self.keep + 1

    # input vector: [task one-hot | keep | truth one-hot | wrong one-hot | decoy one-hot | noise]
    @property
    def input_dim(self) -> int:
        return len(self.tasks) + 1 + 3 * self.num_classes + self.noise_features

    def encode(self, task: str, truth: int, decoy: int, wrong: int, overthink: bool, noise) -> np.ndarray:
        K, nt = self.num_classes, len(self.tasks)
        x = np.zeros(self.input_dim, dtype=np.float64)
        x[self.tasks.index(task)] = 1.0
        x[nt] = 0.0 if overthink else 1.0
        x[nt + 1 + truth] = 1.0
        x[nt + 1 + K + wrong] = 1.0
        x[nt + 1 + 2 * K + decoy] = 1.0
        x[nt + 1 + 3 * K:] = noise
        return x


class SyntheticTransformer:
    """Pre-norm transformer: single-head attention + ReLU6 MLP per block, RMSNorm, mean-pooled linear head."""

    backend = "synthetic"

    def __init__(self, spec: SyntheticSpec, weights: dict[str, np.ndarray]):
        spec.validate()
        self.spec = spec
        self.num_layers = spec.num_layers
        self.hidden_dim = spec.hidden_dim
        self.label_set = tuple(f"c{k}" for k in range(spec.num_classes))
        self.layout = ChannelLayout(spec.num_classes, tuple(spec.tasks()), spec.noise_features)
        self.weights = weights
        self._check_weights()
        self._layers = [
            tuple(weights[f"layer{l}.{name}"] for name in ("wq", "wk", "wv", "wo", "w1", "w2"))
            for l in range(1, self.num_layers + 1)
        ]

    @property
    def input_dim(self) -> int:
        return self.layout.input_dim

    def _check_weights(self):
        D, T = self.hidden_dim, self.spec.seq_len
        expect = {"embed": (self.input_dim, D), "pos": (T, D), "head": (D, self.spec.num_classes)}
        for l in range(1, self.num_layers + 1):
            for name in ("wq", "wk", "wv", "wo"):
                expect[f"layer{l}.{name}"] = (D, D)
        for name, shape in expect.items():
            if name not in self.weights:
                raise InputShapeError(f"missing weight array {name!r}")
            if self.weights[name].shape != shape:
                raise InputShapeError(f"weight {name!r} has shape {self.weights[name].shape}, expected {shape}")
        for l in range(1, self.num_layers + 1):
            w1, w2 = self.weights[f"layer{l}.w1"], self.weights[f"layer{l}.w2"]
            if w1.shape[0] != D or w2.shape != (w1.shape[1], D):
                raise InputShapeError(f"layer {l} MLP weights have inconsistent shapes")

    @classmethod
    def generate(cls, spec: SyntheticSpec) -> "SyntheticTransformer":
        spec.validate()
        layout = ChannelLayout(spec.num_classes, tuple(spec.tasks()), spec.noise_features)
        D, T, K, L = spec.hidden_dim, spec.seq_len, spec.num_classes, spec.num_layers
        R = layout.reserved
        hidden = spec.mlp_ratio * D
        depths = spec.tasks()
        flip_layer = spec.overthink_layer or L

        def draw(name, shape, fan_in, gain=1.0):
            bound = gain * math.sqrt(3.0 / fan_in)
            rng = SplitMix64(derive_key(spec.seed, name))
            return rng.uniform(int(np.prod(shape)), -bound, bound).reshape(shape)

        w: dict[str, np.ndarray] = {}
        emb = draw("embed", (layout.input_dim, D), max(1, layout.input_dim))
        emb[:, :R] = 0.0
        nt = len(layout.tasks)
        for i in range(nt):
            emb[i, layout.task(i)] = 1.0
        emb[nt, layout.keep] = 1.0
        for k in range(K):
            emb[nt + 1 + k, layout.truth.start + k] = 1.0
            emb[nt + 1 + K + k, layout.wrong.start + k] = 1.0
            emb[nt + 1 + 2 * K + k, layout.cls.start + k] = DECOY_SCALE
        w["embed"] = emb
        pos = draw("pos", (T, D), 1, gain=0.5)
        pos[:, :R] = 0.0
        w["pos"] = pos

        for l in range(1, L + 1):
            for name in ("wq", "wk", "wv"):
                w[f"layer{l}.{name}"] = draw(f"layer{l}.{name}", (D, D), D)
            wo = draw(f"layer{l}.wo", (D, D), D, gain=0.5)
            wo[:, :R] = 0.0  # attention never writes planted channels
            w[f"layer{l}.wo"] = wo

            w1 = draw(f"layer{l}.w1", (D, hidden), D)
            w2 = draw(f"layer{l}.w2", (hidden, D), hidden, gain=0.5)
            w2[:, :R] = 0.0
            gates_in, gates_out = [], []
            for t_index, task in enumerate(layout.tasks):
                if depths[task] != l:
                    continue
                # unit (task, k) fires iff the sample belongs to ``task`` and its truth is k
                for k in range(K):
                    col = np.zeros(D)
                    col[layout.truth.start + k] = GATE_GAIN
                    for other in range(nt):
                        if other != t_index:
                            col[layout.task(other)] = -GATE_GAIN * GATE_PENALTY
                    row = np.zeros(D)
                    row[layout.cls.start + k] = REVEAL_SCALE
                    gates_in.append(col)
                    gates_out.append(row)
            if l == flip_layer:
                # unit k fires iff the sample is marked to over-think and its wrong label is k
                for k in range(K):
                    col = np.zeros(D)
                    col[layout.wrong.start + k] = GATE_GAIN
                    col[layout.keep] = -GATE_GAIN * GATE_PENALTY
                    row = np.zeros(D)
                    row[layout.cls.start + k] = FLIP_SCALE
                    gates_in.append(col)
                    gates_out.append(row)
            if gates_in:
                w1 = np.concatenate([w1, np.stack(gates_in, axis=1)], axis=1)
                w2 = np.concatenate([w2, np.stack(gates_out, axis=0)], axis=0)
            w[f"layer{l}.w1"] = w1
            w[f"layer{l}.w2"] = w2

        head = np.zeros((D, K))
        head[layout.cls.start:layout.cls.stop, :] = np.eye(K) * spec.head_scale
        w["head"] = head
        return cls(spec, {k: v.astype(np.float32) for k, v in w.items()})

    # -- forward pass

    def _input(self, x) -> np.ndarray:
        if isinstance(x, Sample):
            if x.features is None:
                raise InputShapeError(f"sample {x.sample_id!r} carries no feature vector")
            x = x.features
        arr = np.asarray(x, dtype=np.float32)
        if arr.ndim != 1 or arr.shape[0] != self.input_dim:
            raise InputShapeError(f"expected a feature vector of length {self.input_dim}, got shape {arr.shape}")
        return arr

    def embed(self, x) -> HiddenState:
        arr = self._input(x)
        h = arr @ self.weights["embed"] + self.weights["pos"]
        return HiddenState(h, 0)

    def step(self, state: HiddenState) -> HiddenState:
        """Apply the next layer: h_l = f_l(h_{l-1})."""
        l = state.layer_index + 1
        if l > self.num_layers:
            raise LayerIndexError(f"state is already at the last layer ({self.num_layers})")
        wq, wk, wv, wo, w1, w2 = self._layers[l - 1]
        h = state.activations
        a = rms_norm(h)
        q, k, v = a @ wq, a @ wk, a @ wv
        scores = (q @ k.T) * np.float32(1.0 / math.sqrt(self.hidden_dim))
        scores = np.exp(scores - scores.max(axis=-1, keepdims=True))
        scores /= scores.sum(axis=-1, keepdims=True)
        h = h + (scores @ v) @ wo
        a = rms_norm(h)
        h = h + (relu6(a @ w1) * np.float32(1.0 / 6.0)) @ w2
        return HiddenState(h, l)

    def head_logits(self, state: HiddenState) -> np.ndarray:
        # final normalization is applied before the shared head at every depth
        pooled = rms_norm(state.activations).mean(axis=0)
        return (pooled @ self.weights["head"]).astype(np.float64)

    def label_at(self, state: HiddenState) -> str:
        return self.label_set[int(np.argmax(self.head_logits(state)))]

    def confidence_at(self, state: HiddenState) -> tuple[str, float]:
        probs = softmax(self.head_logits(state))
        k = int(np.argmax(probs))
        return self.label_set[k], float(probs[k])

    def __eq__(self, other):
        if not isinstance(other, SyntheticTransformer):
            return NotImplemented
        return self.spec == other.spec and self.weights.keys() == other.weights.keys() and all(
            np.array_equal(self.weights[k], other.weights[k]) for k in self.weights
        )

    __hash__ = None


# --------------------------------------------------------------------------
# prediction table


@dataclass(frozen=True)
class TableRow:
    truth: str
    predictions: tuple[str, ...]


@dataclass
class PredictionTable:
    label_set: tuple[str, ...]
    rows: dict[str, TableRow]
    num_layers: int = field(init=False)

    backend = "table"
    hidden_dim = 0

    def __post_init__(self):
        self.label_set = tuple(self.label_set)
        self.rows = {str(k): TableRow(v.truth, tuple(v.predictions)) for k, v in self.rows.items()}
        lengths = {len(r.predictions) for r in self.rows.values()}
        if not self.rows:
            raise InputShapeError("prediction table has no rows")
        if len(lengths) != 1:
            raise InputShapeError(f"prediction rows have differing lengths {sorted(lengths)}")
        self.num_layers = lengths.pop()
        if self.num_layers < 1:
            raise InputShapeError("prediction rows must have at least one layer")
        known = set(self.label_set)
        for rid, r in self.rows.items():
            unknown = {r.truth, *r.predictions} - known
            if unknown:
                raise InputShapeError(f"row {rid!r} uses labels outside the label set: {sorted(unknown)}")

    @classmethod
    def from_lists(cls, rows: dict, label_set=None) -> "PredictionTable":
        """``rows`` maps row id to ``(truth, [pred_1, ..., pred_L])``."""
        built = {str(k): TableRow(t, tuple(p)) for k, (t, p) in rows.items()}
        if label_set is None:
            label_set = sorted({lab for r in built.values() for lab in (r.truth, *r.predictions)})
        return cls(tuple(label_set), built)

    def _row_id(self, x) -> str:
        if isinstance(x, Sample):
            x = x.row if x.row is not None else x.sample_id
        rid = str(x)
        if rid not in self.rows:
            raise InputShapeError(f"no prediction row {rid!r} in table")
        return rid

    def embed(self, x) -> HiddenState:
        return HiddenState(np.zeros(0), 0, self._row_id(x))

    def step(self, state: HiddenState) -> HiddenState:
        l = state.layer_index + 1
        if l > self.num_layers:
            raise LayerIndexError(f"state is already at the last layer ({self.num_layers})")
        return HiddenState(state.activations, l, state.ref)

    def label_at(self, state: HiddenState) -> str:
        if state.layer_index < 1:
            raise LayerIndexError("the head needs a state at layer >= 1")
        return self.rows[state.ref].predictions[state.layer_index - 1]

    def confidence_at(self, state: HiddenState) -> tuple[str, float]:
        return self.label_at(state), 1.0

    def samples(self, task_id: str = "task0") -> list[Sample]:
        return [Sample(rid, task_id, r.truth, row=rid) for rid, r in self.rows.items()]


LayeredModel = Union[SyntheticTransformer, PredictionTable]


# --------------------------------------------------------------------------
# operations


def _check_layer(model: LayeredModel, l: int, low: int = 1) -> None:
    if not isinstance(l, (int, np.integer)) or not low <= l <= model.num_layers:
        raise LayerIndexError(f"layer index {l!r} outside [{low}, {model.num_layers}]")


def embed(model: LayeredModel, x) -> HiddenState:
    return model.embed(x)


def forward_to(model: LayeredModel, x, l: int, counter: LayerCounter | None = None) -> HiddenState:
    _check_layer(model, l)
    state = model.embed(x)
    for _ in range(l):
        state = model.step(state)
        if counter is not None:
            counter.count += 1
    return state


def predict_at(model: LayeredModel, x, l: int) -> str:
    return model.label_at(forward_to(model, x, l))


def head_confidence(model: LayeredModel, x, l: int) -> tuple[str, float]:
    return model.confidence_at(forward_to(model, x, l))


def layer_trace(model: LayeredModel, x) -> list[str]:
    """Predicted label at every layer 1..L from a single incremental pass."""
    state = model.embed(x)
    out = []
    for _ in range(model.num_layers):
        state = model.step(state)
        out.append(model.label_at(state))
    return out


# --------------------------------------------------------------------------
# activated parameters


@dataclass(frozen=True)
class ParamModel:
    """Activated parameters (billions) as ``base + l * per_layer``."""

    base_params: float
    per_layer_params: float

    def __post_init__(self):
        if self.base_params < 0 or self.per_layer_params <= 0:
            raise ValueError("need base_params >= 0 and per_layer_params > 0")

    @classmethod
    def fit(cls, num_layers: int, full_size: float, anchor_layer: int, anchor_size: float) -> "ParamModel":
        if anchor_layer == num_layers:
            raise ValueError("anchor layer must differ from the full depth")
        per_layer = (full_size - anchor_size) / (num_layers - anchor_layer)
        return cls(full_size - num_layers * per_layer, per_layer)

    def at(self, l: int) -> float:
        if l < 0:
            raise LayerIndexError(f"layer index {l} must be >= 0")
        return self.base_params + l * self.per_layer_params


def activated_params(pm: ParamModel, l: int, ndigits: int = 2) -> float:
    return round(pm.at(l), ndigits)
