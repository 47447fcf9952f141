"""Dense networks over prototype vectors, written directly on numpy.

Covers three jobs: per-layer linear probes (no hidden layer, sigmoid output),
binary detection MLPs, and 9-class attribution MLPs. Training uses AdamW with
decoupled weight decay and early stopping on validation accuracy.

Numeric policy: parameters are float32 by default (float64 available for
gradient checking); all forward/backward arithmetic, losses, and optimizer
moments run in float64 so softmax rows normalize to 1 within 1e-9 and loss
accumulation keeps full precision.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .feature_store import FeatureSet, FeatureStoreError, _Reader

FMLP_MAGIC = b"FMLP"
FMLP_VERSION = 1

OUTPUT_SIGMOID = "sigmoid"
OUTPUT_SOFTMAX = "softmax"

LOSS_BCE = "binary-cross-entropy"
LOSS_CE = "cross-entropy"

_PROB_FLOOR = 1e-12  # clamp inside losses so saturated outputs stay finite


@dataclass(frozen=True)
class MlpArchitecture:
    """Layer plan: input width, hidden widths (may be empty), output arm."""

    input_dim: int
    hidden: tuple[int, ...]
    output_units: int
    output_kind: str  # OUTPUT_SIGMOID or OUTPUT_SOFTMAX

    def __post_init__(self) -> None:
        if self.input_dim <= 0 or any(h <= 0 for h in self.hidden):
            raise ValueError("layer widths must be positive")
        if self.output_kind == OUTPUT_SIGMOID:
            if self.output_units != 1:
                raise ValueError("sigmoid arm has exactly one output unit")
        elif self.output_kind == OUTPUT_SOFTMAX:
            if self.output_units < 2:
                raise ValueError("softmax arm needs at least two output units")
        else:
            raise ValueError(f"unknown output kind {self.output_kind!r}")

    @property
    def loss_kind(self) -> str:
        return LOSS_BCE if self.output_kind == OUTPUT_SIGMOID else LOSS_CE

    @property
    def class_count(self) -> int:
        return 2 if self.output_kind == OUTPUT_SIGMOID else self.output_units

    def layer_dims(self) -> list[tuple[int, int]]:
        widths = [self.input_dim, *self.hidden, self.output_units]
        return list(zip(widths[:-1], widths[1:]))


@dataclass
class MlpModel:
    architecture: MlpArchitecture
    weights: list[np.ndarray]  # each (fan_in, fan_out)
    biases: list[np.ndarray]  # each (fan_out,)
    rng_seed: int

    def __post_init__(self) -> None:
        dims = self.architecture.layer_dims()
        if len(self.weights) != len(dims) or len(self.biases) != len(dims):
            raise ValueError("layer count mismatch with architecture")
        for (fi, fo), w, b in zip(dims, self.weights, self.biases):
            if w.shape != (fi, fo) or b.shape != (fo,):
                raise ValueError(f"tensor shape mismatch: expected {(fi, fo)}, got {w.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("non-finite parameter")

    def copy(self) -> "MlpModel":
        return MlpModel(
            self.architecture,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.rng_seed,
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-4
    patience: int = 15
    max_epochs: int = 500
    batch_size: int = 256
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ValueError("max_epochs and batch_size must be >= 1")


def init_model(arch: MlpArchitecture, seed: int, dtype=np.float32) -> MlpModel:
    """Seeded uniform init in +-1/sqrt(fan_in) for weights and biases."""
    rng = np.random.default_rng(seed)
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    for fan_in, fan_out in arch.layer_dims():
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        biases.append(rng.uniform(-bound, bound, size=fan_out).astype(dtype))
    return MlpModel(arch, weights, biases, rng_seed=seed)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cache(model: MlpModel, x: np.ndarray):
    """Returns (layer inputs, relu masks, output logits), all float64."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != model.architecture.input_dim:
        raise ValueError(f"batch must be (N, {model.architecture.input_dim})")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite value in batch")
    inputs: list[np.ndarray] = []
    masks: list[np.ndarray] = []
    n_hidden = len(model.architecture.hidden)
    for i in range(n_hidden):
        inputs.append(a)
        z = a @ model.weights[i].astype(np.float64) + model.biases[i].astype(np.float64)
        mask = z > 0
        masks.append(mask)
        a = np.where(mask, z, 0.0)
    inputs.append(a)
    logits = a @ model.weights[-1].astype(np.float64) + model.biases[-1].astype(np.float64)
    return inputs, masks, logits


def logits(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Pre-activation outputs (N, output_units), float64."""
    return _forward_cache(model, batch)[2]


def forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Output probabilities: (N, C) softmax rows or (N, 1) sigmoid values."""
    z = logits(model, batch)
    if model.architecture.output_kind == OUTPUT_SIGMOID:
        return _sigmoid(z)
    return _softmax(z)


def loss(pred: np.ndarray, target: np.ndarray, kind: str) -> float:
    """Mean negative log-likelihood of the targets; probabilities clamped."""
    p = np.asarray(pred, dtype=np.float64)
    y = np.asarray(target, dtype=np.int64)
    if kind == LOSS_BCE:
        p1 = p.reshape(p.shape[0])
        picked = np.where(y == 1, p1, 1.0 - p1)
    elif kind == LOSS_CE:
        picked = p[np.arange(p.shape[0]), y]
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return float(-np.mean(np.log(np.maximum(picked, _PROB_FLOOR))))


def _loss_and_gradients(model: MlpModel, batch: np.ndarray, targets: np.ndarray):
    inputs, masks, z = _forward_cache(model, batch)
    y = np.asarray(targets, dtype=np.int64)
    n = z.shape[0]
    if y.shape != (n,):
        raise ValueError("targets must be one class index per row")

    if model.architecture.output_kind == OUTPUT_SIGMOID:
        p = _sigmoid(z)
        value = loss(p, y, LOSS_BCE)
        delta = (p - y.reshape(-1, 1).astype(np.float64)) / n
    else:
        p = _softmax(z)
        value = loss(p, y, LOSS_CE)
        delta = p.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n

    grad_w: list[np.ndarray] = [None] * len(model.weights)  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * len(model.biases)  # type: ignore[list-item]
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w[i] = inputs[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].astype(np.float64).T) * masks[i - 1]
    return value, grad_w, grad_b


def backward(model: MlpModel, batch: np.ndarray, targets: np.ndarray):
    """Analytic gradients of the mean loss: (weight grads, bias grads), float64."""
    _, gw, gb = _loss_and_gradients(model, batch, targets)
    return gw, gb


def logit_input_gradients(model: MlpModel, batch: np.ndarray, class_index: int) -> np.ndarray:
    """d logit_c / d input for every row: (N, D), float64.

    Differentiates the pre-softmax (or pre-sigmoid) output, not the
    probability; class_index must be 0 on the sigmoid arm.
    """
    arch = model.architecture
    if not 0 <= class_index < arch.output_units:
        raise ValueError(f"class_index {class_index} outside 0..{arch.output_units - 1}")
    _, masks, _z = _forward_cache(model, batch)
    g = np.tile(model.weights[-1].astype(np.float64)[:, class_index], (batch.shape[0], 1))
    for i in range(len(model.weights) - 2, -1, -1):
        g = (g * masks[i]) @ model.weights[i].astype(np.float64).T
    return g


@dataclass
class AdamState:
    step: int
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]


def init_adam_state(model: MlpModel) -> AdamState:
    return AdamState(
        step=0,
        m_w=[np.zeros(w.shape, dtype=np.float64) for w in model.weights],
        v_w=[np.zeros(w.shape, dtype=np.float64) for w in model.weights],
        m_b=[np.zeros(b.shape, dtype=np.float64) for b in model.biases],
        v_b=[np.zeros(b.shape, dtype=np.float64) for b in model.biases],
    )


def adamw_step(model: MlpModel, gradients, state: AdamState, config: TrainConfig):
    """One decoupled-weight-decay Adam update, in place.

    w <- w - lr * mhat / (sqrt(vhat) + eps) - lr * weight_decay * w
    applied to weights and biases alike; moments kept in float64.
    """
    grad_w, grad_b = gradients
    state.step += 1
    t = state.step
    c1 = 1.0 - config.beta1**t
    c2 = 1.0 - config.beta2**t

    def update(param: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray) -> None:
        g = np.asarray(g, dtype=np.float64)
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        p64 = param.astype(np.float64)
        p64 -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
        p64 -= config.learning_rate * config.weight_decay * param.astype(np.float64)
        param[...] = p64.astype(param.dtype)

    for i in range(len(model.weights)):
        update(model.weights[i], grad_w[i], state.m_w[i], state.v_w[i])
        update(model.biases[i], grad_b[i], state.m_b[i], state.v_b[i])
    return model, state


def predict(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Class indices. Softmax: argmax (first index on ties). Sigmoid: p > 0.5."""
    p = forward(model, batch)
    if model.architecture.output_kind == OUTPUT_SIGMOID:
        return (p.reshape(-1) > 0.5).astype(np.int64)
    return np.argmax(p, axis=1).astype(np.int64)


def evaluate_accuracy(model: MlpModel, batch: np.ndarray, targets: np.ndarray) -> float:
    y = np.asarray(targets, dtype=np.int64)
    return float(np.mean(predict(model, batch) == y))


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    stopped_epoch: int = 0
    stop_reason: str = ""


def train_arrays(
    model: MlpModel,
    train_x: np.ndarray,
    train_y: np.ndarray,
    val_x: np.ndarray,
    val_y: np.ndarray,
    config: TrainConfig,
    progress=None,
) -> tuple[MlpModel, TrainHistory]:
    """Minibatch AdamW with early stopping on validation accuracy.

    Stops once `patience` epochs pass with no strict improvement, returning
    the parameters snapshotted at the best epoch (earliest on ties). Fully
    deterministic for a given config.seed.
    """
    if train_x.shape[0] == 0 or val_x.shape[0] == 0:
        raise ValueError("empty train or validation set")
    loss_kind = model.architecture.loss_kind
    rng = np.random.default_rng(config.seed)
    state = init_adam_state(model)
    history = TrainHistory()

    best_acc = -1.0
    best_epoch = 0
    best_weights = None
    n = train_x.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        batch_losses = []
        for lo in range(0, n, config.batch_size):
            idx = perm[lo : lo + config.batch_size]
            value, gw, gb = _loss_and_gradients(model, train_x[idx], train_y[idx])
            adamw_step(model, (gw, gb), state, config)
            batch_losses.append(value)
        val_acc = evaluate_accuracy(model, val_x, val_y)
        history.train_loss.append(float(np.mean(batch_losses)))
        history.val_accuracy.append(val_acc)
        if progress is not None:
            progress(epoch, history.train_loss[-1], val_acc)

        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_weights = ([w.copy() for w in model.weights], [b.copy() for b in model.biases])
        if epoch - best_epoch >= config.patience:
            history.stop_reason = "patience"
            break
    else:
        history.stop_reason = "max_epochs"

    history.best_epoch = best_epoch
    history.stopped_epoch = len(history.val_accuracy)
    assert best_weights is not None
    best_model = MlpModel(model.architecture, best_weights[0], best_weights[1], model.rng_seed)
    return best_model, history


def _labels_for_arch(arch: MlpArchitecture, fset: FeatureSet) -> np.ndarray:
    if arch.class_count == 2:
        return fset.authenticity_labels()
    return fset.attribution_labels()


def train_early_stop(
    model: MlpModel, train: FeatureSet, val: FeatureSet, config: TrainConfig, progress=None
) -> tuple[MlpModel, TrainHistory]:
    """train_arrays over FeatureSets; label arm chosen by the architecture."""
    arch = model.architecture
    return train_arrays(
        model,
        train.matrix(),
        _labels_for_arch(arch, train),
        val.matrix(),
        _labels_for_arch(arch, val),
        config,
        progress=progress,
    )


def linear_probe(
    train: FeatureSet, val: FeatureSet, config: TrainConfig
) -> tuple[MlpModel, float]:
    """No-hidden-layer sigmoid classifier on authenticity; returns best val accuracy."""
    arch = MlpArchitecture(train.dim, (), 1, OUTPUT_SIGMOID)
    model = init_model(arch, config.seed)
    best, history = train_early_stop(model, train, val, config)
    return best, history.val_accuracy[history.best_epoch - 1]


# ---------------------------------------------------------------------------
# FMLP checkpoint format: FPRO-style framing for trained models.
#
#     magic "FMLP" | version u16 | output_kind u8 (0 sigmoid, 1 softmax)
#     input_dim u32 | output_units u32 | hidden_count u16 | hidden widths u32 each
#     rng_seed u64
#     per layer (hidden layers then output): weight f32 row-major, bias f32
# ---------------------------------------------------------------------------


def write_model(model: MlpModel, path: str | Path) -> int:
    arch = model.architecture
    kind_byte = 0 if arch.output_kind == OUTPUT_SIGMOID else 1
    parts = [
        FMLP_MAGIC,
        struct.pack("<HBII", FMLP_VERSION, kind_byte, arch.input_dim, arch.output_units),
        struct.pack("<H", len(arch.hidden)),
        struct.pack(f"<{len(arch.hidden)}I", *arch.hidden) if arch.hidden else b"",
        struct.pack("<Q", model.rng_seed),
    ]
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    blob = b"".join(parts)
    Path(path).write_bytes(blob)
    return len(blob)


def read_model(path: str | Path) -> MlpModel:
    rd = _Reader(Path(path).read_bytes())
    if rd.take(4) != FMLP_MAGIC:
        raise FeatureStoreError(f"bad magic: {path} is not an FMLP file")
    version, kind_byte, input_dim, output_units = rd.unpack("<HBII")
    if version != FMLP_VERSION:
        raise FeatureStoreError(f"unsupported version {version} (expected {FMLP_VERSION})")
    (hidden_count,) = rd.unpack("<H")
    hidden = rd.unpack(f"<{hidden_count}I") if hidden_count else ()
    (rng_seed,) = rd.unpack("<Q")
    arch = MlpArchitecture(
        input_dim, tuple(hidden), output_units, OUTPUT_SIGMOID if kind_byte == 0 else OUTPUT_SOFTMAX
    )
    weights = []
    biases = []
    for fan_in, fan_out in arch.layer_dims():
        weights.append(
            np.frombuffer(rd.take(4 * fan_in * fan_out), dtype="<f4").reshape(fan_in, fan_out).copy()
        )
        biases.append(np.frombuffer(rd.take(4 * fan_out), dtype="<f4").copy())
    if rd.pos != len(rd.blob):
        raise FeatureStoreError(f"{len(rd.blob) - rd.pos} trailing bytes after last tensor")
    return MlpModel(arch, weights, biases, rng_seed=int(rng_seed))
