"""Fully connected binary classifier whose first hidden layer is the embedding.

Default topology is ``input -> 3 -> 10 -> 1`` with leaky ReLU hidden units
and a sigmoid output.  Everything is plain numpy: forward pass, hand-written
backpropagation, Adam, mini-batch training with early stopping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

PROB_CLIP = 1e-12
ACTIVATIONS = ("sigmoid", "tanh", "relu", "leaky_relu")


class TrainingDiverged(RuntimeError):
    """Raised when a loss value stops being finite."""


@dataclass(frozen=True)
class Activation:
    kind: str = "leaky_relu"
    alpha: float = 0.01

    def __post_init__(self):
        if self.kind not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.kind!r}; choose from {ACTIVATIONS}")
        if self.kind == "leaky_relu" and not 0 < self.alpha < 1:
            raise ValueError("leaky_relu alpha must lie in (0, 1)")

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        if self.kind == "sigmoid":
            return expit(a)
        if self.kind == "tanh":
            return np.tanh(a)
        if self.kind == "relu":
            return np.maximum(a, 0.0)
        return np.where(a > 0, a, self.alpha * a)

    def derivative(self, a, w):
        """dw/da given pre-activation ``a`` and output ``w``."""
        if self.kind == "sigmoid":
            return w * (1.0 - w)
        if self.kind == "tanh":
            return 1.0 - w * w
        if self.kind == "relu":
            return (a > 0).astype(float)
        return np.where(a > 0, 1.0, self.alpha)

    def to_json(self):
        return {"kind": self.kind, "alpha": self.alpha}


SIGMOID = Activation("sigmoid")


def activate(kind, a):
    """Apply an activation by name (or :class:`Activation`) elementwise."""
    if not isinstance(kind, Activation):
        kind = Activation(kind)
    return kind(a)


@dataclass(frozen=True)
class LayerSpec:
    """Layer widths.  ``hidden2_dim=None`` drops the second hidden layer.

    The output layer is always one sigmoid unit.
    """

    input_dim: int
    hidden1_dim: int = 3
    hidden2_dim: int | None = 10
    hidden_activation: Activation = field(default_factory=Activation)
    use_bias: bool = True

    def __post_init__(self):
        dims = [self.input_dim, self.hidden1_dim] + ([] if self.hidden2_dim is None else [self.hidden2_dim])
        if any(int(d) < 1 for d in dims):
            raise ValueError("all layer widths must be >= 1")
        if isinstance(self.hidden_activation, str):
            object.__setattr__(self, "hidden_activation", Activation(self.hidden_activation))

    @property
    def output_activation(self) -> Activation:
        return SIGMOID

    @property
    def widths(self) -> list[int]:
        w = [self.input_dim, self.hidden1_dim]
        if self.hidden2_dim is not None:
            w.append(self.hidden2_dim)
        return w + [1]

    def activation_for(self, layer: int) -> Activation:
        return SIGMOID if layer == len(self.widths) - 2 else self.hidden_activation

    def to_json(self):
        return {
            "input_dim": self.input_dim,
            "hidden1_dim": self.hidden1_dim,
            "hidden2_dim": self.hidden2_dim,
            "hidden_activation": self.hidden_activation.to_json(),
            "output_activation": "sigmoid",
            "use_bias": self.use_bias,
        }

    @classmethod
    def from_json(cls, obj):
        act = obj["hidden_activation"]
        return cls(
            obj["input_dim"],
            obj["hidden1_dim"],
            obj["hidden2_dim"],
            Activation(act["kind"], act["alpha"]),
            obj.get("use_bias", True),
        )


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """Weight matrices (``out x in``) and bias vectors, one pair per layer."""

    weights: tuple
    biases: tuple

    @property
    def theta1(self):
        return self.weights[0]

    @property
    def theta2(self):
        return self.weights[1] if len(self.weights) == 3 else None

    @property
    def theta3(self):
        return self.weights[-1]

    def arrays(self):
        return list(self.weights) + list(self.biases)

    @classmethod
    def from_arrays(cls, arrays):
        half = len(arrays) // 2
        return cls(tuple(arrays[:half]), tuple(arrays[half:]))

    def allclose(self, other, atol=0.0):
        return all(
            a.shape == b.shape and np.allclose(a, b, rtol=0, atol=atol)
            for a, b in zip(self.arrays(), other.arrays())
        )

    def equal(self, other) -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))

    def to_json(self):
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            tuple(np.array(w, dtype=float) for w in obj["weights"]),
            tuple(np.array(b, dtype=float) for b in obj["biases"]),
        )


@dataclass(frozen=True)
class ForwardTrace:
    """Pre-activations ``a`` and outputs ``w`` of every layer, batch-major."""

    a: tuple
    w: tuple

    @property
    def a1(self):
        return self.a[0]

    @property
    def w1(self):
        return self.w[0]

    @property
    def a2(self):
        return self.a[1] if len(self.a) == 3 else None

    @property
    def w2(self):
        return self.w[1] if len(self.w) == 3 else None

    @property
    def a3(self):
        return self.a[-1]

    @property
    def w3(self):
        return self.w[-1]


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class AdamState:
    m: tuple
    v: tuple
    t: int = 0

    @classmethod
    def zeros_like(cls, params: NetworkParams) -> "AdamState":
        z = tuple(np.zeros_like(a) for a in params.arrays())
        return cls(z, z, 0)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 50
    optimizer: AdamConfig = field(default_factory=AdamConfig)
    early_stop_patience: int = 5
    seed: int = 0
    min_delta: float = 1e-6

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.early_stop_patience < 0:
            raise ValueError("need epochs >= 1, batch_size >= 1 and patience >= 0")


@dataclass(eq=False)
class TrainReport:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    best_params: NetworkParams | None = None

    def rows(self):
        for i in range(len(self.train_loss)):
            yield i + 1, self.train_loss[i], self.train_acc[i], self.val_loss[i], self.val_acc[i]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,train_acc,val_loss,val_acc\n")
            for epoch, tl, ta, vl, va in self.rows():
                fh.write(f"{epoch},{tl!r},{ta!r},{vl!r},{va!r}\n")


def init_params(spec: LayerSpec, seed: int = 0) -> NetworkParams:
    """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` weights, zero biases."""
    rng = np.random.default_rng(seed)
    widths = spec.widths
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(tuple(weights), tuple(biases))


def zero_params(spec: LayerSpec) -> NetworkParams:
    widths = spec.widths
    return NetworkParams(
        tuple(np.zeros((o, i)) for i, o in zip(widths[:-1], widths[1:])),
        tuple(np.zeros(o) for o in widths[1:]),
    )


def forward(params: NetworkParams, spec: LayerSpec, x) -> ForwardTrace:
    """Run the network on one feature vector or a batch (rows).

    For a 1-D ``x`` every field of the trace is 1-D; the output layer then
    holds a length-1 vector.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ValueError(f"expected {spec.input_dim} features, got shape {x.shape}")
    a_list, w_list = [], []
    prev = X
    for layer, (W, b) in enumerate(zip(params.weights, params.biases)):
        a = prev @ W.T
        if spec.use_bias:
            a = a + b
        w = spec.activation_for(layer)(a)
        a_list.append(a)
        w_list.append(w)
        prev = w
    if single:
        a_list = [a[0] for a in a_list]
        w_list = [w[0] for w in w_list]
    return ForwardTrace(tuple(a_list), tuple(w_list))


def loss(p, y) -> float:
    """Mean binary cross-entropy, with ``p`` clipped away from 0 and 1."""
    p = np.clip(np.asarray(p, dtype=float).ravel(), PROB_CLIP, 1.0 - PROB_CLIP)
    y = np.asarray(y, dtype=float).ravel()
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def backward(trace: ForwardTrace, params: NetworkParams, spec: LayerSpec, x, y) -> NetworkParams:
    """Gradients of the mean cross-entropy, shaped like ``params``.

    Output delta is ``w_out - y``; each hidden delta is the next layer's
    delta pushed back through the transposed weights and multiplied by the
    layer's own activation derivative.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    a_list = [np.atleast_2d(a) for a in trace.a]
    w_list = [np.atleast_2d(w) for w in trace.w]
    if len(a_list) != len(params.weights) or a_list[0].shape[0] != X.shape[0]:
        raise ValueError("trace does not belong to these params / inputs")
    n = X.shape[0]
    y = np.asarray(y, dtype=float).reshape(n, 1)

    delta = w_list[-1] - y
    dW, db = [None] * len(params.weights), [None] * len(params.weights)
    for layer in range(len(params.weights) - 1, -1, -1):
        prev = X if layer == 0 else w_list[layer - 1]
        dW[layer] = delta.T @ prev / n
        db[layer] = delta.mean(axis=0) if spec.use_bias else np.zeros_like(params.biases[layer])
        if layer > 0:
            back = delta @ params.weights[layer]
            delta = back * spec.activation_for(layer - 1).derivative(a_list[layer - 1], w_list[layer - 1])
    return NetworkParams(tuple(dW), tuple(db))


def adam_step(params: NetworkParams, grads: NetworkParams, state: AdamState, config: AdamConfig):
    """One bias-corrected Adam update.  Returns ``(new_params, new_state)``."""
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_p.append(p - config.lr * m_hat / (np.sqrt(v_hat) + config.eps))
        new_m.append(m)
        new_v.append(v)
    return NetworkParams.from_arrays(new_p), AdamState(tuple(new_m), tuple(new_v), t)


def epoch_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def _evaluate(params, spec, X, y):
    p = forward(params, spec, X).w3[:, 0]
    return loss(p, y), float(np.mean((p >= 0.5) == (y == 1)))


def fit_minibatch(params, grad_fn, eval_fn, n_train, config: TrainConfig, report: TrainReport):
    """Shared Adam / early-stopping loop; fills ``report`` and returns per-epoch params.

    ``grad_fn(params, idx)`` returns ``(batch_loss, grads)``; ``eval_fn(params)``
    returns ``(train_loss, train_acc, val_loss, val_acc)`` for the epoch log.
    The monitored quantity is validation loss; an epoch counts as an
    improvement when it beats the best so far by at least ``min_delta``.
    """
    rng = np.random.default_rng(config.seed)
    state = AdamState.zeros_like(params)
    snapshots = []
    best_loss, wait = math.inf, 0
    for epoch in range(1, config.epochs + 1):
        for idx in epoch_batches(n_train, config.batch_size, rng):
            batch_loss, grads = grad_fn(params, idx)
            if not math.isfinite(batch_loss):
                raise TrainingDiverged(f"non-finite training loss in epoch {epoch}")
            params, state = adam_step(params, grads, state, config.optimizer)
        tl, ta, vl, va = eval_fn(params)
        if not (math.isfinite(tl) and math.isfinite(vl)):
            raise TrainingDiverged(f"non-finite loss after epoch {epoch}")
        report.train_loss.append(tl)
        report.train_acc.append(ta)
        report.val_loss.append(vl)
        report.val_acc.append(va)
        report.stopped_epoch = epoch
        snapshots.append(params)
        if vl < best_loss - config.min_delta:
            best_loss, wait = vl, 0
        else:
            wait += 1
            if wait >= config.early_stop_patience:
                break
    # sub-min_delta gains do not reset patience but still count for the best snapshot
    report.best_epoch = int(np.argmin(report.val_loss)) + 1
    report.best_params = snapshots[report.best_epoch - 1]
    return snapshots


def train(data, spec: LayerSpec, config: TrainConfig = TrainConfig(), init: NetworkParams | None = None) -> TrainReport:
    """Mini-batch Adam training with validation-loss early stopping.

    ``data`` is a :class:`~custvec.dataset.SplitSet`; its train and
    validation parts must be labeled.  The returned report's
    ``best_params`` are the parameters at the epoch with the lowest
    validation loss.
    """
    tr, va = data.train, data.validation
    for name, part in (("train", tr), ("validation", va)):
        if len(part) == 0:
            raise ValueError(f"{name} split is empty")
        if part.y is None:
            raise ValueError(f"{name} split is unlabeled")
    Xt, yt = tr.X, tr.y.astype(float)
    Xv, yv = va.X, va.y.astype(float)
    params = init if init is not None else init_params(spec, config.seed)

    def grad_fn(p, idx):
        xb, yb = Xt[idx], yt[idx]
        trace = forward(p, spec, xb)
        return loss(trace.w3, yb), backward(trace, p, spec, xb, yb)

    def eval_fn(p):
        return (*_evaluate(p, spec, Xt, yt), *_evaluate(p, spec, Xv, yv))

    report = TrainReport()
    fit_minibatch(params, grad_fn, eval_fn, len(tr), config, report)
    return report


def predict_proba(params: NetworkParams, spec: LayerSpec, x):
    """Probability of the positive class; scalar for one vector, array for a batch."""
    out = forward(params, spec, x).w3
    return float(out[0]) if np.ndim(x) == 1 else out[:, 0]


def classify(params: NetworkParams, spec: LayerSpec, x, threshold: float = 0.5):
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie strictly between 0 and 1")
    p = predict_proba(params, spec, x)
    if np.ndim(p) == 0:
        return int(p >= threshold)
    return (p >= threshold).astype(np.int64)
