"""Fully connected ReLU classifier with a softmax head, trained with Adam.

Parameters of all layers live in one flat float64 buffer; ``MlpParams.layers``
holds (W, b) views into it with W shaped (fan_in, fan_out). Keeping a single
buffer lets the optimizer update everything with a handful of vector ops.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import EmptyDatasetError, ParameterError, ParseError, ShapeError


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple = (256, 128, 32)
    output_dim: int = 5

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if min((self.input_dim, self.output_dim) + self.hidden) < 1:
            raise ParameterError("all layer widths must be >= 1")

    @property
    def sizes(self) -> tuple:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def shapes(self) -> list:
        out = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            out += [(a, b), (b,)]
        return out

    @property
    def n_params(self) -> int:
        return sum(math.prod(s) for s in self.shapes)

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden": list(self.hidden), "output_dim": self.output_dim,
                "hidden_activation": "relu", "output_activation": "softmax"}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(int(d["input_dim"]), tuple(d["hidden"]), int(d["output_dim"]))


class MlpParams:
    def __init__(self, spec: MlpSpec, flat: np.ndarray | None = None):
        self.spec = spec
        self.flat = np.zeros(spec.n_params) if flat is None else np.asarray(flat, dtype=np.float64)
        if self.flat.shape != (spec.n_params,):
            raise ShapeError(f"expected {spec.n_params} parameters, got {self.flat.shape}")
        views, o = [], 0
        for shape in spec.shapes:
            k = math.prod(shape)
            views.append(self.flat[o:o + k].reshape(shape))
            o += k
        self.layers = list(zip(views[0::2], views[1::2]))

    def copy(self) -> "MlpParams":
        return MlpParams(self.spec, self.flat.copy())

    def __eq__(self, other):
        return isinstance(other, MlpParams) and self.spec == other.spec and np.array_equal(self.flat, other.flat)

    def __repr__(self):
        return f"MlpParams({self.spec}, n={self.flat.size})"


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, params: MlpParams, lr: float = 1e-3) -> "AdamState":
        n = params.flat.size
        return cls(np.zeros(n), np.zeros(n), 0, lr)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.step, self.lr, self.beta1, self.beta2, self.eps)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    lr: float = 1e-3

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ParameterError("epochs and batch_size must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    val_loss: float | None = None
    val_accuracy: float | None = None


@dataclass
class History:
    epochs: list = field(default_factory=list)

    def __len__(self):
        return len(self.epochs)

    def __getitem__(self, i) -> EpochStats:
        return self.epochs[i]

    @property
    def loss(self):
        return [e.loss for e in self.epochs]

    @property
    def val_accuracy(self):
        return [e.val_accuracy for e in self.epochs]


def init_params(spec: MlpSpec, seed: int = 0) -> MlpParams:
    """He-uniform weights, U(-sqrt(6/fan_in), +sqrt(6/fan_in)); zero biases."""
    rng = np.random.default_rng(seed)
    params = MlpParams(spec)
    for W, _ in params.layers:
        lim = math.sqrt(6.0 / W.shape[0])
        W[...] = rng.uniform(-lim, lim, size=W.shape)
    return params


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != params.spec.input_dim:
        raise ShapeError(f"network expects inputs of length {params.spec.input_dim}, got shape {x.shape}")
    return X, single


def logits(params: MlpParams, x) -> np.ndarray:
    X, single = _as_batch(params, x)
    h = X
    last = len(params.layers) - 1
    for i, (W, b) in enumerate(params.layers):
        h = h @ W + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(params: MlpParams, x) -> np.ndarray:
    """Class probabilities for one input (M,) or a batch (B, M)."""
    return _softmax(logits(params, x))


def predict(params: MlpParams, x) -> np.ndarray:
    # np.argmax breaks ties toward the lowest class index
    return np.argmax(logits(params, x), axis=-1)


def _check_labels(params, y, n):
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if y.size != n:
        raise ShapeError(f"{n} inputs but {y.size} labels")
    if y.size and (y.min() < 0 or y.max() >= params.spec.output_dim):
        raise ParameterError(f"labels must lie in 0..{params.spec.output_dim - 1}")
    return y


def loss_and_grad(params: MlpParams, X, y, out: MlpParams | None = None):
    """Mean sparse categorical cross-entropy and its gradient.

    The softmax and the cross-entropy are differentiated together, so the
    gradient at the logits is (p - onehot(y)) / B.
    """
    X, _ = _as_batch(params, X)
    y = _check_labels(params, y, X.shape[0])
    B = X.shape[0]
    grads = out if out is not None else MlpParams(params.spec)
    acts = [X]
    h = X
    last = len(params.layers) - 1
    for i, (W, b) in enumerate(params.layers):
        h = h @ W + b
        if i < last:
            np.maximum(h, 0.0, out=h)
        acts.append(h)
    z = h - h.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(B)
    loss = float(np.mean(lse - z[rows, y]))
    g = np.exp(z - lse[:, None])
    g[rows, y] -= 1.0
    g /= B
    for i in range(last, -1, -1):
        W, _ = params.layers[i]
        gW, gb = grads.layers[i]
        np.matmul(acts[i].T, g, out=gW)
        g.sum(axis=0, out=gb)
        if i > 0:
            g = g @ W.T
            g *= acts[i] > 0
    return loss, grads


def _adam_update(flat, gflat, state: AdamState):
    state.step += 1
    step_size = state.lr / (1.0 - state.beta1 ** state.step)
    c2 = 1.0 - state.beta2 ** state.step
    _backend.adam_update(flat, gflat, state.m, state.v, state.beta1, state.beta2, state.eps, step_size, c2)


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState):
    """One bias-corrected Adam update; inputs are left untouched."""
    if grads.flat.shape != params.flat.shape or state.m.shape != params.flat.shape:
        raise ShapeError("parameter, gradient and optimizer state shapes differ")
    new_params, new_state = params.copy(), state.copy()
    _adam_update(new_params.flat, grads.flat, new_state)
    return new_params, new_state


def _xy(data):
    if hasattr(data, "fingerprints"):
        return data.fingerprints, data.labels
    X, y = data
    return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64)


def _mean_loss(params, X, y, chunk=8192):
    total = 0.0
    for s in range(0, len(X), chunk):
        z = logits(params, X[s:s + chunk])
        z = z - z.max(axis=1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=1))
        total += float(np.sum(lse - z[np.arange(len(z)), y[s:s + chunk]]))
    return total / len(X)


def train(spec: MlpSpec, train_set, val_set=None, config: TrainConfig = TrainConfig(), init: MlpParams | None = None):
    """Mini-batch Adam on the cross-entropy loss.

    Returns the final parameters and a per-epoch :class:`History`. The batch
    order is reshuffled every epoch from a generator seeded by ``config.seed``;
    the initial weights use the same seed.
    """
    X, y = _xy(train_set)
    if len(X) == 0:
        raise EmptyDatasetError("training set is empty")
    params = init.copy() if init is not None else init_params(spec, config.seed)
    if X.shape[1] != spec.input_dim:
        raise ShapeError(f"training inputs have length {X.shape[1]}, network expects {spec.input_dim}")
    y = _check_labels(params, y, len(X))
    Xv = yv = None
    if val_set is not None:
        Xv, yv = _xy(val_set)
        yv = _check_labels(params, yv, len(Xv))
    state = AdamState.zeros(params, config.lr)
    grads = MlpParams(spec)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5EED]))
    history = History()
    n, bs = len(X), config.batch_size
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        Xs, ys = X[order], y[order]
        total = 0.0
        for s in range(0, n, bs):
            loss, _ = loss_and_grad(params, Xs[s:s + bs], ys[s:s + bs], out=grads)
            total += loss * min(bs, n - s)
            _adam_update(params.flat, grads.flat, state)
        stats = EpochStats(epoch + 1, total / n)
        if Xv is not None and len(Xv):
            stats.val_loss = _mean_loss(params, Xv, yv)
            stats.val_accuracy = float(np.mean(predict(params, Xv) == yv))
        history.epochs.append(stats)
    return params, history


def evaluate(params: MlpParams, data):
    """Accuracy and the C x C confusion matrix (rows: true class)."""
    X, y = _xy(data)
    if len(X) == 0:
        raise EmptyDatasetError("cannot evaluate on an empty dataset")
    X, _ = _as_batch(params, X)
    y = _check_labels(params, y, len(X))
    pred = predict(params, X)
    C = params.spec.output_dim
    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    return float(np.trace(confusion)) / len(y), confusion


def model_to_dict(params: MlpParams, meta: dict | None = None) -> dict:
    doc = {"spec": params.spec.to_dict(),
           "layers": [{"w": W.tolist(), "b": b.tolist()} for W, b in params.layers]}
    if meta:
        doc["meta"] = meta
    return doc


def model_from_dict(doc: dict) -> MlpParams:
    try:
        spec = MlpSpec.from_dict(doc["spec"])
        layers = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model document ({exc!r})") from exc
    params = MlpParams(spec)
    if len(layers) != len(params.layers):
        raise ShapeError(f"model has {len(layers)} layers, spec implies {len(params.layers)}")
    for (W, b), layer in zip(params.layers, layers):
        w_in, b_in = np.asarray(layer["w"], dtype=np.float64), np.asarray(layer["b"], dtype=np.float64)
        if w_in.shape != W.shape or b_in.shape != b.shape:
            raise ShapeError(f"layer shape {w_in.shape}/{b_in.shape} does not match spec {W.shape}/{b.shape}")
        W[...] = w_in
        b[...] = b_in
    return params


def save_model(path, params: MlpParams, meta: dict | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(params, meta), fh)
        fh.write("\n")


def load_model(path, with_meta: bool = False):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from exc
    params = model_from_dict(doc)
    return (params, doc.get("meta", {})) if with_meta else params
