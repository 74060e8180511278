"""Feed-forward ReLU classifier on a flat parameter vector.

Layers are stored in order as ``W`` (in x out, row-major) followed by ``b``
(out). The last hidden layer is the representation whose activations feed
the linear classification head.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import make_rng
from .errors import DegenerateVector, DimensionMismatch, InvalidInput
from .numerics import cosine

REPRESENTATION_WIDTH = 84


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    num_classes: int
    hidden_dims: tuple[int, ...] = (REPRESENTATION_WIDTH,)

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.num_classes)
        if not self.hidden_dims or min(dims) < 1:
            raise InvalidInput(f"all layer widths must be >= 1 and at least one hidden layer: {dims}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = (self.input_dim, *self.hidden_dims, self.num_classes)
        return list(zip(dims[:-1], dims[1:]))

    @property
    def representation_dim(self) -> int:
        return self.hidden_dims[-1]

    @property
    def num_params(self) -> int:
        return sum((i + 1) * o for i, o in self.layer_dims)

    @property
    def head_slice(self) -> slice:
        """Flat-vector slice of the classification head (last W and b)."""
        i, o = self.layer_dims[-1]
        return slice(self.num_params - (i + 1) * o, self.num_params)


@dataclass(frozen=True)
class ParamVector:
    values: np.ndarray
    spec: MlpSpec = field(compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size != self.spec.num_params:
            raise DimensionMismatch(
                f"parameter vector has {v.size} entries, spec needs {self.spec.num_params}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidInput("parameter vector contains non-finite entries")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        return (
            isinstance(other, ParamVector)
            and self.spec == other.spec
            and np.array_equal(self.values, other.values)
        )

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return unflatten(self.values, self.spec)

    @property
    def head(self) -> np.ndarray:
        return self.values[self.spec.head_slice]


def unflatten(values: np.ndarray, spec: MlpSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    out, pos = [], 0
    for i, o in spec.layer_dims:
        w = values[pos : pos + i * o].reshape(i, o)
        pos += i * o
        b = values[pos : pos + o]
        pos += o
        out.append((w, b))
    return out


def flatten(layers, spec: MlpSpec) -> ParamVector:
    parts = []
    for (w, b), (i, o) in zip(layers, spec.layer_dims, strict=True):
        if w.shape != (i, o) or b.shape != (o,):
            raise DimensionMismatch(f"layer shapes {w.shape}, {b.shape} do not match ({i}, {o})")
        parts += [w.ravel(), b]
    return ParamVector(np.concatenate(parts), spec)


def init(spec: MlpSpec, seed: int) -> ParamVector:
    """Glorot-uniform weights, zero biases."""
    rng = make_rng(seed)
    layers = []
    for i, o in spec.layer_dims:
        limit = np.sqrt(6.0 / (i + o))
        layers.append((rng.uniform(-limit, limit, size=(i, o)), np.zeros(o)))
    return flatten(layers, spec)


def _check_batch(params: ParamVector, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.spec.input_dim:
        raise DimensionMismatch(
            f"batch has shape {x.shape}, model expects {params.spec.input_dim} features"
        )
    return x


def forward(params: ParamVector, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(logits, features)``; features are the post-ReLU representation."""
    h = _check_batch(params, x)
    layers = params.layers()
    for w, b in layers[:-1]:
        h = np.maximum(h @ w + b, 0.0)
    w, b = layers[-1]
    return h @ w + b, h


def predict(params: ParamVector, x) -> np.ndarray:
    # argmax returns the first maximum, i.e. ties go to the lowest class index.
    return np.argmax(forward(params, x)[0], axis=1)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy_and_grad(params: ParamVector, x: np.ndarray, y: np.ndarray):
    layers = params.layers()
    acts = [x]
    pre = []
    h = x
    for w, b in layers[:-1]:
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    w, b = layers[-1]
    logits = h @ w + b

    m = x.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(log_norm - z[np.arange(m), y]))

    delta = softmax(logits)
    delta[np.arange(m), y] -= 1.0
    delta /= m
    grads = []
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        grads.append((acts[li].T @ delta, delta.sum(axis=0)))
        if li > 0:
            delta = (delta @ w.T) * (pre[li - 1] > 0)
    grads.reverse()
    return loss, flatten(grads, params.spec).values


def loss_and_grad(
    params: ParamVector,
    x,
    y,
    anchor: ParamVector | None = None,
    lam: float = 0.0,
) -> tuple[float, ParamVector]:
    """Mean cross-entropy minus ``lam * cos(params, anchor)``, with its gradient.

    The anchor is held constant. With ``anchor=None`` or ``lam == 0`` this is
    plain cross-entropy.
    """
    if lam < 0:
        raise InvalidInput("lambda must be >= 0")
    x = _check_batch(params, x)
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise DimensionMismatch("labels must match batch rows")
    loss, grad = _cross_entropy_and_grad(params, x, y)
    if anchor is not None and lam > 0:
        if anchor.spec != params.spec:
            raise DimensionMismatch("anchor was built for a different model spec")
        theta, a = params.values, anchor.values
        nt, na = np.linalg.norm(theta), np.linalg.norm(a)
        if nt == 0.0 or na == 0.0:
            raise DegenerateVector("cosine anchor term needs non-zero params and anchor")
        cos = cosine(theta, a)
        loss -= lam * cos
        grad = grad - lam * (a / (nt * na) - cos * theta / (nt * nt))
    return loss, ParamVector(grad, params.spec)


def sgd_step(params: ParamVector, grad: ParamVector, lr: float) -> ParamVector:
    if lr <= 0:
        raise InvalidInput("learning rate must be > 0")
    if grad.spec != params.spec:
        raise DimensionMismatch("gradient and params have different specs")
    return ParamVector(params.values - lr * grad.values, params.spec)
