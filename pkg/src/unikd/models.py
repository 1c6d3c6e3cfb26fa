"""Dense feed-forward encoders with hand-rolled backprop, plus the
classification head and optimizer used for supervised training.

These are deliberately small numpy models standing in for the deep backbones
of the full-scale setting: enough capacity contrast between a wide teacher
and a narrow student for distillation to have something to transfer, while a
full training run stays in CPU-seconds territory.

The classification head is an additive-cosine-margin softmax: logits are
scale * (cos theta_k - margin * [k == label]) over unit-normalized embeddings
and class weights, so supervision and the distillation losses share the same
hypersphere geometry.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.special import log_softmax

from .errors import DimensionMismatchError, LabelOutOfRangeError, StaleCacheError
from .geometry import as_batch, pairwise_cosine_matrix
from .losses import LossOutput

Array = NDArray[np.float64]

ACTIVATIONS = ("relu", "tanh")

# Extra init scale on the embedding projection. Cosine-geometry losses scale
# like 1/||e||, so nets started far below their norm equilibrium see an early
# transient where embeddings inflate and gradients stall; starting the final
# layer wider removes that transient for every training mode.
EMBED_GAIN = 4.0


@dataclass(frozen=True)
class DenseNetSpec:
    """Layer widths [d_in, h_1, ..., d_embed], hidden activation, init seed."""

    widths: tuple[int, ...]
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError(f"need at least [d_in, d_embed], got {self.widths}")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"widths must be positive, got {self.widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )

    @property
    def d_in(self) -> int:
        return self.widths[0]

    @property
    def d_embed(self) -> int:
        return self.widths[-1]


@dataclass(frozen=True)
class FrHeadParams:
    """Additive-cosine-margin softmax head configuration."""

    classes: int
    scale: float = 30.0
    margin: float = 0.4

    def __post_init__(self) -> None:
        if self.classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.classes}")
        if self.scale <= 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if not 0.0 <= self.margin < 1.0:
            raise ValueError(f"margin must lie in [0, 1), got {self.margin}")


class NetworkState:
    """Weights, biases, and paired momentum buffers for one dense net.

    `version` increments on every optimizer step; forward caches record the
    version they were built against so a backward pass on superseded
    activations is rejected instead of producing silently wrong gradients.
    """

    def __init__(self, spec: DenseNetSpec, weights: list[Array], biases: list[Array]):
        self.spec = spec
        self.weights = weights
        self.biases = biases
        self.vel_w = [np.zeros_like(w) for w in weights]
        self.vel_b = [np.zeros_like(b) for b in biases]
        self.version = 0

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass
class ForwardCache:
    """Activations retained by forward for the matching backward pass."""

    inputs: list[Array]
    pre_acts: list[Array]
    version: int


def init_network(spec: DenseNetSpec) -> NetworkState:
    """He-style init for relu, Xavier-style for tanh; zero biases.

    The final (embedding) layer is additionally scaled by EMBED_GAIN.
    """
    rng = np.random.default_rng(spec.seed)
    weights = []
    biases = []
    last = len(spec.widths) - 2
    for i, (fan_in, fan_out) in enumerate(zip(spec.widths[:-1], spec.widths[1:])):
        gain = 2.0 if spec.activation == "relu" else 1.0
        std = np.sqrt(gain / fan_in)
        if i == last:
            std *= EMBED_GAIN
        weights.append(rng.standard_normal((fan_in, fan_out)) * std)
        biases.append(np.zeros(fan_out))
    return NetworkState(spec, weights, biases)


def forward(net: NetworkState, batch: object) -> tuple[Array, ForwardCache]:
    """Affine + activation composition; the final layer stays affine."""
    x = as_batch(batch, "batch")
    if x.shape[1] != net.spec.d_in:
        raise DimensionMismatchError(
            f"batch dim {x.shape[1]} != network input dim {net.spec.d_in}"
        )
    inputs = []
    pre_acts = []
    a = x
    last = net.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(a)
        z = a @ w + b
        pre_acts.append(z)
        if i < last:
            a = np.maximum(z, 0.0) if net.spec.activation == "relu" else np.tanh(z)
        else:
            a = z
    return a, ForwardCache(inputs, pre_acts, net.version)


def backward(
    net: NetworkState, cache: ForwardCache, grad_out: object
) -> tuple[list[Array], list[Array], Array]:
    """Exact chain-rule gradients for all weights, biases, and the input."""
    if cache.version != net.version:
        raise StaleCacheError(
            f"cache built at version {cache.version}, network now at {net.version}"
        )
    g = as_batch(grad_out, "grad_out")
    if g.shape != (cache.inputs[0].shape[0], net.spec.d_embed):
        raise DimensionMismatchError(
            f"grad_out shape {g.shape} != "
            f"({cache.inputs[0].shape[0]}, {net.spec.d_embed})"
        )
    d_weights: list[Array] = [None] * net.n_layers  # type: ignore[list-item]
    d_biases: list[Array] = [None] * net.n_layers  # type: ignore[list-item]
    last = net.n_layers - 1
    for i in range(last, -1, -1):
        if i < last:
            z = cache.pre_acts[i]
            if net.spec.activation == "relu":
                g = g * (z > 0.0)
            else:
                t = np.tanh(z)
                g = g * (1.0 - t * t)
        d_weights[i] = cache.inputs[i].T @ g
        d_biases[i] = g.sum(axis=0)
        g = g @ net.weights[i].T
    return d_weights, d_biases, g


def momentum_update(
    param: Array, vel: Array, grad: Array, lr: float, momentum: float
) -> None:
    """In-place heavy-ball update: v <- momentum*v + g; param <- param - lr*v."""
    if param.shape != grad.shape or param.shape != vel.shape:
        raise DimensionMismatchError(
            f"param shape {param.shape}, vel shape {vel.shape}, "
            f"grad shape {grad.shape} must agree"
        )
    vel *= momentum
    vel += grad
    param -= lr * vel


def sgd_momentum_step(
    net: NetworkState,
    d_weights: list[Array],
    d_biases: list[Array],
    lr: float,
    momentum: float = 0.9,
) -> NetworkState:
    """Apply one momentum-SGD step to every layer; bumps the state version."""
    if len(d_weights) != net.n_layers or len(d_biases) != net.n_layers:
        raise DimensionMismatchError(
            f"expected gradients for {net.n_layers} layers, "
            f"got {len(d_weights)}/{len(d_biases)}"
        )
    for w, vw, dw in zip(net.weights, net.vel_w, d_weights):
        momentum_update(w, vw, dw, lr, momentum)
    for b, vb, db in zip(net.biases, net.vel_b, d_biases):
        momentum_update(b, vb, db, lr, momentum)
    net.version += 1
    return net


def step_decay_lr(
    base_lr: float, iteration: int, milestones: tuple[int, ...], factor: float
) -> float:
    """base_lr * factor^(number of milestones <= iteration)."""
    if not 0.0 < factor < 1.0:
        raise ValueError(f"factor must lie in (0, 1), got {factor}")
    hits = sum(1 for ms in milestones if ms <= iteration)
    return base_lr * factor**hits


def init_class_weights(classes: int, dim: int, seed: int) -> Array:
    """Random class-weight matrix; only row directions matter to the head."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((classes, dim)) / np.sqrt(dim)


@dataclass
class HeadState:
    """Trainable class-weight matrix with its momentum buffer."""

    params: FrHeadParams
    weights: Array
    vel: Array = field(init=False)

    def __post_init__(self) -> None:
        if self.weights.shape[0] != self.params.classes:
            raise DimensionMismatchError(
                f"class weights have {self.weights.shape[0]} rows "
                f"for {self.params.classes} classes"
            )
        self.vel = np.zeros_like(self.weights)


def fr_margin_loss(
    embeddings: object,
    labels: object,
    head: FrHeadParams,
    class_weights: object,
) -> tuple[LossOutput, Array]:
    """Margin-softmax cross-entropy over embedding/class-weight cosines.

    Returns the LossOutput whose grad is w.r.t. the raw embeddings, plus the
    gradient w.r.t. the raw class-weight matrix (the two trainable inputs).
    """
    e = as_batch(embeddings, "embeddings")
    w = as_batch(class_weights, "class_weights")
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != e.shape[0]:
        raise DimensionMismatchError(
            f"labels shape {y.shape} incompatible with batch of {e.shape[0]}"
        )
    if y.size and (y.min() < 0 or y.max() >= head.classes):
        bad = int(y[(y < 0) | (y >= head.classes)][0])
        raise LabelOutOfRangeError(
            f"label {bad} outside [0, {head.classes})"
        )
    m = e.shape[0]
    cos = pairwise_cosine_matrix(e, w)  # m x K, checks zero norms
    logits = head.scale * cos
    rows = np.arange(m)
    logits[rows, y] -= head.scale * head.margin
    logp = log_softmax(logits, axis=1)
    value = float(-logp[rows, y].mean())
    # dL/dcos = (scale/m) * (softmax - onehot)
    a = np.exp(logp)
    a[rows, y] -= 1.0
    a *= head.scale / m
    e_norms = np.sqrt(np.einsum("ij,ij->i", e, e))
    w_norms = np.sqrt(np.einsum("ij,ij->i", w, w))
    e_hat = e / e_norms[:, None]
    w_hat = w / w_norms[:, None]
    row_dot = np.einsum("ij,ij->i", a, cos)
    grad_e = (a @ w_hat - row_dot[:, None] * e_hat) / e_norms[:, None]
    col_dot = np.einsum("ij,ij->j", a, cos)
    grad_w = (a.T @ e_hat - col_dot[:, None] * w_hat) / w_norms[:, None]
    return LossOutput(value, grad_e, {}), grad_w


def head_logits(embeddings: object, class_weights: object, scale: float) -> Array:
    """Margin-free scaled cosine logits (teacher-side / soft-logit input)."""
    e = as_batch(embeddings, "embeddings")
    w = as_batch(class_weights, "class_weights")
    return scale * pairwise_cosine_matrix(e, w)


def head_logits_backward(
    embeddings: Array, class_weights: Array, d_logits: Array, scale: float
) -> tuple[Array, Array]:
    """Gradients of margin-free logits w.r.t. embeddings and class weights."""
    e = as_batch(embeddings, "embeddings")
    w = as_batch(class_weights, "class_weights")
    cos = pairwise_cosine_matrix(e, w)
    a = scale * as_batch(d_logits, "d_logits")
    e_norms = np.sqrt(np.einsum("ij,ij->i", e, e))
    w_norms = np.sqrt(np.einsum("ij,ij->i", w, w))
    e_hat = e / e_norms[:, None]
    w_hat = w / w_norms[:, None]
    row_dot = np.einsum("ij,ij->i", a, cos)
    grad_e = (a @ w_hat - row_dot[:, None] * e_hat) / e_norms[:, None]
    col_dot = np.einsum("ij,ij->j", a, cos)
    grad_w = (a.T @ e_hat - col_dot[:, None] * w_hat) / w_norms[:, None]
    return grad_e, grad_w


def param_hash(net: NetworkState) -> str:
    """Stable content hash of all parameters; detects any training mutation."""
    digest = hashlib.sha256()
    digest.update(repr(net.spec).encode())
    for w, b in zip(net.weights, net.biases):
        digest.update(np.ascontiguousarray(w).tobytes())
        digest.update(np.ascontiguousarray(b).tobytes())
    return digest.hexdigest()
