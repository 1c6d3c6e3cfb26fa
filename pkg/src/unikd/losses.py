"""Distillation objectives: embedding-alignment and relational losses.

Each loss returns a LossOutput carrying a scalar value, the analytic gradient
with respect to the student's raw inputs (embeddings, or logits for the KL
loss), and named auxiliary scalars for logging. Teacher-side inputs and
memory-bank rows are always treated as constants: gradients flow only into
the current student mini-batch.

The instance-level core rescales a softplus by a smoothed distance-to-margin
factor so well-aligned samples contribute almost nothing; the relational core
applies the mirrored construction to the mean absolute gap between teacher
and student similarity structures. Loss weights live in the params objects
and are applied only when combining, so the cores can be plotted and swept
unweighted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.special import expit, log_softmax

from .errors import (
    BankNotReadyError,
    DimensionMismatchError,
    EmptyBatchError,
    EmptyMatrixError,
)
from .geometry import (
    as_batch,
    check_rows_nonzero,
    diag_cosines_grad,
    pairwise_cosine_backward,
    pairwise_cosine_matrix,
    require_same_shape,
    row_norms,
)

Array = NDArray[np.float64]

ILED_VARIANTS = ("per_sample", "batch_mean")


@dataclass(frozen=True)
class IledParams:
    """Instance-level loss shape: steepness, soft margin, smoothing, weight.

    variant selects how the core is applied to a batch: 'per_sample' averages
    the core of each row cosine (the training-loop form); 'batch_mean'
    applies the core once to the mean cosine. They differ for m > 1 because
    the core is nonlinear.
    """

    steepness: float = 40.0
    margin: float = 0.9
    smoothing: float = 0.1
    weight: float = 70.0
    variant: str = "per_sample"

    def __post_init__(self) -> None:
        if self.steepness <= 0:
            raise ValueError(f"steepness must be > 0, got {self.steepness}")
        if self.smoothing <= 0:
            raise ValueError(f"smoothing must be > 0, got {self.smoothing}")
        if not -1.0 < self.margin < 1.0:
            raise ValueError(f"margin must lie in (-1, 1), got {self.margin}")
        if self.weight < 0:
            raise ValueError(f"weight must be >= 0, got {self.weight}")
        if self.variant not in ILED_VARIANTS:
            raise ValueError(f"variant must be one of {ILED_VARIANTS}, got {self.variant!r}")


@dataclass(frozen=True)
class RpsdParams:
    """Relational loss shape: steepness, transition threshold, smoothing, weight."""

    steepness: float = 60.0
    threshold: float = 0.05
    smoothing: float = 1.0
    weight: float = 3.0

    def __post_init__(self) -> None:
        if self.steepness <= 0:
            raise ValueError(f"steepness must be > 0, got {self.steepness}")
        if self.smoothing <= 0:
            raise ValueError(f"smoothing must be > 0, got {self.smoothing}")
        if not 0.0 <= self.threshold < 2.0:
            raise ValueError(f"threshold must lie in [0, 2), got {self.threshold}")
        if self.weight < 0:
            raise ValueError(f"weight must be >= 0, got {self.weight}")


@dataclass(frozen=True)
class KlParams:
    """Soft-logit distillation temperature."""

    temperature: float = 3.0

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")


@dataclass
class LossOutput:
    """Scalar loss value, gradient w.r.t. the student inputs, log scalars."""

    value: float
    grad: Array
    aux: dict[str, float] = field(default_factory=dict)


def _softplus(z):
    # ln(1+e^z) without overflow: max(z,0) + log1p(e^-|z|) covers both tails.
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _scalar_or_array(out: np.ndarray, like) -> float | Array:
    if np.isscalar(like) or getattr(like, "ndim", 0) == 0:
        return float(out)
    return out


def _nonempty(batch: Array, name: str) -> None:
    if batch.shape[0] == 0:
        raise EmptyBatchError(f"{name} has zero rows")


def iled_core(x_bar, p: IledParams):
    """Rescaled-softplus alignment penalty of a cosine (scalar or array).

    (1/r) * ln(1 + exp(-r*(x - margin))) * sqrt((x - margin)^2 + smoothing),
    computed in overflow-safe form. Strictly positive; decays to ~0 once the
    cosine clears the soft margin.
    """
    x = np.asarray(x_bar, dtype=np.float64)
    u = x - p.margin
    w = np.sqrt(u * u + p.smoothing)
    out = _softplus(-p.steepness * u) / p.steepness * w
    return _scalar_or_array(out, x_bar)


def iled_core_grad(x_bar, p: IledParams):
    """Derivative of iled_core w.r.t. the cosine argument."""
    x = np.asarray(x_bar, dtype=np.float64)
    u = x - p.margin
    z = -p.steepness * u
    w = np.sqrt(u * u + p.smoothing)
    out = -expit(z) * w + _softplus(z) / p.steepness * (u / w)
    return _scalar_or_array(out, x_bar)


def rpsd_core(delta_norm, p: RpsdParams):
    """Rescaled-softplus penalty of a similarity gap (scalar or array).

    Mirror image of iled_core: grows once the normalized dissimilarity
    exceeds the transition threshold, stays near zero below it.
    """
    d = np.asarray(delta_norm, dtype=np.float64)
    u = d - p.threshold
    w = np.sqrt(u * u + p.smoothing)
    out = _softplus(p.steepness * u) / p.steepness * w
    return _scalar_or_array(out, delta_norm)


def rpsd_core_grad(delta_norm, p: RpsdParams):
    """Derivative of rpsd_core w.r.t. the dissimilarity argument."""
    d = np.asarray(delta_norm, dtype=np.float64)
    u = d - p.threshold
    z = p.steepness * u
    w = np.sqrt(u * u + p.smoothing)
    out = expit(z) * w + _softplus(z) / p.steepness * (u / w)
    return _scalar_or_array(out, delta_norm)


def fc_loss(t_batch: object, s_batch: object) -> LossOutput:
    """Mean squared distance between unit-normalized embedding rows.

    Value is computed literally from the normalized difference vectors; the
    gradient flows through the student normalization, teacher held constant.
    """
    t = as_batch(t_batch, "t_batch")
    s = as_batch(s_batch, "s_batch")
    require_same_shape(t, s, "t_batch", "s_batch")
    _nonempty(t, "t_batch")
    check_rows_nonzero(t, "t_batch")
    check_rows_nonzero(s, "s_batch")
    m = t.shape[0]
    t_hat = t / row_norms(t)[:, None]
    s_hat = s / row_norms(s)[:, None]
    diff = t_hat - s_hat
    value = float(np.einsum("ij,ij->", diff, diff)) / m
    x, g = diag_cosines_grad(t, s)
    grad = (-2.0 / m) * g
    return LossOutput(value, grad, {"mean_cos": float(x.mean())})


def fc_loss_cosform(x: object) -> float:
    """Equivalent closed form of fc_loss from the row cosines: (2/m)*sum(1-x)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"expected 1-D cosine sequence, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyBatchError("cosine sequence is empty")
    return float(2.0 * np.sum(1.0 - arr) / arr.size)


def raw_l2_loss(t_batch: object, s_batch: object) -> LossOutput:
    """Mean squared distance between raw (unnormalized) embedding rows."""
    t = as_batch(t_batch, "t_batch")
    s = as_batch(s_batch, "s_batch")
    require_same_shape(t, s, "t_batch", "s_batch")
    _nonempty(t, "t_batch")
    m = t.shape[0]
    diff = s - t
    value = float(np.einsum("ij,ij->", diff, diff)) / m
    grad = (2.0 / m) * diff
    return LossOutput(value, grad, {})


def kl_soft_logits_loss(t_logits: object, s_logits: object, p: KlParams) -> LossOutput:
    """Temperature-scaled KL divergence between teacher and student logits.

    Value is T^2 times the batch-mean KL(teacher-soft || student-soft); the
    gradient w.r.t. the student logits is (T/m)*(student_soft - teacher_soft).
    """
    t = as_batch(t_logits, "t_logits")
    s = as_batch(s_logits, "s_logits")
    require_same_shape(t, s, "t_logits", "s_logits")
    _nonempty(t, "t_logits")
    if t.shape[1] < 2:
        raise DimensionMismatchError(f"need at least 2 classes, got {t.shape[1]}")
    m = t.shape[0]
    temp = p.temperature
    lp = log_softmax(t / temp, axis=1)
    lq = log_softmax(s / temp, axis=1)
    p_soft = np.exp(lp)
    value = float(temp * temp * np.sum(p_soft * (lp - lq)) / m)
    grad = (temp / m) * (np.exp(lq) - p_soft)
    return LossOutput(value, grad, {})


def iled_loss(t_batch: object, s_batch: object, p: IledParams) -> LossOutput:
    """Instance-level embedding distillation over a teacher/student batch.

    per_sample: mean of iled_core over the row cosines. batch_mean:
    iled_core of the mean cosine. Gradients flow through the cosine and
    student normalization chain; the unweighted core value is returned.
    """
    x, g = diag_cosines_grad(t_batch, s_batch)
    if x.size == 0:
        raise EmptyBatchError("t_batch has zero rows")
    m = x.size
    x_bar = float(x.mean())
    if p.variant == "per_sample":
        value = float(np.mean(iled_core(x, p)))
        grad = (iled_core_grad(x, p) / m)[:, None] * g
    else:
        value = float(iled_core(x_bar, p))
        grad = (iled_core_grad(x_bar, p) / m) * g
    return LossOutput(value, grad, {"mean_cos": x_bar})


def dissimilarity_matrix(s_t: object, s_s: object) -> Array:
    """Element-wise absolute gap between two similarity matrices."""
    a = as_batch(s_t, "s_t")
    b = as_batch(s_s, "s_s")
    require_same_shape(a, b, "s_t", "s_s")
    return np.abs(a - b)


def normalized_dissimilarity(d: object) -> float:
    """Mean entry of a dissimilarity matrix; population-size invariant."""
    arr = as_batch(d, "d")
    if arr.size == 0:
        raise EmptyMatrixError("dissimilarity matrix has no entries")
    return float(arr.mean())


def rpsd_loss(
    e_t: object, e_s: object, f_t: object, f_s: object, p: RpsdParams
) -> LossOutput:
    """Relation-based pairwise similarity distillation against bank rows.

    Compares the teacher batch-vs-bank similarity structure with the
    student's, reduces the absolute gap to one normalized scalar, and applies
    the relational core. Gradient w.r.t. the student batch e_s only: bank
    rows f_t / f_s are stored constants.
    """
    et = as_batch(e_t, "e_t")
    es = as_batch(e_s, "e_s")
    ft = as_batch(f_t, "f_t")
    fs = as_batch(f_s, "f_s")
    require_same_shape(et, es, "e_t", "e_s")
    require_same_shape(ft, fs, "f_t", "f_s")
    _nonempty(et, "e_t")
    if ft.shape[0] == 0:
        raise BankNotReadyError("memory banks are empty; relational loss undefined")
    s_t = pairwise_cosine_matrix(et, ft)
    s_s = pairwise_cosine_matrix(es, fs)
    delta = normalized_dissimilarity(dissimilarity_matrix(s_t, s_s))
    value = float(rpsd_core(delta, p))
    # d|.|/dS_s is sign(S_s - S_t), 0 at ties (subgradient choice).
    weights = (rpsd_core_grad(delta, p) / s_s.size) * np.sign(s_s - s_t)
    grad = pairwise_cosine_backward(es, fs, s_s, weights)
    return LossOutput(value, grad, {"delta_norm": delta})


def unified_loss(
    l_iled: LossOutput,
    l_rpsd: LossOutput,
    l_fr: LossOutput,
    p_i: IledParams,
    p_r: RpsdParams,
) -> LossOutput:
    """Weighted combination of the two distillation losses and the task loss."""
    if l_iled.grad.shape != l_rpsd.grad.shape or l_iled.grad.shape != l_fr.grad.shape:
        raise DimensionMismatchError(
            f"gradient shapes differ: {l_iled.grad.shape}, "
            f"{l_rpsd.grad.shape}, {l_fr.grad.shape}"
        )
    value = p_i.weight * l_iled.value + p_r.weight * l_rpsd.value + l_fr.value
    grad = p_i.weight * l_iled.grad + p_r.weight * l_rpsd.grad + l_fr.grad
    aux = {**l_iled.aux, **l_rpsd.aux, **l_fr.aux}
    return LossOutput(value, grad, aux)
