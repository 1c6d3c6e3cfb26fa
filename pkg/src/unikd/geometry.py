"""Embedding-space geometry: normalization, cosine similarities, angles.

Every operation takes raw (unnormalized) vectors and normalizes internally
where the math requires unit inputs; callers are never trusted to
pre-normalize. All computed cosines are clamped to [-1, 1] because floating
error on unit vectors can push dot products slightly out of range, which
would break downstream sqrt/log terms.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import NDArray

from . import kernels
from .errors import (
    DegenerateTripletError,
    DimensionMismatchError,
    EmptyBatchError,
    EmptyMatrixError,
    ZeroNormError,
)

# Norms below this are treated as zero vectors.
EPS_ZERO_NORM = 1e-30
# 1 - cos threshold under which a triplet counts as degenerate.
EPS_DEGENERATE = 1e-6

Array = NDArray[np.float64]


def as_vector(v: object, name: str = "vector") -> Array:
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise DimensionMismatchError(f"{name} must have at least one component")
    return arr


def as_batch(x: object, name: str = "batch") -> Array:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def require_same_shape(a: Array, b: Array, a_name: str, b_name: str) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"{a_name} shape {a.shape} != {b_name} shape {b.shape}"
        )


def row_norms(x: Array) -> Array:
    return np.sqrt(np.einsum("ij,ij->i", x, x))


def check_rows_nonzero(x: Array, name: str) -> None:
    """Raise ZeroNormError naming the first offending row, if any."""
    norms = row_norms(x)
    if norms.size and norms.min() < EPS_ZERO_NORM:
        idx = int(np.argmin(norms))
        raise ZeroNormError(f"{name} row {idx} has norm below {EPS_ZERO_NORM:g}")


def l2_normalize(v: object) -> Array:
    """Scale a vector to unit L2 norm, preserving direction."""
    arr = as_vector(v)
    norm = math.sqrt(float(arr @ arr))
    if norm < EPS_ZERO_NORM:
        raise ZeroNormError(f"cannot normalize vector with norm below {EPS_ZERO_NORM:g}")
    return arr / norm


def cosine_sim(a: object, b: object) -> float:
    """Cosine similarity of two raw vectors, clamped to [-1, 1]."""
    va = as_vector(a, "a")
    vb = as_vector(b, "b")
    if va.shape != vb.shape:
        raise DimensionMismatchError(f"a has dim {va.shape[0]}, b has dim {vb.shape[0]}")
    return float(np.clip(l2_normalize(va) @ l2_normalize(vb), -1.0, 1.0))


def diag_cosines(t_batch: object, s_batch: object) -> Array:
    """Row-wise cosines x_i = cos(t_batch[i], s_batch[i])."""
    x, _ = diag_cosines_grad(t_batch, s_batch)
    return x


def diag_cosines_grad(t_batch: object, s_batch: object) -> tuple[Array, Array]:
    """Row-wise cosines plus the m x d gradient w.r.t. the raw `s_batch`."""
    t = as_batch(t_batch, "t_batch")
    s = as_batch(s_batch, "s_batch")
    require_same_shape(t, s, "t_batch", "s_batch")
    check_rows_nonzero(t, "t_batch")
    check_rows_nonzero(s, "s_batch")
    if t.shape[0] == 0:
        return np.empty(0), np.empty((0, t.shape[1]))
    return kernels.active.diag_cosine_grad(t, s)


def mean_cosine(x: object) -> float:
    """Arithmetic mean of a cosine sequence."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"expected 1-D sequence, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyBatchError("mean of an empty cosine sequence is undefined")
    return float(arr.mean())


def pairwise_cosine_matrix(queries: object, keys: object) -> Array:
    """All-pairs cosine matrix between two batches sharing a dimension."""
    q = as_batch(queries, "queries")
    k = as_batch(keys, "keys")
    if q.shape[1] != k.shape[1]:
        raise DimensionMismatchError(
            f"queries dim {q.shape[1]} != keys dim {k.shape[1]}"
        )
    if q.shape[0] == 0 or k.shape[0] == 0:
        raise EmptyMatrixError("pairwise cosine matrix needs at least one row per side")
    check_rows_nonzero(q, "queries")
    check_rows_nonzero(k, "keys")
    return kernels.active.pairwise_cosine(q, k)


def pairwise_cosine_backward(
    queries: Array, keys: Array, cosines: Array, weights: Array
) -> Array:
    """Gradient of sum(weights * pairwise_cosine_matrix(queries, keys)).

    Taken w.r.t. the raw query batch; key rows are constants. `cosines` must
    be the matching forward result.
    """
    q = as_batch(queries, "queries")
    k = as_batch(keys, "keys")
    s = as_batch(cosines, "cosines")
    w = as_batch(weights, "weights")
    require_same_shape(s, w, "cosines", "weights")
    if s.shape != (q.shape[0], k.shape[0]):
        raise DimensionMismatchError(
            f"cosines shape {s.shape} does not match batches "
            f"({q.shape[0]}, {k.shape[0]})"
        )
    return kernels.active.pairwise_cosine_grad(q, k, s, w)


def triplet_angle_direct(fi: object, fj: object, fk: object) -> float:
    """Cosine of the angle at vertex fj between fi - fj and fk - fj.

    Inputs are normalized to the unit sphere first; the angle is undefined
    (DegenerateTripletError) when either difference norm falls below
    EPS_DEGENERATE.
    """
    ui = l2_normalize(as_vector(fi, "fi"))
    uj = l2_normalize(as_vector(fj, "fj"))
    uk = l2_normalize(as_vector(fk, "fk"))
    if ui.shape != uj.shape or uj.shape != uk.shape:
        raise DimensionMismatchError("triplet vectors must share a dimension")
    a = ui - uj
    b = uk - uj
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na < EPS_DEGENERATE or nb < EPS_DEGENERATE:
        raise DegenerateTripletError(
            f"difference norm below {EPS_DEGENERATE:g}; angle at vertex undefined"
        )
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


def triplet_angle_from_pairwise(cos_ij: float, cos_jk: float, cos_ik: float) -> float:
    """Same vertex angle recovered from the three pairwise cosines alone.

    Uses ||u - w|| = sqrt(2(1 - cos)) for unit u, w to rebuild the difference
    norms, so it must agree with triplet_angle_direct on unit inputs.
    """
    cij = min(1.0, max(-1.0, float(cos_ij)))
    cjk = min(1.0, max(-1.0, float(cos_jk)))
    cik = min(1.0, max(-1.0, float(cos_ik)))
    if 1.0 - cij <= EPS_DEGENERATE or 1.0 - cjk <= EPS_DEGENERATE:
        raise DegenerateTripletError(
            "a pair is (nearly) coincident; denominator vanishes"
        )
    denom = math.sqrt(2.0 * (1.0 - cij)) * math.sqrt(2.0 * (1.0 - cjk))
    return float(np.clip((cik - cij - cjk + 1.0) / denom, -1.0, 1.0))
