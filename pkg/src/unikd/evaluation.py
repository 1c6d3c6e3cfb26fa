"""Verification-style evaluation: pair accuracy and TAR at fixed FAR.

A pair is accepted when its match score exceeds a threshold (strict >).
Pair accuracy searches thresholds exactly (midpoints of consecutive sorted
scores plus accept-all / reject-all sentinels) rather than on a grid.
TAR@FAR maximizes the true-accept rate over thresholds at observed score
values subject to the empirical false-accept rate staying at or below the
target; a target is resolvable only when at least one negative pair can
register above it (far_target * n_neg >= 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .data import PairSet
from .errors import InsufficientNegativesError, ZeroNormError
from .geometry import EPS_ZERO_NORM, as_batch, row_norms

Array = NDArray[np.float64]

METRICS = ("cosine", "euclidean")


@dataclass(frozen=True)
class RocCurve:
    """Per-threshold operating points; rates non-increasing in threshold."""

    thresholds: Array
    tar: Array
    far: Array


def _resolve_indices(idx: np.ndarray, n: int, name: str) -> np.ndarray:
    arr = np.asarray(idx, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise IndexError(f"{name} pairs must have shape (n, 2), got {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise IndexError(
            f"{name} pair index out of range for {n} embeddings "
            f"(found {int(arr.min())}..{int(arr.max())})"
        )
    return arr


def pair_scores(
    embeddings: object, pairs: PairSet, metric: str = "cosine"
) -> tuple[Array, Array]:
    """Match scores (higher = more similar) for positive and negative pairs."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    emb = as_batch(embeddings, "embeddings")
    pos = _resolve_indices(pairs.positive, emb.shape[0], "positive")
    neg = _resolve_indices(pairs.negative, emb.shape[0], "negative")
    if metric == "cosine":
        norms = row_norms(emb)
        if norms.size and norms.min() < EPS_ZERO_NORM:
            idx = int(np.argmin(norms))
            raise ZeroNormError(f"embeddings row {idx} has norm below {EPS_ZERO_NORM:g}")
        unit = emb / norms[:, None]

        def score(p: np.ndarray) -> Array:
            s = np.einsum("ij,ij->i", unit[p[:, 0]], unit[p[:, 1]])
            return np.clip(s, -1.0, 1.0)

    else:

        def score(p: np.ndarray) -> Array:
            diff = emb[p[:, 0]] - emb[p[:, 1]]
            return -np.sqrt(np.einsum("ij,ij->i", diff, diff))

    return score(pos), score(neg)


def _accuracy_at(pos: Array, neg: Array, thresholds: Array) -> Array:
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    tp = pos.size - np.searchsorted(pos_sorted, thresholds, side="right")
    tn = np.searchsorted(neg_sorted, thresholds, side="right")
    return (tp + tn) / (pos.size + neg.size)


def pair_accuracy(
    embeddings: object, pairs: PairSet, metric: str = "cosine"
) -> tuple[float, float]:
    """Best achievable accuracy over all thresholds, plus that threshold.

    Ties between equally accurate thresholds break toward the lower one.
    """
    pos, neg = pair_scores(embeddings, pairs, metric)
    scores = np.unique(np.concatenate([pos, neg]))
    mids = (scores[:-1] + scores[1:]) / 2.0
    cands = np.concatenate([[scores[0] - 1.0], mids, [scores[-1]]])
    acc = _accuracy_at(pos, neg, cands)
    best = int(np.argmax(acc))  # first max = lowest threshold
    return float(acc[best]), float(cands[best])


def tar_at_far(
    embeddings: object,
    pairs: PairSet,
    far_targets: object,
    metric: str = "cosine",
) -> list[float]:
    """True-accept rate at each false-accept-rate target.

    For each target, takes the best TAR over observed-score thresholds whose
    empirical FAR does not exceed the target.
    """
    targets = [float(t) for t in np.atleast_1d(np.asarray(far_targets, dtype=np.float64))]
    pos, neg = pair_scores(embeddings, pairs, metric)
    for t in targets:
        if not 0.0 < t <= 1.0:
            raise ValueError(f"far target must lie in (0, 1], got {t}")
        if t * neg.size < 1.0:
            raise InsufficientNegativesError(
                f"far target {t:g} unresolvable with {neg.size} negative pairs "
                f"(needs at least {int(np.ceil(1.0 / t))})"
            )
    curve = _operating_points(pos, neg)
    out = []
    for t in targets:
        feasible = curve.far <= t
        out.append(float(curve.tar[feasible].max()))
    return out


def _operating_points(pos: Array, neg: Array) -> RocCurve:
    thresholds = np.unique(np.concatenate([pos, neg]))
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    tar = (pos.size - np.searchsorted(pos_sorted, thresholds, side="right")) / pos.size
    far = (neg.size - np.searchsorted(neg_sorted, thresholds, side="right")) / neg.size
    return RocCurve(thresholds, tar, far)


def roc_curve(embeddings: object, pairs: PairSet, metric: str = "cosine") -> RocCurve:
    """Operating points at every observed score threshold, ascending."""
    pos, neg = pair_scores(embeddings, pairs, metric)
    return _operating_points(pos, neg)


def evaluation_report(
    embeddings: object,
    pairs: PairSet,
    far_targets: object = (1e-2, 1e-3),
    metric: str = "cosine",
) -> dict:
    """JSON-ready summary: accuracy, best threshold, TAR per FAR target."""
    accuracy, threshold = pair_accuracy(embeddings, pairs, metric)
    targets = [float(t) for t in np.atleast_1d(np.asarray(far_targets, dtype=np.float64))]
    tars = tar_at_far(embeddings, pairs, targets, metric)
    return {
        "pair_accuracy": accuracy,
        "best_threshold": threshold,
        "tar": {f"{t:g}": v for t, v in zip(targets, tars)},
    }
