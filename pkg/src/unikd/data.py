"""Synthetic identities-on-a-hypersphere dataset.

Each identity is a random unit direction in the input space; samples are the
direction plus isotropic Gaussian noise, re-projected to the unit sphere.
The generator also carves out a disjoint evaluation split per identity and
draws fixed positive/negative verification pairs from it, so train-time
supervision and eval-time verification never share samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]
IntArray = NDArray[np.int64]


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    classes: int = 50
    input_dim: int = 64
    samples_per_class: int = 40
    noise: float = 0.3
    train_fraction: float = 0.75
    pos_pairs: int = 2000
    neg_pairs: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.classes}")
        if self.samples_per_class < 2:
            raise ValueError(
                f"need at least 2 samples per class, got {self.samples_per_class}"
            )
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(
                f"train_fraction must lie in (0, 1), got {self.train_fraction}"
            )
        if self.input_dim < 2:
            raise ValueError(f"input_dim must be >= 2, got {self.input_dim}")
        if self.pos_pairs < 1 or self.neg_pairs < 1:
            raise ValueError("pos_pairs and neg_pairs must be >= 1")
        if self.train_per_class < 1 or self.eval_per_class < 2:
            raise ValueError(
                f"split {self.train_per_class}/{self.eval_per_class} per class "
                f"unusable; need >= 1 train and >= 2 eval samples"
            )
        n_eval = self.eval_per_class
        pos_avail = self.classes * (n_eval * (n_eval - 1) // 2)
        total = self.classes * n_eval
        neg_avail = total * (total - 1) // 2 - pos_avail
        if self.pos_pairs > pos_avail:
            raise ValueError(
                f"requested {self.pos_pairs} positive pairs but only "
                f"{pos_avail} distinct ones exist"
            )
        if self.neg_pairs > neg_avail:
            raise ValueError(
                f"requested {self.neg_pairs} negative pairs but only "
                f"{neg_avail} distinct ones exist"
            )

    @property
    def train_per_class(self) -> int:
        return int(self.train_fraction * self.samples_per_class)

    @property
    def eval_per_class(self) -> int:
        return self.samples_per_class - self.train_per_class


@dataclass(frozen=True)
class PairSet:
    """Index pairs into an evaluation embedding matrix."""

    positive: IntArray  # (P, 2) same-identity
    negative: IntArray  # (N, 2) cross-identity


@dataclass(frozen=True)
class SyntheticDataset:
    spec: SyntheticDatasetSpec
    train_x: Array
    train_y: IntArray
    eval_x: Array
    eval_y: IntArray
    pairs: PairSet


def generate_dataset(spec: SyntheticDatasetSpec) -> SyntheticDataset:
    """Deterministically build samples, splits, and verification pairs."""
    rng = np.random.default_rng(spec.seed)
    k, d, n = spec.classes, spec.input_dim, spec.samples_per_class

    directions = rng.standard_normal((k, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    noise = rng.standard_normal((k, n, d))
    samples = directions[:, None, :] + spec.noise * noise
    samples /= np.linalg.norm(samples, axis=2, keepdims=True)

    n_train = spec.train_per_class
    n_eval = spec.eval_per_class

    train_x = samples[:, :n_train, :].reshape(k * n_train, d)
    eval_x = samples[:, n_train:, :].reshape(k * n_eval, d)
    train_y = np.repeat(np.arange(k, dtype=np.int64), n_train)
    eval_y = np.repeat(np.arange(k, dtype=np.int64), n_eval)

    pairs = _draw_pairs(eval_y, spec, rng)
    return SyntheticDataset(spec, train_x, train_y, eval_x, eval_y, pairs)


def _draw_pairs(
    eval_y: IntArray, spec: SyntheticDatasetSpec, rng: np.random.Generator
) -> PairSet:
    n_total = eval_y.shape[0]
    i_idx, j_idx = np.triu_indices(n_total, k=1)
    same = eval_y[i_idx] == eval_y[j_idx]
    pos_all = np.stack([i_idx[same], j_idx[same]], axis=1)
    neg_all = np.stack([i_idx[~same], j_idx[~same]], axis=1)
    # Feasibility (enough distinct pairs) is guaranteed by spec validation.
    pos_sel = rng.choice(pos_all.shape[0], size=spec.pos_pairs, replace=False)
    neg_sel = rng.choice(neg_all.shape[0], size=spec.neg_pairs, replace=False)
    return PairSet(
        positive=np.ascontiguousarray(pos_all[np.sort(pos_sel)], dtype=np.int64),
        negative=np.ascontiguousarray(neg_all[np.sort(neg_sel)], dtype=np.int64),
    )
