"""Training loops: supervised pretraining and teacher-to-student distillation.

One iteration of distillation: draw a mini-batch, embed it with the frozen
teacher and the current student, compute the supervised margin loss plus the
KD terms selected by the mode, update the student (and its head) with
momentum SGD, then enqueue the batch embeddings into the FIFO banks. The
relational term is gated on the banks having reached full capacity and
contributes exactly 0 before that; because enqueues happen after the update,
the gate opens at iteration ceil(q/m) + 1 for bank capacity q = ratio * m.

KD modes:
    none       supervised only (bit-identical to pretraining the student)
    fc_only    + weight * normalized-embedding alignment
    raw_l2     + weight * raw-embedding L2
    kl         + weight * soft-logit KL through both heads' cosine logits
    iled_only  + weight * instance-level embedding distillation
    rpsd_only  + weight * relational similarity distillation
    unified    + both distillation terms (the full method)

Teacher-side metrics (mean cosine, core values, normalized dissimilarity)
are computed and logged in every teacher-present mode so metric CSVs stay
column-compatible across modes; only the selected mode's gradients reach the
optimizer, and none of the extra logging consumes RNG draws.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
from numpy.typing import NDArray

from .bank import BankPair
from .data import SyntheticDataset
from .errors import ConfigError, DivergenceError
from .losses import (
    IledParams,
    KlParams,
    LossOutput,
    RpsdParams,
    fc_loss,
    iled_loss,
    kl_soft_logits_loss,
    raw_l2_loss,
    rpsd_loss,
    unified_loss,
)
from .models import (
    DenseNetSpec,
    FrHeadParams,
    HeadState,
    NetworkState,
    backward,
    forward,
    fr_margin_loss,
    head_logits,
    head_logits_backward,
    init_class_weights,
    init_network,
    momentum_update,
    sgd_momentum_step,
    step_decay_lr,
)

Array = NDArray[np.float64]

MODES = ("none", "fc_only", "raw_l2", "kl", "iled_only", "rpsd_only", "unified")

CSV_COLUMNS = (
    "iter",
    "lr",
    "loss_fr",
    "loss_iled",
    "loss_rpsd",
    "loss_total",
    "mean_cos",
    "delta_norm",
)


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule, KD mode, and per-loss hyperparameters."""

    batch_size: int = 64
    iterations: int = 1400
    base_lr: float = 0.1
    milestones: tuple[int, ...] = (500, 1000, 1200, 1400)
    lr_factor: float = 0.1
    momentum: float = 0.9
    mode: str = "unified"
    iled: IledParams = field(default_factory=IledParams)
    rpsd: RpsdParams = field(default_factory=RpsdParams)
    kl: KlParams = field(default_factory=KlParams)
    fc_weight: float = 3.0
    raw_l2_weight: float = 0.1
    kl_weight: float = 1.0
    bank_ratio: int = 3
    seed: int = 0
    log_every: int = 1
    cache_teacher: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.bank_ratio < 1:
            raise ValueError(f"bank_ratio must be >= 1, got {self.bank_ratio}")
        if self.log_every < 1:
            raise ValueError(f"log_every must be >= 1, got {self.log_every}")
        if min(self.fc_weight, self.raw_l2_weight, self.kl_weight) < 0:
            raise ValueError("loss weights must be >= 0")
        object.__setattr__(self, "milestones", tuple(int(m) for m in self.milestones))


@dataclass(frozen=True)
class IterationRecord:
    """Per-iteration metrics; loss_kd (baseline KD value) is not a CSV column."""

    iteration: int
    lr: float
    loss_fr: float
    loss_iled: float
    loss_rpsd: float
    loss_total: float
    mean_cos: float
    delta_norm: float
    loss_kd: float = 0.0


def format_number(x: float) -> str:
    """9-significant-digit rendering used for all numeric CSV/JSON output."""
    return f"{float(x):.9g}"


def write_records_csv(records: list[IterationRecord], path: str | Path) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.iteration,
                    format_number(r.lr),
                    format_number(r.loss_fr),
                    format_number(r.loss_iled),
                    format_number(r.loss_rpsd),
                    format_number(r.loss_total),
                    format_number(r.mean_cos),
                    format_number(r.delta_norm),
                ]
            )


def batch_stream(
    n: int, batch_size: int, rng: np.random.Generator
) -> Iterator[np.ndarray]:
    """Endless per-epoch shuffled index batches; partial tails are dropped."""
    if batch_size > n:
        raise ConfigError(f"batch size {batch_size} exceeds training set size {n}")
    while True:
        perm = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            yield perm[start : start + batch_size]


def _teacher_embedding_cache(teacher: NetworkState, x: Array, batch_size: int) -> Array:
    """Teacher embeddings for every sample, computed in fixed-size chunks.

    Every forward uses exactly `batch_size` rows (the tail chunk wraps
    around and the duplicate rows are discarded) so each cached row is the
    product of the same-shaped matrix multiply it would see in training.
    """
    n = x.shape[0]
    out = np.empty((n, teacher.spec.d_embed))
    for start in range(0, n, batch_size):
        idx = np.arange(start, start + batch_size) % n
        emb, _ = forward(teacher, x[idx])
        take = min(batch_size, n - start)
        out[start : start + take] = emb[:take]
    return out


def _zero_loss(like: Array, aux: dict[str, float]) -> LossOutput:
    return LossOutput(0.0, np.zeros_like(like), dict(aux))


def _check_finite(values: dict[str, float], iteration: int) -> None:
    for name, v in values.items():
        if not np.isfinite(v):
            raise DivergenceError(f"{name} became {v} at iteration {iteration}")


Hook = Callable[[int, dict], None]


def _fit(
    student: NetworkState,
    head: HeadState,
    data: SyntheticDataset,
    cfg: TrainConfig,
    teacher: NetworkState | None = None,
    teacher_head: HeadState | None = None,
    hook: Hook | None = None,
) -> list[IterationRecord]:
    """Shared engine behind pretraining and every distillation mode."""
    if teacher is None and cfg.mode != "none":
        raise ConfigError(f"mode {cfg.mode!r} needs a teacher")
    if teacher is not None:
        if teacher.spec.d_in != student.spec.d_in:
            raise ConfigError(
                f"teacher input dim {teacher.spec.d_in} != student {student.spec.d_in}"
            )
        if teacher.spec.d_embed != student.spec.d_embed and cfg.mode not in ("none", "kl"):
            raise ConfigError(
                f"mode {cfg.mode!r} needs matching embedding dims, got teacher "
                f"{teacher.spec.d_embed} vs student {student.spec.d_embed}"
            )
    if cfg.mode == "kl" and teacher_head is None:
        raise ConfigError("mode 'kl' needs the teacher's classification head")

    rng = np.random.default_rng(cfg.seed)
    stream = batch_stream(data.train_x.shape[0], cfg.batch_size, rng)
    # relational banks only make sense when both nets embed into the same
    # space; logit-space and supervised-only modes may legally mismatch
    banks = (
        BankPair(cfg.bank_ratio * cfg.batch_size, teacher.spec.d_embed)
        if teacher is not None and teacher.spec.d_embed == student.spec.d_embed
        else None
    )
    t_cache = (
        _teacher_embedding_cache(teacher, data.train_x, cfg.batch_size)
        if (teacher is not None and cfg.cache_teacher)
        else None
    )

    records: list[IterationRecord] = []
    for iteration in range(1, cfg.iterations + 1):
        idx = next(stream)
        xb = data.train_x[idx]
        yb = data.train_y[idx]
        lr = step_decay_lr(cfg.base_lr, iteration, cfg.milestones, cfg.lr_factor)

        e_s, net_cache = forward(student, xb)
        fr_out, grad_head = fr_margin_loss(e_s, yb, head.params, head.weights)

        info: dict = {"indices": idx, "e_s": e_s}
        kd_value = 0.0
        if teacher is not None:
            e_t = t_cache[idx] if t_cache is not None else forward(teacher, xb)[0]
            info["e_t"] = e_t
            same_dim = e_t.shape[1] == e_s.shape[1]
            iled_out = (
                iled_loss(e_t, e_s, cfg.iled)
                if same_dim
                else _zero_loss(e_s, {"mean_cos": 0.0})
            )
            if banks is not None and banks.is_ready():
                f_t, f_s = banks.snapshots()
                rpsd_out = rpsd_loss(e_t, e_s, f_t, f_s, cfg.rpsd)
            else:
                rpsd_out = _zero_loss(e_s, {"delta_norm": 0.0})

            if cfg.mode == "unified":
                total = unified_loss(iled_out, rpsd_out, fr_out, cfg.iled, cfg.rpsd)
            elif cfg.mode == "iled_only":
                total = LossOutput(
                    fr_out.value + cfg.iled.weight * iled_out.value,
                    fr_out.grad + cfg.iled.weight * iled_out.grad,
                )
            elif cfg.mode == "rpsd_only":
                total = LossOutput(
                    fr_out.value + cfg.rpsd.weight * rpsd_out.value,
                    fr_out.grad + cfg.rpsd.weight * rpsd_out.grad,
                )
            elif cfg.mode == "fc_only":
                kd = fc_loss(e_t, e_s)
                kd_value = kd.value
                total = LossOutput(
                    fr_out.value + cfg.fc_weight * kd.value,
                    fr_out.grad + cfg.fc_weight * kd.grad,
                )
            elif cfg.mode == "raw_l2":
                kd = raw_l2_loss(e_t, e_s)
                kd_value = kd.value
                total = LossOutput(
                    fr_out.value + cfg.raw_l2_weight * kd.value,
                    fr_out.grad + cfg.raw_l2_weight * kd.grad,
                )
            elif cfg.mode == "kl":
                t_logits = head_logits(e_t, teacher_head.weights, teacher_head.params.scale)
                s_logits = head_logits(e_s, head.weights, head.params.scale)
                kd = kl_soft_logits_loss(t_logits, s_logits, cfg.kl)
                kd_value = kd.value
                g_emb, g_w = head_logits_backward(
                    e_s, head.weights, kd.grad, head.params.scale
                )
                grad_head = grad_head + cfg.kl_weight * g_w
                total = LossOutput(
                    fr_out.value + cfg.kl_weight * kd.value,
                    fr_out.grad + cfg.kl_weight * g_emb,
                )
                info["t_logits"] = t_logits
                info["s_logits"] = s_logits
            else:  # none
                total = fr_out
            mean_cos = iled_out.aux.get("mean_cos", 0.0)
            delta_norm = rpsd_out.aux.get("delta_norm", 0.0)
            loss_iled = iled_out.value
            loss_rpsd = rpsd_out.value
        else:
            total = fr_out
            mean_cos = delta_norm = loss_iled = loss_rpsd = 0.0

        _check_finite(
            {
                "loss_fr": fr_out.value,
                "loss_total": total.value,
                "embedding_max": float(np.abs(e_s).max(initial=0.0)),
            },
            iteration,
        )

        d_w, d_b, _ = backward(student, net_cache, total.grad)
        sgd_momentum_step(student, d_w, d_b, lr, cfg.momentum)
        momentum_update(head.weights, head.vel, grad_head, lr, cfg.momentum)
        if banks is not None:
            banks.enqueue_pair(e_t, e_s)

        if iteration % cfg.log_every == 0 or iteration == cfg.iterations:
            records.append(
                IterationRecord(
                    iteration=iteration,
                    lr=lr,
                    loss_fr=fr_out.value,
                    loss_iled=loss_iled,
                    loss_rpsd=loss_rpsd,
                    loss_total=total.value,
                    mean_cos=mean_cos,
                    delta_norm=delta_norm,
                    loss_kd=kd_value,
                )
            )
            if hook is not None:
                info["record"] = records[-1]
                info["bank_fill"] = banks.teacher.fill if banks is not None else 0
                hook(iteration, info)
    return records


def _new_head(params: FrHeadParams, d_embed: int, seed: int) -> HeadState:
    return HeadState(params, init_class_weights(params.classes, d_embed, seed))


def pretrain_teacher(
    spec: DenseNetSpec,
    head_params: FrHeadParams,
    data: SyntheticDataset,
    cfg: TrainConfig,
) -> tuple[NetworkState, HeadState, list[IterationRecord]]:
    """Supervised-only fit of a fresh network; KD settings in cfg are ignored.

    The head is seeded from spec.seed + 1 so (spec, cfg, data) fully
    determine the result.
    """
    net = init_network(spec)
    head = _new_head(head_params, spec.d_embed, spec.seed + 1)
    records = _fit(net, head, data, replace(cfg, mode="none"))
    return net, head, records


def distill_student(
    student_spec: DenseNetSpec,
    head_params: FrHeadParams,
    data: SyntheticDataset,
    cfg: TrainConfig,
    teacher: NetworkState,
    teacher_head: HeadState | None = None,
    hook: Hook | None = None,
) -> tuple[NetworkState, HeadState, list[IterationRecord]]:
    """Train a fresh student against a frozen teacher under cfg.mode."""
    net = init_network(student_spec)
    head = _new_head(head_params, student_spec.d_embed, student_spec.seed + 1)
    records = _fit(net, head, data, cfg, teacher, teacher_head, hook)
    return net, head, records


def run_baseline(
    student_spec: DenseNetSpec,
    head_params: FrHeadParams,
    data: SyntheticDataset,
    cfg: TrainConfig,
    teacher: NetworkState,
    teacher_head: HeadState | None = None,
    hook: Hook | None = None,
) -> tuple[NetworkState, HeadState, list[IterationRecord]]:
    """distill_student restricted to the classical baseline KD modes."""
    if cfg.mode not in ("fc_only", "raw_l2", "kl"):
        raise ConfigError(f"run_baseline expects a baseline mode, got {cfg.mode!r}")
    return distill_student(student_spec, head_params, data, cfg, teacher, teacher_head, hook)
