"""Line-oriented run configuration: `section.key = value` per line.

Blank lines and lines starting with `#` are ignored. Every key has a
documented default; unknown or duplicate keys are hard errors so sweep files
stay diffable and typo-proof. The same parser applies `--sweep`-style
overrides (strings of the form `key=value`).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .data import SyntheticDatasetSpec
from .errors import ConfigError
from .evaluation import METRICS
from .losses import IledParams, KlParams, RpsdParams
from .models import DenseNetSpec, FrHeadParams
from .training import TrainConfig


def _parse_int(s: str) -> int:
    return int(s)


def _parse_float(s: str) -> float:
    return float(s)


def _parse_str(s: str) -> str:
    return s


def _parse_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_int_list(s: str) -> tuple[int, ...]:
    if not s.strip():
        return ()
    return tuple(int(part) for part in s.split(","))


def _parse_float_list(s: str) -> tuple[float, ...]:
    if not s.strip():
        return ()
    return tuple(float(part) for part in s.split(","))


@dataclass(frozen=True)
class _Field:
    parse: Callable[[str], object]
    default: object
    help: str


SCHEMA: dict[str, _Field] = {
    "dataset.classes": _Field(_parse_int, 50, "number of synthetic identities"),
    "dataset.input_dim": _Field(_parse_int, 64, "ambient input dimension"),
    "dataset.samples_per_class": _Field(_parse_int, 40, "samples drawn per identity"),
    "dataset.noise": _Field(_parse_float, 0.3, "in-class noise scale before renormalization"),
    "dataset.train_fraction": _Field(_parse_float, 0.75, "per-class fraction used for training"),
    "dataset.pos_pairs": _Field(_parse_int, 2000, "positive verification pairs"),
    "dataset.neg_pairs": _Field(_parse_int, 2000, "negative verification pairs"),
    "dataset.seed": _Field(_parse_int, 0, "dataset generation seed"),
    "teacher.widths": _Field(_parse_int_list, (64, 256, 256, 32), "teacher layer widths incl. input/embedding"),
    "teacher.activation": _Field(_parse_str, "relu", "teacher hidden activation: relu or tanh"),
    "teacher.seed": _Field(_parse_int, 11, "teacher init seed (head uses seed+1)"),
    "teacher.iterations": _Field(_parse_int, 3000, "teacher pretraining iterations"),
    "teacher.base_lr": _Field(_parse_float, 0.1, "teacher base learning rate"),
    "teacher.milestones": _Field(_parse_int_list, (1500, 2400), "teacher lr decay milestones"),
    "teacher.lr_factor": _Field(_parse_float, 0.1, "teacher lr decay factor"),
    "teacher.checkpoint": _Field(_parse_str, "", "path to a saved teacher; empty = pretrain"),
    "student.widths": _Field(_parse_int_list, (64, 32, 32), "student layer widths incl. input/embedding"),
    "student.activation": _Field(_parse_str, "relu", "student hidden activation: relu or tanh"),
    "student.seed": _Field(_parse_int, 21, "student init seed (head uses seed+1)"),
    "train.mode": _Field(_parse_str, "unified", "KD mode: none, fc_only, raw_l2, kl, iled_only, rpsd_only, unified"),
    "train.iterations": _Field(_parse_int, 1400, "distillation iterations"),
    "train.batch_size": _Field(_parse_int, 64, "mini-batch size (teacher pretraining too)"),
    "train.base_lr": _Field(_parse_float, 0.1, "student base learning rate"),
    "train.milestones": _Field(_parse_int_list, (500, 1000, 1200, 1400), "student lr decay milestones"),
    "train.lr_factor": _Field(_parse_float, 0.1, "student lr decay factor"),
    "train.momentum": _Field(_parse_float, 0.9, "SGD momentum, shared by both phases"),
    "train.seed": _Field(_parse_int, 31, "batch-shuffling seed for distillation"),
    "train.log_every": _Field(_parse_int, 1, "record metrics every N iterations"),
    "train.bank_ratio": _Field(_parse_int, 3, "bank capacity as a multiple of batch size"),
    "train.cache_teacher": _Field(_parse_bool, False, "precompute teacher embeddings (bit-identical outputs)"),
    "train.iled_variant": _Field(_parse_str, "per_sample", "instance loss form: per_sample or batch_mean"),
    "train.iled_weight": _Field(_parse_float, 70.0, "instance-level loss weight"),
    "train.iled_steepness": _Field(_parse_float, 40.0, "instance-level softplus steepness"),
    "train.iled_margin": _Field(_parse_float, 0.9, "instance-level soft cosine margin"),
    "train.iled_smoothing": _Field(_parse_float, 0.1, "instance-level smoothing constant"),
    "train.rpsd_weight": _Field(_parse_float, 3.0, "relational loss weight"),
    "train.rpsd_steepness": _Field(_parse_float, 60.0, "relational softplus steepness"),
    "train.rpsd_threshold": _Field(_parse_float, 0.05, "relational transition threshold"),
    "train.rpsd_smoothing": _Field(_parse_float, 1.0, "relational smoothing constant"),
    "train.fc_weight": _Field(_parse_float, 3.0, "baseline normalized-L2 weight"),
    "train.raw_l2_weight": _Field(_parse_float, 0.1, "baseline raw-L2 weight"),
    "train.kl_weight": _Field(_parse_float, 1.0, "baseline soft-logit KL weight"),
    "train.kl_temperature": _Field(_parse_float, 3.0, "soft-logit temperature"),
    "train.margin": _Field(_parse_float, 0.4, "additive cosine margin of the supervision head"),
    "train.margin_scale": _Field(_parse_float, 30.0, "logit scale of the supervision head"),
    "eval.far_targets": _Field(_parse_float_list, (1e-2, 1e-3), "false-accept-rate targets"),
    "eval.metric": _Field(_parse_str, "cosine", "pair score: cosine or euclidean"),
    "output.dir": _Field(_parse_str, "runs/default", "artifact directory (env UNIKD_OUTPUT_DIR overrides)"),
}


@dataclass(frozen=True)
class RunConfig:
    """Typed view of a parsed config file."""

    dataset: SyntheticDatasetSpec
    teacher_spec: DenseNetSpec
    teacher_train: TrainConfig
    teacher_checkpoint: str
    student_spec: DenseNetSpec
    train: TrainConfig
    head: FrHeadParams
    far_targets: tuple[float, ...]
    metric: str
    output_dir: str


def parse_override(text: str) -> tuple[str, str]:
    """Split a `key=value` override string, validating the key."""
    key, sep, value = text.partition("=")
    key = key.strip()
    if not sep:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r} in override")
    return key, value.strip()


def parse_config_text(
    text: str, overrides: tuple[str, ...] = (), source: str = "<config>"
) -> RunConfig:
    values = {key: f.default for key, f in SCHEMA.items()}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            values[key] = SCHEMA[key].parse(value.strip())
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    for item in overrides:
        key, value = parse_override(item)
        try:
            values[key] = SCHEMA[key].parse(value)
        except ValueError as exc:
            raise ConfigError(f"override {key}: bad value: {exc}") from exc
    return _build(values)


def load_config(path: str | Path, overrides: tuple[str, ...] = ()) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(), overrides, source=str(p))


def default_config(overrides: tuple[str, ...] = ()) -> RunConfig:
    return parse_config_text("", overrides, source="<defaults>")


def _build(v: dict[str, object]) -> RunConfig:
    try:
        dataset = SyntheticDatasetSpec(
            classes=v["dataset.classes"],
            input_dim=v["dataset.input_dim"],
            samples_per_class=v["dataset.samples_per_class"],
            noise=v["dataset.noise"],
            train_fraction=v["dataset.train_fraction"],
            pos_pairs=v["dataset.pos_pairs"],
            neg_pairs=v["dataset.neg_pairs"],
            seed=v["dataset.seed"],
        )
        teacher_spec = DenseNetSpec(v["teacher.widths"], v["teacher.activation"], v["teacher.seed"])
        student_spec = DenseNetSpec(v["student.widths"], v["student.activation"], v["student.seed"])
        head = FrHeadParams(
            classes=dataset.classes,
            scale=v["train.margin_scale"],
            margin=v["train.margin"],
        )
        iled = IledParams(
            steepness=v["train.iled_steepness"],
            margin=v["train.iled_margin"],
            smoothing=v["train.iled_smoothing"],
            weight=v["train.iled_weight"],
            variant=v["train.iled_variant"],
        )
        rpsd = RpsdParams(
            steepness=v["train.rpsd_steepness"],
            threshold=v["train.rpsd_threshold"],
            smoothing=v["train.rpsd_smoothing"],
            weight=v["train.rpsd_weight"],
        )
        kl = KlParams(temperature=v["train.kl_temperature"])
        train = TrainConfig(
            batch_size=v["train.batch_size"],
            iterations=v["train.iterations"],
            base_lr=v["train.base_lr"],
            milestones=v["train.milestones"],
            lr_factor=v["train.lr_factor"],
            momentum=v["train.momentum"],
            mode=v["train.mode"],
            iled=iled,
            rpsd=rpsd,
            kl=kl,
            fc_weight=v["train.fc_weight"],
            raw_l2_weight=v["train.raw_l2_weight"],
            kl_weight=v["train.kl_weight"],
            bank_ratio=v["train.bank_ratio"],
            seed=v["train.seed"],
            log_every=v["train.log_every"],
            cache_teacher=v["train.cache_teacher"],
        )
        teacher_train = TrainConfig(
            batch_size=v["train.batch_size"],
            iterations=v["teacher.iterations"],
            base_lr=v["teacher.base_lr"],
            milestones=v["teacher.milestones"],
            lr_factor=v["teacher.lr_factor"],
            momentum=v["train.momentum"],
            mode="none",
            seed=v["teacher.seed"],
            log_every=v["train.log_every"],
        )
    except ValueError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc

    if v["eval.metric"] not in METRICS:
        raise ConfigError(
            f"eval.metric must be one of {METRICS}, got {v['eval.metric']!r}"
        )
    for spec_name, spec in (("teacher", teacher_spec), ("student", student_spec)):
        if spec.d_in != dataset.input_dim:
            raise ConfigError(
                f"{spec_name}.widths starts at {spec.d_in} but "
                f"dataset.input_dim is {dataset.input_dim}"
            )
    if train.mode not in ("none", "kl") and teacher_spec.d_embed != student_spec.d_embed:
        raise ConfigError(
            f"train.mode {train.mode!r} needs matching embedding widths, got "
            f"teacher {teacher_spec.d_embed} vs student {student_spec.d_embed}"
        )
    return RunConfig(
        dataset=dataset,
        teacher_spec=teacher_spec,
        teacher_train=teacher_train,
        teacher_checkpoint=str(v["teacher.checkpoint"]),
        student_spec=student_spec,
        train=train,
        head=head,
        far_targets=tuple(v["eval.far_targets"]),
        metric=str(v["eval.metric"]),
        output_dir=str(v["output.dir"]),
    )


def config_reference() -> str:
    """Every key with its default and purpose; the output is itself parseable."""
    lines = []
    section = ""
    for key, f in SCHEMA.items():
        head = key.split(".", 1)[0]
        if head != section:
            if section:
                lines.append("")
            section = head
        if isinstance(f.default, tuple):
            default = ",".join(str(x) for x in f.default)
        else:
            default = str(f.default)
        lines.append(f"# {f.help}")
        lines.append(f"{key} = {default}")
    return "\n".join(lines) + "\n"
