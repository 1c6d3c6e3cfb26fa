"""Shared fixtures: a desk-size dataset and a pretrained teacher for it.

The tiny setup is deliberately much smaller than the bundled defaults so
trainer and CLI tests run in fractions of a second; session scope keeps the
one teacher pretraining shared across every test that needs it.
"""

import numpy as np
import pytest

from unikd import (
    DenseNetSpec,
    FrHeadParams,
    SyntheticDatasetSpec,
    TrainConfig,
    generate_dataset,
    pretrain_teacher,
)

TINY_DATASET = SyntheticDatasetSpec(
    classes=6,
    input_dim=16,
    samples_per_class=16,
    noise=0.3,
    pos_pairs=30,
    neg_pairs=120,
    seed=5,
)
TINY_TEACHER_SPEC = DenseNetSpec((16, 32, 8), "relu", seed=1)
TINY_STUDENT_SPEC = DenseNetSpec((16, 8, 8), "relu", seed=2)
TINY_HEAD = FrHeadParams(classes=6)

TINY_CONFIG_TEXT = """\
dataset.classes = 6
dataset.input_dim = 16
dataset.samples_per_class = 16
dataset.noise = 0.3
dataset.pos_pairs = 30
dataset.neg_pairs = 120
dataset.seed = 5
teacher.widths = 16,32,8
teacher.seed = 1
teacher.iterations = 60
teacher.milestones = 40
student.widths = 16,8,8
student.seed = 2
train.mode = none
train.iterations = 10
train.batch_size = 12
train.milestones = 6,9
eval.far_targets = 0.05
"""


def tiny_train_config(**overrides) -> TrainConfig:
    base = dict(
        batch_size=12,
        iterations=40,
        base_lr=0.1,
        milestones=(20, 32),
        mode="unified",
        seed=7,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def tiny_data():
    return generate_dataset(TINY_DATASET)


@pytest.fixture(scope="session")
def tiny_teacher(tiny_data):
    cfg = tiny_train_config(iterations=150, milestones=(80, 120), mode="none", seed=3)
    net, head, _ = pretrain_teacher(TINY_TEACHER_SPEC, TINY_HEAD, tiny_data, cfg)
    return net, head


@pytest.fixture
def tiny_config_file(tmp_path):
    """Write the tiny config (mode none, 10 iterations) into tmp_path."""
    path = tmp_path / "tiny.cfg"
    out = tmp_path / "out"
    path.write_text(TINY_CONFIG_TEXT + f"output.dir = {out}\n")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
