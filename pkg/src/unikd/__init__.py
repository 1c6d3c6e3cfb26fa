"""Unified embedding-distillation engine.

Trains a small student network to mimic a larger frozen teacher through two
complementary signals: an instance-level term that pushes each student
embedding toward its teacher counterpart once their cosine falls below a soft
margin, and a relation-level term that matches pairwise similarity structure
against a FIFO bank of recent embeddings. Everything is plain NumPy with
hand-derived gradients; an optional compiled kernel backend accelerates the
cosine-geometry hot spots.
"""

from .bank import BankPair, MemoryBank
from .config import RunConfig, config_reference, default_config, load_config
from .data import PairSet, SyntheticDataset, SyntheticDatasetSpec, generate_dataset
from .errors import (
    BankEmptyError,
    BankNotReadyError,
    ConfigError,
    DivergenceError,
    InsufficientNegativesError,
    RangeError,
    UnikdError,
)
from .evaluation import evaluation_report, pair_accuracy, pair_scores, tar_at_far
from .geometry import (
    cosine_sim,
    diag_cosines,
    l2_normalize,
    mean_cosine,
    pairwise_cosine_matrix,
    triplet_angle_direct,
    triplet_angle_from_pairwise,
)
from .losses import (
    IledParams,
    KlParams,
    LossOutput,
    RpsdParams,
    fc_loss,
    fc_loss_cosform,
    iled_core,
    iled_loss,
    kl_soft_logits_loss,
    raw_l2_loss,
    rpsd_core,
    rpsd_loss,
    unified_loss,
)
from .models import (
    DenseNetSpec,
    FrHeadParams,
    HeadState,
    NetworkState,
    forward,
    fr_margin_loss,
    init_network,
    param_hash,
    step_decay_lr,
)
from .training import (
    TrainConfig,
    IterationRecord,
    distill_student,
    pretrain_teacher,
    run_baseline,
)

__version__ = "0.1.0"

__all__ = [
    "BankEmptyError",
    "BankNotReadyError",
    "BankPair",
    "ConfigError",
    "DenseNetSpec",
    "DivergenceError",
    "FrHeadParams",
    "HeadState",
    "IledParams",
    "InsufficientNegativesError",
    "IterationRecord",
    "KlParams",
    "LossOutput",
    "MemoryBank",
    "NetworkState",
    "PairSet",
    "RangeError",
    "RpsdParams",
    "RunConfig",
    "SyntheticDataset",
    "SyntheticDatasetSpec",
    "TrainConfig",
    "UnikdError",
    "config_reference",
    "cosine_sim",
    "default_config",
    "diag_cosines",
    "distill_student",
    "evaluation_report",
    "fc_loss",
    "fc_loss_cosform",
    "forward",
    "fr_margin_loss",
    "generate_dataset",
    "iled_core",
    "iled_loss",
    "init_network",
    "kl_soft_logits_loss",
    "l2_normalize",
    "load_config",
    "mean_cosine",
    "pair_accuracy",
    "pair_scores",
    "pairwise_cosine_matrix",
    "param_hash",
    "pretrain_teacher",
    "raw_l2_loss",
    "rpsd_core",
    "rpsd_loss",
    "run_baseline",
    "step_decay_lr",
    "tar_at_far",
    "triplet_angle_direct",
    "triplet_angle_from_pairwise",
    "unified_loss",
    "__version__",
]
