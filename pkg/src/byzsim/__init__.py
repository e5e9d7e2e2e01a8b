"""Byzantine-robust distributed-SGD simulation toolkit.

Robust aggregation rules (coordinate median, multi-Krum, Aksel, trimmed
mean), bucketing and trust-weighted variants, poisoning attacks (alie, ipm,
bitflip, mimic), non-IID data partitioning, and a deterministic synchronous
parameter-server training loop with a config-driven CLI.
"""
from .aggregators import (
    AggregatorConfig,
    LSConfig,
    RULE_IDS,
    TrustAssessment,
    aggregate,
    aksel_aggregate,
    assess_trust,
    bucketing_wrap,
    cm_aggregate,
    krum_scores,
    ls_aggregate,
    mean_aggregate,
    mkrum_aggregate,
)
from .attacks import (
    ATTACK_IDS,
    AttackConfig,
    AttackContext,
    alie_attack,
    apply_attack,
    bitflip_attack,
    ipm_attack,
    mimic_attack,
    mimic_select_victim,
)
from .datasets import default_synth_corpus, load_idx_dataset, synth_dataset
from .engine import RoundRecord, SimConfig, Simulation, evaluate_top1, run_experiment
from .gradients import (
    coordinate_median,
    coordinate_trimmed_mean,
    euclidean_distance_sq,
)
from .models import OneHiddenLayerNet, SoftmaxRegression, make_model
from .partition import (
    DataShard,
    LabeledDataset,
    PartitionSpec,
    label_entropy,
    make_partition,
    partition_dirichlet,
    partition_iid,
    partition_k_classes,
)
from .rng import substream

__version__ = "0.1.0"

__all__ = [
    "AggregatorConfig", "LSConfig", "RULE_IDS", "TrustAssessment",
    "aggregate", "aksel_aggregate", "assess_trust", "bucketing_wrap",
    "cm_aggregate", "krum_scores", "ls_aggregate", "mean_aggregate",
    "mkrum_aggregate",
    "ATTACK_IDS", "AttackConfig", "AttackContext", "alie_attack",
    "apply_attack", "bitflip_attack", "ipm_attack", "mimic_attack",
    "mimic_select_victim",
    "default_synth_corpus", "load_idx_dataset", "synth_dataset",
    "RoundRecord", "SimConfig", "Simulation", "evaluate_top1", "run_experiment",
    "coordinate_median", "coordinate_trimmed_mean", "euclidean_distance_sq",
    "OneHiddenLayerNet", "SoftmaxRegression", "make_model",
    "DataShard", "LabeledDataset", "PartitionSpec", "label_entropy",
    "make_partition", "partition_dirichlet", "partition_iid", "partition_k_classes",
    "substream",
]
