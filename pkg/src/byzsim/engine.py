"""Synchronous parameter-server training loop.

Each round: every worker samples a batch from its shard, computes the exact
gradient at the current parameters, folds it into a heavy-ball momentum
buffer (buffer <- mu * buffer + grad) and submits the buffer; the configured
attack then overwrites the byzantine slots; the configured rule aggregates;
the server applies theta <- theta - lr * aggregate. Everything is a pure
function of the SimConfig, including every random draw, so two runs of the
same config produce identical metric series.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .aggregators import (
    BUCKETED_BASE,
    LS_BASE,
    RULE_IDS,
    AggregatorConfig,
    LSConfig,
    aggregate,
    ls_pipeline,
)
from .attacks import ATTACK_IDS, AttackConfig, AttackContext, apply_attack, mimic_select_victim
from .models import MODEL_NAMES, make_model
from .partition import DataShard, LabeledDataset, PartitionSpec, label_entropy, make_partition
from .rng import substream


def byzantine_count(n: int, delta: float) -> int:
    """delta * n, required to be (numerically) integral."""
    b = round(delta * n)
    if abs(delta * n - b) > 1e-6:
        raise ValueError(f"delta * n must be integral, got {delta} * {n} = {delta * n}")
    return int(b)


@dataclass(frozen=True)
class SimConfig:
    """Full experiment description; the metric series is a pure function of it."""

    n: int = 25
    delta: float = 0.0
    rule: str = "mean"
    attack: str = "none"
    z: float = 0.25
    epsilon: float = 0.1
    partition: PartitionSpec = field(default_factory=PartitionSpec)
    model: str = "softmax"
    hidden: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 128
    rounds: int = 300
    eval_every: int = 10
    seed: int = 0
    alpha_t: float = 1.0
    alpha_b: float = 1.0 / 9.0
    eps_div: float = 1e-8
    m: Optional[int] = None
    bucket_s: int = 2
    trim_t: Optional[int] = None

    def __post_init__(self):
        if self.rule not in RULE_IDS:
            raise ValueError(f"unknown rule {self.rule!r} (expected one of {RULE_IDS})")
        if self.attack not in ATTACK_IDS:
            raise ValueError(f"unknown attack {self.attack!r} (expected one of {ATTACK_IDS})")
        if self.model not in MODEL_NAMES:
            raise ValueError(f"unknown model {self.model!r} (expected one of {MODEL_NAMES})")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if self.eval_every < 1:
            raise ValueError("eval_every must be at least 1")
        byzantine_count(self.n, self.delta)  # validates integrality

    @property
    def b(self) -> int:
        return byzantine_count(self.n, self.delta)

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    train_loss: float
    test_top1: float
    lambda_summary: Optional[tuple[float, float, float]] = None  # (min, max, trusted mass)


@dataclass
class WorkerState:
    worker_id: int
    shard: DataShard
    role: str  # "honest" | "byzantine"
    momentum: np.ndarray
    rng: np.random.Generator
    order: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    cursor: int = 0


def _next_batch_indices(ws: WorkerState, batch_size: int) -> np.ndarray:
    # Epoch-wise reshuffle; the drawn window is sorted so the batch gradient
    # does not depend on the draw order (a batch is a set).
    size = min(batch_size, ws.shard.indices.size)
    if ws.cursor + size > ws.order.size:
        ws.order = ws.rng.permutation(ws.shard.indices.size)
        ws.cursor = 0
    window = ws.order[ws.cursor : ws.cursor + size]
    ws.cursor += size
    return np.sort(ws.shard.indices[window])


def worker_step(ws: WorkerState, model, theta: np.ndarray, train: LabeledDataset, batch_size: int, momentum: float) -> tuple[float, np.ndarray]:
    """One local step: batch gradient folded into the momentum buffer.

    Returns (batch loss, submission); the submission is a copy of the buffer
    so downstream attack code cannot corrupt worker state.
    """
    idx = _next_batch_indices(ws, batch_size)
    loss, grad = model.loss_and_grad(theta, train.features[idx], train.labels[idx])
    ws.momentum = momentum * ws.momentum + grad
    return loss, ws.momentum.copy()


def evaluate_top1(model, theta: np.ndarray, ds: LabeledDataset) -> float:
    """Fraction of samples whose argmax predicted class matches the label."""
    if len(ds) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return float(np.mean(model.predict(theta, ds.features) == ds.labels))


class Simulation:
    """Holds the mutable run state (parameters, worker buffers, streams)."""

    def __init__(self, cfg: SimConfig, train: LabeledDataset, test: LabeledDataset):
        if train.n_features != test.n_features or train.n_classes != test.n_classes:
            raise ValueError("train and test sets disagree on features or classes")
        self.cfg = cfg
        self.train = train
        self.test = test
        b = cfg.b
        byz_ids = tuple(range(cfg.n - b, cfg.n))  # last b worker ids
        self.honest_ids = np.arange(cfg.n - b)

        shards = make_partition(train, cfg.n, cfg.partition, default_seed=cfg.seed)
        self.model = make_model(cfg.model, train.n_features, train.n_classes, cfg.hidden)
        self.theta = self.model.init_params(substream(cfg.seed, "init"))
        self.workers = [
            WorkerState(
                worker_id=i,
                shard=shards[i],
                role="byzantine" if i in byz_ids else "honest",
                momentum=np.zeros(self.model.dim),
                rng=substream(cfg.seed, "worker", i),
            )
            for i in range(cfg.n)
        ]

        victim = None
        if cfg.attack == "mimic":
            entropies = [(int(i), label_entropy(shards[i], train)) for i in self.honest_ids]
            victim = mimic_select_victim(entropies)
        self.victim_id = victim

        self.attack_cfg = AttackConfig(kind=cfg.attack, z=cfg.z, epsilon=cfg.epsilon, byzantine_ids=byz_ids)
        # bucket_s only constrains bucketed rules; clamp it for the others so
        # e.g. a single-worker mean run does not trip the s <= n invariant
        bucket_s = cfg.bucket_s if cfg.rule in BUCKETED_BASE else min(cfg.bucket_s, cfg.n)
        self.agg_cfg = AggregatorConfig(n=cfg.n, b=b, m=cfg.m, bucket_s=bucket_s, trim_t=cfg.trim_t)
        self.ls_cfg = LSConfig(alpha_t=cfg.alpha_t, alpha_b=cfg.alpha_b, eps_div=cfg.eps_div)
        self.bucket_rng = substream(cfg.seed, "bucketing")

    def run_round(self, round_index: int, evaluate: bool) -> Optional[RoundRecord]:
        cfg = self.cfg
        losses = np.empty(cfg.n)
        submissions = np.empty((cfg.n, self.model.dim))
        for ws in self.workers:
            losses[ws.worker_id], submissions[ws.worker_id] = worker_step(
                ws, self.model, self.theta, self.train, cfg.batch_size, cfg.momentum
            )
        if not np.all(np.isfinite(submissions)):
            raise RuntimeError(
                f"non-finite worker submission in round {round_index} "
                f"(rule={cfg.rule}, attack={cfg.attack}, seed={cfg.seed}); training diverged"
            )

        byz = list(self.attack_cfg.byzantine_ids)
        ctx = AttackContext(
            honest_ids=self.honest_ids,
            honest_submissions=submissions[self.honest_ids],
            own_gradients=submissions[byz] if byz else None,
            victim_id=self.victim_id,
            round_index=round_index,
        )
        attacked = apply_attack(submissions, self.attack_cfg, ctx)

        lam_summary = None
        if cfg.rule in LS_BASE:
            vector, lam, assessment = ls_pipeline(LS_BASE[cfg.rule], attacked, self.agg_cfg, self.ls_cfg)
            lam_summary = (float(lam.min()), float(lam.max()), float(lam[assessment.trusted].sum()))
        else:
            vector, _ = aggregate(cfg.rule, attacked, self.agg_cfg, self.ls_cfg, seed=self.bucket_rng)

        self.theta = self.theta - cfg.lr * vector
        if not np.all(np.isfinite(self.theta)):
            raise RuntimeError(
                f"non-finite parameters after round {round_index} (rule={cfg.rule}, attack={cfg.attack}, seed={cfg.seed})"
            )
        if not evaluate:
            return None
        return RoundRecord(
            round_index=round_index,
            train_loss=float(losses.mean()),
            test_top1=evaluate_top1(self.model, self.theta, self.test),
            lambda_summary=lam_summary,
        )

    def run(self) -> list[RoundRecord]:
        records = []
        for t in range(1, self.cfg.rounds + 1):
            record = self.run_round(t, evaluate=(t % self.cfg.eval_every == 0 or t == self.cfg.rounds))
            if record is not None:
                records.append(record)
        return records


def eval_round_indices(rounds: int, eval_every: int) -> list[int]:
    """The rounds on which metrics are recorded (multiples plus the final round)."""
    return [t for t in range(1, rounds + 1) if t % eval_every == 0 or t == rounds]


def run_experiment(cfg: SimConfig, train: LabeledDataset, test: LabeledDataset) -> list[RoundRecord]:
    """Partition, train for cfg.rounds rounds, and return the eval-round records."""
    return Simulation(cfg, train, test).run()
