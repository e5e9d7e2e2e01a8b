"""Byzantine submission generators, applied to each round's submission set
before aggregation.

* alie: all attackers send mean - z * std of the honest submissions, a small
  coordinated shift that hides inside the honest spread.
* ipm: all attackers send -epsilon times the honest average, dragging the
  aggregate's inner product with the true direction negative.
* bitflip: each attacker negates its own true submission (sign-flip fault).
* mimic: all attackers replay the submission of a chosen honest victim (the
  worker with the least diverse local labels), over-representing it.

alie/ipm read the honest workers' current submissions, i.e. the attacker is
omniscient; honest slots are never modified.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gradients import as_gradient_vector, as_submission_matrix

ATTACK_IDS = ("none", "alie", "ipm", "bitflip", "mimic")


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "none"
    z: float = 0.25
    epsilon: float = 0.1
    byzantine_ids: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ATTACK_IDS:
            raise ValueError(f"unknown attack {self.kind!r} (expected one of {ATTACK_IDS})")
        if self.z < 0:
            raise ValueError("z must be non-negative")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        ids = tuple(sorted(int(i) for i in self.byzantine_ids))
        if len(set(ids)) != len(ids):
            raise ValueError("byzantine ids must be distinct")
        if ids and ids[0] < 0:
            raise ValueError("byzantine ids must be non-negative")
        object.__setattr__(self, "byzantine_ids", ids)


@dataclass(frozen=True)
class AttackContext:
    """What the attacker can see this round: the honest submissions (in
    honest_ids order), the attackers' own true submissions, and the fixed
    mimic victim if one was chosen."""

    honest_ids: np.ndarray
    honest_submissions: np.ndarray
    own_gradients: Optional[np.ndarray] = None
    victim_id: Optional[int] = None
    round_index: int = 0


def alie_attack(honest_submissions, z: float) -> np.ndarray:
    """Coordinate-wise mean - z * std over honest submissions (population std)."""
    honest = as_submission_matrix(honest_submissions)
    return honest.mean(axis=0) - z * honest.std(axis=0)


def ipm_attack(honest_submissions, epsilon: float) -> np.ndarray:
    """-epsilon times the honest coordinate-wise mean."""
    honest = as_submission_matrix(honest_submissions)
    return -epsilon * honest.mean(axis=0)


def bitflip_attack(own) -> np.ndarray:
    """Negate the worker's own true submission."""
    return -as_gradient_vector(own)


def mimic_select_victim(entropies: Sequence[tuple[int, float]]) -> int:
    """Pick the worker with the smallest label entropy; ties go to the lowest
    id. Chosen once per experiment and fixed thereafter."""
    if not entropies:
        raise ValueError("no candidate workers for mimic victim selection")
    worker_id, _ = min(entropies, key=lambda pair: (pair[1], pair[0]))
    return int(worker_id)


def mimic_attack(ctx: AttackContext) -> np.ndarray:
    """Exact copy of the victim's current-round submission."""
    if ctx.victim_id is None:
        raise ValueError("mimic attack requires a victim id")
    pos = np.flatnonzero(np.asarray(ctx.honest_ids) == ctx.victim_id)
    if pos.size == 0:
        raise ValueError(f"mimic victim {ctx.victim_id} is not among the honest workers")
    return as_submission_matrix(ctx.honest_submissions)[int(pos[0])].copy()


def apply_attack(submissions, cfg: AttackConfig, ctx: AttackContext) -> np.ndarray:
    """Replace the byzantine workers' slots with the attack output; honest
    slots pass through untouched. kind='none' is the identity."""
    mat = as_submission_matrix(submissions)
    ids = list(cfg.byzantine_ids)
    if cfg.kind == "none" or not ids:
        return mat
    if ids[-1] >= mat.shape[0]:
        raise ValueError(f"byzantine id {ids[-1]} out of range for {mat.shape[0]} workers")
    out = mat.copy()
    if cfg.kind == "alie":
        out[ids] = alie_attack(ctx.honest_submissions, cfg.z)
    elif cfg.kind == "ipm":
        out[ids] = ipm_attack(ctx.honest_submissions, cfg.epsilon)
    elif cfg.kind == "bitflip":
        for worker_id in ids:
            out[worker_id] = -mat[worker_id]
    elif cfg.kind == "mimic":
        out[ids] = mimic_attack(ctx)
    return out
