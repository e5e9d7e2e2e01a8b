"""Robust gradient aggregation rules and their variants.

Base rules: plain mean, coordinate-wise median (cm), multi-Krum (mkrum),
Aksel's median-radius filter (aksel), and coordinate-wise trimmed mean
(tmean). On top of those:

* bucketing (``*-buck``): average random groups of s submissions before
  applying the base rule, reducing inter-worker variance under heterogeneity;
* trust-weighted variants (``cmls``/``mkls``/``als``): instead of discarding
  suspected workers, keep everyone and aggregate the weighted sum
  sum_i lambda_i g_i where lambda_i is proportional to alpha / criterion_i,
  with a smaller alpha for workers the base rule would have dropped. Outliers
  still contribute, just less.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .gradients import as_submission_matrix, coordinate_median, coordinate_trimmed_mean

LS_BASE = {"cmls": "cm", "mkls": "mkrum", "als": "aksel"}
BUCKETED_BASE = {"cm-buck": "cm", "mkrum-buck": "mkrum", "aksel-buck": "aksel"}
BASE_RULES = ("mean", "cm", "mkrum", "aksel", "tmean")
RULE_IDS = BASE_RULES + tuple(BUCKETED_BASE) + tuple(LS_BASE)

SeedLike = Union[int, np.random.Generator]


@dataclass(frozen=True)
class AggregatorConfig:
    """Worker count, declared Byzantine budget, and per-rule knobs.

    m defaults to n - b (keep every presumed-honest worker); trim_t defaults
    to b (discard as many per side as the declared budget).
    """

    n: int
    b: int = 0
    m: Optional[int] = None
    bucket_s: int = 2
    trim_t: Optional[int] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one worker")
        if not 0 <= self.b or not 2 * self.b < self.n:
            raise ValueError(f"byzantine budget must satisfy 0 <= b < n/2, got b={self.b}, n={self.n}")
        if self.m is not None and not 1 <= self.m <= self.n:
            raise ValueError(f"m must be in [1, {self.n}], got {self.m}")
        if not 1 <= self.bucket_s <= self.n:
            raise ValueError(f"bucket size must be in [1, {self.n}], got {self.bucket_s}")
        if self.trim_t is not None and not 0 <= 2 * self.trim_t < self.n:
            raise ValueError(f"trim count must satisfy 0 <= 2*t < n, got t={self.trim_t}")

    @property
    def resolved_m(self) -> int:
        return self.m if self.m is not None else self.n - self.b

    @property
    def resolved_trim_t(self) -> int:
        return self.trim_t if self.trim_t is not None else self.b


@dataclass(frozen=True)
class TrustAssessment:
    """Per-worker robust criterion plus the trusted/suspected split."""

    criteria: np.ndarray
    trusted: np.ndarray
    suspected: np.ndarray

    def __post_init__(self):
        criteria = np.asarray(self.criteria, dtype=np.float64)
        trusted = np.sort(np.asarray(self.trusted, dtype=np.int64))
        suspected = np.sort(np.asarray(self.suspected, dtype=np.int64))
        n = criteria.size
        if not np.all(np.isfinite(criteria)) or np.any(criteria < 0):
            raise ValueError("criteria must be finite and non-negative")
        if trusted.size == 0:
            raise ValueError("trusted set must be non-empty")
        combined = np.concatenate([trusted, suspected])
        if np.intersect1d(trusted, suspected).size:
            raise ValueError("trusted and suspected sets overlap")
        if not np.array_equal(np.sort(combined), np.arange(n)):
            raise ValueError("trusted and suspected sets must cover every worker exactly once")
        object.__setattr__(self, "criteria", criteria)
        object.__setattr__(self, "trusted", trusted)
        object.__setattr__(self, "suspected", suspected)

    @property
    def n(self) -> int:
        return self.criteria.size


@dataclass(frozen=True)
class LSConfig:
    """Trade-off hyper-parameters: trusted weight scale, suspected weight
    scale, and the additive guard that keeps 1/criterion finite."""

    alpha_t: float = 1.0
    alpha_b: float = 1.0 / 9.0
    eps_div: float = 1e-8

    def __post_init__(self):
        if not self.alpha_t > 0:
            raise ValueError("alpha_t must be positive")
        if self.alpha_b < 0:
            raise ValueError("alpha_b must be non-negative")
        if not self.eps_div > 0:
            raise ValueError("eps_div must be positive")


def mean_aggregate(submissions) -> np.ndarray:
    """Coordinate-wise arithmetic mean (the undefended baseline)."""
    return as_submission_matrix(submissions).mean(axis=0)


def cm_aggregate(submissions) -> np.ndarray:
    """Coordinate-wise median."""
    return coordinate_median(submissions)


def _pairwise_sq_dists(mat: np.ndarray) -> np.ndarray:
    n = mat.shape[0]
    dists = np.empty((n, n))
    for i in range(n):
        dists[i] = ((mat - mat[i]) ** 2).sum(axis=1)
    return dists


def krum_scores(submissions, b: int) -> np.ndarray:
    """Score each worker by the summed squared distances to its n-b-2 nearest
    peers (low score = well supported by the crowd). Neighbor ties break
    toward the lower worker index."""
    mat = as_submission_matrix(submissions)
    n = mat.shape[0]
    n_neighbors = n - int(b) - 2
    if n_neighbors < 1:
        raise ValueError(f"krum needs n - b - 2 >= 1, got n={n}, b={b}")
    dists = _pairwise_sq_dists(mat)
    ids = np.arange(n)
    scores = np.empty(n)
    for i in range(n):
        others = ids != i
        row = dists[i, others]
        order = np.lexsort((ids[others], row))
        scores[i] = row[order[:n_neighbors]].sum()
    return scores


def _smallest_ids(values: np.ndarray, count: int) -> np.ndarray:
    # Indices of the `count` smallest values; ties toward the lower index.
    order = np.lexsort((np.arange(values.size), values))
    return np.sort(order[:count])


def mkrum_aggregate(submissions, b: int, m: int) -> np.ndarray:
    """Average of the m submissions with the smallest Krum scores; m=1 is the
    classic single-pick selection."""
    mat = as_submission_matrix(submissions)
    if not 1 <= m <= mat.shape[0]:
        raise ValueError(f"m must be in [1, {mat.shape[0]}], got {m}")
    scores = krum_scores(mat, b)
    return mat[_smallest_ids(scores, int(m))].mean(axis=0)


def aksel_aggregate(submissions) -> np.ndarray:
    """Median-radius filter: keep the workers whose squared distance to the
    coordinate-wise median is at most the median such distance, and average
    them. At least half the workers always survive the filter."""
    mat = as_submission_matrix(submissions)
    center = np.median(mat, axis=0)
    dist_sq = ((mat - center) ** 2).sum(axis=1)
    radius = np.median(dist_sq)
    return mat[dist_sq <= radius].mean(axis=0)


def assess_trust(rule: str, submissions, cfg: AggregatorConfig) -> TrustAssessment:
    """Run a base rule's filtering step and expose its innards: the
    per-worker criterion and the trusted/suspected split.

    * mkrum: criterion = Krum score, trusted = m smallest.
    * aksel: criterion = squared distance to the coordinate median, trusted =
      inside the median radius.
    * cm: criterion = squared distance to the coordinate median, trusted =
      the n - b smallest (the median itself defines no split, so the declared
      budget does).
    """
    mat = as_submission_matrix(submissions)
    n = mat.shape[0]
    if n != cfg.n:
        raise ValueError(f"config is for n={cfg.n} workers but got {n} submissions")
    ids = np.arange(n)
    if rule == "mkrum":
        criteria = krum_scores(mat, cfg.b)
        trusted = _smallest_ids(criteria, cfg.resolved_m)
    elif rule == "aksel":
        center = np.median(mat, axis=0)
        criteria = ((mat - center) ** 2).sum(axis=1)
        radius = np.median(criteria)
        trusted = ids[criteria <= radius]
    elif rule == "cm":
        center = np.median(mat, axis=0)
        criteria = ((mat - center) ** 2).sum(axis=1)
        trusted = _smallest_ids(criteria, n - cfg.b)
    else:
        raise ValueError(f"no trust assessment for rule {rule!r}")
    suspected = np.setdiff1d(ids, trusted)
    return TrustAssessment(criteria=criteria, trusted=trusted, suspected=suspected)


def ls_aggregate(submissions, assessment: TrustAssessment, ls: LSConfig) -> tuple[np.ndarray, np.ndarray]:
    """Weighted sum over all workers with lambda_i ~ alpha / (criterion_i + eps).

    Trusted workers use alpha_t, suspected ones alpha_b; lambda is normalized
    globally over all n workers, so suspected contributions shrink but never
    vanish (unless alpha_b = 0). Returns (aggregate, lambda).
    """
    mat = as_submission_matrix(submissions)
    n = mat.shape[0]
    if assessment.n != n:
        raise ValueError(f"assessment covers {assessment.n} workers but got {n} submissions")
    alpha = np.full(n, ls.alpha_b)
    alpha[assessment.trusted] = ls.alpha_t
    raw = alpha / (assessment.criteria + ls.eps_div)
    total = raw.sum()
    if not total > 0:
        raise ValueError("all trade-off weights vanished; nothing to aggregate")
    lam = raw / total
    return lam @ mat, lam


def bucket_count(n: int, s: int) -> int:
    return math.ceil(n / s)


def bucketed_budget(b: int, n_buckets: int) -> int:
    """Byzantine budget handed to the rule running on bucket means: capped by
    the bucket count and by the inner breakdown bound."""
    return min(b, n_buckets - 1, max(0, math.ceil((n_buckets - 1) / 2) - 1))


def bucketing_wrap(submissions, s: int, seed: SeedLike, inner: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Randomly permute workers, average consecutive groups of s, and hand the
    bucket means to the inner rule. s=1 reduces to the inner rule on a
    permuted set."""
    mat = as_submission_matrix(submissions)
    n = mat.shape[0]
    if not 1 <= s <= n:
        raise ValueError(f"bucket size must be in [1, {n}], got {s}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    perm = rng.permutation(n)
    means = [mat[perm[t * s : (t + 1) * s]].mean(axis=0) for t in range(bucket_count(n, s))]
    return inner(np.asarray(means))


def _base_aggregator(rule: str, cfg: AggregatorConfig) -> Callable[[np.ndarray], np.ndarray]:
    if rule == "mean":
        return mean_aggregate
    if rule == "cm":
        return cm_aggregate
    if rule == "aksel":
        return aksel_aggregate
    if rule == "tmean":
        return lambda mat: coordinate_trimmed_mean(mat, cfg.resolved_trim_t)
    if rule == "mkrum":
        return lambda mat: mkrum_aggregate(mat, cfg.b, cfg.resolved_m)
    raise ValueError(f"unknown base rule {rule!r}")


def ls_pipeline(base_rule: str, submissions, cfg: AggregatorConfig, ls: LSConfig) -> tuple[np.ndarray, np.ndarray, TrustAssessment]:
    """Trust assessment followed by the weighted sum; returns the assessment
    too, for callers that report per-round weight diagnostics."""
    assessment = assess_trust(base_rule, submissions, cfg)
    vector, lam = ls_aggregate(submissions, assessment, ls)
    return vector, lam, assessment


def aggregate(
    rule_id: str,
    submissions,
    cfg: AggregatorConfig,
    ls: Optional[LSConfig] = None,
    seed: Optional[SeedLike] = None,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Uniform dispatch over every rule identifier.

    Returns (aggregate, lambda) where lambda is the normalized trade-off
    vector for the trust-weighted rules and None otherwise. Bucketed rules
    require an explicit seed (or Generator); nothing here touches ambient
    randomness.
    """
    mat = as_submission_matrix(submissions)
    if rule_id in BASE_RULES:
        return _base_aggregator(rule_id, cfg)(mat), None
    if rule_id in BUCKETED_BASE:
        if seed is None:
            raise ValueError(f"rule {rule_id!r} needs an explicit bucketing seed")
        base = BUCKETED_BASE[rule_id]
        n_buckets = bucket_count(mat.shape[0], cfg.bucket_s)
        inner_b = bucketed_budget(cfg.b, n_buckets)
        if base == "mkrum":
            inner = lambda m: mkrum_aggregate(m, inner_b, n_buckets - inner_b)
        else:
            inner = _base_aggregator(base, cfg)
        return bucketing_wrap(mat, cfg.bucket_s, seed, inner), None
    if rule_id in LS_BASE:
        vector, lam, _ = ls_pipeline(LS_BASE[rule_id], mat, cfg, ls if ls is not None else LSConfig())
        return vector, lam
    raise ValueError(f"unknown rule id {rule_id!r} (expected one of {RULE_IDS})")
