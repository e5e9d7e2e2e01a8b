"""Splitting a labeled dataset across workers.

Three partition kinds: IID (shuffle + round-robin), Dirichlet label skew
(per-label proportions drawn from Dir(beta * 1_n), smaller beta = more skew),
and a fixed label budget where every worker holds samples from exactly k
classes. Also computes per-shard label entropy, which the mimic attack uses
to pick its victim.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rng import substream

PARTITION_KINDS = ("iid", "dirichlet", "kclass")


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus integer labels in [0, n_classes)."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {feats.shape}")
        if labels.ndim != 1 or labels.shape[0] != feats.shape[0]:
            raise ValueError("labels must be 1-D and match the number of samples")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValueError(f"labels out of range [0, {self.n_classes})")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite entries")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.n_classes)


@dataclass(frozen=True)
class PartitionSpec:
    """How to split a dataset: kind plus the knob that kind uses.

    seed=None means "derive from the experiment seed"; the simulation engine
    fills it in so one experiment seed fixes the whole run.
    """

    kind: str = "iid"
    beta: float = 0.1
    k: int = 3
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in PARTITION_KINDS:
            raise ValueError(f"unknown partition kind {self.kind!r} (expected one of {PARTITION_KINDS})")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class DataShard:
    """One worker's slice of the dataset, as indices into the parent."""

    owner: int
    indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.indices.size)


def _repair_empty_shards(parts: list[np.ndarray]) -> None:
    # Move single samples from the largest shard until nobody is empty, so
    # every worker can compute a gradient.
    while True:
        empties = [i for i, p in enumerate(parts) if p.size == 0]
        if not empties:
            return
        donor = max(range(len(parts)), key=lambda i: (parts[i].size, -i))
        if parts[donor].size <= 1:
            raise ValueError("dataset too small to give every worker at least one sample")
        parts[empties[0]] = parts[donor][-1:]
        parts[donor] = parts[donor][:-1]


def _largest_remainder_counts(proportions: np.ndarray, total: int) -> np.ndarray:
    # Apportion `total` items to match `proportions` exactly: floor everything,
    # then hand the shortfall to the largest fractional parts (ties: lower index).
    raw = proportions * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        frac = raw - np.floor(raw)
        order = np.lexsort((np.arange(frac.size), -frac))
        counts[order[:short]] += 1
    return counts


def partition_iid(ds: LabeledDataset, n: int, seed: int) -> list[DataShard]:
    """Shuffle and deal round-robin; shard sizes differ by at most one."""
    if n < 1:
        raise ValueError("need at least one worker")
    if n > len(ds):
        raise ValueError(f"cannot split {len(ds)} samples across {n} workers")
    perm = substream(seed, "partition-iid").permutation(len(ds))
    return [DataShard(i, np.sort(perm[i::n])) for i in range(n)]


def partition_dirichlet(ds: LabeledDataset, n: int, beta: float, seed: int) -> list[DataShard]:
    """Label-skewed split: per label draw proportions from Dir(beta * 1_n).

    Proportions are converted to integer counts by largest-remainder
    apportionment, so the shards cover the dataset exactly. Workers left
    empty by extreme skew receive one sample from the largest shard.
    """
    if n < 1:
        raise ValueError("need at least one worker")
    if beta <= 0:
        raise ValueError("beta must be positive")
    if n > len(ds):
        raise ValueError(f"cannot split {len(ds)} samples across {n} workers")
    rng = substream(seed, "partition-dirichlet")
    parts: list[list[np.ndarray]] = [[] for _ in range(n)]
    for c in range(ds.n_classes):
        idx_c = np.flatnonzero(ds.labels == c)
        if idx_c.size == 0:
            continue
        idx_c = rng.permutation(idx_c)
        proportions = rng.dirichlet(np.full(n, beta))
        counts = _largest_remainder_counts(proportions, idx_c.size)
        offsets = np.cumsum(counts)[:-1]
        for w, chunk in enumerate(np.split(idx_c, offsets)):
            if chunk.size:
                parts[w].append(chunk)
    merged = [np.concatenate(p) if p else np.empty(0, dtype=np.int64) for p in parts]
    _repair_empty_shards(merged)
    return [DataShard(i, np.sort(idx)) for i, idx in enumerate(merged)]


def partition_k_classes(ds: LabeledDataset, n: int, k: int, seed: int) -> list[DataShard]:
    """Give each worker samples from exactly k labels.

    Label ownership walks a shuffled label cycle so counts per label differ by
    at most one and every label has an owner (requires n*k >= n_classes). Each
    label's samples are then split evenly among its owners.
    """
    L = ds.n_classes
    if not 1 <= k <= L:
        raise ValueError(f"k must be in [1, {L}], got {k}")
    if n < 1:
        raise ValueError("need at least one worker")
    if n * k < L:
        raise ValueError(f"{n} workers with {k} labels each cannot cover {L} labels")
    rng = substream(seed, "partition-kclass")
    cycle = rng.permutation(L)
    owned = [[int(cycle[(i * k + j) % L]) for j in range(k)] for i in range(n)]
    owners_of: dict[int, list[int]] = {}
    for i, labels in enumerate(owned):
        for c in labels:
            owners_of.setdefault(c, []).append(i)

    parts: list[list[np.ndarray]] = [[] for _ in range(n)]
    for c in range(L):
        idx_c = np.flatnonzero(ds.labels == c)
        owners = owners_of.get(c, [])
        if idx_c.size == 0 or not owners:
            continue
        idx_c = rng.permutation(idx_c)
        counts = np.full(len(owners), idx_c.size // len(owners), dtype=np.int64)
        counts[: idx_c.size % len(owners)] += 1
        offsets = np.cumsum(counts)[:-1]
        for w, chunk in zip(owners, np.split(idx_c, offsets)):
            if chunk.size:
                parts[w].append(chunk)

    merged = [np.concatenate(p) if p else np.empty(0, dtype=np.int64) for p in parts]
    _repair_k_class_shards(merged, owned, ds.labels)
    return [DataShard(i, np.sort(idx)) for i, idx in enumerate(merged)]


def _repair_k_class_shards(parts: list[np.ndarray], owned: list[list[int]], labels: np.ndarray) -> None:
    # Like the generic repair but the moved sample's label must be one the
    # receiver owns, so the k-label budget stays intact.
    for i in range(len(parts)):
        if parts[i].size:
            continue
        moved = False
        for c in owned[i]:
            donors = [
                j
                for j in range(len(parts))
                if j != i and parts[j].size > 1 and np.any(labels[parts[j]] == c)
            ]
            if not donors:
                continue
            donor = max(donors, key=lambda j: (parts[j].size, -j))
            pos = int(np.flatnonzero(labels[parts[donor]] == c)[-1])
            parts[i] = parts[donor][pos : pos + 1]
            parts[donor] = np.delete(parts[donor], pos)
            moved = True
            break
        if not moved:
            raise ValueError(f"no samples available for worker {i}'s labels {owned[i]}")


def make_partition(ds: LabeledDataset, n: int, spec: PartitionSpec, default_seed: Optional[int] = None) -> list[DataShard]:
    """Dispatch on the partition kind; the seed comes from the PartitionSpec
    when set, otherwise from default_seed."""
    seed = spec.seed if spec.seed is not None else default_seed
    if seed is None:
        raise ValueError("partition seed is unset and no default seed was provided")
    if spec.kind == "iid":
        return partition_iid(ds, n, seed)
    if spec.kind == "dirichlet":
        return partition_dirichlet(ds, n, spec.beta, seed)
    return partition_k_classes(ds, n, spec.k, seed)


def label_entropy(shard: DataShard, ds: LabeledDataset) -> float:
    """Base-2 Shannon entropy of the shard's empirical label distribution."""
    if shard.indices.size == 0:
        raise ValueError("cannot compute label entropy of an empty shard")
    counts = np.bincount(ds.labels[shard.indices], minlength=ds.n_classes)
    p = counts[counts > 0] / shard.indices.size
    return float(-(p * np.log2(p)).sum())
