"""Dense gradient vectors and the robust-statistics primitives shared by all
aggregation rules: squared distances, coordinate-wise median, trimming.

All values are 64-bit floats. Non-finite entries are rejected at ingestion
rather than clamped: a single NaN would corrupt coordinate medians silently.
"""
from __future__ import annotations

import numpy as np


def as_gradient_vector(values) -> np.ndarray:
    """Coerce to a finite 1-D float64 vector."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError(f"expected a non-empty 1-D gradient vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("gradient vector contains non-finite entries")
    return vec


def as_submission_matrix(vectors) -> np.ndarray:
    """Coerce a worker-indexed collection of gradient vectors to an (n, d) matrix.

    Row i is worker i's submission; the ordering is stable for a round so
    attacks and aggregation see the same worker indices.
    """
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"expected (n_workers, dim) submissions, got shape {mat.shape}")
    if mat.shape[0] < 1 or mat.shape[1] < 1:
        raise ValueError("empty submission set")
    if not np.all(np.isfinite(mat)):
        raise ValueError("submissions contain non-finite entries")
    return mat


def euclidean_distance_sq(a, b) -> float:
    """Squared Euclidean distance between two gradient vectors."""
    a = as_gradient_vector(a)
    b = as_gradient_vector(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    diff = a - b
    return float(np.sum(diff * diff))


def coordinate_median(submissions) -> np.ndarray:
    """Per-coordinate median over workers.

    For an even worker count each coordinate is the mean of the two middle
    order statistics (standard statistical median).
    """
    mat = as_submission_matrix(submissions)
    return np.median(mat, axis=0)


def coordinate_trimmed_mean(submissions, t: int) -> np.ndarray:
    """Per-coordinate mean after dropping the t largest and t smallest values."""
    mat = as_submission_matrix(submissions)
    n = mat.shape[0]
    t = int(t)
    if t < 0:
        raise ValueError(f"trim count must be non-negative, got {t}")
    if 2 * t >= n:
        raise ValueError(f"trim count {t} leaves nothing to average (need 2*t < n={n})")
    if t == 0:
        return mat.mean(axis=0)
    ordered = np.sort(mat, axis=0)
    return ordered[t : n - t].mean(axis=0)
