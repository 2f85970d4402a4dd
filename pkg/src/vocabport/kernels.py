"""Numeric kernels shared by the embedding initializers.

All reductions run in float64 regardless of input dtype; the matrices on
disk are float32 and summing ~1e5 terms at that precision loses digits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .embedding_store import EmbeddingMatrix
from .errors import ValidationError

CONVEX_TOL = 1e-6


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, clamped into [-1, 1].

    Computes a.b / (|a| |b|) in float64. A zero-norm input is degenerate
    (padding rows exist in real checkpoints); the similarity is defined
    as 0.0 and a RuntimeWarning is emitted rather than aborting.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.ndim != 1 or vb.ndim != 1 or va.shape != vb.shape:
        raise ValueError(f"expected equal-length vectors, got {va.shape} and {vb.shape}")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        warnings.warn("zero-norm vector in cosine_similarity; returning 0.0", RuntimeWarning)
        return 0.0
    return float(np.clip(va.dot(vb) / (na * nb), -1.0, 1.0))


def sparsemax(z) -> np.ndarray:
    """Euclidean projection of z onto the probability simplex.

    With z sorted descending as z(1) >= ... >= z(n):

        k   = max{ j : 1 + j*z(j) > sum_{i<=j} z(i) }
        tau = (sum_{i<=k} z(i) - 1) / k
        p_i = max(z_i - tau, 0)

    The output is nonnegative and sums to 1; entries far below the top
    scores project to exactly zero, which is what makes the resulting
    mixture weights sparse.
    """
    v = np.asarray(z, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("sparsemax expects a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("sparsemax input must be finite")
    zs = np.sort(v)[::-1]
    cumulative = np.cumsum(zs)
    js = np.arange(1, v.size + 1)
    support = js[1.0 + js * zs > cumulative]
    k = int(support[-1])
    tau = (cumulative[k - 1] - 1.0) / k
    return np.maximum(v - tau, 0.0)


@dataclass
class WeightVector:
    """Mixture weights over source rows, aligned id-by-id.

    When `convex` is set the weights must be nonnegative and sum to
    1 +- 1e-6; `validate_convex` enforces that before any combination.
    """

    ids: np.ndarray
    weights: np.ndarray
    convex: bool = True

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.ids.shape != self.weights.shape or self.ids.ndim != 1:
            raise ValidationError("ids and weights must be 1-D and aligned")
        if not np.all(np.isfinite(self.weights)):
            raise ValidationError("weights must be finite")

    def validate_convex(self, tol: float = CONVEX_TOL) -> None:
        if not self.convex:
            raise ValidationError("weight vector is not flagged convex")
        if self.weights.size == 0:
            raise ValidationError("empty weight vector")
        if np.any(self.weights < 0.0):
            raise ValidationError("convex weights must be nonnegative")
        total = float(self.weights.sum())
        if abs(total - 1.0) > tol:
            raise ValidationError(f"convex weights sum to {total}, not 1")


def convex_combine(w: WeightVector, rows: EmbeddingMatrix) -> np.ndarray:
    """Weighted sum of matrix rows: sum_i w_i * rows[id_i], in float64.

    The weight vector must be convex, so the result lies coordinatewise
    inside the hull of the participating rows.
    """
    w.validate_convex()
    if w.ids.size and (w.ids.min() < 0 or w.ids.max() >= rows.rows):
        raise ValidationError(
            f"weight id out of range 0..{rows.rows - 1}"
        )
    selected = rows.data[w.ids].astype(np.float64)
    return w.weights @ selected
