"""Clustering evaluation: optimal label matching, accuracy, NMI.

Accuracy matches predicted clusters to truth classes by a minimum-cost
assignment on the negated contingency counts (Kuhn-Munkres); NMI is mutual
information over the contingency table normalized by the larger entropy,
with base-2 logs and the 0 log 0 = 0 convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .types import ClusterAssignment


@dataclass(frozen=True)
class ContingencyTable:
    """Joint counts: counts[a, b] = #{i : pred_i = a, truth_i = b}."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=int)
        if c.ndim != 2:
            raise ValueError("counts must be a matrix")
        if int(c.sum()) != self.n:
            raise ValueError(f"counts sum to {c.sum()}, expected n={self.n}")
        object.__setattr__(self, "counts", c)


@dataclass(frozen=True)
class LabelMapping:
    """Minimum-cost assignment between two label sets.

    ``mapping`` sends predicted ids to truth ids injectively. ``matched``
    is the count of agreeing samples when the cost matrix was a negated
    contingency table (it equals -total_cost rounded, clamped at 0).
    """

    mapping: dict
    matched: int
    total_cost: float


def contingency(pred: ClusterAssignment, truth: ClusterAssignment) -> ContingencyTable:
    if pred.n != truth.n:
        raise ValueError(f"label lengths differ: {pred.n} vs {truth.n}")
    flat = pred.labels * truth.k + truth.labels
    counts = np.bincount(flat, minlength=pred.k * truth.k).reshape(pred.k, truth.k)
    return ContingencyTable(counts, pred.n)


def hungarian(cost: np.ndarray) -> LabelMapping:
    """Minimum-total-cost perfect assignment of a cost matrix.

    Rectangular inputs are padded square with a large sentinel cost; pairs
    involving padded rows or columns are dropped from the mapping.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a matrix")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite")
    rows, cols = cost.shape
    size = max(rows, cols)
    if rows != cols:
        sentinel = float(np.abs(cost).max() + 1.0) if cost.size else 1.0
        padded = np.full((size, size), sentinel)
        padded[:rows, :cols] = cost
    else:
        padded = cost
    r_ind, c_ind = linear_sum_assignment(padded)
    mapping = {}
    total = 0.0
    for a, b in zip(r_ind, c_ind):
        if a < rows and b < cols:
            mapping[int(a)] = int(b)
            total += cost[a, b]
    return LabelMapping(mapping, max(int(round(-total)), 0), total)


def accuracy(pred: ClusterAssignment, truth: ClusterAssignment) -> float:
    """Fraction of samples agreeing under the best cluster-to-class mapping."""
    table = contingency(pred, truth)
    size = max(pred.k, truth.k)
    counts = np.zeros((size, size), dtype=int)
    counts[: pred.k, : truth.k] = table.counts
    matched = hungarian(-counts.astype(float)).matched
    return matched / table.n


def nmi(pred: ClusterAssignment, truth: ClusterAssignment) -> float:
    """MI(pred, truth) / max(H(pred), H(truth)); 0 when the max entropy is 0.

    Terms are evaluated symmetrically in the two marginals and accumulated
    with exact summation, so swapping the arguments gives the identical
    float.
    """
    table = contingency(pred, truth)
    counts = table.counts
    n = table.n
    p_pred = counts.sum(axis=1) / n
    p_truth = counts.sum(axis=0) / n

    def entropy(p):
        return math.fsum(float(q) * (-math.log2(q)) for q in p if q > 0)

    denom = max(entropy(p_pred), entropy(p_truth))
    if denom == 0.0:
        return 0.0

    nonzero = counts > 0
    if np.all(nonzero.sum(axis=0) <= 1) and np.all(nonzero.sum(axis=1) <= 1):
        # one-to-one table: the partitions are identical up to relabeling,
        # where MI equals both entropies; return the exact value
        return 1.0

    joint = counts / n
    mi = math.fsum(
        float(joint[a, b])
        * (
            math.log2(joint[a, b])
            - (math.log2(p_pred[a]) + math.log2(p_truth[b]))
        )
        for a, b in zip(*np.nonzero(nonzero))
    )
    return max(mi, 0.0) / denom
