"""Clustering evaluation against known class memberships."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MatchingMatrix:
    """Contingency table of true classes (rows) by predicted clusters."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or np.any(self.counts < 0):
            raise ValueError("counts must be a nonnegative 2-D table")

    @property
    def N(self) -> int:
        return int(self.counts.sum())


def matching_matrix(true_labels, pred_labels) -> MatchingMatrix:
    """Tally (true class, predicted cluster) pairs."""
    true_labels = np.asarray(true_labels)
    pred_labels = np.asarray(pred_labels)
    if true_labels.shape != pred_labels.shape:
        raise ValueError("label vectors must have equal length")
    _, ti = np.unique(true_labels, return_inverse=True)
    _, pi = np.unique(pred_labels, return_inverse=True)
    counts = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(counts, (ti, pi), 1)
    return MatchingMatrix(counts=counts)


def misassignment_rate(m: MatchingMatrix) -> float:
    """Fraction of subjects outside the modal true class of their cluster.

    Each predicted cluster contributes its column total minus its column
    maximum; the errors are summed and divided by the sample size.
    """
    if m.N == 0:
        raise ValueError("empty matching matrix")
    errors = m.counts.sum(axis=0) - m.counts.max(axis=0)
    return float(errors.sum()) / m.N


def pearson_chi2(m: MatchingMatrix) -> float:
    """Pearson chi-square statistic of the matching matrix.

    Empty predicted clusters are dropped first; any remaining zero margin
    makes the statistic undefined.
    """
    counts = m.counts[:, m.counts.sum(axis=0) > 0]
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    if np.any(rows == 0) or cols.size == 0:
        raise ValueError("zero margin in matching matrix")
    expected = np.outer(rows, cols) / counts.sum()
    return float(((counts - expected) ** 2 / expected).sum())
