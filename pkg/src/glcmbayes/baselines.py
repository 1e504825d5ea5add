"""Texture-feature baselines: Haralick summaries plus stock clusterers.

These reproduce the common radiomics workflow that reduces each GLCM to a
handful of summary statistics (contrast, correlation, homogeneity, energy,
entropy) and clusters subjects in that feature space with hierarchical,
k-means, or Gaussian-mixture methods.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields

import numpy as np

from .cluster import Partition, cut_dendrogram, dissimilarity, ward_cluster

logger = logging.getLogger(__name__)

EM_MAX_ITER = 500
EM_TOL = 1e-8
COV_REG = 1e-6


@dataclass
class FeatureVector:
    contrast: float
    correlation: float  # NaN when a marginal gray-level variance is zero
    homogeneity: float
    energy: float
    entropy: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])


def haralick_features(counts: np.ndarray) -> FeatureVector:
    """Standard co-occurrence texture summaries of a count matrix.

    Correlation is NaN whenever either marginal variance vanishes (e.g. a
    single nonzero cell), mirroring how sparse co-occurrence matrices break
    feature pipelines.
    """
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("zero total count")
    p = counts / total
    K = p.shape[0]
    levels = np.arange(1, K + 1, dtype=float)
    l_idx = levels[:, None]
    h_idx = levels[None, :]

    contrast = float(((l_idx - h_idx) ** 2 * p).sum())
    homogeneity = float((p / (1.0 + np.abs(l_idx - h_idx))).sum())
    energy = float((p**2).sum())
    nz = p[p > 0]
    entropy = float(-(nz * np.log(nz)).sum())

    p_l = p.sum(axis=1)
    p_h = p.sum(axis=0)
    mu_l = float(levels @ p_l)
    mu_h = float(levels @ p_h)
    var_l = float(((levels - mu_l) ** 2) @ p_l)
    var_h = float(((levels - mu_h) ** 2) @ p_h)
    if var_l <= 0 or var_h <= 0:
        correlation = float("nan")
    else:
        correlation = float(
            (((l_idx - mu_l) * (h_idx - mu_h) * p).sum()) / np.sqrt(var_l * var_h)
        )
    return FeatureVector(
        contrast=contrast,
        correlation=correlation,
        homogeneity=homogeneity,
        energy=energy,
        entropy=entropy,
    )


def feature_matrix(features: list[FeatureVector]) -> np.ndarray:
    return np.stack([f.as_array() for f in features])


def standardize_features(F: np.ndarray) -> np.ndarray:
    """Median-impute undefined entries, then scale each feature to zero
    mean and unit variance (constant features are only centered)."""
    F = np.asarray(F, dtype=float).copy()
    for k in range(F.shape[1]):
        bad = np.isnan(F[:, k])
        if bad.any():
            F[bad, k] = np.median(F[~bad, k]) if (~bad).any() else 0.0
    mean = F.mean(axis=0)
    sd = F.std(axis=0)
    sd[sd == 0] = 1.0
    return (F - mean) / sd


def _lloyd(X: np.ndarray, g: int, rng: np.random.Generator, max_iter: int = 100):
    """One k-means run from a random distinct-point start; returns
    (labels, within-cluster sum of squares)."""
    T = X.shape[0]
    centers = X[rng.choice(T, size=g, replace=False)].copy()
    labels = np.zeros(T, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        for j in range(g):
            members = new_labels == j
            if not members.any():
                # revive an empty cluster at the point farthest from its center
                far = int(np.argmax(d2[np.arange(T), new_labels]))
                new_labels[far] = j
                members = new_labels == j
            centers[j] = X[members].mean(axis=0)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    d2 = ((X - centers[labels]) ** 2).sum()
    return labels, float(d2)


def feature_kmeans(
    features: list[FeatureVector], g: int, rng: np.random.Generator, n_restarts: int = 20
) -> Partition:
    """K-means on standardized features; best of ``n_restarts`` random
    starts by within-cluster sum of squares."""
    X = standardize_features(feature_matrix(features))
    if not 1 <= g <= X.shape[0]:
        raise ValueError("g must lie in 1..T")
    best = None
    for _ in range(n_restarts):
        labels, wss = _lloyd(X, g, rng)
        if best is None or wss < best[1]:
            best = (labels, wss)
    labels, _ = best
    return _as_partition(labels)


def feature_hclust(features: list[FeatureVector], g: int) -> Partition:
    """Ward clustering on standardized features, cut at rank g."""
    X = standardize_features(feature_matrix(features))
    dend = ward_cluster(dissimilarity(X))
    return cut_dendrogram(dend, g)


def feature_gmm(
    features: list[FeatureVector], g: int, rng: np.random.Generator, n_restarts: int = 10
) -> Partition:
    """Full-covariance Gaussian mixture fitted by EM on standardized
    features, restarted from k-means initializations; hard labels by
    maximum responsibility."""
    X = standardize_features(feature_matrix(features))
    if not 1 <= g <= X.shape[0]:
        raise ValueError("g must lie in 1..T")
    best = None
    for _ in range(n_restarts):
        resp, ll = _em_gmm(X, g, rng)
        if best is None or ll > best[1]:
            best = (resp, ll)
    labels = best[0].argmax(axis=1)
    return _as_partition(labels)


def gmm_log_likelihood(X: np.ndarray, weights, means, covs) -> float:
    log_dens = _component_log_densities(X, means, covs) + np.log(weights)[None, :]
    top = log_dens.max(axis=1, keepdims=True)
    return float((top[:, 0] + np.log(np.exp(log_dens - top).sum(axis=1))).sum())


def _component_log_densities(X, means, covs) -> np.ndarray:
    T, p = X.shape
    out = np.empty((T, len(means)))
    for j, (mu, cov) in enumerate(zip(means, covs)):
        L = np.linalg.cholesky(cov)
        half = np.linalg.solve(L, (X - mu).T)
        out[:, j] = (
            -0.5 * p * np.log(2.0 * np.pi)
            - np.log(np.diagonal(L)).sum()
            - 0.5 * (half**2).sum(axis=0)
        )
    return out


def _em_gmm(X: np.ndarray, g: int, rng: np.random.Generator):
    """One EM run; returns (responsibilities, final log-likelihood)."""
    T, p = X.shape
    labels, _ = _lloyd(X, g, rng)
    weights = np.bincount(labels, minlength=g).astype(float) / T
    means = [X[labels == j].mean(axis=0) for j in range(g)]
    covs = [np.cov(X[labels == j].T, bias=True).reshape(p, p) + COV_REG * np.eye(p) for j in range(g)]

    prev_ll = -np.inf
    for _ in range(EM_MAX_ITER):
        log_dens = _component_log_densities(X, means, covs) + np.log(weights)[None, :]
        top = log_dens.max(axis=1, keepdims=True)
        log_norm = top + np.log(np.exp(log_dens - top).sum(axis=1, keepdims=True))
        ll = float(log_norm.sum())
        resp = np.exp(log_dens - log_norm)
        if ll - prev_ll < EM_TOL and np.isfinite(prev_ll):
            return resp, ll
        prev_ll = ll
        mass = resp.sum(axis=0)
        mass = np.maximum(mass, 1e-12)
        weights = mass / T
        for j in range(g):
            mu = (resp[:, j] @ X) / mass[j]
            diff = X - mu
            cov = (resp[:, j, None] * diff).T @ diff / mass[j]
            means[j] = mu
            covs[j] = cov + COV_REG * np.eye(p)
    logger.warning("EM did not converge within %d iterations", EM_MAX_ITER)
    return resp, ll


def _as_partition(labels: np.ndarray) -> Partition:
    _, dense = np.unique(labels, return_inverse=True)
    return Partition(labels=dense + 1, g=int(dense.max()) + 1)
