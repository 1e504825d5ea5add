"""Independent reference implementations used as test oracles.

Everything here is deliberately naive (brute force, dense algebra,
quadrature) and shares no code paths with the library.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr


def glcm_pair_enumeration(pixels, mask, edges_interior, K, offset=1, directions=8):
    """O(pixels x directions) co-occurrence tally by explicit loops."""
    nr, nc = pixels.shape
    if directions == 8:
        steps = [(0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (-1, -1), (1, -1), (-1, 1)]
    else:
        steps = [(0, 1), (0, -1), (1, 0), (-1, 0)]
    counts = np.zeros((K, K), dtype=np.int64)

    def level(v):
        b = 1
        for e in edges_interior:
            if v >= e:
                b += 1
        return b

    for i in range(nr):
        for j in range(nc):
            if not mask[i, j]:
                continue
            for di, dj in steps:
                ii, jj = i + di * offset, j + dj * offset
                if 0 <= ii < nr and 0 <= jj < nc and mask[ii, jj]:
                    counts[level(pixels[i, j]) - 1, level(pixels[ii, jj]) - 1] += 1
    return counts


def quantiles_by_sorting(sample, qs):
    """Linear-interpolation quantiles computed from an explicit sort."""
    xs = sorted(sample)
    n = len(xs)
    out = []
    for q in qs:
        pos = q * (n - 1)
        lo = int(np.floor(pos))
        hi = min(lo + 1, n - 1)
        frac = pos - lo
        out.append(xs[lo] * (1 - frac) + xs[hi] * frac)
    return np.asarray(out)


def truncnorm_cdf(x, mu, sigma, lo, hi):
    """CDF of a truncated normal via the error-function CDF.

    Intervals above the mean are evaluated through the complementary
    (reflected) form, where the normal CDF keeps full precision.
    """
    if (lo - mu) / sigma > 0:
        a = ndtr(-(hi - mu) / sigma)
        b = ndtr(-(lo - mu) / sigma)
        return np.clip((b - ndtr(-(np.asarray(x) - mu) / sigma)) / (b - a), 0.0, 1.0)
    a = ndtr((lo - mu) / sigma)
    b = ndtr((hi - mu) / sigma)
    return np.clip((ndtr((np.asarray(x) - mu) / sigma) - a) / (b - a), 0.0, 1.0)


def truncnorm_mean(mu, sigma, lo, hi):
    """Closed-form mean of a truncated normal."""
    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    phi = lambda t: np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi)
    return mu + sigma * (phi(a) - phi(b)) / (ndtr(b) - ndtr(a))


def gauss_hermite_marginal(y, xb, gamma, tau2, sigma2, rho, D, W, order=100):
    """Marginal likelihood of one subject under the CAR base measure by
    tensor-product Gauss-Hermite quadrature (n = len(y) dimensions)."""
    n = y.size
    Q = np.diag(D) - rho * W
    C = sigma2 * np.linalg.inv(Q)
    evals, evecs = np.linalg.eigh(C)
    A = evecs @ np.diag(np.sqrt(evals))
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    grids = np.meshgrid(*([nodes] * n), indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=1) * np.sqrt(2.0)
    wgrids = np.meshgrid(*([weights] * n), indexing="ij")
    Wt = np.ones(U.shape[0])
    for wg in wgrids:
        Wt = Wt * wg.ravel()
    theta = U @ A.T
    mean = xb + gamma * theta
    dens = np.exp(-0.5 * ((y - mean) ** 2).sum(axis=1) / tau2) / (2 * np.pi * tau2) ** (n / 2)
    return float((Wt * dens).sum() / np.pi ** (n / 2))


def naive_ward_merges(points):
    """O(T^3) Ward agglomeration recomputing all cluster distances from
    the raw coordinates at every step; cluster ids follow creation order
    (leaves 0..T-1, merges T..2T-2), ties broken lexicographically."""
    points = np.asarray(points, dtype=float)
    T = points.shape[0]
    clusters = {i: [i] for i in range(T)}
    merges = []
    next_id = T
    for _ in range(T - 1):
        best = None
        for a in sorted(clusters):
            for b in sorted(clusters):
                if a >= b:
                    continue
                pa, pb = points[clusters[a]], points[clusters[b]]
                na, nb = len(pa), len(pb)
                delta = 2.0 * na * nb / (na + nb) * ((pa.mean(0) - pb.mean(0)) ** 2).sum()
                if best is None or delta < best[0] - 1e-12 or (
                    abs(delta - best[0]) <= 1e-12 and (a, b) < (best[1], best[2])
                ):
                    best = (delta, a, b)
        delta, a, b = best
        merges.append((a, b, delta, len(clusters[a]) + len(clusters[b])))
        clusters[next_id] = clusters.pop(a) + clusters.pop(b)
        next_id += 1
    return merges


def skew_normal_rejection(mu, cov, alpha, rng, size):
    """Skew-normal draws by explicit accept-reject (acceptance 1/2)."""
    L = np.linalg.cholesky(cov)
    alpha = np.asarray(alpha, dtype=float)
    out = []
    while len(out) < size:
        x = rng.standard_normal(2) @ L.T
        if rng.standard_normal() < alpha @ x:
            out.append(mu + x)
    return np.asarray(out)


def dense_mvn_moments_from_precision(mean_vec, precision):
    """(mean, covariance) with the covariance from a dense inverse."""
    return np.asarray(mean_vec, dtype=float), np.linalg.inv(precision)
