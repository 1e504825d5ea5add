"""CAR precision matrices, Gaussian sampling, and the rounding map.

The conditionally autoregressive precision Q = D - rho*W is symmetric
positive definite for rho in [0, 1) and, under the row-major lattice
orderings used here, banded with small bandwidth.  All factorizations go
through LAPACK banded routines; log-determinants use the eigenvalue
identity  log|Q| = sum(log D_i) + sum(log(1 - rho*lam_i))  with lam the
eigenvalues of D^{-1/2} W D^{-1/2}, cached once per lattice graph.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded
from scipy.special import ndtr, ndtri

from .lattice import LatticeGraph

logger = logging.getLogger(__name__)

# Truncation intervals with less normal mass than this trigger the
# boundary fallback instead of overflowing the inverse CDF.
TAIL_MASS_FLOOR = 1e-300


class BandedCholesky:
    """Cholesky factor of a symmetric PD matrix in lower-banded storage."""

    def __init__(self, ab: np.ndarray):
        try:
            self.cb = cholesky_banded(ab, lower=True)
        except np.linalg.LinAlgError as exc:
            raise FloatingPointError(f"banded Cholesky factorization failed: {exc}") from exc
        self.bw = ab.shape[0] - 1
        self.n = ab.shape[1]

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.log(self.cb[0]).sum())

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve M x = b."""
        return cho_solve_banded((self.cb, True), b)

    def solve_lower(self, b: np.ndarray) -> np.ndarray:
        """Solve L y = b where M = L L'."""
        return solve_banded((self.bw, 0), self.cb, b)

    @cached_property
    def _upper(self) -> np.ndarray:
        # L' re-packed into upper-banded storage for solve_banded.
        ub = np.zeros_like(self.cb)
        for d in range(self.bw + 1):
            ub[self.bw - d, d:] = self.cb[d, : self.n - d]
        return ub

    def solve_upper(self, b: np.ndarray) -> np.ndarray:
        """Solve L' x = b; with b standard normal, x ~ N(0, M^{-1})."""
        return solve_banded((0, self.bw), self._upper, b)

    def sample(self, mean: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw from N(mean, M^{-1})."""
        return mean + self.solve_upper(rng.standard_normal(self.n))


def car_banded(graph: LatticeGraph, rho: float) -> np.ndarray:
    """Lower-banded storage of Q = D - rho*W."""
    ab = -rho * graph.banded_adjacency
    ab[0] += graph.D
    return ab


@dataclass(eq=False)
class CarPrecision:
    """Factored CAR precision Q = D - rho*W for one lattice graph.

    ``logdet`` comes from the cached eigenvalue identity, so fresh
    instances at new rho values cost O(n * bandwidth^2) for the banded
    factor plus O(n) for the determinant.
    """

    graph: LatticeGraph
    rho: float

    def __post_init__(self):
        if not (0.0 <= self.rho < 1.0):
            raise ValueError("rho must lie in [0, 1)")
        self.ab = car_banded(self.graph, self.rho)
        self.chol = BandedCholesky(self.ab)
        lam = self.graph.scaled_adjacency_eigvals
        self.logdet = float(np.log(self.graph.D).sum() + np.log1p(-self.rho * lam).sum())

    @property
    def n(self) -> int:
        return self.graph.n_sites

    @cached_property
    def dense(self) -> np.ndarray:
        return np.diag(self.graph.D) - self.rho * self.graph.W

    def quad_form(self, theta: np.ndarray) -> float:
        """theta' Q theta for a single vector or summed over rows."""
        theta = np.atleast_2d(theta)
        return float(np.einsum("ji,ik,jk->", theta, self.dense, theta))


def car_precision(graph: LatticeGraph, rho: float) -> CarPrecision:
    """Build the factored precision for ``D - rho*W``."""
    return CarPrecision(graph=graph, rho=rho)


def sample_mvn_precision(
    mean: np.ndarray,
    precision_scale: float,
    car: CarPrecision,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw from N(mean, (precision_scale * Q)^{-1}) via the banded factor."""
    if precision_scale <= 0:
        raise ValueError("precision_scale must be positive")
    z = car.chol.solve_upper(rng.standard_normal(car.n))
    return np.asarray(mean, dtype=float) + z / np.sqrt(precision_scale)


def _truncnorm_icdf_std(a, b, u):
    """Inverse CDF of a standard normal truncated to [a, b), vectorized.

    Intervals that sit in the upper tail are reflected into the lower
    tail, where the normal CDF keeps full precision down to ~1e-308.
    Intervals with mass below TAIL_MASS_FLOOR fall back to the boundary
    nearest the mode.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = np.asarray(u, dtype=float)
    a, b, u = np.broadcast_arrays(a, b, u)

    flip = a > 0.0  # interval entirely above the mean: mirror it
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    uu = np.where(flip, 1.0 - u, u)

    p_lo = ndtr(lo)
    p_hi = ndtr(hi)
    mass = p_hi - p_lo
    degenerate = mass < TAIL_MASS_FLOOR
    if np.any(degenerate):
        logger.warning(
            "truncated-normal interval mass below %g at %d site(s); "
            "falling back to the nearest interval boundary",
            TAIL_MASS_FLOOR,
            int(np.count_nonzero(degenerate)),
        )
    x = ndtri(np.where(degenerate, 0.5, p_lo + uu * mass))
    if np.any(degenerate):
        # post-reflection the interval sits in the lower tail, so the
        # boundary nearest the mode is hi (finite whenever mass underflows)
        x = np.where(degenerate, np.where(np.isfinite(hi), hi, lo), x)
    x = np.where(flip, -x, x)

    lo_orig = np.where(flip, -hi, lo)
    hi_orig = np.where(flip, -lo, hi)
    # keep draws strictly inside [lo, hi) despite CDF round-off
    x = np.minimum(np.maximum(x, lo_orig), np.nextafter(hi_orig, -np.inf))
    return x


def truncnorm_inverse_cdf(mu, sigma2, lo, hi, u):
    """Quantile-transform a uniform draw to N(mu, sigma2) truncated to [lo, hi).

    Returns ``Phi^{-1}(Phi(lo) + u * (Phi(hi) - Phi(lo)))`` in (mu, sigma2)
    units, strictly inside [lo, hi).  Scalar or array arguments broadcast.
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 <= 0):
        raise ValueError("sigma2 must be positive")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(~(lo < hi)):
        raise ValueError("require lo < hi")
    mu = np.asarray(mu, dtype=float)
    sd = np.sqrt(sigma2)
    x = mu + sd * _truncnorm_icdf_std((lo - mu) / sd, (hi - mu) / sd, u)
    if x.ndim == 0:
        return float(x)
    return x


def count_interval(z):
    """Latent interval mapped to a count: z=0 -> (-inf, 0), z>=1 -> [z-1, z)."""
    z = np.asarray(z)
    if np.any(z < 0):
        raise ValueError("counts must be nonnegative")
    lo = np.where(z == 0, -np.inf, z - 1.0)
    hi = np.where(z == 0, 0.0, z.astype(float))
    if z.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def round_latent(y):
    """Inverse of :func:`count_interval`: 0 for y < 0, else floor(y) + 1."""
    y = np.asarray(y)
    out = np.where(y < 0, 0, np.floor(y).astype(np.int64) + 1)
    if y.ndim == 0:
        return int(out)
    return out
