"""Synthetic GLCM cohorts with class-specific spatial patterns.

Each subject's 16 x 16 count matrix comes from a latent bivariate
distribution (normal, or skew normal for the robustness variant) whose
mean slides along the anti-diagonal with the class shift parameter c.
Sampled points are binned to the grid, smoothed, and scaled by a random
total count, so cohorts mix small sparse matrices with large dense ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

GRID_K = 16
LATENT_CORR = -0.7


@dataclass
class SimConfig:
    """Cohort generator settings.

    ``s`` scales the latent covariance: larger values blur the separation
    between the class patterns.  ``skew`` switches the latent generator to
    a skew normal with that shape vector.
    """

    s: float = 10.0
    c_values: tuple[float, ...] = (5.0, 5.5, 6.0, 6.5, 7.0)
    subjects_per_class: int = 20
    skew: tuple[float, float] | None = None
    points_per_surface: int = 10000
    total_count_range: tuple[int, int] = (500, 20000)
    K: int = GRID_K
    seed: int = 0

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("s must be positive")
        if self.subjects_per_class < 1 or self.points_per_surface < 1:
            raise ValueError("subjects_per_class and points_per_surface must be positive")
        lo, hi = self.total_count_range
        if not (0 < lo <= hi):
            raise ValueError("total_count_range must be positive and ordered")

    @property
    def n_subjects(self) -> int:
        return len(self.c_values) * self.subjects_per_class


def latent_sample(
    c: float,
    s: float,
    alpha: tuple[float, float] | None,
    rng: np.random.Generator,
    size: int = 1,
) -> np.ndarray:
    """Draw latent grid coordinates for one class.

    The base distribution is bivariate normal with mean (2+c, 14-c) and
    covariance s * [[1, -0.7], [-0.7, 1]].  With ``alpha`` given, the
    centered part is skew normal instead: a zero-mean normal draw X is
    sign-flipped whenever an auxiliary standard normal exceeds alpha'X.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    mu = np.array([2.0 + c, 14.0 - c])
    cov = s * np.array([[1.0, LATENT_CORR], [LATENT_CORR, 1.0]])
    L = np.linalg.cholesky(cov)
    X = rng.standard_normal((size, 2)) @ L.T
    if alpha is not None:
        alpha = np.asarray(alpha, dtype=float)
        u0 = rng.standard_normal(size)
        flip = u0 >= X @ alpha
        X[flip] = -X[flip]
    return mu + X


def empirical_rate_surface(points: np.ndarray, K: int = GRID_K) -> np.ndarray:
    """Bin points to their nearest integer cells and normalize.

    Points rounding outside {1..K}^2 are discarded; an error is raised if
    nothing lands on the grid.
    """
    pts = np.rint(np.asarray(points, dtype=float)).astype(int)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a nonempty (m, 2) array")
    ok = np.all((pts >= 1) & (pts <= K), axis=1)
    pts = pts[ok]
    if pts.shape[0] == 0:
        raise ValueError("all points out of range")
    surface = np.zeros((K, K))
    np.add.at(surface, (pts[:, 0] - 1, pts[:, 1] - 1), 1.0)
    return surface / surface.sum()


_KERNEL_1D = np.exp(-0.5 * np.array([1.0, 0.0, 1.0]))
_KERNEL_3X3 = np.outer(_KERNEL_1D, _KERNEL_1D)


def smooth_surface(raw: np.ndarray) -> np.ndarray:
    """3x3 Gaussian smoothing (sigma = 1 cell), border-renormalized, then
    rescaled to total mass one."""
    raw = np.asarray(raw, dtype=float)
    num = convolve2d(raw, _KERNEL_3X3, mode="same", boundary="fill")
    den = convolve2d(np.ones_like(raw), _KERNEL_3X3, mode="same", boundary="fill")
    out = num / den
    return out / out.sum()


def scale_and_round(
    surface: np.ndarray,
    rng: np.random.Generator,
    total_count_range: tuple[int, int] = (500, 20000),
) -> np.ndarray:
    """Scale the rate surface by a random total and round cell-wise."""
    lo, hi = total_count_range
    total = int(rng.integers(lo, hi + 1))
    return np.rint(total * np.asarray(surface, dtype=float)).astype(np.int64)


def generate_subject(
    c: float, cfg: SimConfig, rng: np.random.Generator
) -> np.ndarray:
    pts = latent_sample(c, cfg.s, cfg.skew, rng, size=cfg.points_per_surface)
    surface = smooth_surface(empirical_rate_surface(pts, cfg.K))
    return scale_and_round(surface, rng, cfg.total_count_range)


def generate_cohort(
    cfg: SimConfig, rng: np.random.Generator | None = None
) -> tuple[list[np.ndarray], np.ndarray]:
    """Simulate the full cohort; returns count matrices and class labels.

    Subjects get independent child generators so cohort generation can be
    distributed without changing the draws.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    streams = rng.spawn(cfg.n_subjects)
    matrices = []
    labels = np.empty(cfg.n_subjects, dtype=np.int64)
    for i in range(cfg.n_subjects):
        cls = i // cfg.subjects_per_class
        labels[i] = cls + 1
        matrices.append(generate_subject(cfg.c_values[cls], cfg, streams[i]))
    return matrices, labels
