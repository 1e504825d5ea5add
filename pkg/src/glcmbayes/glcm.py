"""Gray-level co-occurrence matrix construction.

Pixels are binned into K gray levels by empirical quantiles of a pixel
sample (with outlier clipping), then co-occurrences of masked-in pixel
pairs at a fixed offset are tallied over all directions.  Counting both
orientations of every pair makes the matrix symmetric by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import FULL_GRID, UNIQUE_TRIANGLE, LatticeGraph, lattice_graph

# (row, col) steps for the four co-occurrence axes; each is counted in
# both orientations, so 4 axes = 8 directions.
_AXES_8 = ((0, 1), (1, 0), (1, 1), (1, -1))
_AXES_4 = ((0, 1), (1, 0))


@dataclass
class GrayImage:
    """A 2-D intensity image with an optional region-of-interest mask."""

    pixels: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 2:
            raise ValueError("pixels must be a 2-D array")
        if self.mask is None:
            self.mask = np.ones(self.pixels.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask).astype(bool)
            if self.mask.shape != self.pixels.shape:
                raise ValueError("mask shape does not match pixel shape")
        if int(self.mask.sum()) < 2:
            raise ValueError("fewer than 2 masked-in pixels")

    @property
    def masked_values(self) -> np.ndarray:
        return self.pixels[self.mask]


@dataclass
class BinSpec:
    """Gray-level binning rule: K bins bounded by K+1 monotone edges.

    ``edges[0]`` and ``edges[K]`` are -inf/+inf so that intensities beyond
    the clipping quantiles land in the first and last bin.
    """

    K: int
    edges: np.ndarray
    lo_q: float = 0.025
    hi_q: float = 0.975

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.edges.shape != (self.K + 1,):
            raise ValueError("edges must have length K + 1")
        if not (np.isneginf(self.edges[0]) and np.isposinf(self.edges[-1])):
            raise ValueError("outer edges must be -inf and +inf")
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("edges must be strictly increasing")

    def assign(self, values: np.ndarray) -> np.ndarray:
        """Map intensities to gray levels 1..K (values on an interior edge
        go to the higher bin)."""
        return np.searchsorted(self.edges[1:-1], values, side="right") + 1


@dataclass
class Glcm:
    """Symmetric K x K co-occurrence count matrix."""

    K: int
    counts: np.ndarray
    total: int = field(init=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (self.K, self.K):
            raise ValueError("counts must be K x K")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if not np.array_equal(self.counts, self.counts.T):
            raise ValueError("counts must be symmetric")
        self.total = int(self.counts.sum())


def quantile_bins(
    pixel_sample, K: int, lo_q: float = 0.025, hi_q: float = 0.975
) -> BinSpec:
    """Equal-count gray-level bins from an empirical pixel distribution.

    The sample is clipped to its [lo_q, hi_q] quantile window and the
    interior edges are the K-1 equally spaced quantiles of the clipped
    sample, so every bin holds roughly the same probability mass.
    Intensities outside the window fall into bin 1 or bin K.

    Raises
    ------
    ValueError
        On an empty sample, K < 2, bad quantile bounds, or a sample whose
        clipped range has zero width ("degenerate intensity range").
    """
    sample = np.asarray(pixel_sample, dtype=float).ravel()
    if sample.size == 0:
        raise ValueError("empty pixel sample")
    if K < 2:
        raise ValueError("K must be at least 2")
    if not (0.0 <= lo_q < hi_q <= 1.0):
        raise ValueError("quantile bounds must satisfy 0 <= lo_q < hi_q <= 1")
    q_lo, q_hi = np.quantile(sample, [lo_q, hi_q])
    if not q_hi > q_lo:
        raise ValueError("degenerate intensity range")
    window = sample[(sample >= q_lo) & (sample <= q_hi)]
    interior = np.quantile(window, np.arange(1, K) / K)
    if np.any(np.diff(interior) <= 0):
        raise ValueError("degenerate intensity range")
    edges = np.concatenate(([-np.inf], interior, [np.inf]))
    return BinSpec(K=K, edges=edges, lo_q=lo_q, hi_q=hi_q)


def build_glcm(
    image: GrayImage, bins: BinSpec, offset: int = 1, directions: int = 8
) -> Glcm:
    """Tally gray-level co-occurrences of masked-in pixel pairs.

    Every ordered pair of masked-in pixels separated by ``offset`` along
    any of the requested directions increments one cell; because both
    orientations are counted the result is symmetric and ``total`` equals
    twice the number of unordered pairs.  Pairs with either pixel outside
    the mask are dropped.

    ``directions`` is 8 (horizontal, vertical, both diagonals) or 4
    (horizontal and vertical only).
    """
    if offset < 1:
        raise ValueError("offset must be a positive integer")
    if directions == 8:
        axes = _AXES_8
    elif directions == 4:
        axes = _AXES_4
    else:
        raise ValueError("directions must be 4 or 8")

    levels = bins.assign(image.pixels)
    mask = image.mask
    nr, nc = levels.shape
    counts = np.zeros((bins.K, bins.K), dtype=np.int64)
    for di, dj in axes:
        di, dj = di * offset, dj * offset
        r0, r1 = max(0, -di), min(nr, nr - di)
        c0, c1 = max(0, -dj), min(nc, nc - dj)
        if r0 >= r1 or c0 >= c1:
            continue
        a = levels[r0:r1, c0:c1]
        b = levels[r0 + di : r1 + di, c0 + dj : c1 + dj]
        ok = mask[r0:r1, c0:c1] & mask[r0 + di : r1 + di, c0 + dj : c1 + dj]
        la, lb = a[ok] - 1, b[ok] - 1
        np.add.at(counts, (la, lb), 1)
        np.add.at(counts, (lb, la), 1)
    if counts.sum() == 0:
        raise ValueError("no co-occurrences")
    return Glcm(K=bins.K, counts=counts)


def vectorize(glcm: Glcm, mode: str = UNIQUE_TRIANGLE) -> tuple[np.ndarray, LatticeGraph]:
    """Flatten a GLCM into the count vector paired with its lattice graph.

    ``unique_triangle`` emits the lower-triangle cells (row >= col) in
    row-major order, n = K(K+1)/2; ``full_grid`` emits all K*K cells.
    """
    graph = lattice_graph(glcm.K, mode)
    z = np.array([glcm.counts[l - 1, h - 1] for l, h in graph.sites], dtype=np.int64)
    return z, graph


def matrix_from_vector(z: np.ndarray, graph: LatticeGraph, K: int) -> np.ndarray:
    """Reassemble the K x K matrix from a vectorized lattice (inverse of
    :func:`vectorize`; triangle vectors are mirrored to full symmetry)."""
    z = np.asarray(z)
    out = np.zeros((K, K), dtype=z.dtype)
    for value, (l, h) in zip(z, graph.sites):
        out[l - 1, h - 1] = value
        out[h - 1, l - 1] = value
    return out
