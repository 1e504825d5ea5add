"""Lattice coordinate system and neighbor graph for GLCM cells.

A GLCM with K gray levels is treated as a lattice of count variables,
either over the unique lower-triangle cells (symmetric matrices carry
K(K+1)/2 distinct counts) or over the full K x K grid.  Adjacency is
rook style: two cells are neighbors when their (row, col) coordinates
differ by one in exactly one index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

UNIQUE_TRIANGLE = "unique_triangle"
FULL_GRID = "full_grid"
LATTICE_MODES = (UNIQUE_TRIANGLE, FULL_GRID)


@dataclass(eq=False)
class LatticeGraph:
    """Neighbor graph over an ordered set of lattice cells.

    Parameters
    ----------
    sites : list of (row, col)
        Ordered cell coordinates, 1-based gray levels.
    W : ndarray, shape (n, n)
        Binary symmetric adjacency matrix with zero diagonal.
    D : ndarray, shape (n,)
        Neighbor counts, ``D[i] = W[i].sum()``.
    """

    sites: list[tuple[int, int]]
    W: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.D = np.asarray(self.D, dtype=float)
        n = len(self.sites)
        if self.W.shape != (n, n):
            raise ValueError(f"adjacency shape {self.W.shape} does not match {n} sites")
        if np.any(np.diagonal(self.W) != 0.0):
            raise ValueError("adjacency matrix has nonzero diagonal")
        if not np.array_equal(self.W, self.W.T):
            raise ValueError("adjacency matrix is not symmetric")
        if not np.allclose(self.W.sum(axis=1), self.D):
            raise ValueError("neighbor counts D do not match adjacency row sums")
        if np.any(self.D < 1):
            raise ValueError("lattice has isolated cells (some D_i = 0)")

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @cached_property
    def scaled_adjacency_eigvals(self) -> np.ndarray:
        """Eigenvalues of D^{-1/2} W D^{-1/2}, computed once per graph.

        They give the log-determinant of D - rho*W as
        ``sum(log D) + sum(log(1 - rho*lam))`` for any rho in [0, 1).
        """
        d = 1.0 / np.sqrt(self.D)
        return np.linalg.eigvalsh(self.W * np.outer(d, d))

    @cached_property
    def bandwidth(self) -> int:
        """Largest index offset |i - j| over edges (banded-solver width)."""
        ii, jj = np.nonzero(self.W)
        return int(np.max(np.abs(ii - jj))) if ii.size else 1

    @cached_property
    def banded_adjacency(self) -> np.ndarray:
        """W in LAPACK lower-banded storage, shape (bandwidth + 1, n)."""
        bw = self.bandwidth
        n = self.n_sites
        ab = np.zeros((bw + 1, n))
        for d in range(bw + 1):
            ab[d, : n - d] = np.diagonal(self.W, -d)
        return ab


def lattice_sites(K: int, mode: str) -> list[tuple[int, int]]:
    """Ordered cell coordinates for a K-level lattice.

    ``unique_triangle`` walks the lower triangle (row >= col) in row-major
    order; ``full_grid`` walks all K*K cells row-major.  The ordering is
    fixed so that serialized count vectors are stable.
    """
    if mode == UNIQUE_TRIANGLE:
        return [(l, h) for l in range(1, K + 1) for h in range(1, l + 1)]
    if mode == FULL_GRID:
        return [(l, h) for l in range(1, K + 1) for h in range(1, K + 1)]
    raise ValueError(f"unknown lattice mode {mode!r}")


def lattice_graph(K: int, mode: str = UNIQUE_TRIANGLE) -> LatticeGraph:
    """Rook-adjacency neighbor graph for the K-level GLCM lattice.

    Cells are adjacent iff their coordinates differ by 1 in exactly one
    index and both cells exist in the chosen mode.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    sites = lattice_sites(K, mode)
    index = {s: i for i, s in enumerate(sites)}
    n = len(sites)
    W = np.zeros((n, n))
    for (l, h), i in index.items():
        for nb in ((l + 1, h), (l, h + 1)):
            j = index.get(nb)
            if j is not None:
                W[i, j] = W[j, i] = 1.0
    return LatticeGraph(sites=sites, W=W, D=W.sum(axis=1))
