"""Posterior clustering: mean surfaces, Ward agglomeration, rank selection.

Subjects are summarized by their posterior mean spatial-effect surfaces,
compared by squared Euclidean distance, merged bottom-up with Ward's
minimum-variance criterion (Lance-Williams recursion), and the cluster
count is picked by the Krzanowski-Lai statistic on dimension-adjusted
within-cluster dispersion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampler import ChainTrace


@dataclass
class Dendrogram:
    """Agglomeration record: row k merges clusters ``a`` and ``b`` into a
    new cluster with id ``n_leaves + k`` (leaves are 0..n_leaves-1)."""

    merges: np.ndarray  # (n_leaves - 1, 4): child_a, child_b, height, size
    n_leaves: int

    def __post_init__(self):
        self.merges = np.asarray(self.merges, dtype=float)
        if self.merges.shape != (self.n_leaves - 1, 4):
            raise ValueError("merge list must have n_leaves - 1 rows of 4")


@dataclass
class Partition:
    """Cluster labels 1..g with every label occupied."""

    labels: np.ndarray
    g: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        occupied = np.unique(self.labels)
        if not np.array_equal(occupied, np.arange(1, self.g + 1)):
            raise ValueError("labels must cover 1..g")


def posterior_mean_surfaces(trace: ChainTrace) -> np.ndarray:
    """Per-subject average of the assigned cluster atom over the trace."""
    if trace.n_records < 1:
        raise ValueError("empty trace")
    return trace.theta_sums / trace.n_records


def dissimilarity(surfaces: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between subject rows."""
    surfaces = np.asarray(surfaces, dtype=float)
    if surfaces.shape[0] < 2:
        raise ValueError("need at least two subjects")
    sq = np.einsum("tn,tn->t", surfaces, surfaces)
    d = sq[:, None] + sq[None, :] - 2.0 * (surfaces @ surfaces.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def ward_cluster(d: np.ndarray) -> Dendrogram:
    """Agglomerate with Ward's criterion via the Lance-Williams update.

    ``d`` holds squared Euclidean distances.  At each step the active pair
    with minimal inter-cluster distance merges (ties broken by the
    lexicographically smallest cluster-id pair), and distances to the new
    cluster follow

        d(k, ij) = [(n_i+n_k) d(k,i) + (n_j+n_k) d(k,j) - n_k d(i,j)]
                   / (n_i + n_j + n_k).
    """
    d = np.asarray(d, dtype=float)
    T = d.shape[0]
    if d.shape != (T, T) or T < 2:
        raise ValueError("dissimilarity must be square with T >= 2")
    dist = d.copy()
    ids = list(range(T))
    sizes = {i: 1 for i in range(T)}
    merges = np.zeros((T - 1, 4))
    for step in range(T - 1):
        m = len(ids)
        iu = np.triu_indices(m, k=1)
        vals = dist[iu]
        best = np.min(vals)
        # deterministic tie-break: smallest (id_i, id_j) pair
        cand = np.nonzero(vals == best)[0]
        pairs = sorted((ids[iu[0][c]], ids[iu[1][c]], iu[0][c], iu[1][c]) for c in cand)
        id_i, id_j, pi, pj = pairs[0]
        ni, nj = sizes[id_i], sizes[id_j]
        new_id = T + step
        merges[step] = (id_i, id_j, best, ni + nj)
        # Lance-Williams distances from every remaining cluster to the merge
        nk = np.array([sizes[ids[k]] for k in range(m)], dtype=float)
        new_row = ((ni + nk) * dist[pi] + (nj + nk) * dist[pj] - nk * best) / (ni + nj + nk)
        keep = [k for k in range(m) if k not in (pi, pj)]
        dist = np.vstack([dist[keep][:, keep], new_row[keep][None, :]])
        dist = np.hstack([dist, np.append(new_row[keep], 0.0)[:, None]])
        ids = [ids[k] for k in keep] + [new_id]
        sizes[new_id] = ni + nj
    return Dendrogram(merges=merges, n_leaves=T)


def cut_dendrogram(dend: Dendrogram, g: int) -> Partition:
    """Labels 1..g from the first T - g merges (labels ordered by each
    cluster's smallest subject index)."""
    T = dend.n_leaves
    if not 1 <= g <= T:
        raise ValueError("g must lie in 1..T")
    parent = list(range(2 * T - 1))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for step in range(T - g):
        a, b = int(dend.merges[step, 0]), int(dend.merges[step, 1])
        new = T + step
        parent[find(a)] = new
        parent[find(b)] = new
    roots: dict[int, int] = {}
    labels = np.zeros(T, dtype=np.int64)
    for t in range(T):
        r = find(t)
        if r not in roots:
            roots[r] = len(roots) + 1
        labels[t] = roots[r]
    return Partition(labels=labels, g=len(roots))


def within_dispersion(surfaces: np.ndarray, labels: np.ndarray) -> float:
    """Total squared distance of rows to their cluster means."""
    total = 0.0
    for lab in np.unique(labels):
        rows = surfaces[labels == lab]
        total += float(((rows - rows.mean(axis=0)) ** 2).sum())
    return total


def krzanowski_lai_rank(surfaces: np.ndarray, dend: Dendrogram, g_max: int) -> int:
    """Pick the cluster count maximizing the Krzanowski-Lai ratio.

    With W_g the within-cluster dispersion of the g-cluster cut and n the
    lattice size, DIFF(g) = (g-1)^{2/n} W_{g-1} - g^{2/n} W_g and
    KL(g) = |DIFF(g)| / |DIFF(g+1)|; the argmax over g in 2..g_max wins
    (ties and zero denominators resolve toward the smallest g).
    """
    surfaces = np.asarray(surfaces, dtype=float)
    T, n = surfaces.shape
    if not 2 <= g_max <= T - 1:
        raise ValueError("g_max must lie in 2..T-1")
    W = {g: within_dispersion(surfaces, cut_dendrogram(dend, g).labels) for g in range(1, g_max + 2)}
    diff = {g: (g - 1) ** (2.0 / n) * W[g - 1] - g ** (2.0 / n) * W[g] for g in range(2, g_max + 2)}
    best_g, best_kl = 2, -np.inf
    for g in range(2, g_max + 1):
        denom = abs(diff[g + 1])
        kl = np.inf if denom == 0.0 else abs(diff[g]) / denom
        if kl > best_kl:
            best_g, best_kl = g, kl
    return best_g
