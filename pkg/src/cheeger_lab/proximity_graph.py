"""Epsilon-proximity graphs and the rescaled graph functionals.

Edges connect points at ambient Euclidean distance <= epsilon (indicator
kernel), excluding self loops. The graph total variation of a vertex
function u is

    GTV(u) = (1 / (n^2 eps^{m+1})) * sum_{i,j} w_ij |u_i - u_j|,

with w_ij in {0,1}; for a set indicator this equals 2*Cut/(n^2 eps^{m+1}).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateSubset

CHEEGER_RATIO = "cheeger"
RATIO_CUT = "ratio"
MODULARITY = "modularity"


@dataclass
class ProximityGraph:
    points: np.ndarray           # (n, d)
    epsilon: float
    m: int                       # intrinsic dimension used in the rescaling
    edges: np.ndarray            # (E, 2) int array, i < j, lexicographically sorted
    cloud: object = None         # optional PointCloud provenance
    _adj: sp.csr_matrix = field(default=None, repr=False)
    _neighbors: list = field(default=None, repr=False)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def rescale(self):
        """1 / (n^2 eps^{m+1})."""
        return 1.0 / (self.n ** 2 * self.epsilon ** (self.m + 1))

    @property
    def adjacency(self) -> sp.csr_matrix:
        if self._adj is None:
            n = self.n
            if len(self.edges):
                i, j = self.edges[:, 0], self.edges[:, 1]
                data = np.ones(2 * len(self.edges))
                self._adj = sp.csr_matrix(
                    (data, (np.concatenate([i, j]), np.concatenate([j, i]))),
                    shape=(n, n))
            else:
                self._adj = sp.csr_matrix((n, n))
        return self._adj

    @property
    def degrees(self):
        return np.asarray(self.adjacency.sum(axis=1)).ravel().astype(int)

    def neighbors(self, i):
        """Sorted neighbor list of vertex i."""
        if self._neighbors is None:
            nb = [[] for _ in range(self.n)]
            for a, b in self.edges:
                nb[a].append(b)
                nb[b].append(a)
            self._neighbors = [sorted(x) for x in nb]
        return self._neighbors[i]

    def save(self, path, cloud_ref=None):
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j"])
            for i, j in self.edges:
                w.writerow([int(i), int(j)])
        meta = {"n": int(self.n), "epsilon": float(self.epsilon),
                "m": int(self.m), "cloud_ref": cloud_ref}
        with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
            json.dump(meta, fh, indent=2)

    @staticmethod
    def load(path, points=None, cloud=None):
        path = Path(path)
        with open(path.with_suffix(path.suffix + ".json")) as fh:
            meta = json.load(fh)
        raw = np.loadtxt(path, delimiter=",", skiprows=1, dtype=int, ndmin=2)
        edges = raw.reshape(-1, 2)
        if points is None:
            if cloud is not None:
                points = cloud.points
            else:
                points = np.zeros((meta["n"], 1))
        return ProximityGraph(points=points, epsilon=meta["epsilon"],
                              m=meta["m"], edges=edges, cloud=cloud)


def build_graph(points_or_cloud, epsilon, m=None) -> ProximityGraph:
    """Build the epsilon-graph with a uniform spatial cell grid of side eps."""
    cloud = None
    if hasattr(points_or_cloud, "points") and hasattr(points_or_cloud, "manifold"):
        cloud = points_or_cloud
        points = cloud.points
        if m is None:
            m = cloud.manifold.m
    else:
        points = np.asarray(points_or_cloud, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if m is None:
            raise ValueError("m required when building from a raw point array")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    edges = _edges_cell_grid(points, epsilon)
    return ProximityGraph(points=points, epsilon=float(epsilon), m=int(m),
                          edges=edges, cloud=cloud)


def _edges_cell_grid(points, eps):
    n, d = points.shape
    if n < 2 or eps == 0.0:
        return np.empty((0, 2), dtype=int)
    cells = np.floor(points / eps).astype(np.int64)
    # group point indices by cell key
    buckets = {}
    for idx, key in enumerate(map(tuple, cells)):
        buckets.setdefault(key, []).append(idx)
    buckets = {k: np.array(v) for k, v in buckets.items()}
    offsets = _half_offsets(d)
    eps2 = eps * eps
    out = []
    for key in sorted(buckets):
        a = buckets[key]
        pa = points[a]
        # within-cell pairs
        if len(a) > 1:
            diff = pa[:, None, :] - pa[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            ii, jj = np.where(np.triu(d2 <= eps2, k=1))
            if len(ii):
                out.append(np.stack([a[ii], a[jj]], axis=1))
        for off in offsets:
            other = tuple(k + o for k, o in zip(key, off))
            b = buckets.get(other)
            if b is None:
                continue
            pb = points[b]
            diff = pa[:, None, :] - pb[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            ii, jj = np.where(d2 <= eps2)
            if len(ii):
                out.append(np.stack([a[ii], b[jj]], axis=1))
    if not out:
        return np.empty((0, 2), dtype=int)
    e = np.concatenate(out)
    e.sort(axis=1)
    order = np.lexsort((e[:, 1], e[:, 0]))
    return e[order]


def _half_offsets(d):
    """Nonzero offsets in {-1,0,1}^d, one per +/- pair (lexicographically positive)."""
    grids = np.stack(np.meshgrid(*([[-1, 0, 1]] * d), indexing="ij"), axis=-1).reshape(-1, d)
    keep = []
    for off in grids:
        if not off.any():
            continue
        first = off[np.nonzero(off)[0][0]]
        if first > 0:
            keep.append(tuple(int(x) for x in off))
    return keep


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------

def gtv(graph: ProximityGraph, u) -> float:
    """Graph total variation seminorm of a vertex function."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != graph.n:
        raise ValueError("vertex function length mismatch")
    if not len(graph.edges):
        return 0.0
    # fixed edge order, compensated summation; factor 2 for the ordered sum
    terms = np.abs(u[graph.edges[:, 0]] - u[graph.edges[:, 1]])
    return 2.0 * graph.rescale * math.fsum(terms.tolist())


def cut_size(graph: ProximityGraph, subset) -> int:
    """Raw Cut(E_n): number of edges with exactly one endpoint in subset."""
    mask = _as_mask(graph.n, subset)
    if not len(graph.edges):
        return 0
    return int(np.count_nonzero(mask[graph.edges[:, 0]] ^ mask[graph.edges[:, 1]]))


def cut_and_balance(graph: ProximityGraph, subset):
    """(GTV of the subset indicator, min(|A|/n, 1-|A|/n))."""
    mask = _as_mask(graph.n, subset)
    cut = cut_size(graph, mask)
    g = 2.0 * graph.rescale * cut
    frac = mask.sum() / graph.n
    return g, float(min(frac, 1.0 - frac))


def objective(graph: ProximityGraph, subset, kind=CHEEGER_RATIO, gamma=1.0,
              strict=False) -> float:
    """Balanced-cut objective value; +inf for degenerate ratio denominators."""
    mask = _as_mask(graph.n, subset)
    g, bal = cut_and_balance(graph, mask)
    frac = mask.sum() / graph.n
    if kind == MODULARITY:
        return g + gamma * (frac ** 2 + (1.0 - frac) ** 2)
    degenerate = frac in (0.0, 1.0)
    if degenerate:
        if strict:
            raise DegenerateSubset("empty or full subset under a ratio objective")
        return math.inf
    if kind == CHEEGER_RATIO:
        return g / bal
    if kind == RATIO_CUT:
        return g / (frac * (1.0 - frac))
    raise ValueError(f"unknown objective kind {kind!r}")


def _as_mask(n, subset):
    subset = np.asarray(subset)
    if subset.dtype == bool:
        if subset.shape[0] != n:
            raise ValueError("mask length mismatch")
        return subset.copy()
    mask = np.zeros(n, dtype=bool)
    if subset.size:
        mask[subset.astype(int)] = True
    return mask
