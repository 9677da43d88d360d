"""Vietoris-Rips persistence over Z/2 and tilted diagrams.

Edges enter the filtration at their Euclidean length and a triangle enters
with its longest edge. Simplices are totally ordered by
``(filtration value, dimension, lexicographic vertex tuple)``.

H0 is obtained with a union-find sweep over the ordered edges. H1 is obtained
by reducing the edge coboundary columns (persistent cohomology yields the same
pairs as homology for a fixed total order). Columns whose minimal cofacet forms
an apparent pair are paired without reduction, and edges that kill an H0 class
are cleared. The working column is a binary heap of cofacet keys in which equal
keys cancel in pairs when they surface (Z/2 addition done lazily).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, types
from numba.typed import Dict


@dataclass(eq=False)
class BirthDeathDiagram:
    """Finite (birth, death) pairs plus essential births for one dimension."""

    dim: int
    pairs: np.ndarray
    essential: np.ndarray
    max_radius: float

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=float).reshape(-1, 2)
        self.essential = np.asarray(self.essential, dtype=float).reshape(-1)
        if np.any(self.pairs[:, 1] < self.pairs[:, 0]):
            raise ValueError("death must be >= birth")

    def __len__(self):
        return len(self.pairs) + len(self.essential)


@dataclass(eq=False)
class PersistenceDiagram:
    """Tilted diagram: a multiset of (birth, persistence) points in the wedge."""

    dim: int
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = np.empty((0, 2))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("diagram points must have shape (k, 2)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("diagram points must be finite")
        if np.any(pts < 0):
            raise ValueError("diagram points must lie in the wedge b >= 0, p >= 0")
        self.points = pts
        self.dim = int(self.dim)

    def __len__(self):
        return len(self.points)

    @property
    def births(self):
        return self.points[:, 0]

    @property
    def persistence(self):
        return self.points[:, 1]


def as_cloud(cloud) -> np.ndarray:
    X = np.asarray(cloud, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size else X.reshape(0, 0)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("point cloud must contain at least one point")
    if not np.all(np.isfinite(X)):
        raise ValueError("point cloud coordinates must be finite")
    return X


def pairwise_distances(cloud) -> np.ndarray:
    """Euclidean distance matrix of a point cloud."""
    X = as_cloud(cloud)
    diff = X[:, None, :] - X[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(D, 0.0)
    return D


class _Filtration:
    """Edge ordering and integer rank tables for one distance matrix."""

    def __init__(self, D: np.ndarray, max_radius: float):
        n = D.shape[0]
        self.n = n
        iu, ju = np.triu_indices(n, 1)
        lengths = D[iu, ju]
        keep = lengths <= max_radius
        iu, ju, lengths = iu[keep], ju[keep], lengths[keep]
        self.values = np.unique(lengths)
        rank = np.searchsorted(self.values, lengths)
        order = np.lexsort((ju, iu, rank))
        self.ei = iu[order].astype(np.int64)
        self.ej = ju[order].astype(np.int64)
        self.erank = rank[order].astype(np.int64)
        # filtration position of each edge, -1 when absent
        self.pos = np.full((n, n), -1, dtype=np.int64)
        idx = np.arange(len(order), dtype=np.int64)
        self.pos[self.ei, self.ej] = idx
        self.pos[self.ej, self.ei] = idx
        # rank is monotone in length, so a triangle's rank is its largest edge rank
        self.rank = np.full((n, n), -1, dtype=np.int64)
        self.rank[self.ei, self.ej] = self.erank
        self.rank[self.ej, self.ei] = self.erank

    def edge_value(self, e):
        return float(self.values[self.erank[e]])

    def triangle_value(self, key):
        return float(self.values[int(key) // self.n**3])


def _h0(filt: _Filtration):
    parent = np.arange(filt.n)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    deaths = []
    negative = np.zeros(len(filt.ei), dtype=bool)
    for e in range(len(filt.ei)):
        ri, rj = find(filt.ei[e]), find(filt.ej[e])
        if ri == rj:
            continue
        # elder rule: the younger (larger index) root dies
        if ri < rj:
            ri, rj = rj, ri
        parent[ri] = rj
        negative[e] = True
        deaths.append(filt.edge_value(e))
    n_essential = filt.n - len(deaths)
    return np.asarray(deaths, dtype=float), n_essential, negative


# Triangle {a < b < c} with rank r is encoded as ((r*n + a)*n + b)*n + c, which
# sorts exactly like (filtration value, lexicographic vertices).


@njit(cache=True)
def _cofacet_key(rank, n, i, j, k):
    rik = rank[i, k]
    rjk = rank[j, k]
    if rik < 0 or rjk < 0:
        return -1
    r = max(rank[i, j], rik, rjk)
    a = min(i, k)
    c = max(j, k)
    b = i + j + k - a - c
    return ((r * n + a) * n + b) * n + c


@njit(cache=True)
def _coboundary(rank, n, i, j):
    out = np.empty(n, dtype=np.int64)
    m = 0
    for k in range(n):
        if k != i and k != j:
            key = _cofacet_key(rank, n, i, j, k)
            if key >= 0:
                out[m] = key
                m += 1
    return np.sort(out[:m])


@njit(cache=True)
def _heap_push(heap, size, key):
    if size == heap.size:
        grown = np.empty(2 * heap.size, dtype=np.int64)
        grown[:size] = heap[:size]
        heap = grown
    i = size
    heap[i] = key
    while i > 0:
        parent = (i - 1) // 2
        if heap[parent] <= heap[i]:
            break
        heap[parent], heap[i] = heap[i], heap[parent]
        i = parent
    return heap, size + 1


@njit(cache=True)
def _heap_pop(heap, size):
    size -= 1
    heap[0] = heap[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        child = left
        if left + 1 < size and heap[left + 1] < heap[left]:
            child = left + 1
        if heap[i] <= heap[child]:
            break
        heap[i], heap[child] = heap[child], heap[i]
        i = child
    return size


@njit(cache=True)
def _heap_pivot(heap, size):
    """Smallest key with odd multiplicity; cancelled pairs are discarded."""
    while size > 0:
        top = heap[0]
        size = _heap_pop(heap, size)
        if size > 0 and heap[0] == top:
            size = _heap_pop(heap, size)
            continue
        heap, size = _heap_push(heap, size, top)
        return top, heap, size
    return -1, heap, size


@njit(cache=True)
def _heap_drain(heap, size):
    out = np.empty(size, dtype=np.int64)
    m = 0
    while size > 0:
        top, heap, size = _heap_pivot(heap, size)
        if top < 0:
            break
        size = _heap_pop(heap, size)
        out[m] = top
        m += 1
    return out[:m]


@njit(cache=True)
def _reduce_h1(ei, ej, rank, pos, positive):
    n = rank.shape[0]
    pivots = Dict.empty(key_type=types.int64, value_type=types.int64)
    pending = np.empty(positive.size, dtype=np.int64)
    n_pending = 0
    for e in positive:
        i = ei[e]
        j = ej[e]
        best = -1
        for k in range(n):
            if k != i and k != j:
                key = _cofacet_key(rank, n, i, j, k)
                if key >= 0 and (best < 0 or key < best):
                    best = key
        if best >= 0:
            c = best % n
            b = (best // n) % n
            a = (best // (n * n)) % n
            if max(pos[a, b], pos[a, c], pos[b, c]) == e:
                # apparent pair: no reduction needed
                pivots[best] = e
                continue
        pending[n_pending] = e
        n_pending += 1

    reduced = Dict.empty(key_type=types.int64, value_type=types.int64[:])
    essential = np.empty(n_pending, dtype=np.int64)
    n_essential = 0
    heap = np.empty(max(4 * n, 16), dtype=np.int64)
    for idx in range(n_pending - 1, -1, -1):
        e = pending[idx]
        size = 0
        for key in _coboundary(rank, n, ei[e], ej[e]):
            heap, size = _heap_push(heap, size, key)
        while True:
            piv, heap, size = _heap_pivot(heap, size)
            if piv < 0 or piv not in pivots:
                break
            o = pivots[piv]
            if o in reduced:
                other = reduced[o]
            else:
                other = _coboundary(rank, n, ei[o], ej[o])
            for key in other:
                heap, size = _heap_push(heap, size, key)
        if piv >= 0:
            pivots[piv] = e
            reduced[e] = _heap_drain(heap, size)
        else:
            essential[n_essential] = e
            n_essential += 1

    keys = np.empty(len(pivots), dtype=np.int64)
    edges = np.empty(len(pivots), dtype=np.int64)
    m = 0
    for k, e in pivots.items():
        keys[m] = k
        edges[m] = e
        m += 1
    return keys, edges, essential[:n_essential]


def _h1(filt: _Filtration, negative: np.ndarray):
    positive = np.flatnonzero(~negative).astype(np.int64)
    keys, edges, essential = _reduce_h1(filt.ei, filt.ej, filt.rank, filt.pos, positive)
    births = filt.values[filt.erank[edges]]
    deaths = filt.values[keys // filt.n**3]
    pairs = np.column_stack([births, deaths])
    return pairs, filt.values[filt.erank[essential]]


def vr_persistence(cloud, max_dim: int = 1, max_radius: float | None = None):
    """Persistence diagrams of the Vietoris-Rips filtration, dimensions 0..max_dim.

    Zero-persistence pairs are dropped. Classes still alive at ``max_radius``
    are reported as essential births.
    """
    if max_dim not in (0, 1):
        raise ValueError("only homology dimensions 0 and 1 are supported")
    X = as_cloud(cloud)
    D = pairwise_distances(X)
    if not np.all(np.isfinite(D)):
        raise ValueError("non-finite pairwise distance")
    if max_radius is None:
        max_radius = float(D.max())
    elif not max_radius > 0:
        raise ValueError("max_radius must be positive")
    max_radius = float(max_radius)
    # past the enclosing radius the complex is a cone: no pair can die later
    enclosing = float(D.max(axis=1).min())
    filt = _Filtration(D, min(max_radius, enclosing))

    deaths, n_ess, negative = _h0(filt)
    h0_pairs = np.column_stack([np.zeros_like(deaths), deaths])
    h0_pairs = h0_pairs[h0_pairs[:, 1] > h0_pairs[:, 0]]
    out = [BirthDeathDiagram(0, h0_pairs, np.zeros(n_ess), max_radius)]
    if max_dim >= 1:
        pairs, essential = _h1(filt, negative)
        pairs = pairs[pairs[:, 1] > pairs[:, 0]]
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        out.append(BirthDeathDiagram(1, pairs, np.sort(essential), max_radius))
    return out


def tilt(diagram: BirthDeathDiagram) -> PersistenceDiagram:
    """Map (birth, death) to (birth, death - birth); essentials die at max_radius."""
    b = np.concatenate([diagram.pairs[:, 0], diagram.essential])
    d = np.concatenate([diagram.pairs[:, 1], np.full(len(diagram.essential), diagram.max_radius)])
    return PersistenceDiagram(diagram.dim, np.column_stack([b, np.maximum(d - b, 0.0)]))


def subsample_diagram(
    pd: PersistenceDiagram, k: int, strategy: str = "top_persistence", seed: int = 0
) -> PersistenceDiagram:
    """Keep at most ``k`` points, preserving their input order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(pd)
    if k >= n:
        return PersistenceDiagram(pd.dim, pd.points.copy())
    if strategy == "top_persistence":
        order = np.lexsort((np.arange(n), pd.births, -pd.persistence))
        keep = np.sort(order[:k])
    elif strategy == "uniform_random":
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(n, size=k, replace=False))
    else:
        raise ValueError(f"unknown subsampling strategy {strategy!r}")
    return PersistenceDiagram(pd.dim, pd.points[keep])
