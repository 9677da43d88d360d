"""Seeded point-cloud generators.

``polar_curve_sample`` draws from the curve r(theta) = a + cos(2 theta) with
0 < a < 1. Its negative-radius arcs trace two smaller inner loops between the
two large lobes, so a clean sample has four 1-dimensional features: one longer
and one shorter persistence value, each twice.

``loop_network_generate`` produces a surrogate for filament networks: the edges
of a random cellular (Voronoi) network in a square window, sampled as noisy
points. Higher classes have fewer cells and thicker edges, hence fewer and
larger loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Voronoi


POLAR_OFFSET = 0.15
POLAR_SCALE = 1.3


def polar_radius(theta, offset: float = POLAR_OFFSET):
    return offset + np.cos(2.0 * theta)


def _polar_xy(theta, offset):
    r = polar_radius(theta, offset)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def polar_curve_sample(
    n: int,
    noise_var: float = 0.0,
    seed: int = 0,
    offset: float = POLAR_OFFSET,
    scale: float = POLAR_SCALE,
) -> np.ndarray:
    """``n`` points equally spaced in arc length on r = offset + cos(2 theta).

    A fine uniform theta grid over half the curve is thinned to equal arc-length
    steps starting at a seeded random phase; the other half is the point
    reflection, so a noiseless cloud is exactly centrally symmetric. Isotropic
    Gaussian noise of variance ``noise_var`` is then added per coordinate.
    """
    if n < 4:
        raise ValueError("n must be >= 4")
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    if not 0 < offset < 1:
        raise ValueError("offset must lie in (0, 1) for the curve to have inner loops")
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, np.pi, 200_001)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(_polar_xy(grid, offset), axis=0), axis=1))])
    half = (n + 1) // 2
    step = arc[-1] / half
    targets = (rng.uniform(0.0, 1.0) + np.arange(half)) * step
    theta = np.interp(targets, arc, grid)
    base = _polar_xy(theta, offset)
    pts = scale * np.concatenate([base, -base])[:n]
    if noise_var > 0:
        pts = pts + rng.normal(0.0, np.sqrt(noise_var), size=pts.shape)
    return pts


@dataclass(frozen=True)
class NetworkClass:
    n_cells: int
    thickness: float
    spacing: float


# Window is [0, WINDOW]^2; units match the classification prior scale.
WINDOW = 10.0
NETWORK_CLASSES = {
    1: NetworkClass(n_cells=40, thickness=0.05, spacing=0.4),
    2: NetworkClass(n_cells=20, thickness=0.08, spacing=0.4),
    3: NetworkClass(n_cells=10, thickness=0.12, spacing=0.4),
}


def _cell_edges(sites, size):
    """Finite edges of the Voronoi tessellation of ``sites`` restricted to [0, size]^2.

    Sites are reflected across the four window sides so every cell of an original
    site is bounded and the window border itself appears as cell edges.
    """
    mirrored = [sites]
    for axis in range(2):
        for wall in (0.0, size):
            m = sites.copy()
            m[:, axis] = 2 * wall - m[:, axis]
            mirrored.append(m)
    vor = Voronoi(np.concatenate(mirrored))
    verts = vor.vertices
    tol = 1e-9 * size
    inside = np.all((verts >= -tol) & (verts <= size + tol), axis=1)
    edges = []
    for a, b in vor.ridge_vertices:
        if a >= 0 and b >= 0 and inside[a] and inside[b]:
            edges.append((np.clip(verts[a], 0, size), np.clip(verts[b], 0, size)))
    return edges


def loop_network_generate(class_id: int, seed: int = 0) -> np.ndarray:
    """Points along the edges of a random cellular network in the square window.

    Cell sites are uniform; each edge is sampled at jittered positions about
    ``spacing`` apart and blurred by isotropic noise of std ``thickness``.
    """
    if class_id not in NETWORK_CLASSES:
        raise ValueError(f"class_id must be one of {sorted(NETWORK_CLASSES)}")
    spec = NETWORK_CLASSES[class_id]
    rng = np.random.default_rng([class_id, seed])
    sites = rng.uniform(0.0, WINDOW, size=(spec.n_cells, 2))
    pieces = []
    for a, b in _cell_edges(sites, WINDOW):
        length = float(np.linalg.norm(b - a))
        m = max(1, int(round(length / spec.spacing)))
        t = (np.arange(m) + rng.uniform(0.0, 1.0, size=m)) / m
        pieces.append(a + t[:, None] * (b - a))
    pts = np.concatenate(pieces)
    return pts + rng.normal(0.0, spec.thickness, size=pts.shape)


def figure_eight_sample(n_per_circle: int = 20, noise_sigma: float = 0.005, seed: int = 0, radius: float = 1.0):
    """Two circles of equal radius touching at the origin.

    Each circle carries ``n_per_circle`` points equally spaced in angle, one of
    which is the shared tangency point (kept once, so the cloud has
    2 * n_per_circle - 1 points). ``noise_sigma`` is the per-coordinate Gaussian
    standard deviation.
    """
    if n_per_circle < 3:
        raise ValueError("n_per_circle must be >= 3")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    t = 2.0 * np.pi * np.arange(1, n_per_circle) / n_per_circle
    left = np.column_stack([-radius + radius * np.cos(t), radius * np.sin(t)])
    right = np.column_stack([radius - radius * np.cos(t), radius * np.sin(t)])
    pts = np.concatenate([np.zeros((1, 2)), left, right])
    return pts + rng.normal(0.0, noise_sigma, size=pts.shape)
