"""Deterministic quadrature grids over the reference manifolds.

Grids are uniform in intrinsic coordinates: N cells on the circle, N x N on
the flat torus, and equal-area staggered latitude bands on the sphere.
Nodes sit at cell centers and weights sum to 1 exactly (up to float
round-off), so integrating the constant 1 returns 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .manifold import Circle, FlatTorus2, Sphere2, Manifold


@dataclass
class QuadratureGrid:
    manifold: Manifold
    nodes: np.ndarray        # (N, d) ambient coordinates
    weights: np.ndarray      # (N,) volume weights, sum 1
    spacing: float           # max node separation scale (geodesic units)
    intrinsic: np.ndarray    # intrinsic coordinates of the nodes
    # lattice structure, when the grid is a uniform product grid
    lattice_shape: tuple = ()
    # sphere band structure: (band z-centers, band weights) when applicable
    bands: tuple = field(default=(), repr=False)

    @property
    def size(self):
        return self.nodes.shape[0]

    def integrate(self, values):
        return float(np.dot(self.weights, values))


def circle_grid(manifold: Circle, n: int) -> QuadratureGrid:
    t = (np.arange(n) + 0.5) / n
    nodes = manifold.to_ambient(t)
    w = np.full(n, 1.0 / n)
    return QuadratureGrid(manifold, nodes, w, spacing=1.0 / n, intrinsic=t,
                          lattice_shape=(n,))


def torus_grid(manifold: FlatTorus2, n: int) -> QuadratureGrid:
    t = (np.arange(n) + 0.5) / n
    uu, vv = np.meshgrid(t, t, indexing="ij")
    uv = np.stack([uu.ravel(), vv.ravel()], axis=1)
    nodes = manifold.to_ambient(uv)
    w = np.full(n * n, 1.0 / (n * n))
    return QuadratureGrid(manifold, nodes, w, spacing=1.0 / n, intrinsic=uv,
                          lattice_shape=(n, n))


def sphere_grid(manifold: Sphere2, n_target: int) -> QuadratureGrid:
    """Equal-area staggered bands; roughly n_target nodes."""
    n_bands = max(4, int(round(np.sqrt(n_target * np.pi / 4.0))))
    z_edges = np.linspace(-1.0, 1.0, n_bands + 1)
    zc = 0.5 * (z_edges[:-1] + z_edges[1:])
    band_w = 1.0 / n_bands  # equal-height z-bands have equal area
    dirs = []
    wts = []
    intr = []
    for k in range(n_bands):
        s = np.sqrt(max(1.0 - zc[k] * zc[k], 0.0))
        m_k = max(1, int(round(2.0 * np.pi * s / (2.0 / n_bands))))
        phi = (np.arange(m_k) + 0.5 * (k % 2) + 0.25) * (2.0 * np.pi / m_k)
        x = s * np.cos(phi)
        y = s * np.sin(phi)
        z = np.full(m_k, zc[k])
        dirs.append(np.stack([x, y, z], axis=1))
        wts.append(np.full(m_k, band_w / m_k))
        intr.append(np.stack([x, y, z], axis=1))
    dirs = np.concatenate(dirs)
    wts = np.concatenate(wts)
    intr = np.concatenate(intr)
    nodes = manifold.to_ambient(dirs)
    # geodesic band height as the spacing scale
    spacing = np.pi * manifold.radius / n_bands
    return QuadratureGrid(manifold, nodes, wts, spacing=spacing, intrinsic=intr,
                          bands=(zc, np.full(n_bands, band_w)))


def build_grid(manifold, resolution) -> QuadratureGrid:
    """Build the natural grid for the manifold.

    ``resolution`` is the 1D subdivision count for circle/torus and the
    target node count for the sphere.
    """
    if isinstance(manifold, Circle):
        return circle_grid(manifold, resolution)
    if isinstance(manifold, FlatTorus2):
        return torus_grid(manifold, resolution)
    if isinstance(manifold, Sphere2):
        return sphere_grid(manifold, resolution)
    raise ValueError("unsupported manifold")


def grid_for_scale(manifold, scale, factor=4):
    """Grid fine enough that spacing <= scale/factor."""
    if isinstance(manifold, (Circle, FlatTorus2)):
        n = int(np.ceil(factor / scale))
        n += n % 2  # even subdivision keeps reference-set edges on cell lines
        return build_grid(manifold, n)
    # sphere: spacing ~ pi*r/n_bands and n_bands ~ sqrt(N*pi)/2
    n_bands = int(np.ceil(np.pi * manifold.radius * factor / scale))
    n_target = int(np.ceil(4.0 * n_bands * n_bands / np.pi))
    return build_grid(manifold, n_target)


def tangent_frames(manifold: Sphere2, unit_dirs):
    """Two orthonormal tangent vectors at each unit direction."""
    u = np.asarray(unit_dirs, dtype=float)
    ref = np.zeros_like(u)
    # pick the most orthogonal coordinate axis per point
    idx = np.argmin(np.abs(u), axis=-1)
    ref[np.arange(len(u)), idx] = 1.0
    e1 = np.cross(u, ref)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(u, e1)
    return e1, e2


def sphere_exp(manifold: Sphere2, unit_dirs, tangent, step):
    """Ambient point reached by walking `step` along a unit tangent."""
    theta = step / manifold.radius
    u = np.cos(theta) * unit_dirs + np.sin(theta) * tangent
    return manifold.to_ambient(u)
