"""Reference manifolds with exact samplers, geodesics, and Cheeger ground truth.

All three manifolds are normalized so the total Riemannian volume is 1:

* ``Circle``    -- circle of circumference 1 embedded in R^2 (radius 1/2pi).
* ``FlatTorus2``-- flat unit-area torus embedded in R^4 as a product of two
  circles of circumference 1.
* ``Sphere2``   -- round sphere of area 1 embedded in R^3 (radius 1/sqrt(4pi)).

Intrinsic coordinates are normalized arclength t in [0,1) for the circle,
(u, v) in [0,1)^2 for the torus, and the ambient unit direction for the
sphere.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * np.pi


def _wrap(x):
    """Map to [0, 1)."""
    return np.mod(x, 1.0)


def _wrap_dist(a, b):
    """Wraparound distance between points of the unit circle [0,1)."""
    d = np.abs(np.mod(a - b, 1.0))
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (n, d) ambient coordinates
    seed: int
    manifold: "Manifold"

    @property
    def n(self):
        return self.points.shape[0]

    def save(self, path):
        path = Path(path)
        d = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i"] + [f"x{k}" for k in range(d)])
            for i, row in enumerate(self.points):
                w.writerow([i] + [repr(float(v)) for v in row])
        sidecar = {"manifold": self.manifold.name, "n": self.n, "seed": int(self.seed)}
        with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
            json.dump(sidecar, fh, indent=2)

    @staticmethod
    def load(path):
        path = Path(path)
        with open(path.with_suffix(path.suffix + ".json")) as fh:
            meta = json.load(fh)
        pts = np.loadtxt(path, delimiter=",", skiprows=1)
        pts = np.atleast_2d(pts)[:, 1:]
        return PointCloud(points=pts, seed=int(meta["seed"]),
                          manifold=get_manifold(meta["manifold"]))


class Manifold:
    """Base interface; concrete kinds below."""

    name: str
    m: int  # intrinsic dimension
    d: int  # ambient dimension
    scale: float
    # conservative admissible length-scale for graph/nonlocal constructions
    epsilon0: float = 0.25
    h_max: float = 0.25

    def sample(self, n, seed) -> PointCloud:
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        pts = self._sample(rng, n)
        return PointCloud(points=pts, seed=int(seed), manifold=self)

    # -- to be provided by subclasses -------------------------------------
    def _sample(self, rng, n):
        raise NotImplementedError

    def geodesic_distance(self, x, y):
        raise NotImplementedError

    def to_intrinsic(self, points):
        raise NotImplementedError

    def to_ambient(self, intrinsic):
        raise NotImplementedError

    def on_manifold_residual(self, points):
        raise NotImplementedError

    def ball_volume(self, r):
        raise NotImplementedError

    def ball_perimeter(self, r):
        raise NotImplementedError

    def ball_radius_for_volume(self, vol):
        raise NotImplementedError

    def equal_volume_cell(self, points, cells=16):
        """Index of an equal-volume partition cell for each point."""
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} m={self.m} d={self.d}>"


class Circle(Manifold):
    name = "circle"
    m = 1
    d = 2

    def __init__(self):
        self.radius = 1.0 / TWO_PI
        self.scale = self.radius

    def _sample(self, rng, n):
        t = rng.random(n)
        return self.to_ambient(t)

    def to_ambient(self, t):
        t = np.asarray(t, dtype=float)
        ang = TWO_PI * t
        return np.stack([self.radius * np.cos(ang), self.radius * np.sin(ang)], axis=-1)

    def to_intrinsic(self, points):
        points = np.asarray(points, dtype=float)
        return _wrap(np.arctan2(points[..., 1], points[..., 0]) / TWO_PI)

    def geodesic_distance(self, x, y):
        return _wrap_dist(self.to_intrinsic(x), self.to_intrinsic(y))

    def on_manifold_residual(self, points):
        return np.abs(np.linalg.norm(points, axis=-1) - self.radius)

    def ball_volume(self, r):
        return min(2.0 * r, 1.0)

    def ball_perimeter(self, r):
        return 0.0 if 2.0 * r >= 1.0 else 2.0

    def ball_radius_for_volume(self, vol):
        if not 0.0 < vol < 1.0:
            raise ValueError("ball volume must be in (0,1)")
        return vol / 2.0

    def equal_volume_cell(self, points, cells=16):
        t = self.to_intrinsic(points)
        return np.minimum((t * cells).astype(int), cells - 1)


class FlatTorus2(Manifold):
    name = "flat_torus_2"
    m = 2
    d = 4

    def __init__(self):
        self.radius = 1.0 / TWO_PI  # per-factor circle radius; unit area total
        self.scale = self.radius

    def _sample(self, rng, n):
        uv = rng.random((n, 2))
        return self.to_ambient(uv)

    def to_ambient(self, uv):
        uv = np.asarray(uv, dtype=float)
        au = TWO_PI * uv[..., 0]
        av = TWO_PI * uv[..., 1]
        r = self.radius
        return np.stack([r * np.cos(au), r * np.sin(au),
                         r * np.cos(av), r * np.sin(av)], axis=-1)

    def to_intrinsic(self, points):
        points = np.asarray(points, dtype=float)
        u = _wrap(np.arctan2(points[..., 1], points[..., 0]) / TWO_PI)
        v = _wrap(np.arctan2(points[..., 3], points[..., 2]) / TWO_PI)
        return np.stack([u, v], axis=-1)

    def geodesic_distance(self, x, y):
        a = self.to_intrinsic(x)
        b = self.to_intrinsic(y)
        du = _wrap_dist(a[..., 0], b[..., 0])
        dv = _wrap_dist(a[..., 1], b[..., 1])
        return np.sqrt(du * du + dv * dv)

    def on_manifold_residual(self, points):
        points = np.asarray(points, dtype=float)
        r1 = np.abs(np.linalg.norm(points[..., :2], axis=-1) - self.radius)
        r2 = np.abs(np.linalg.norm(points[..., 2:], axis=-1) - self.radius)
        return np.maximum(r1, r2)

    def ball_volume(self, r):
        if r > 0.5:
            raise ValueError("flat torus ball volume only valid for r <= 0.5")
        return np.pi * r * r

    def ball_perimeter(self, r):
        return TWO_PI * r

    def ball_radius_for_volume(self, vol):
        r = np.sqrt(vol / np.pi)
        if r > 0.5:
            raise ValueError("requested ball volume too large for flat torus")
        return r

    def equal_volume_cell(self, points, cells=16):
        k = int(round(np.sqrt(cells)))
        uv = self.to_intrinsic(points)
        iu = np.minimum((uv[..., 0] * k).astype(int), k - 1)
        iv = np.minimum((uv[..., 1] * k).astype(int), k - 1)
        return iu * k + iv


class Sphere2(Manifold):
    name = "sphere_2"
    m = 2
    d = 3

    def __init__(self):
        self.radius = 1.0 / np.sqrt(4.0 * np.pi)
        self.scale = self.radius

    def _sample(self, rng, n):
        g = rng.standard_normal((n, 3))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return self.radius * g

    def to_ambient(self, unit_dirs):
        return self.radius * np.asarray(unit_dirs, dtype=float)

    def to_intrinsic(self, points):
        points = np.asarray(points, dtype=float)
        return points / np.linalg.norm(points, axis=-1, keepdims=True)

    def geodesic_distance(self, x, y):
        a = self.to_intrinsic(x)
        b = self.to_intrinsic(y)
        dot = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
        return self.radius * np.arccos(dot)

    def on_manifold_residual(self, points):
        return np.abs(np.linalg.norm(points, axis=-1) - self.radius)

    def cap_volume(self, geo_radius):
        """Area of a geodesic ball (spherical cap); total area is 1."""
        theta = geo_radius / self.radius
        return 0.5 * (1.0 - np.cos(theta))

    def ball_volume(self, r):
        return self.cap_volume(r)

    def ball_perimeter(self, r):
        return TWO_PI * self.radius * np.sin(r / self.radius)

    def ball_radius_for_volume(self, vol):
        if not 0.0 < vol < 1.0:
            raise ValueError("ball volume must be in (0,1)")
        return self.radius * np.arccos(1.0 - 2.0 * vol)

    def equal_volume_cell(self, points, cells=16):
        # 4 equal-height z-bands x 4 azimuthal sectors
        u = self.to_intrinsic(points)
        z = np.clip(u[..., 2], -1.0, 1.0)
        iz = np.minimum(((z + 1.0) / 2.0 * 4).astype(int), 3)
        phi = _wrap(np.arctan2(u[..., 1], u[..., 0]) / TWO_PI)
        ip = np.minimum((phi * 4).astype(int), 3)
        return iz * 4 + ip


_REGISTRY = {
    "circle": Circle,
    "flat_torus_2": FlatTorus2,
    "sphere_2": Sphere2,
}


def get_manifold(name) -> Manifold:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown manifold {name!r}; expected one of {sorted(_REGISTRY)}")


# ---------------------------------------------------------------------------
# Reference Cheeger data
# ---------------------------------------------------------------------------

class ReferenceSet:
    """A measurable set with closed-form volume and perimeter."""

    manifold: Manifold
    volume: float
    perimeter: float

    def indicator(self, points):
        raise NotImplementedError


class CircleArc(ReferenceSet):
    def __init__(self, manifold, center, length=0.5):
        assert 0.0 < length < 1.0
        self.manifold = manifold
        self.center = float(_wrap(center))
        self.length = float(length)
        self.volume = self.length
        self.perimeter = 2.0

    def indicator(self, points):
        t = self.manifold.to_intrinsic(points)
        return (_wrap_dist(t, self.center) <= self.length / 2.0).astype(float)


class TorusStrip(ReferenceSet):
    def __init__(self, manifold, axis, offset, width=0.5):
        assert axis in (0, 1) and 0.0 < width < 1.0
        self.manifold = manifold
        self.axis = int(axis)
        self.offset = float(_wrap(offset))
        self.width = float(width)
        self.volume = self.width
        self.perimeter = 2.0

    def indicator(self, points):
        uv = self.manifold.to_intrinsic(points)
        return (_wrap(uv[..., self.axis] - self.offset) < self.width).astype(float)


class SphereCap(ReferenceSet):
    def __init__(self, manifold, pole, volume=0.5):
        assert 0.0 < volume < 1.0
        self.manifold = manifold
        pole = np.asarray(pole, dtype=float)
        self.pole = pole / np.linalg.norm(pole)
        self.volume = float(volume)
        # cap of volume fraction v on the unit-area sphere
        self.cos_threshold = 1.0 - 2.0 * self.volume
        # boundary circle: 2*pi*r*sin(theta) with sin(theta) = 2 sqrt(v(1-v))
        self.perimeter = 2.0 * np.sqrt(np.pi * volume * (1.0 - volume))

    def indicator(self, points):
        u = self.manifold.to_intrinsic(points)
        return (u @ self.pole >= self.cos_threshold).astype(float)


@dataclass
class CheegerReference:
    manifold: Manifold
    constant: float

    def minimizer(self, param) -> ReferenceSet:
        """Family member of volume 1/2 indexed by the natural parameter."""
        mf = self.manifold
        if isinstance(mf, Circle):
            return CircleArc(mf, center=param)
        if isinstance(mf, FlatTorus2):
            axis, offset = param
            return TorusStrip(mf, axis=axis, offset=offset)
        if isinstance(mf, Sphere2):
            return SphereCap(mf, pole=param)
        raise ValueError("unsupported manifold")

    def default_minimizer(self) -> ReferenceSet:
        mf = self.manifold
        if isinstance(mf, Circle):
            return self.minimizer(0.25)
        if isinstance(mf, FlatTorus2):
            return self.minimizer((0, 0.0))
        return self.minimizer(np.array([0.0, 0.0, 1.0]))

    def isoperimetric_profile(self, v):
        """Minimal perimeter I(v) among sets of volume v, for v in (0,1)."""
        v = np.asarray(v, dtype=float)
        w = np.minimum(v, 1.0 - v)
        mf = self.manifold
        if isinstance(mf, Circle):
            return np.where((v > 0) & (v < 1), 2.0, 0.0)
        if isinstance(mf, FlatTorus2):
            # small volumes favor geodesic disks, large ones strips
            return np.minimum(2.0 * np.sqrt(np.pi * w), 2.0)
        if isinstance(mf, Sphere2):
            return 2.0 * np.sqrt(np.pi * v * (1.0 - v))
        raise ValueError("unsupported manifold")


def continuum_cheeger(manifold) -> CheegerReference:
    """Exact continuum Cheeger constant and minimizer family."""
    if isinstance(manifold, Circle):
        return CheegerReference(manifold, constant=4.0)
    if isinstance(manifold, FlatTorus2):
        return CheegerReference(manifold, constant=4.0)
    if isinstance(manifold, Sphere2):
        return CheegerReference(manifold, constant=2.0 * np.sqrt(np.pi))
    raise ValueError("unsupported manifold")
