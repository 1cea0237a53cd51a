"""Discrete-to-continuum bridges.

* nearest-sample transport surrogate (exact geodesic nearest, reported
  sup-displacement = covering radius over the evaluation nodes);
* interpolation of vertex functions to the manifold (kernel-smoothed
  pullback along the transport);
* Fraenkel asymmetry against the closed-form minimizer families;
* mass fixing by attaching or removing a geodesic ball;
* U-statistic concentration experiments for the graph TV of a fixed function;
* L1 error of a discrete cut against the minimizer family;
* log-log rate fitting with a seeded bootstrap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import BandwidthTooSmall, InfeasibleMass, InsufficientData
from .manifold import (CheegerReference, Circle, FlatTorus2, PointCloud,
                       Sphere2, _wrap, _wrap_dist)
from .nonlocal_tv import ContinuumFunction, SmoothingKernel, smooth, surface_tension
from .proximity_graph import build_graph, gtv
from .quadrature import QuadratureGrid, tangent_frames


def schedule_exponents(m):
    """Parameter-schedule exponents as functions of the intrinsic dimension."""
    return {"k_delta": 2.0 / (1 + 2 * m),
            "k_theta": 1.0 / (2 * (1 + 2 * m)),
            "k_eps": 3.0 / (2 + 4 * m),
            "k_zeta": 3.0 / (1 + 2 * m)}


# ---------------------------------------------------------------------------
# Transport surrogate
# ---------------------------------------------------------------------------

@dataclass
class TransportSurrogate:
    cloud: PointCloud
    nodes: np.ndarray            # (N, d) ambient evaluation points
    assignment: np.ndarray       # (N,) index of the nearest sample point
    sup_displacement: float      # covering radius over the nodes
    grid: QuadratureGrid = None  # retained when nodes came from a grid

    def pullback(self, u):
        """Vertex function composed with the transport, on the nodes."""
        u = np.asarray(u)
        return u[self.assignment]


def transport_assign(cloud: PointCloud, nodes) -> TransportSurrogate:
    """Exact geodesic-nearest sample assignment (ties to smallest index)."""
    grid = nodes if isinstance(nodes, QuadratureGrid) else None
    pts = grid.nodes if grid is not None else np.atleast_2d(np.asarray(nodes, float))
    mf = cloud.manifold
    samples = cloud.points
    tree = cKDTree(samples)
    _, idx0 = tree.query(pts)
    g0 = mf.geodesic_distance(pts, samples[idx0])
    # any strictly closer sample (geodesically) must be within chord radius g0
    assignment = np.asarray(idx0, dtype=int).copy()
    best = np.asarray(g0, dtype=float).copy()
    lists = tree.query_ball_point(pts, np.maximum(best, 1e-15))
    for k, cand in enumerate(lists):
        if len(cand) <= 1:
            continue
        cand = np.asarray(cand, dtype=int)
        d = mf.geodesic_distance(pts[k][None, :], samples[cand])
        d = np.atleast_1d(d)
        dmin = d.min()
        winners = cand[d <= dmin + 1e-12]
        w = int(winners.min())
        if dmin < best[k] - 1e-15 or (abs(dmin - best[k]) <= 1e-12 and w < assignment[k]):
            assignment[k] = w
            best[k] = dmin
    return TransportSurrogate(cloud=cloud, nodes=pts, assignment=assignment,
                              sup_displacement=float(best.max()), grid=grid)


# ---------------------------------------------------------------------------
# Interpolation operator
# ---------------------------------------------------------------------------

def interpolate(u, surrogate: TransportSurrogate,
                kernel: SmoothingKernel) -> ContinuumFunction:
    """Kernel-smoothed pullback of a vertex function along the transport."""
    if kernel.a < 2.0 * surrogate.sup_displacement:
        raise BandwidthTooSmall(
            f"bandwidth {kernel.a:.4g} below twice the covering radius "
            f"{surrogate.sup_displacement:.4g}")
    if surrogate.grid is None:
        raise ValueError("interpolation requires a quadrature-grid surrogate")
    u = np.asarray(u, dtype=float)
    cloud, mf = surrogate.cloud, surrogate.cloud.manifold

    def pullback_eval(points):
        sub = transport_assign(cloud, np.atleast_2d(points))
        return u[sub.assignment]

    bound = float(np.abs(u).max()) if u.size else 0.0
    fpb = ContinuumFunction(evaluator=pullback_eval, bound=bound)
    return smooth(fpb, kernel, surrogate.grid)


# ---------------------------------------------------------------------------
# Fraenkel asymmetry
# ---------------------------------------------------------------------------

def _symdiff_vs_param(fvals, reference: CheegerReference, grid, param):
    ref = reference.minimizer(param)
    return float(np.dot(grid.weights, np.abs(fvals - ref.indicator(grid.nodes))))


def match_minimizer(f: ContinuumFunction, reference: CheegerReference,
                    grid: QuadratureGrid):
    """(alpha, best family parameter) minimizing the symmetric difference."""
    fvals = f(grid.nodes)
    mf = reference.manifold
    if isinstance(mf, Circle):
        return _match_circle(fvals, reference, grid)
    if isinstance(mf, FlatTorus2):
        return _match_torus(fvals, reference, grid)
    if isinstance(mf, Sphere2):
        return _match_sphere(fvals, reference, grid)
    raise ValueError("unsupported manifold")


def fraenkel_asymmetry(f: ContinuumFunction, reference: CheegerReference,
                       grid: QuadratureGrid) -> float:
    return match_minimizer(f, reference, grid)[0]


def _refine_scan(fun, lo, hi, levels=3, pts=48):
    """Iterated bracketed grid scan; robust to the quadrature plateaus that
    defeat golden-section on the piecewise-constant symmetric difference."""
    best_v, best_x = np.inf, 0.5 * (lo + hi)
    for _ in range(levels):
        xs = np.linspace(lo, hi, pts)
        vs = [fun(x) for x in xs]
        k = int(np.argmin(vs))
        if vs[k] < best_v:
            best_v, best_x = vs[k], xs[k]
        w = (hi - lo) / (pts - 1)
        lo, hi = xs[k] - w, xs[k] + w
    return best_v, best_x


def _match_circle(fvals, reference, grid, coarse=512):
    centers = (np.arange(coarse) + 0.5) / coarse
    vals = [_symdiff_vs_param(fvals, reference, grid, c) for c in centers]
    k = int(np.argmin(vals))
    w = 2.0 / coarse
    v, c = _refine_scan(lambda p: _symdiff_vs_param(fvals, reference, grid, _wrap(p)),
                          centers[k] - w, centers[k] + w)
    return v, float(_wrap(c))


def _match_torus(fvals, reference, grid, coarse=128):
    best = (np.inf, None)
    offsets = (np.arange(coarse) + 0.5) / coarse
    for axis in (0, 1):
        vals = [_symdiff_vs_param(fvals, reference, grid, (axis, o)) for o in offsets]
        k = int(np.argmin(vals))
        w = 2.0 / coarse
        v, o = _refine_scan(
            lambda p: _symdiff_vs_param(fvals, reference, grid, (axis, _wrap(p))),
            offsets[k] - w, offsets[k] + w)
        if v < best[0]:
            best = (v, (axis, float(_wrap(o))))
    return best


def _match_sphere(fvals, reference, grid, levels=3):
    # coarse pole grid, then local tangent refinement
    golden = np.pi * (3.0 - np.sqrt(5.0))
    k = np.arange(256)
    z = 1.0 - 2.0 * (k + 0.5) / 256
    rad = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    poles = np.stack([rad * np.cos(golden * k), rad * np.sin(golden * k), z], axis=1)
    vals = [_symdiff_vs_param(fvals, reference, grid, p) for p in poles]
    best_i = int(np.argmin(vals))
    best_v, best_p = vals[best_i], poles[best_i]
    step = 0.2
    for _ in range(levels):
        e1, e2 = tangent_frames(reference.manifold, best_p[None, :])
        for _ in range(40):
            improved = False
            for d in (e1[0], -e1[0], e2[0], -e2[0]):
                cand = best_p + step * d
                cand = cand / np.linalg.norm(cand)
                v = _symdiff_vs_param(fvals, reference, grid, cand)
                if v < best_v:
                    best_v, best_p = v, cand
                    improved = True
            if not improved:
                break
        step /= 4.0
    return best_v, best_p


# ---------------------------------------------------------------------------
# Mass fixing
# ---------------------------------------------------------------------------

@dataclass
class AdjustedSet:
    indicator: ContinuumFunction
    volume: float                    # exact bookkept volume
    symmetric_difference: float      # volume moved, equals |correction|
    perimeter_increment: float       # analytic bound C r^{m-1} for the ball
    radius: float
    center: np.ndarray = None


def fix_mass(indicator, volume, target_mass, manifold,
             grid: QuadratureGrid) -> AdjustedSet:
    """Adjust a set's volume to ``target_mass`` by a disjoint/contained ball.

    ``indicator`` is a callable on ambient points; ``volume`` its known
    volume. The ball radius is found by bisection on the closed-form ball
    volume to 1e-6, so the output volume bookkeeping is exact to that
    tolerance and the moved volume equals the correction.
    """
    if not 0.0 < target_mass < 1.0:
        raise InfeasibleMass(f"target mass {target_mass} outside (0, 1)")
    ind = indicator.evaluator if isinstance(indicator, ContinuumFunction) else indicator
    dv = target_mass - volume
    if abs(dv) < 1e-12:
        f = ContinuumFunction(evaluator=lambda p: np.asarray(ind(p), float), bound=1.0)
        return AdjustedSet(indicator=f, volume=volume, symmetric_difference=0.0,
                           perimeter_increment=0.0, radius=0.0)
    r = _radius_by_bisection(manifold, abs(dv))
    adding = dv > 0
    center = _ball_site(ind, manifold, grid, r, exterior=adding)
    if center is None:
        raise InfeasibleMass("no room for the correction ball")

    def evaluator(points):
        base = np.asarray(ind(points), dtype=float)
        inball = (manifold.geodesic_distance(points, center[None, :]) <= r)
        return np.where(inball, 1.0 if adding else 0.0, base)

    f = ContinuumFunction(evaluator=evaluator, bound=1.0)
    perim = manifold.ball_perimeter(r)
    return AdjustedSet(indicator=f, volume=volume + dv,
                       symmetric_difference=abs(dv),
                       perimeter_increment=float(perim), radius=float(r),
                       center=center)


def _radius_by_bisection(manifold, vol, tol=1e-6):
    if isinstance(manifold, Circle):
        rmax = 0.5
    elif isinstance(manifold, FlatTorus2):
        rmax = 0.5
        if vol > manifold.ball_volume(0.5) - tol:
            raise InfeasibleMass("correction too large for a disjoint torus disk")
    else:
        rmax = np.pi * manifold.radius
    if manifold.ball_volume(rmax) < vol - tol:
        raise InfeasibleMass("correction exceeds the largest available ball")
    lo, hi = 0.0, rmax
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if manifold.ball_volume(mid) < vol:
            lo = mid
        else:
            hi = mid
        if abs(manifold.ball_volume(hi) - vol) < tol * 1e-3:
            break
    return hi


def _ball_site(ind, manifold, grid, r, exterior):
    """Node whose r-ball avoids (exterior) or lies in (interior) the set."""
    fvals = np.asarray(ind(grid.nodes), dtype=float) > 0.5
    want = ~fvals if exterior else fvals
    cand = np.flatnonzero(want)
    if not len(cand):
        return None
    if isinstance(manifold, Circle):
        return _ball_site_circle(fvals, manifold, grid, r, exterior)
    # prefer deep candidates: sort by distance to the nearest opposite node
    opp = grid.nodes[~want]
    if not len(opp):
        return grid.nodes[cand[0]]
    opp_tree = cKDTree(opp)
    dist, _ = opp_tree.query(grid.nodes[cand])
    order = cand[np.argsort(-dist, kind="stable")]
    node_tree = cKDTree(grid.nodes)
    chord = _chord_for_geodesic(manifold, r)
    for i in order[:64]:
        near = node_tree.query_ball_point(grid.nodes[i], chord * 1.0000001)
        near = np.asarray(near, dtype=int)
        dg = manifold.geodesic_distance(grid.nodes[i][None, :], grid.nodes[near])
        inside = near[np.atleast_1d(dg) <= r]
        if np.all(want[inside]):
            return grid.nodes[i]
    return None


def _ball_site_circle(fvals, manifold, grid, r, exterior):
    """Place the arc flush against a set boundary so perimeter is preserved."""
    order = np.argsort(manifold.to_intrinsic(grid.nodes), kind="stable")
    t = manifold.to_intrinsic(grid.nodes)[order]
    vals = fvals[order]
    n = len(t)
    trans = np.flatnonzero(vals != np.roll(vals, 1))
    if not len(trans):
        # set is empty or full on the grid; any center works for the valid case
        return manifold.to_ambient(np.array(0.25)) if exterior != bool(vals[0]) else None
    edges = []
    for k in trans:
        prev = (k - 1) % n
        gap = _wrap(t[k] - t[prev]) if k > 0 else _wrap(t[0] - t[-1])
        edges.append((_wrap(t[prev] + gap / 2.0), bool(vals[k])))
    # run length after each edge, up to the next transition
    for i, (pos, starts_inside) in enumerate(edges):
        nxt = edges[(i + 1) % len(edges)][0]
        run = _wrap(nxt - pos)
        if run == 0.0:
            run = 1.0
        if starts_inside != exterior and run >= 2.0 * r - 1e-12:
            return manifold.to_ambient(np.array(_wrap(pos + r)))
    return None


def _chord_for_geodesic(manifold, r):
    if isinstance(manifold, Sphere2):
        return 2.0 * manifold.radius * np.sin(min(r / manifold.radius, np.pi) / 2.0)
    return r  # chord <= geodesic on the flat manifolds


# ---------------------------------------------------------------------------
# U-statistic concentration
# ---------------------------------------------------------------------------

@dataclass
class UStatReport:
    manifold: str
    tv: float
    entries: list = field(default_factory=list)

    def stds(self):
        return [e["std"] for e in self.entries]


def ustat_concentration(manifold, f: ContinuumFunction, n_list, epsilon_rule,
                        trials, seed, zeta_grid=(0.0, 0.25, 0.5, 1.0)) -> UStatReport:
    """Mean/std/exceedance of GTV of a fixed function over random clouds."""
    if f.tv_exact is None:
        raise ValueError("requires a function with known total variation")
    sigma = surface_tension(manifold.m)
    tv = f.tv_exact
    rep = UStatReport(manifold=manifold.name, tv=tv)
    rng = np.random.default_rng(seed)
    for n in n_list:
        eps = float(epsilon_rule(n)) if callable(epsilon_rule) else float(epsilon_rule)
        vals = np.empty(trials)
        for t in range(trials):
            cloud = manifold.sample(n, seed=int(rng.integers(2 ** 62)))
            graph = build_graph(cloud, eps)
            vals[t] = gtv(graph, f(cloud.points))
        bound0 = sigma * tv * (1.0 + 10.0 * eps * eps)
        exceed = {float(z): float(np.mean(vals > bound0 + z)) for z in zeta_grid}
        rep.entries.append({"n": int(n), "epsilon": eps,
                            "mean": float(vals.mean()),
                            "std": float(vals.std(ddof=1)),
                            "exceedance": exceed})
    return rep


# ---------------------------------------------------------------------------
# Cut L1 error
# ---------------------------------------------------------------------------

class CutError(NamedTuple):
    l1_error: float
    matched_param: object
    discrete_error: float
    sup_displacement: float


def cut_l1_error(cut, cloud: PointCloud, reference: CheegerReference,
                 a, grid: QuadratureGrid) -> CutError:
    """L1 distance of the transported cut indicator to the minimizer family."""
    u = np.zeros(cloud.n)
    u[np.asarray(cut.subset, dtype=int)] = 1.0
    sur = transport_assign(cloud, grid)
    vals = sur.pullback(u)
    # match directly on the node values; the family covers complements
    alpha, param = _match_values(vals, reference, grid)
    ref = reference.minimizer(param)
    disc = float(np.mean(u != ref.indicator(cloud.points)))
    disc = min(disc, 1.0 - disc)
    return CutError(l1_error=float(alpha), matched_param=param,
                    discrete_error=disc, sup_displacement=sur.sup_displacement)


def _match_values(vals, reference, grid):
    mf = reference.manifold
    if isinstance(mf, Circle):
        return _match_circle(vals, reference, grid)
    if isinstance(mf, FlatTorus2):
        return _match_torus(vals, reference, grid)
    return _match_sphere(vals, reference, grid)


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------

@dataclass
class RateReport:
    schedule: dict
    fitted_slope: float
    slope_ci: tuple
    per_n_median: dict
    n_values: list
    intercept: float = 0.0

    def as_dict(self):
        return {"schedule": self.schedule, "fitted_slope": self.fitted_slope,
                "slope_ci": list(self.slope_ci),
                "per_n_median": {str(k): v for k, v in self.per_n_median.items()},
                "n_values": [int(n) for n in self.n_values]}


def fit_rate(records, m=1, seed=0, n_boot=1000, min_trials=5) -> RateReport:
    """OLS slope of log median error vs log n, with a seeded bootstrap CI.

    ``records``: mapping n -> list of nonnegative errors.
    """
    records = {int(n): np.asarray(v, dtype=float) for n, v in dict(records).items()}
    ns = sorted(records)
    if len(ns) < 3:
        raise InsufficientData("need at least 3 distinct n values")
    if any(len(records[n]) < min_trials for n in ns):
        raise InsufficientData(f"need at least {min_trials} trials per n")
    floor = 1e-300

    def slope_of(meds):
        x = np.log(np.asarray(ns, dtype=float))
        y = np.log(np.maximum(meds, floor))
        A = np.stack([x, np.ones_like(x)], axis=1)
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return coef[0], coef[1]

    meds = np.array([np.median(records[n]) for n in ns])
    slope, intercept = slope_of(meds)
    rng = np.random.default_rng(seed)
    boot = np.empty(n_boot)
    for b in range(n_boot):
        bm = np.array([np.median(rng.choice(records[n], size=len(records[n])))
                       for n in ns])
        boot[b] = slope_of(bm)[0]
    ci = (float(np.percentile(boot, 5)), float(np.percentile(boot, 95)))
    return RateReport(schedule=schedule_exponents(m), fitted_slope=float(slope),
                      slope_ci=ci,
                      per_n_median={n: float(np.median(records[n])) for n in ns},
                      n_values=ns, intercept=float(intercept))


# ---------------------------------------------------------------------------
# Stability-exponent construction (perturbed strips)
# ---------------------------------------------------------------------------

def perturbed_strip_excess(t, bump_width=0.45):
    """Perimeter excess of a strip whose boundary is a volume-preserving
    piecewise-linear double tent of L1 size t.

    Two opposite tents of width ``bump_width`` and slope s carry L1 mass
    s * bump_width^2 / 2, so s = 2 t / bump_width^2, and the boundary-length
    excess is the integral of sqrt(1 + g'^2) - 1 over the tent supports.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or 2.0 * bump_width > 1.0:
        raise ValueError("need t >= 0 and two tents fitting in the period")
    s = 2.0 * t / bump_width ** 2
    return 2.0 * bump_width * (np.sqrt(1.0 + s * s) - 1.0)


def stability_exponent(t_list=(0.02, 0.05, 0.1), bump_width=0.45):
    """Fitted log-log slope of the perimeter excess vs perturbation size."""
    t = np.asarray(t_list, dtype=float)
    ex = perturbed_strip_excess(t, bump_width)
    x, y = np.log(t), np.log(ex)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), ex
