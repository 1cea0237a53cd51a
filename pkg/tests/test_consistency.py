import numpy as np
import pytest

from cheeger_lab.consistency import (TransportSurrogate, cut_l1_error,
                                     fit_rate, fix_mass, fraenkel_asymmetry,
                                     interpolate, match_minimizer,
                                     perturbed_strip_excess,
                                     schedule_exponents, stability_exponent,
                                     transport_assign, ustat_concentration)
from cheeger_lab.errors import (BandwidthTooSmall, InfeasibleMass,
                                InsufficientData)
from cheeger_lab.manifold import (CircleArc, PointCloud, SphereCap,
                                  TorusStrip, continuum_cheeger, get_manifold)
from cheeger_lab.nonlocal_tv import (ContinuumFunction, SmoothingKernel,
                                     constant_function, indicator_function)
from cheeger_lab.proximity_graph import build_graph
from cheeger_lab.quadrature import build_grid
from cheeger_lab.cut_solvers import solve_exact

CIRCLE = get_manifold("circle")
TORUS = get_manifold("flat_torus_2")
SPHERE = get_manifold("sphere_2")


def uniform_circle_cloud(n):
    return PointCloud(points=CIRCLE.to_ambient(np.arange(n) / n), seed=0,
                      manifold=CIRCLE)


def test_schedule_exponents():
    s1 = schedule_exponents(1)
    assert s1 == {"k_delta": 2 / 3, "k_theta": 1 / 6, "k_eps": 0.5, "k_zeta": 1.0}
    assert schedule_exponents(2)["k_eps"] == pytest.approx(0.3)


def test_transport_grid_cloud_covering_radius():
    cloud = uniform_circle_cloud(50)
    # evaluation nodes that include the exact midpoints between samples
    nodes = CIRCLE.to_ambient((np.arange(500)) / 500)
    sur = transport_assign(cloud, nodes)
    assert sur.sup_displacement == pytest.approx(1 / 100, abs=1e-12)


def test_transport_single_point_and_ties():
    cloud = PointCloud(points=CIRCLE.to_ambient(np.array([0.0])), seed=0,
                       manifold=CIRCLE)
    nodes = CIRCLE.to_ambient(np.linspace(0, 1, 97, endpoint=False))
    sur = transport_assign(cloud, nodes)
    assert np.all(sur.assignment == 0)
    # equidistant node between two samples resolves to the smaller index
    cloud2 = uniform_circle_cloud(4)
    mid = CIRCLE.to_ambient(np.array([0.125]))
    sur2 = transport_assign(cloud2, mid)
    assert sur2.assignment[0] == 0


def test_transport_random_cloud_spacing_bound():
    hits = 0
    for seed in range(40):
        cloud = CIRCLE.sample(1000, seed=seed)
        nodes = build_grid(CIRCLE, 2000)
        sur = transport_assign(cloud, nodes)
        hits += sur.sup_displacement <= 3 * np.log(1000) / 1000
    assert hits >= 36  # spacing order statistics: holds for most seeds


def test_interpolate_constant_range_monotone():
    cloud = CIRCLE.sample(600, seed=2)
    grid = build_grid(CIRCLE, 400)
    sur = transport_assign(cloud, grid)
    k = SmoothingKernel(a=0.06, m=1)
    const = interpolate(np.full(600, 0.4), sur, k)
    assert np.allclose(const(grid.nodes), 0.4, atol=1e-12)
    rng = np.random.default_rng(0)
    u = rng.random(600)
    v = u + rng.random(600) * 0.5
    iu, iv = interpolate(u, sur, k)(grid.nodes), interpolate(v, sur, k)(grid.nodes)
    assert np.all(iu <= iv + 1e-12)
    assert iu.min() >= 0 and iu.max() <= 1 + 1e-12
    with pytest.raises(BandwidthTooSmall):
        interpolate(u, sur, SmoothingKernel(a=sur.sup_displacement, m=1))


def test_interpolate_indicator_l1_bound():
    cloud = CIRCLE.sample(1500, seed=4)
    grid = build_grid(CIRCLE, 800)
    sur = transport_assign(cloud, grid)
    a = 0.05
    arc = CircleArc(CIRCLE, center=0.25)
    u = arc.indicator(cloud.points)
    lam = interpolate(u, sur, SmoothingKernel(a=a, m=1))
    l1 = grid.integrate(np.abs(lam(grid.nodes) - arc.indicator(grid.nodes)))
    assert l1 <= 2 * a + 2 * sur.sup_displacement


def test_fraenkel_family_member_is_zero():
    ref = continuum_cheeger(CIRCLE)
    grid = build_grid(CIRCLE, 800)
    f = indicator_function(CircleArc(CIRCLE, center=0.37))
    assert fraenkel_asymmetry(f, ref, grid) <= 2 * grid.spacing


def test_fraenkel_two_arcs_is_half():
    ref = continuum_cheeger(CIRCLE)
    grid = build_grid(CIRCLE, 800)
    f = ContinuumFunction(
        evaluator=lambda p: ((CIRCLE.to_intrinsic(p) % 0.5) < 0.25).astype(float))
    assert fraenkel_asymmetry(f, ref, grid) == pytest.approx(0.5, abs=1e-2)


def test_fraenkel_min_property():
    ref = continuum_cheeger(CIRCLE)
    grid = build_grid(CIRCLE, 800)
    f = indicator_function(CircleArc(CIRCLE, center=0.37))
    alpha = fraenkel_asymmetry(f, ref, grid)
    for p in (0.0, 0.2, 0.37, 0.8):
        explicit = grid.integrate(
            np.abs(f(grid.nodes) - ref.minimizer(p).indicator(grid.nodes)))
        assert alpha <= explicit + 1e-12


def test_fraenkel_torus_and_sphere():
    reft = continuum_cheeger(TORUS)
    gt = build_grid(TORUS, 64)
    f = indicator_function(TorusStrip(TORUS, axis=1, offset=0.61))
    a, (axis, off) = match_minimizer(f, reft, gt)
    assert a <= 2 * gt.spacing and axis == 1
    refs = continuum_cheeger(SPHERE)
    gs = build_grid(SPHERE, 2500)
    pole = np.array([1.0, 2.0, -0.5])
    f = indicator_function(SphereCap(SPHERE, pole=pole))
    a, p = match_minimizer(f, refs, gs)
    assert a <= 0.01
    assert np.dot(p, pole / np.linalg.norm(pole)) > 0.999


def test_fix_mass_noop_and_infeasible():
    grid = build_grid(CIRCLE, 800)
    arc = CircleArc(CIRCLE, center=0.25)
    adj = fix_mass(arc.indicator, 0.5, 0.5, CIRCLE, grid)
    assert adj.symmetric_difference == 0.0
    with pytest.raises(InfeasibleMass):
        fix_mass(arc.indicator, 0.5, 1.2, CIRCLE, grid)


def test_fix_mass_circle_extends_arc():
    grid = build_grid(CIRCLE, 800)
    arc = CircleArc(CIRCLE, center=0.25)
    adj = fix_mass(arc.indicator, 0.5, 0.6, CIRCLE, grid)
    assert adj.volume == pytest.approx(0.6, abs=1e-9)
    assert adj.symmetric_difference <= 0.1 + 1e-9
    # the result is still a single arc: quadrature volume 0.6, two boundaries
    vals = adj.indicator(grid.nodes)
    assert grid.integrate(vals) == pytest.approx(0.6, abs=2 * grid.spacing)
    flips = np.sum(vals != np.roll(vals, 1))
    assert flips == 2


def test_fix_mass_torus_perimeter_increment():
    grid = build_grid(TORUS, 64)
    strip = TorusStrip(TORUS, axis=0, offset=0.0)
    adj = fix_mass(strip.indicator, 0.5, 0.51, TORUS, grid)
    assert adj.volume == pytest.approx(0.51, abs=1e-9)
    assert adj.perimeter_increment <= 2 * np.sqrt(np.pi * 0.02) + 1e-6
    vals = adj.indicator(grid.nodes)
    assert grid.integrate(vals) == pytest.approx(0.51, abs=3 * grid.spacing)


def test_fix_mass_sphere_removal():
    grid = build_grid(SPHERE, 3000)
    cap = SphereCap(SPHERE, pole=[0, 0, 1])
    adj = fix_mass(cap.indicator, 0.5, 0.44, SPHERE, grid)
    assert adj.volume == pytest.approx(0.44, abs=1e-9)
    vals = adj.indicator(grid.nodes)
    assert grid.integrate(vals) == pytest.approx(0.44, abs=0.02)


def test_ustat_constant_function_is_zero():
    rep = ustat_concentration(CIRCLE, constant_function(0.7), [50, 100],
                              epsilon_rule=0.1, trials=5, seed=0)
    for e in rep.entries:
        assert e["mean"] == 0.0 and e["std"] == 0.0


def test_ustat_requires_known_tv():
    f = ContinuumFunction(evaluator=lambda p: np.zeros(len(p)))
    with pytest.raises(ValueError):
        ustat_concentration(CIRCLE, f, [50], 0.1, trials=2, seed=0)


def test_cut_l1_error_on_planted_instance():
    rng = np.random.default_rng(6)
    t = np.concatenate([rng.random(9) * 0.3, 0.5 + rng.random(9) * 0.3])
    cloud = PointCloud(points=CIRCLE.to_ambient(t), seed=6, manifold=CIRCLE)
    g = build_graph(cloud, 0.12)
    res = solve_exact(g)
    ref = continuum_cheeger(CIRCLE)
    err = cut_l1_error(res, cloud, ref, a=0.05, grid=build_grid(CIRCLE, 800))
    assert err.l1_error < 0.25
    assert err.discrete_error == 0.0  # clusters split exactly


def test_cut_l1_complement_invariance():
    cloud = CIRCLE.sample(200, seed=9)
    g = build_graph(cloud, 0.08)
    res = solve_exact(build_graph(cloud.points[:10], 0.3, m=1)) if False else None
    from cheeger_lab.cut_solvers import solve_pipeline, CutResult
    res = solve_pipeline(g, seed=0)
    grid = build_grid(CIRCLE, 800)
    ref = continuum_cheeger(CIRCLE)
    e1 = cut_l1_error(res, cloud, ref, a=0.05, grid=grid)
    comp = CutResult(subset=np.setdiff1d(np.arange(200), res.subset),
                     objective_value=res.objective_value, gtv=res.gtv,
                     balance=res.balance, solver=res.solver, elapsed=0.0,
                     certificate=res.certificate)
    e2 = cut_l1_error(comp, cloud, ref, a=0.05, grid=grid)
    assert e1.l1_error == pytest.approx(e2.l1_error, abs=1e-9)


def test_fit_rate_exact_power_law_and_errors():
    ns = [500, 1000, 2000, 4000]
    rr = fit_rate({n: [n ** -0.5] * 6 for n in ns})
    assert rr.fitted_slope == pytest.approx(-0.5, abs=1e-12)
    assert rr.slope_ci[0] == pytest.approx(-0.5, abs=1e-12)
    rr = fit_rate({n: [0.37] * 6 for n in ns})
    assert abs(rr.fitted_slope) < 1e-12
    with pytest.raises(InsufficientData):
        fit_rate({500: [1] * 6, 1000: [1] * 6})
    with pytest.raises(InsufficientData):
        fit_rate({n: [1.0] * 3 for n in ns})


def test_fit_rate_bootstrap_deterministic():
    rng = np.random.default_rng(1)
    rec = {n: (n ** -0.4 * (1 + 0.2 * rng.standard_normal(8))).tolist()
           for n in (500, 1000, 2000, 4000)}
    a = fit_rate(rec, seed=5)
    b = fit_rate(rec, seed=5)
    assert a.slope_ci == b.slope_ci


def test_stability_exponent():
    slope, excess = stability_exponent((0.02, 0.05, 0.1))
    assert slope >= 1.7
    t = np.array([0.02, 0.05, 0.1])
    assert np.all(excess > 0)
    # quadratic lower bound with a positive fitted constant
    c = (excess / t ** 2).min()
    assert c > 0
    assert np.allclose(excess, perturbed_strip_excess(t))
