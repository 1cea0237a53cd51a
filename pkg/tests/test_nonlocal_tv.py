import numpy as np
import pytest

from cheeger_lab.errors import (DegenerateFunction, ResolutionTooCoarse,
                                UnsupportedDimension)
from cheeger_lab.manifold import (CircleArc, SphereCap, TorusStrip,
                                  continuum_cheeger, get_manifold)
from cheeger_lab.nonlocal_tv import (CheckReport, ContinuumFunction,
                                     SmoothingKernel, cheeger_functional_form,
                                     check_bias_inequality, check_monotonicity,
                                     check_smoothing_chain, constant_function,
                                     gradient_norm_fd, indicator_function,
                                     smooth, surface_tension, tv_local_smooth,
                                     tv_nonlocal)
from cheeger_lab.quadrature import build_grid, grid_for_scale

CIRCLE = get_manifold("circle")
TORUS = get_manifold("flat_torus_2")
SPHERE = get_manifold("sphere_2")


def mc_surface_tension(m, n=200_000, seed=0):
    """Rejection-sampled Monte Carlo for the kernel constant, with its s.e."""
    rng = np.random.default_rng(seed)
    vol = {1: 2.0, 2: np.pi, 3: 4 * np.pi / 3}[m]
    x = rng.uniform(-1, 1, size=(n, m))
    inside = (x * x).sum(1) <= 1.0
    vals = np.abs(x[inside, 0])
    est = vals.mean() * vol
    se = vals.std(ddof=1) / np.sqrt(inside.sum()) * vol
    return est, se


def test_surface_tension_closed_forms():
    assert surface_tension(1) == 1.0
    assert surface_tension(2) == pytest.approx(4 / 3, abs=1e-15)
    assert surface_tension(3) == pytest.approx(np.pi / 2, abs=1e-15)
    with pytest.raises(UnsupportedDimension):
        surface_tension(4)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_surface_tension_monte_carlo(m):
    est, se = mc_surface_tension(m)
    assert abs(est - surface_tension(m)) < 3 * se + 1e-12


def test_circle_half_arc_tvh_exact():
    f = indicator_function(CircleArc(CIRCLE, center=0.25))
    for h in (0.02, 0.1, 0.25):
        g = grid_for_scale(CIRCLE, h, 8)
        assert tv_nonlocal(f, h, g) == pytest.approx(2.0, abs=1e-9)


def test_circle_tvh_matches_monte_carlo():
    # independent oracle: TV_h = h^{-2} E|f(x)-f(y)| 1_{d<=h} over uniform pairs
    arc = CircleArc(CIRCLE, center=0.1, length=0.3)
    f = indicator_function(arc)
    h = 0.08
    rng = np.random.default_rng(1)
    n = 400_000
    x, y = rng.random(n), rng.random(n)
    d = np.abs(np.mod(x - y, 1.0))
    d = np.minimum(d, 1 - d)
    fx = arc.indicator(CIRCLE.to_ambient(x))
    fy = arc.indicator(CIRCLE.to_ambient(y))
    vals = np.abs(fx - fy) * (d <= h) / h ** 2
    mc, se = vals.mean(), vals.std(ddof=1) / np.sqrt(n)
    g = grid_for_scale(CIRCLE, h, 8)
    assert abs(tv_nonlocal(f, h, g) - mc) < 3 * se


def test_torus_strip_tvh():
    f = indicator_function(TorusStrip(TORUS, axis=0, offset=0.0))
    sigma = surface_tension(2)
    for h in (0.02, 0.05):
        g = grid_for_scale(TORUS, h, 8)
        ratio = tv_nonlocal(f, h, g) / (sigma * 2.0)
        assert 0.98 <= ratio <= 1.02


def test_sphere_hemisphere_tvh_bound():
    cap = SphereCap(SPHERE, pole=[0, 0, 1])
    f = indicator_function(cap)
    sigma = surface_tension(2)
    for h in (0.04, 0.08):
        g = grid_for_scale(SPHERE, h, 4)
        ratio = tv_nonlocal(f, h, g) / (sigma * cap.perimeter)
        assert ratio <= 1 + 10 * h * h
        assert ratio > 0.9


def test_sphere_pair_path_agrees_with_zonal():
    cap = SphereCap(SPHERE, pole=[0, 0, 1])
    zonal = indicator_function(cap)
    generic = ContinuumFunction(evaluator=cap.indicator, bound=1.0)
    h = 0.1
    g = grid_for_scale(SPHERE, h, 4)
    tz = tv_nonlocal(zonal, h, g)
    tp = tv_nonlocal(generic, h, g)
    assert abs(tp - tz) / tz < 0.05


def test_tvh_resolution_guard_and_scale_limit():
    f = indicator_function(CircleArc(CIRCLE, center=0.25))
    coarse = build_grid(CIRCLE, 30)
    with pytest.raises(ResolutionTooCoarse):
        tv_nonlocal(f, 0.05, coarse)
    fine = build_grid(CIRCLE, 400)
    with pytest.raises(ValueError, match="admissible"):
        tv_nonlocal(f, 0.3, fine)


def test_tvh_layer_cake_three_levels():
    # |a-b| = sum over thresholds of indicator differences, so TV_h is additive
    def three_level(p):
        t = CIRCLE.to_intrinsic(p)
        return np.where(t < 0.3, 0.0, np.where(t < 0.7, 1.0, 2.0))

    f = ContinuumFunction(evaluator=three_level, bound=2.0)
    f1 = ContinuumFunction(evaluator=lambda p: (three_level(p) >= 1).astype(float))
    f2 = ContinuumFunction(evaluator=lambda p: (three_level(p) >= 2).astype(float))
    h = 0.05
    g = grid_for_scale(CIRCLE, h, 8)
    assert tv_nonlocal(f, h, g) == pytest.approx(
        tv_nonlocal(f1, h, g) + tv_nonlocal(f2, h, g), abs=1e-12)


def test_tv_local_smooth_sin():
    f = ContinuumFunction(
        evaluator=lambda p: np.sin(2 * np.pi * CIRCLE.to_intrinsic(p)))
    g = build_grid(CIRCLE, 800)
    assert tv_local_smooth(f, g) == pytest.approx(4.0, abs=1e-4)


def test_tv_local_uses_supplied_gradient():
    f = ContinuumFunction(
        evaluator=lambda p: np.sin(2 * np.pi * CIRCLE.to_intrinsic(p)),
        grad_norm=lambda p: 2 * np.pi * np.abs(np.cos(2 * np.pi * CIRCLE.to_intrinsic(p))))
    g = build_grid(CIRCLE, 800)
    assert tv_local_smooth(f, g) == pytest.approx(4.0, abs=1e-4)


def test_tv_local_smooth_torus_and_sphere():
    ft = ContinuumFunction(
        evaluator=lambda p: np.sin(2 * np.pi * TORUS.to_intrinsic(p)[..., 0]))
    gt = build_grid(TORUS, 120)
    assert tv_local_smooth(ft, gt) == pytest.approx(4.0, abs=1e-3)
    # zonal height function z on the unit-area sphere: TV = integral |grad z|
    fs = ContinuumFunction(
        evaluator=lambda p: SPHERE.to_intrinsic(p)[..., 2])
    gs = build_grid(SPHERE, 4000)
    # |grad z| = sin(theta)/r; integral = (pi/4)/r... computed via quadrature oracle
    gsz = SPHERE.to_intrinsic(gs.nodes)[..., 2]
    oracle = float(np.dot(gs.weights, np.sqrt(1 - gsz ** 2) / SPHERE.radius))
    assert tv_local_smooth(fs, gs) == pytest.approx(oracle, rel=1e-2)


def test_smoothing_kernel_mass():
    for m in (1, 2, 3):
        k = SmoothingKernel(a=0.1, m=m)
        # Monte Carlo mass of the normalized kernel over the unit ball
        rng = np.random.default_rng(m)
        vol = {1: 2.0, 2: np.pi, 3: 4 * np.pi / 3}[m]
        x = rng.uniform(-1, 1, size=(400_000, m))
        inside = (x * x).sum(1) <= 1
        vals = k.normalized(np.linalg.norm(x[inside], axis=1))
        est = vals.mean() * vol
        se = vals.std(ddof=1) / np.sqrt(inside.sum()) * vol
        assert abs(est - 1.0) < 3 * se + 1e-3


def test_smooth_preserves_constants_and_range():
    g = build_grid(CIRCLE, 400)
    k = SmoothingKernel(a=0.05, m=1)
    out = smooth(constant_function(0.37), k, g)
    assert np.allclose(out(g.nodes), 0.37, atol=1e-13)
    arc = CircleArc(CIRCLE, center=0.25)
    lam = smooth(indicator_function(arc), k, g)
    vals = lam(g.nodes)
    assert vals.min() >= -1e-12 and vals.max() <= 1 + 1e-12
    # support geometry: 1 at the midpoint, 0 at the antipode, mixed near edges
    mid = CIRCLE.to_ambient(np.array([0.25]))
    anti = CIRCLE.to_ambient(np.array([0.75]))
    near = CIRCLE.to_ambient(np.array([0.5 + 0.01]))
    assert lam(mid)[0] == pytest.approx(1.0, abs=1e-12)
    assert lam(anti)[0] == pytest.approx(0.0, abs=1e-12)
    assert 0.0 < lam(near)[0] < 1.0


def test_smooth_l1_distance_bound():
    g = build_grid(CIRCLE, 800)
    a = 0.05
    arc = CircleArc(CIRCLE, center=0.25)
    f = indicator_function(arc)
    lam = smooth(f, SmoothingKernel(a=a, m=1), g)
    l1 = g.integrate(np.abs(lam(g.nodes) - f(g.nodes)))
    assert l1 <= 2 * a


def test_smooth_resolution_guard():
    g = build_grid(CIRCLE, 40)
    with pytest.raises(ResolutionTooCoarse):
        smooth(constant_function(1.0), SmoothingKernel(a=0.05, m=1), g)


def test_bias_inequality_reports():
    rep = check_bias_inequality(CIRCLE, CircleArc(CIRCLE, center=0.0),
                                [0.05, 0.1])
    assert isinstance(rep, CheckReport) and rep.passed
    for e in rep.entries:
        assert e["ratio"] == pytest.approx(1.0, abs=1e-9)


def test_monotonicity_check_and_degenerate():
    f = indicator_function(CircleArc(CIRCLE, center=0.25))
    rep = check_monotonicity(f, 0.02, [0.05, 0.1, 0.2], CIRCLE)
    assert rep.passed
    for e in rep.entries:
        assert e["ratio"] == pytest.approx(1.0, abs=1e-9)  # exact on the circle
    zero = constant_function(0.5)
    rep = check_monotonicity(zero, 0.02, [0.05], CIRCLE)
    assert rep.entries[0].get("degenerate")
    with pytest.raises(ValueError):
        check_monotonicity(f, 0.1, [0.05], CIRCLE)


def test_smoothing_chain_circle():
    rep = check_smoothing_chain(CIRCLE, CircleArc(CIRCLE, center=0.25),
                                h=0.01, a=0.05)
    assert rep.passed
    chain = rep.entries[0]
    assert 1.9 <= chain["sigma_tv_smooth"] <= 2.1


def test_cheeger_functional_form():
    g = build_grid(CIRCLE, 1000)
    arc = indicator_function(CircleArc(CIRCLE, center=0.25))
    assert cheeger_functional_form(arc, g) == pytest.approx(4.0, abs=1e-6)
    # smooth competitor is no better than the constant's bound
    f = ContinuumFunction(
        evaluator=lambda p: 0.5 * (1 + np.sin(2 * np.pi * CIRCLE.to_intrinsic(p))),
        tv_exact=2.0)
    val = cheeger_functional_form(f, g)
    assert val >= 4.0 - 1e-9
    with pytest.raises(DegenerateFunction):
        cheeger_functional_form(constant_function(0.3), g)
    with pytest.raises(ValueError, match="requires f in"):
        cheeger_functional_form(constant_function(2.0), g)


def test_gradient_bound_of_smoothed_indicator():
    g = build_grid(CIRCLE, 800)
    a = 0.05
    lam = smooth(indicator_function(CircleArc(CIRCLE, center=0.25)),
                 SmoothingKernel(a=a, m=1), g)
    assert gradient_norm_fd(lam, g).max() <= 10.0 / a
