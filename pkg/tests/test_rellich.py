import numpy as np
import pytest
from scipy.special import hankel1, jv

from polyscat import rellich
from polyscat.solver import FarFieldPattern, default_directions


def circle_pattern(k, values_fn, n=256):
    dirs = default_directions(2, n)
    th = np.arctan2(dirs[:, 1], dirs[:, 0])
    return FarFieldPattern(dirs, values_fn(th), k)


# ---------------------------------------------------------------------------
# Harmonic decomposition
# ---------------------------------------------------------------------------

def test_single_mode_magnitude():
    ff = circle_pattern(2.0, lambda th: np.exp(1j * th))
    dec = rellich.decompose_far_field(ff)
    assert abs(dec.b[1] - np.sqrt(2 * np.pi)) < 1e-10
    others = np.delete(dec.b, 1)
    assert np.max(others) < 1e-10


def test_parseval():
    rng = np.random.default_rng(0)
    c = rng.standard_normal(9) + 1j * rng.standard_normal(9)

    def values(th):
        return sum(c[j] * np.exp(1j * (j - 4) * th) for j in range(9))

    ff = circle_pattern(2.0, values)
    dec = rellich.decompose_far_field(ff)
    assert abs(dec.parseval_total() - ff.l2_norm() ** 2) < 1e-6


def test_decomposition_aliasing_guard():
    ff = circle_pattern(2.0, lambda th: np.exp(1j * th), n=64)
    with pytest.raises(rellich.RellichError):
        rellich.decompose_far_field(ff, J=40)


def test_parseval_3d():
    from scipy.special import sph_harm_y
    dirs = default_directions(3, 1600)
    th = np.arccos(np.clip(dirs[:, 2], -1, 1))
    ph = np.arctan2(dirs[:, 1], dirs[:, 0])
    vals = (0.7 * sph_harm_y(0, 0, th, ph)
            + (0.3 - 0.4j) * sph_harm_y(2, 1, th, ph))
    ff = FarFieldPattern(dirs, vals, 2.0)
    dec = rellich.decompose_far_field(ff, J=3)
    assert abs(dec.b[0] - 0.7) < 2e-2
    assert abs(dec.b[2] - abs(0.3 - 0.4j)) < 2e-2
    assert dec.b[1] < 2e-2 and dec.b[3] < 2e-2


def test_sphere_norm_matches_outgoing_series():
    # w = sum_j a_j H_j(kr) e^{ij theta} has far field
    # sqrt(2/(pi k)) e^{-i pi/4} sum_j a_j (-i)^j e^{ij theta} and
    # ||w||^2 on S_r equal to 2 pi r sum_j |a_j|^2 |H_j(kr)|^2
    k = 2.0
    a = {0: 0.5 + 0.2j, 1: -0.3j, 3: 0.1}
    gamma = np.sqrt(2 / (np.pi * k)) * np.exp(-1j * np.pi / 4)

    def ff_vals(th):
        return gamma * sum(aj * (-1j) ** j * np.exp(1j * j * th)
                           for j, aj in a.items())

    ff = circle_pattern(k, ff_vals)
    dec = rellich.decompose_far_field(ff, J=6)
    for r in (3.0, 7.0, 15.0):
        exact = np.sqrt(2 * np.pi * r * sum(
            abs(aj) ** 2 * abs(hankel1(j, k * r)) ** 2
            for j, aj in a.items()))
        got = rellich.sphere_norm_from_decomposition(dec, r)
        assert abs(got - exact) < 1e-8 * exact


# ---------------------------------------------------------------------------
# Far field to near field
# ---------------------------------------------------------------------------

def test_ff2nf_worked_example_saturated():
    # k = R = 1, B0 = 2, S = 1, eps = 1e-8: l ~ 10.007, nu0 = 5, and
    # 5 < e B0 k R ~ 5.44 keeps the bound in the saturated regime
    nf = rellich.ff2nf_bound(1e-8, 1.0, 1.0, 1.0, 2.0)
    assert abs(nf.ell - np.sqrt(2 * np.e * np.log(1e8))) < 1e-12
    assert abs(nf.ell - 10.007) < 5e-3
    assert nf.nu0 == 5.0
    assert nf.regime == "saturated"
    assert nf.bound >= 1e-8  # saturates proportionally to epsilon


def test_ff2nf_decay_regime():
    nf = rellich.ff2nf_bound(1e-11, 1.0, 1.0, 1.0, 2.0)
    assert nf.regime == "decay"
    assert nf.nu0 >= np.e * 2.0
    # bound = const * S * B0^(-l/2), checked from the reported pieces
    expect = nf.constant * 2.0 ** (-nf.ell / 2)
    assert abs(nf.bound - expect) < 1e-12 * expect
    assert abs(nf.log_bound - np.log(nf.bound)) < 1e-9


def test_ff2nf_monotone_in_epsilon_and_B0():
    eps = 10.0 ** -np.arange(8, 30, 3)
    bounds = [rellich.ff2nf_bound(e, 1.0, 1.0, 1.0, 2.0).bound for e in eps]
    assert np.all(np.diff(bounds) <= 1e-15)
    b_small = rellich.ff2nf_bound(1e-60, 1.0, 1.0, 1.0, 2.0)
    b_large = rellich.ff2nf_bound(1e-60, 1.0, 1.0, 1.0, 4.0)
    assert b_large.regime == b_small.regime == "decay"
    assert b_large.log_bound < b_small.log_bound


def test_ff2nf_symbolic_log_ratio():
    # epsilon = S e^{-e^{100}} cannot be represented; log_ratio can
    nf = rellich.ff2nf_bound(None, 1.0, 1.0, 1.0, 2.0,
                             log_ratio=float(np.exp(100)))
    assert nf.regime == "decay"
    assert nf.bound == 0.0            # underflow clamps the literal value
    assert nf.log_bound < -1e20       # but the log form stays exact
    with pytest.raises(rellich.RellichError):
        rellich.ff2nf_bound(None, 1.0, 1.0, 1.0, 2.0)


def test_ff2nf_zero_and_validation():
    assert rellich.ff2nf_bound(0.0, 1.0, 1.0, 1.0, 2.0).bound == 0.0
    with pytest.raises(rellich.RellichError):
        rellich.ff2nf_bound(1e-3, 1.0, 1.0, 1.0, 0.5)
    with pytest.raises(rellich.RellichError):
        rellich.ff2nf_bound(-1e-3, 1.0, 1.0, 1.0, 2.0)


# ---------------------------------------------------------------------------
# Three-balls measurements and calibration
# ---------------------------------------------------------------------------

def test_three_spheres_bessel_mode():
    # J_8 mode: strong radial growth makes the norms strictly ordered
    k = 2.0

    def field(pts):
        pts = np.asarray(pts)
        r = np.linalg.norm(pts, axis=-1)
        th = np.arctan2(pts[..., 1], pts[..., 0])
        return jv(8, k * r) * np.exp(8j * th)

    res = rellich.three_spheres_check(field, np.zeros(2), 0.2,
                                      np.random.default_rng(3))
    assert not res.degenerate
    assert res.norm_r < res.norm_2r < res.norm_4r
    assert 0.0 < res.beta_star < 1.0
    # beta* makes the interpolation an identity (C = TS factor removed)
    ident = res.norm_4r ** (1 - res.beta_star) * res.norm_r ** res.beta_star
    assert abs(ident - res.norm_2r) < 1e-9 * res.norm_2r


def test_three_spheres_degenerate_constant_field():
    res = rellich.three_spheres_check(lambda pts: np.ones(len(pts)),
                                      np.zeros(2), 0.1,
                                      np.random.default_rng(0))
    assert res.degenerate and np.isnan(res.beta_star)


def test_calibrate_certifies_the_sweep():
    cal = rellich.calibrate(2.0, trials=40, seed=7)
    assert 0 < cal.c1 < 1
    assert abs(cal.c2 - cal.c1 / 4) < 1e-15
    assert cal.C >= 1.0
    lo, hi = cal.c1 / 4, 1 - 3 * cal.c1 / 4
    for res in rellich.calibration_sweep(cal.k, 2, cal.R_m, 40, cal.seed):
        if res.degenerate:
            continue
        assert lo <= res.beta_star <= hi
        assert res.lhs <= res.rhs(hi, cal.C) * (1 + 1e-12)


def test_calibration_roundtrip():
    cal = rellich.calibrate(2.0, trials=10, seed=1)
    back = rellich.Calibration.from_json(cal.to_json())
    assert back == cal
    # unknown keys in stored artifacts are ignored
    import json
    data = json.loads(cal.to_json())
    data["manifest_hash"] = "abc"
    assert rellich.Calibration.from_json(json.dumps(data)) == cal


def test_chain_constant_log_safe():
    cal = rellich.Calibration(1.0, 1.0, 10.0, 1e-6, 2.5e-7, 0, 10)
    assert np.isfinite(cal.chain_constant)
    assert cal.chain_constant >= 1.0


# ---------------------------------------------------------------------------
# Chains of balls
# ---------------------------------------------------------------------------

def small_cal():
    return rellich.Calibration(k=2.0, R_m=1.0, C=2.0, c1=0.8, c2=0.2,
                               seed=0, trials=10)


def test_propagation_path_validation():
    with pytest.raises(rellich.RellichError):
        rellich.PropagationPath(np.array([[0.0, 0.0], [1.0, 0.0]]), 0.5)
    p = rellich.PropagationPath(np.array([[0.0, 0.0], [0.4, 0.0]]), 0.5)
    assert p.K == 2


def test_propagate_chain_single_ball():
    cal = small_cal()
    field = lambda pts: 0.3 * np.ones(len(np.atleast_2d(pts)))
    path = rellich.PropagationPath(np.zeros((1, 2)), 0.1)
    res = rellich.propagate_chain(field, path, 1.0, cal)
    assert abs(res.bound - 0.3) < 1e-12
    assert res.K == 1


def test_propagate_chain_two_balls():
    cal = small_cal()
    field = lambda pts: 0.01 * np.ones(len(np.atleast_2d(pts)))
    path = rellich.PropagationPath(np.array([[0.0, 0.0], [0.1, 0.0]]), 0.1)
    res = rellich.propagate_chain(field, path, 2.0, cal)
    expect = cal.chain_constant * 2.0 * 0.01 ** cal.c2
    assert abs(res.bound - expect) < 1e-12 * expect
    assert res.measured_end <= res.bound  # the bound is honest here


def test_propagate_chain_guards():
    cal = small_cal()
    field = lambda pts: np.ones(len(np.atleast_2d(pts)))
    path = rellich.PropagationPath(np.zeros((1, 2)), 0.1)
    with pytest.raises(rellich.RellichError):
        rellich.propagate_chain(field, path, 0.5, cal)       # T < 1
    with pytest.raises(rellich.RellichError):
        rellich.propagate_chain(field,
                                rellich.PropagationPath(np.zeros((1, 2)), 0.3),
                                1.0, cal)                    # 4r >= R_m
    big = lambda pts: 2.0 * np.ones(len(np.atleast_2d(pts)))
    with pytest.raises(rellich.RellichError):
        rellich.propagate_chain(big, path, 1.0, cal)          # start norm > 1
    with pytest.raises(rellich.RellichError):
        rellich.propagate_chain(field, path, 1.0, cal,
                                clearance=lambda c: 0.1)      # too close


def test_propagate_outside_hull():
    from polyscat.geom import convex_polygon
    cal = small_cal()
    Q = convex_polygon([[-0.2, -0.2], [0.2, -0.2], [0.2, 0.2], [-0.2, 0.2]])
    field = lambda pts: 1e-6 * np.ones(len(np.atleast_2d(pts)))
    res = rellich.propagate_outside_hull(field, Q, np.array([0.9, 0.0]),
                                         r=0.1, lam=0.25, delta=1e-4,
                                         T=1.0, cal=cal, R=1.0)
    assert res.bound > 0 and np.isfinite(res.bound)
    assert res.measured_end <= res.bound
    with pytest.raises(rellich.RellichError):
        rellich.propagate_outside_hull(field, Q, np.array([0.25, 0.0]),
                                       r=0.1, lam=0.25, delta=1e-4,
                                       T=1.0, cal=cal, R=1.0)


def test_uniform_outside_hull_bound_formula():
    cal = small_cal()
    delta, r, lam, T, R = 1e-8, 0.1, 0.25, 3.0, 1.0
    got = rellich.uniform_outside_hull_bound(delta, r, lam, T, cal, R)
    expo = cal.c2 ** ((2 + lam) * R / r + 2)
    assert abs(got - cal.chain_constant * T * delta ** expo) < 1e-12 * got


# ---------------------------------------------------------------------------
# Crossing into the boundary layer
# ---------------------------------------------------------------------------

def test_crossing_independent_recomputation():
    cal = small_cal()
    alpha, A, R, T, delta = 0.5, 2.5, 1.0, 1.0, 1e-20
    res = rellich.cross_into_boundary(delta, alpha, T, A, cal, R)
    log_c2 = abs(np.log(cal.c2))
    lnln = np.log(abs(np.log(delta)))
    r_delta = A * R * log_c2 / ((1 - alpha) * lnln)
    numer = (8 * A * R * log_c2 / (1 - alpha)) ** alpha + cal.C / cal.c2 ** 2
    bound = numer / lnln ** alpha * T
    assert abs(res.r_delta - r_delta) < 1e-12 * r_delta
    assert abs(res.bound - bound) < 1e-12 * bound


def test_crossing_bound_decreases_in_smallness():
    cal = small_cal()
    deltas = [1e-10, 1e-40, 1e-160]
    bounds = [rellich.cross_into_boundary(d, 0.5, 1.0, 2.5, cal, 1.0).bound
              for d in deltas]
    assert bounds[0] > bounds[1] > bounds[2]


def test_crossing_symbolic_log_delta():
    cal = small_cal()
    res = rellich.cross_into_boundary(None, 0.5, 1.0, 2.5, cal, 1.0,
                                      log_delta=-np.exp(200))
    assert res.delta_ok
    # bound scales like (ln|ln delta|)^(-alpha)
    assert abs(res.bound * 200 ** 0.5
               - ((8 * 2.5 * abs(np.log(0.2)) / 0.5) ** 0.5
                  + cal.C / cal.c2 ** 2)) < 1e-9


def test_crossing_validation():
    cal = small_cal()
    with pytest.raises(rellich.RellichError):
        rellich.cross_into_boundary(1e-20, 1.5, 1.0, 2.5, cal, 1.0)
    with pytest.raises(rellich.RellichError):
        rellich.cross_into_boundary(1e-20, 0.5, 1.0, 1.0, cal, 1.0)
    with pytest.raises(rellich.RellichError):
        rellich.cross_into_boundary(0.999, 0.5, 1.0, 2.5, cal, 1.0)


# ---------------------------------------------------------------------------
# The full pipeline
# ---------------------------------------------------------------------------

def test_pipeline_zero_far_field():
    res = rellich.quantitative_rellich(0.0, 1.0, 2.0, 1.0, small_cal(), 1.0)
    assert res.boundary_bound == 0.0 and res.regime == "zero"


def test_pipeline_saturated_falls_back_to_T():
    res = rellich.quantitative_rellich(1e-3, 1.0, 1.0, 1.0, small_cal(), 7.0)
    assert res.regime == "saturated"
    assert res.boundary_bound == 7.0


def test_pipeline_symbolic_double_log_form():
    # for log_ratio = e^q the final bound scales like q^(-alpha)
    cal = small_cal()
    vals = []
    for q in (150.0, 450.0):
        res = rellich.quantitative_rellich(None, 1.0, 1.0, 1.0, cal, 1.0,
                                           log_ratio=float(np.exp(q)))
        assert res.regime == "decay" and res.delta_ok
        vals.append(res.boundary_bound * np.sqrt(q))
    # ln|ln delta| ~ q up to additive constants, so the scaled values agree
    assert abs(vals[0] - vals[1]) < 0.05 * vals[0]


def test_far_field_epsilon_is_l2():
    ff = circle_pattern(2.0, lambda th: np.exp(1j * th))
    assert abs(rellich.far_field_epsilon(ff) - ff.l2_norm()) < 1e-15
