import numpy as np
import pytest
from scipy.integrate import quad

from polyscat import fields, geom, solver


def small_square_contrast(value=0.5, side=0.8):
    h = side / 2
    P = geom.convex_polygon([[-h, -h], [h, -h], [h, h], [-h, h]])
    return fields.constant_contrast(P, value)


# ---------------------------------------------------------------------------
# Kernel building blocks
# ---------------------------------------------------------------------------

def test_singular_cell_integral_2d_against_quadrature():
    k, h = 2.0, 0.05
    a = h / np.sqrt(np.pi)
    re = quad(lambda r: np.real(0.25j * solver.hankel1(0, k * r)) * 2 * np.pi * r,
              0, a)[0]
    im = quad(lambda r: np.imag(0.25j * solver.hankel1(0, k * r)) * 2 * np.pi * r,
              0, a)[0]
    got = solver.singular_cell_integral(k, h, 2)
    assert abs(got - (re + 1j * im)) < 1e-10


def test_singular_cell_integral_3d_against_quadrature():
    k, h = 1.5, 0.05
    a = h * (3.0 / (4 * np.pi)) ** (1 / 3)
    re = quad(lambda r: np.cos(k * r) * r, 0, a)[0]
    im = quad(lambda r: np.sin(k * r) * r, 0, a)[0]
    got = solver.singular_cell_integral(k, h, 3)
    assert abs(got - (re + 1j * im)) < 1e-12


def test_green_convolution_matches_direct_sum():
    k = 2.0
    g = fields.centered_grid(0.5, 12, dim=2)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    conv = solver.GreenConvolution(g, k)
    got = conv.apply(x)
    pts = g.points().reshape(-1, 2)
    diff = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    kernel = np.zeros(diff.shape, dtype=complex)
    nz = diff > 0
    kernel[nz] = solver.fundamental_solution(k, diff[nz], 2) * g.cell_volume
    kernel[~nz] = solver.singular_cell_integral(k, g.spacing, 2)
    direct = (kernel @ x.ravel()).reshape(g.shape)
    assert np.max(np.abs(got - direct)) < 1e-10 * np.max(np.abs(direct))


def test_default_directions_unit_and_uniform():
    for dim, n in ((2, 64), (3, 200)):
        d = solver.default_directions(dim, n)
        assert d.shape == (n, dim)
        np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12)
    d2 = solver.default_directions(2, 4)
    np.testing.assert_allclose(d2[1], [0.0, 1.0], atol=1e-12)


# ---------------------------------------------------------------------------
# The forward solve
# ---------------------------------------------------------------------------

def test_zero_contrast_gives_zero_scattering():
    V = small_square_contrast(0.0)
    g = fields.centered_grid(1.0, 48, dim=2)
    sol = solver.solve_forward(V, 2.0, [1.0, 0.0], g)
    assert np.max(np.abs(sol.scattered.values)) < 1e-10
    assert sol.far_field.l2_norm() < 1e-10


def test_support_must_stay_interior():
    h = 1.0
    P = geom.convex_polygon([[-h, -h], [h, -h], [h, h], [-h, h]])
    V = fields.constant_contrast(P, 0.5)
    g = fields.centered_grid(1.0, 32, dim=2)
    with pytest.raises(solver.SolverError):
        solver.solve_forward(V, 2.0, [1.0, 0.0], g)


def test_born_regime_agreement():
    # for small contrast the relative gap to the Born far field is O(||V||)
    k = 2.0
    eps = 0.02
    V = small_square_contrast(eps)
    g = fields.centered_grid(1.0, 96, dim=2)
    sol = solver.solve_forward(V, k, [1.0, 0.0], g)
    born = solver.born_far_field(V, k, [1.0, 0.0], g, sol.far_field.directions)
    rel = (np.max(np.abs(sol.far_field.values - born.values))
           / np.max(np.abs(born.values)))
    assert rel <= 5 * eps


def test_born_quadrature_cross_check():
    from oracles import born_far_field_quadrature
    k = 2.0
    V = small_square_contrast(0.3)
    g = fields.centered_grid(1.0, 48, dim=2)
    dirs = solver.default_directions(2, 16)
    ours = solver.born_far_field(V, k, [0.0, 1.0], g, dirs)
    ref = born_far_field_quadrature(V.evaluate(g), g, k, [0.0, 1.0], dirs)
    assert np.max(np.abs(ours.values - ref)) < 1e-10 * np.max(np.abs(ref))


def test_disc_far_field_against_mode_matching():
    from oracles import DiscContrast, mie_far_field
    k, a, phi = 2.0, 0.5, 0.8
    g = fields.centered_grid(1.0, 256, dim=2)
    V = DiscContrast(a, phi)
    sol = solver.solve_forward(V, k, [1.0, 0.0], g, n_directions=128)
    th = np.arctan2(sol.far_field.directions[:, 1], sol.far_field.directions[:, 0])
    ref = mie_far_field(k, a, phi, th)
    rel = np.linalg.norm(sol.far_field.values - ref) / np.linalg.norm(ref)
    assert rel < 0.01


def test_scattered_matches_mode_matching_off_grid():
    from oracles import DiscContrast, mie_scattered_field
    k, a, phi = 2.0, 0.5, 0.8
    g = fields.centered_grid(1.0, 256, dim=2)
    sol = solver.solve_forward(DiscContrast(a, phi), k, [1.0, 0.0], g)
    th = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    pts = 1.8 * np.stack([np.cos(th), np.sin(th)], axis=1)
    got = solver.scattered_at_points(sol, pts)
    ref = mie_scattered_field(k, a, phi, pts)
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 0.01


def test_far_field_consistent_with_large_radius():
    # u^s(r xhat) ~ e^{ikr}/sqrt(r) A(xhat) in 2D
    k = 2.0
    V = small_square_contrast(0.5)
    g = fields.centered_grid(1.0, 128, dim=2)
    sol = solver.solve_forward(V, k, [1.0, 0.0], g, n_directions=32)
    r = 400.0
    pts = r * sol.far_field.directions
    us = solver.scattered_at_points(sol, pts)
    approx = us * np.sqrt(r) * np.exp(-1j * k * r)
    rel = (np.linalg.norm(approx - sol.far_field.values)
           / np.linalg.norm(sol.far_field.values))
    assert rel < 0.02


def test_scattered_radial_decay_rate():
    # |u^s| ~ r^(-1/2) in 2D: fitted log-log slope within 5%
    k = 2.0
    V = small_square_contrast(0.5)
    g = fields.centered_grid(1.0, 128, dim=2)
    sol = solver.solve_forward(V, k, [1.0, 0.0], g)
    radii = np.array([50.0, 100.0, 200.0, 400.0, 800.0])
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    circ = np.stack([np.cos(th), np.sin(th)], axis=1)
    amps = []
    for r in radii:
        vals = solver.scattered_at_points(sol, r * circ)
        amps.append(np.sqrt(np.mean(np.abs(vals) ** 2)))
    slope = np.polyfit(np.log(radii), np.log(amps), 1)[0]
    assert abs(slope + 0.5) < 0.05 * 0.5


def test_reciprocity():
    # A(xhat; omega) = A(-omega; -xhat)
    k = 2.0
    P = geom.convex_polygon([[-0.4, -0.3], [0.45, -0.35], [0.3, 0.4]])
    V = fields.constant_contrast(P, 0.6)
    g = fields.centered_grid(1.0, 128, dim=2)
    omega = np.array([1.0, 0.0])
    xhat = np.array([np.cos(2.1), np.sin(2.1)])
    s1 = solver.solve_forward(V, k, omega, g)
    s2 = solver.solve_forward(V, k, -xhat, g)
    Vv = V.evaluate(g)
    a1 = solver.far_field_from_volume(Vv, s1.total, k, xhat[None]).values[0]
    a2 = solver.far_field_from_volume(Vv, s2.total, k, -omega[None]).values[0]
    assert abs(a1 - a2) < 1e-3 * abs(a1)


def test_optical_theorem_2d():
    # real contrast conserves energy:
    # int |A|^2 dtheta = sqrt(8 pi / k) Im(e^{-i pi/4} A(omega))
    k = 2.0
    V = small_square_contrast(0.5)
    g = fields.centered_grid(1.0, 192, dim=2)
    sol = solver.solve_forward(V, k, [1.0, 0.0], g, n_directions=256)
    sigma = sol.far_field.l2_norm() ** 2
    Vv = V.evaluate(g)
    fwd = solver.far_field_from_volume(Vv, sol.total, k,
                                       np.array([[1.0, 0.0]])).values[0]
    rhs = np.sqrt(8 * np.pi / k) * np.imag(np.exp(-1j * np.pi / 4) * fwd)
    assert abs(sigma - rhs) < 0.05 * sigma


def test_min_total_outside_positive():
    V = small_square_contrast(0.5)
    g = fields.centered_grid(1.0, 96, dim=2)
    sol = solver.solve_forward(V, 2.0, [1.0, 0.0], g)
    assert sol.min_total_outside(0.9) > 0.1


def test_annulus_near_field_guard():
    V = small_square_contrast(0.5)
    g = fields.centered_grid(1.0, 96, dim=2)
    sol = solver.solve_forward(V, 2.0, [1.0, 0.0], g)
    with pytest.raises(solver.SolverError):
        solver.near_field_on_annulus(sol, 0.2, 0.5)
    sampled, w = solver.near_field_on_annulus(sol, 1.2, 1.6, n_radial=8,
                                              n_angular=64)
    assert sampled.l2_norm(1.0) > 0
    assert len(w) == len(sampled.points)


def test_solver_3d_born_regime():
    k = 1.5
    eps = 0.05
    P = geom.cuboid([0, 0, 0], [0.3, 0.3, 0.3])
    V = fields.constant_contrast(P, eps)
    g = fields.centered_grid(0.8, 40, dim=3)
    sol = solver.solve_forward(V, k, [0.0, 0.0, 1.0], g, n_directions=64)
    born = solver.born_far_field(V, k, [0.0, 0.0, 1.0], g,
                                 sol.far_field.directions)
    rel = (np.max(np.abs(sol.far_field.values - born.values))
           / np.max(np.abs(born.values)))
    assert rel <= 5 * eps
