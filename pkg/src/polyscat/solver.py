"""Forward scattering solver via the Lippmann-Schwinger integral equation.

The total field solves u = u^i + k^2 Phi_k * (V u) with the outgoing
fundamental solution Phi_k (2D: (i/4) H_0^(1)(k|x|), 3D: e^(ik|x|)/(4 pi |x|)).
The volume convolution is applied with FFTs on a zero-padded grid; the
singular cell is replaced by the analytic average of Phi_k over an
equal-measure disc/ball, and the linear system is solved with restarted
GMRES.  The radiation condition is exact by construction of the kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres
from scipy.special import hankel1

from .fields import (Annulus, ContrastField, FieldError, Grid, WaveField,
                     plane_wave, polytope_mask, region_mask)

GMRES_RESTART = 50
GMRES_MAXITER = 2000


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Fundamental solution and far-field constants
# ---------------------------------------------------------------------------

def fundamental_solution(k: float, r: np.ndarray, dim: int) -> np.ndarray:
    """Outgoing fundamental solution Phi_k(r) for r > 0."""
    r = np.asarray(r, dtype=float)
    if dim == 2:
        return 0.25j * hankel1(0, k * r)
    return np.exp(1j * k * r) / (4 * np.pi * r)


def singular_cell_integral(k: float, h: float, dim: int) -> complex:
    """Analytic integral of Phi_k over an equal-measure disc/ball replacing
    the singular cell of an h-cube."""
    if dim == 2:
        a = h / np.sqrt(np.pi)
        return complex(0.5j * np.pi * a / k * hankel1(1, k * a) - 1.0 / k ** 2)
    a = h * (3.0 / (4 * np.pi)) ** (1.0 / 3.0)
    return complex((np.exp(1j * k * a) * (1j * k * a - 1) + 1) / (-k ** 2))


def far_field_constant(k: float, dim: int) -> complex:
    """gamma_n from Phi_k's large-radius factor e^(ikr)/r^((n-1)/2)."""
    if dim == 2:
        return np.exp(1j * np.pi / 4) / np.sqrt(8 * np.pi * k)
    return 1.0 / (4 * np.pi)


# ---------------------------------------------------------------------------
# FFT convolution with the outgoing kernel
# ---------------------------------------------------------------------------

class GreenConvolution:
    """Circulant embedding of x -> (Phi_k * x) h^n on a uniform grid."""

    def __init__(self, grid: Grid, k: float):
        self.grid = grid
        self.k = k
        shape = grid.shape
        h = grid.spacing
        pad = tuple(2 * s for s in shape)
        offsets = np.meshgrid(
            *[np.where(np.arange(2 * s) < s, np.arange(2 * s),
                       np.arange(2 * s) - 2 * s) * h for s in shape],
            indexing="ij")
        r = np.sqrt(sum(o ** 2 for o in offsets))
        kernel = np.zeros(pad, dtype=complex)
        nz = r > 0
        kernel[nz] = fundamental_solution(k, r[nz], grid.dim) * grid.cell_volume
        kernel[(0,) * grid.dim] = singular_cell_integral(k, h, grid.dim)
        self._kernel_hat = np.fft.fftn(kernel)
        self._pad = pad

    def apply(self, x: np.ndarray) -> np.ndarray:
        g = self.grid
        buf = np.zeros(self._pad, dtype=complex)
        buf[tuple(slice(0, s) for s in g.shape)] = x
        out = np.fft.ifftn(np.fft.fftn(buf) * self._kernel_hat)
        return out[tuple(slice(0, s) for s in g.shape)]


# ---------------------------------------------------------------------------
# Far-field patterns
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FarFieldPattern:
    directions: np.ndarray  # (N, dim) unit vectors, uniform sampling
    values: np.ndarray      # complex, (N,)
    k: float

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "values", v)
        if not np.all(np.isfinite(v.view(float))):
            raise FieldError("far-field values must be finite")

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def quad_weight(self) -> float:
        n = len(self.directions)
        return (2 * np.pi / n) if self.dim == 2 else (4 * np.pi / n)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.quad_weight))


def default_directions(dim: int, n: int) -> np.ndarray:
    """Uniform unit directions: equispaced angles (2D), Fibonacci sphere (3D)."""
    if dim == 2:
        th = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    i = np.arange(n) + 0.5
    phi = np.pi * (1 + np.sqrt(5.0)) * i
    z = 1 - 2 * i / n
    rho = np.sqrt(1 - z ** 2)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def far_field_from_volume(Vvals: np.ndarray, u: WaveField, k: float,
                          directions: np.ndarray) -> FarFieldPattern:
    """A(theta) = gamma_n k^2 int e^(-ik theta.y) V(y) u(y) dy by midpoint
    quadrature over the grid."""
    g = u.grid
    src = Vvals * u.values
    nz = src != 0
    pts = g.points()[nz]
    amp = src[nz]
    gamma = far_field_constant(k, g.dim)
    phases = np.exp(-1j * k * (directions @ pts.T))
    vals = gamma * k ** 2 * (phases @ amp) * g.cell_volume
    return FarFieldPattern(directions, vals, k)


# ---------------------------------------------------------------------------
# The forward solve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScatteringSolution:
    contrast: ContrastField
    incident: WaveField
    total: WaveField
    scattered: WaveField
    far_field: FarFieldPattern
    iterations: int
    residual: float
    omega: np.ndarray

    def min_total_outside(self, R: float) -> float:
        """inf |u| over B_R minus the scatterer (non-vanishing wave check)."""
        g = self.total.grid
        pts = g.points()
        inside_ball = np.linalg.norm(pts, axis=-1) <= R
        inside_p = polytope_mask(self.contrast.polytope, pts)
        mask = inside_ball & ~inside_p
        if not np.any(mask):
            raise SolverError("no grid points in B_R outside the scatterer")
        return float(np.min(np.abs(self.total.values[mask])))


def solve_forward(V: ContrastField, k: float, omega, grid: Grid,
                  tol: float = 1e-8, n_directions: int = 256,
                  maxiter: int = GMRES_MAXITER) -> ScatteringSolution:
    """Solve u = u^i + k^2 Phi_k * (V u) by GMRES and compute the far field."""
    omega = np.asarray(omega, dtype=float)
    Vvals = V.evaluate(grid)
    if _support_touches_boundary(Vvals):
        raise SolverError("potential support escapes the grid interior")
    ui = plane_wave(k, omega, grid)
    conv = GreenConvolution(grid, k)
    shape = grid.shape
    n = grid.n_points

    def matvec(x):
        u = x.reshape(shape)
        return (u - k ** 2 * conv.apply(Vvals * u)).ravel()

    op = LinearOperator((n, n), matvec=matvec, dtype=complex)
    counter = {"n": 0}

    def cb(_):
        counter["n"] += 1

    sol, info = gmres(op, ui.values.ravel(), rtol=tol, atol=0.0,
                      restart=GMRES_RESTART, maxiter=maxiter, callback=cb,
                      callback_type="pr_norm")
    u = sol.reshape(shape)
    res = float(np.linalg.norm(matvec(sol) - ui.values.ravel())
                / np.linalg.norm(ui.values))
    if info != 0:
        raise SolverError(f"GMRES did not converge (info={info}, "
                          f"residual={res:.3e})")
    total = WaveField(grid, u, k, role="total")
    scattered = WaveField(grid, u - ui.values, k, role="scattered")
    dirs = default_directions(grid.dim, n_directions)
    ff = far_field_from_volume(Vvals, total, k, dirs)
    return ScatteringSolution(V, ui, total, scattered, ff,
                              counter["n"], res, omega)


def _support_touches_boundary(Vvals: np.ndarray) -> bool:
    if not np.any(Vvals != 0):
        return False
    for ax in range(Vvals.ndim):
        first = np.take(Vvals, 0, axis=ax)
        last = np.take(Vvals, -1, axis=ax)
        if np.any(first != 0) or np.any(last != 0):
            return True
    return False


# ---------------------------------------------------------------------------
# Scattered-field evaluation away from the grid (volume potential)
# ---------------------------------------------------------------------------

def scattered_at_points(sol: ScatteringSolution, points: np.ndarray,
                        chunk: int = 4096) -> np.ndarray:
    """u^s(x) = k^2 sum_y Phi_k(x-y) V(y) u(y) h^n at arbitrary exterior
    points (valid wherever V vanishes)."""
    g = sol.total.grid
    k = sol.total.k
    Vvals = sol.contrast.evaluate(g)
    src = (Vvals * sol.total.values)
    nz = src != 0
    ys = g.points()[nz]
    amps = src[nz] * g.cell_volume * k ** 2
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(points), dtype=complex)
    for start in range(0, len(points), chunk):
        p = points[start:start + chunk]
        r = np.linalg.norm(p[:, None, :] - ys[None, :, :], axis=-1)
        if np.any(r == 0):
            raise SolverError("evaluation point inside the support")
        out[start:start + chunk] = fundamental_solution(k, r, g.dim) @ amps
    return out


@dataclass(frozen=True)
class SampledField:
    points: np.ndarray
    values: np.ndarray
    k: float

    def l2_norm(self, weight: float) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * weight))

    def linf_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def annulus_sampling(r1: float, r2: float, dim: int, n_radial: int = 24,
                     n_angular: int = 128) -> tuple[np.ndarray, float]:
    """Midpoint polar/spherical sampling of an origin-centred annulus;
    returns (points, quadrature weight per point)."""
    radii = r1 + (r2 - r1) * (np.arange(n_radial) + 0.5) / n_radial
    dr = (r2 - r1) / n_radial
    if dim == 2:
        th = 2 * np.pi * np.arange(n_angular) / n_angular
        circ = np.stack([np.cos(th), np.sin(th)], axis=1)
        pts = (radii[:, None, None] * circ[None, :, :]).reshape(-1, 2)
        w = np.repeat(radii, n_angular) * dr * (2 * np.pi / n_angular)
    else:
        sph = default_directions(3, n_angular)
        pts = (radii[:, None, None] * sph[None, :, :]).reshape(-1, 3)
        w = np.repeat(radii ** 2, n_angular) * dr * (4 * np.pi / n_angular)
    return pts, w


def near_field_on_annulus(sol: ScatteringSolution, r1: float, r2: float,
                          n_radial: int = 24,
                          n_angular: int = 128) -> tuple[SampledField, np.ndarray]:
    """Scattered wave sampled on the annulus r1 <= |x| <= r2 via the volume
    potential.  Returns the sampled field and per-point quadrature weights."""
    P = sol.contrast.polytope
    if np.max(np.linalg.norm(P.vertices, axis=1)) >= r1:
        raise SolverError("annulus intersects the potential support")
    pts, w = annulus_sampling(r1, r2, P.dim, n_radial, n_angular)
    vals = scattered_at_points(sol, pts)
    return SampledField(pts, vals, sol.total.k), w


def born_far_field(V: ContrastField, k: float, omega, grid: Grid,
                   directions: np.ndarray) -> FarFieldPattern:
    """Born approximation: the far-field quadrature with u replaced by u^i."""
    ui = plane_wave(k, np.asarray(omega, dtype=float), grid)
    return far_field_from_volume(V.evaluate(grid), ui, k, directions)
