"""Reference slab, deformation maps and quadrature over moving domains.

The fluid domain is the channel  {(x, z) : x in the 1-torus, 0 < z < 1 + d(x)}
for an admissible displacement d with sup|d| < kappa < 1.  All integrals over
the moving domain are computed back on the fixed reference slab: either by the
plain change of variables on the tensor grid (``integrate_moving_domain``), or
column-wise in physical z with Gauss panels split at prescribed breakpoints
(``ColumnQuadrature``), which keeps piecewise-polynomial vertical profiles
exactly integrable.
"""

from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .fields import PlateProfile

DEFAULT_KAPPA = 0.5


@lru_cache(maxsize=32)
def _gauss_unit(n):
    """Gauss-Legendre nodes/weights on (0, 1), cached."""
    zg, wg = np.polynomial.legendre.leggauss(n)
    return 0.5 * (zg + 1.0), 0.5 * wg


class GeometryError(ValueError):
    """Inadmissible deformation or mismatched geometry data."""


class ReferenceSlab:
    """Tensor quadrature grid on the unit reference slab torus x (0,1).

    x direction: equispaced nodes with trapezoid weights (spectrally exact
    for smooth periodic integrands).  z direction: Gauss-Legendre on (0,1).
    Both weight sets sum to one (unit reference measure).
    """

    def __init__(self, nx=32, nz=24):
        if nx < 4 or nz < 4:
            raise ValueError("need at least 4 nodes per direction")
        if nx % 2 != 0:
            raise ValueError("x node count must be even for spectral transforms")
        self.nx = int(nx)
        self.nz = int(nz)
        self.x_nodes = np.arange(nx) / nx
        self.x_weights = np.full(nx, 1.0 / nx)
        zg, wg = np.polynomial.legendre.leggauss(nz)
        self.z_nodes = 0.5 * (zg + 1.0)
        self.z_weights = 0.5 * wg

    def __repr__(self):
        return f"ReferenceSlab(nx={self.nx}, nz={self.nz})"


class DeformationMap:
    """Displacement/rate pair (d, d_t) defining psi(x, z) = (x, z (1 + d(x)))."""

    def __init__(self, delta, delta_t=None, kappa=DEFAULT_KAPPA):
        if delta_t is None:
            delta_t = PlateProfile.zero(delta.k_max)
        self.delta = delta
        self.delta_t = delta_t
        self.kappa = float(kappa)
        sup = delta.sup_norm()
        if sup >= self.kappa:
            raise GeometryError(
                f"inadmissible displacement: sup|delta| = {sup:.4f} >= kappa = {self.kappa}"
            )


class BoundaryJacobian:
    """Samples of J(x) = sqrt((d_x delta)^2 + 1) at the grid x nodes."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)


def push_forward_point(dmap, x, z):
    """Image of a reference point under psi(x, z) = (x, z (1 + delta(x))).

    x is interpreted mod 1; requires 0 <= z <= 1.  The bottom z = 0 is fixed
    and z = 1 lands on the deformed top boundary.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0) or np.any(z > 1.0):
        raise GeometryError("reference z must lie in [0, 1]")
    x = np.asarray(x, dtype=float) % 1.0
    return x, z * (1.0 + dmap.delta.values(x))


def integrate_moving_domain(dmap, grid, integrand):
    """Integral over the deformed domain of a field sampled in reference coords.

    ``integrand`` holds samples of f(psi(x, z)) at the tensor grid nodes,
    shape (nx, nz).  The change of variables contributes the factor 1 + delta.
    """
    f = np.asarray(integrand, dtype=float)
    if f.shape != (grid.nx, grid.nz):
        raise GeometryError(
            f"integrand shape {f.shape} does not match grid ({grid.nx}, {grid.nz})"
        )
    col = f @ grid.z_weights
    return float(grid.x_weights @ (col * (1.0 + dmap.delta.values(grid.x_nodes))))


def boundary_jacobian(delta, grid):
    """Area-element Jacobian of the deformed top boundary at the x nodes."""
    slope = delta.derivative(1).values(grid.x_nodes)
    return BoundaryJacobian(np.sqrt(slope**2 + 1.0))


class GeometryTrajectory:
    """Time-sampled prescribed geometry on a uniform grid over [0, T].

    Holds one PlateProfile per node plus rate profiles.  Evaluation between
    nodes goes through a C^2 cubic spline of the coefficient channels; the
    rate returned by :meth:`at_time` is the exact derivative of that spline,
    so geometry and geometry-rate are mutually consistent during integration.
    """

    def __init__(self, times, profiles, dprofiles=None):
        self.times = np.asarray(times, dtype=float)
        nt = len(self.times)
        if nt < 2:
            raise GeometryError("need at least two time samples")
        dts = np.diff(self.times)
        if not np.allclose(dts, dts[0], rtol=1e-12, atol=1e-14):
            raise GeometryError("time grid must be uniform")
        if len(profiles) != nt:
            raise GeometryError("profile count does not match time grid")
        self.profiles = list(profiles)
        self.k_max = max(p.k_max for p in self.profiles)
        self.profiles = [p.padded(self.k_max) for p in self.profiles]
        if dprofiles is not None:
            if len(dprofiles) != nt:
                raise GeometryError("rate profile count does not match time grid")
            self.dprofiles = [p.padded(self.k_max) for p in dprofiles]
        else:
            self.dprofiles = None
        self._spline = None

    @property
    def T(self):
        return float(self.times[-1])

    def channel_matrix(self):
        """Stacked coefficients, shape (nt, 1 + 2*k_max): mean then pairs."""
        rows = [np.concatenate([[p.mean], p.coefficients]) for p in self.profiles]
        return np.array(rows)

    @classmethod
    def from_channel_matrix(cls, times, mat, k_max, dmat=None):
        def unpack(row):
            return PlateProfile(row[0], row[1:].reshape(k_max, 2))

        profiles = [unpack(r) for r in mat]
        dprofiles = [unpack(r) for r in dmat] if dmat is not None else None
        return cls(times, profiles, dprofiles)

    def spline(self):
        if self._spline is None:
            mat = self.channel_matrix()
            periodic = np.max(np.abs(mat[0] - mat[-1])) <= 1e-12 * max(
                1.0, np.max(np.abs(mat))
            )
            if periodic:
                mat = mat.copy()
                mat[-1] = mat[0]
                self._spline = CubicSpline(self.times, mat, bc_type="periodic")
            else:
                self._spline = CubicSpline(self.times, mat)
        return self._spline

    def at_time(self, t):
        """(delta, delta_t) profiles at an arbitrary time inside [0, T]."""
        sp = self.spline()
        row = sp(t)
        drow = sp(t, 1)
        kk = self.k_max
        delta = PlateProfile(row[0], row[1:].reshape(kk, 2))
        delta_t = PlateProfile(drow[0], drow[1:].reshape(kk, 2))
        return delta, delta_t

    def rate_at_node(self, i):
        if self.dprofiles is not None:
            return self.dprofiles[i]
        return self.at_time(self.times[i])[1]

    def sup_norm(self):
        return max(p.sup_norm() for p in self.profiles)


def reynolds_transport_check(delta_path, g, t, dt, grid):
    """Two independent evaluations of d/dt of the moving-domain integral of g.

    Returns ``(lhs, rhs)`` where lhs is the central finite difference of
    t -> integral of g over the deformed domain and rhs the transport
    identity: integral of dg/dt plus the boundary flux through the moving
    top.  ``g`` provides ``g.value(t, x, z)`` and ``g.dt(t, x, z)`` on
    physical coordinates.
    """
    times = delta_path.times
    if t - dt < times[0] - 1e-12 or t + dt > times[-1] + 1e-12:
        raise GeometryError("t and t +/- dt must lie inside the trajectory interval")

    x = grid.x_nodes
    zh = grid.z_nodes

    def domain_integral(tt):
        delta, _ = delta_path.at_time(tt)
        dv = delta.values(x)
        zz = np.outer(1.0 + dv, zh)
        vals = g.value(tt, x[:, None], zz)
        return float(grid.x_weights @ ((vals @ grid.z_weights) * (1.0 + dv)))

    lhs = (domain_integral(t + dt) - domain_integral(t - dt)) / (2.0 * dt)

    delta, delta_t = delta_path.at_time(t)
    dv = delta.values(x)
    dtv = delta_t.values(x)
    zz = np.outer(1.0 + dv, zh)
    bulk = float(grid.x_weights @ ((g.dt(t, x[:, None], zz) @ grid.z_weights) * (1.0 + dv)))
    # top boundary flux: velocity (0, d_t delta), nu dA = (-delta', 1) dx
    flux = float(grid.x_weights @ (g.value(t, x, 1.0 + dv) * dtv))
    return lhs, bulk + flux


class ColumnQuadrature:
    """Per-column Gauss quadrature over the deformed domain in physical z.

    For each x node the vertical integral is split into Gauss panels with cuts
    at ``breaks`` (below the lowest admissible top) and a final panel ending
    at the local height 1 + delta(x).  Fields built from piecewise-polynomial
    vertical profiles with the same breakpoints are integrated exactly.
    """

    def __init__(self, grid, delta, breaks=(), panel_nodes=24, kappa=DEFAULT_KAPPA):
        x = grid.x_nodes
        heights = 1.0 + delta.values(x)
        if np.any(heights <= max(breaks, default=0.0)) or np.any(heights >= 1.0 + kappa):
            raise GeometryError("deformed height out of the admissible band")
        zg, wg = _gauss_unit(panel_nodes)
        edges = [np.full_like(x, 0.0)]
        for b in breaks:
            edges.append(np.full_like(x, float(b)))
        edges.append(heights)
        zcols, wcols = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            span = (hi - lo)[:, None]
            zcols.append(lo[:, None] + span * zg[None, :])
            wcols.append(span * wg[None, :])
        self.x = x
        self.wx = grid.x_weights
        self.z = np.concatenate(zcols, axis=1)
        self.wz = np.concatenate(wcols, axis=1)
        self.heights = heights
        self.weights = self.wx[:, None] * self.wz

    def integrate(self, f):
        """Sum of f * weights over the grid; f has trailing shape (nx, nz)."""
        return np.sum(f * self.weights, axis=(-2, -1))

    def column_integrals(self, f):
        """z-integral per column, trailing shape (nx,)."""
        return np.sum(f * self.wz, axis=-1)
