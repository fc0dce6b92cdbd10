"""Implicit-midpoint integration of the second-order Galerkin system.

The first-order form is b' = beta,  M(t) beta' = L(t) - (N + A + C)(t) beta
- conv_t(beta) - K'(b).  One midpoint step solves the stage equation

    S s = M beta_i + (dt/2) (L - D_lin b_i) - (dt/2) [conv(s) + K_cub(b_mid)]

with S = M + (dt/2)(N + A + C) + (dt^2/4) D_lin factorized once per step
(D_lin is the diagonal linear bending operator, the stiff part that makes
an explicit scheme hopeless for higher wavenumbers), and a damped Picard
iteration over the quadratic/cubic remainder.  The converged stage gives
b_{i+1} = b_i + dt s and beta_{i+1} = 2 s - beta_i.
"""

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import plate as plate_ops
from .assembly import AssemblyOptions, assemble, energy_from_parts, eta_profile


class StepConvergenceError(RuntimeError):
    """Inner stage iteration failed; carries the last residual."""

    def __init__(self, t, residual, iterations):
        super().__init__(
            f"midpoint stage did not converge at t = {t:.6g}: "
            f"residual {residual:.3e} after {iterations} iterations"
        )
        self.t = t
        self.residual = residual
        self.iterations = iterations


class EnergyBlowupError(RuntimeError):
    """Discrete energy exceeded the configured ceiling."""

    def __init__(self, t, energy, ceiling):
        super().__init__(
            f"energy blow-up: E({t:.6g}) = {energy:.3e} exceeds ceiling {ceiling:.3e}"
        )
        self.t = t
        self.energy = energy
        self.ceiling = ceiling


class CoefficientTrajectory:
    """Galerkin coefficients b(t_i) and rates b'(t_i) on a uniform grid."""

    def __init__(self, times, values, derivatives):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.derivatives = np.asarray(derivatives, dtype=float)
        nt = len(self.times)
        if nt < 2:
            raise ValueError("need at least two time nodes")
        dts = np.diff(self.times)
        if not np.allclose(dts, dts[0], rtol=1e-12, atol=1e-14):
            raise ValueError("trajectory time grid must be uniform")
        if self.values.shape[0] != nt or self.derivatives.shape != self.values.shape:
            raise ValueError("values/derivatives shapes do not match the time grid")

    @property
    def n(self):
        return self.values.shape[1]

    @property
    def T(self):
        return float(self.times[-1])

    @classmethod
    def zero(cls, T, nt, n):
        times = np.linspace(0.0, T, nt + 1)
        return cls(times, np.zeros((nt + 1, n)), np.zeros((nt + 1, n)))

    def c1_norm(self):
        """sup over nodes/channels of |values| plus same for |derivatives|."""
        return float(np.max(np.abs(self.values)) + np.max(np.abs(self.derivatives)))

    def c1_distance(self, other):
        dv = np.max(np.abs(self.values - other.values))
        dd = np.max(np.abs(self.derivatives - other.derivatives))
        return float(dv + dd)

    def copy(self):
        return CoefficientTrajectory(
            self.times.copy(), self.values.copy(), self.derivatives.copy()
        )

    def blend(self, other, weight):
        """(1 - weight) * self + weight * other."""
        return CoefficientTrajectory(
            self.times.copy(),
            (1.0 - weight) * self.values + weight * other.values,
            (1.0 - weight) * self.derivatives + weight * other.derivatives,
        )


class EnergySeries:
    """Per-node and per-interval records of one integration run."""

    def __init__(self, times):
        self.times = np.asarray(times, dtype=float)
        nt = len(self.times) - 1
        self.energy = np.zeros(nt + 1)
        self.dissipation = np.zeros(nt + 1)      # beta^T A beta at nodes
        self.power = np.zeros(nt + 1)            # beta^T load at nodes
        self.fluid_l2 = np.zeros(nt + 1)         # int |u|^2 at nodes
        self.plate_rate_l2 = np.zeros(nt + 1)    # int |d_t eta|^2 at nodes
        self.mean_eta = np.zeros(nt + 1)
        self.sup_eta = np.zeros(nt + 1)
        self.dissipation_mid = np.zeros(nt)      # stage values, midpoints
        self.power_mid = np.zeros(nt)
        self.residual = np.zeros(nt)             # energy balance per interval

    def fill_residuals(self):
        dt = self.times[1] - self.times[0]
        self.residual = (np.diff(self.energy) / dt
                         + self.dissipation_mid - self.power_mid)

    def max_energy(self):
        return float(np.max(self.energy))


class DecoupledSystem:
    """Galerkin system on a prescribed geometry trajectory.

    Bundles the basis, the geometry spline, the forcing and the assembly
    options; :meth:`assemble_at` produces the operators at any time inside
    the period, with geometry and geometry-rate taken consistently from one
    spline.
    """

    def __init__(self, basis, geometry, forcing, grid, options=None,
                 mean_profile=None):
        self.basis = basis
        self.geometry = geometry
        self.forcing = forcing
        self.grid = grid
        self.options = options if options is not None else AssemblyOptions()
        self.mean_profile = mean_profile

    def delta_at(self, t):
        return self.geometry.at_time(t)

    def assemble_at(self, t, need_motion=True):
        delta, delta_t = self.delta_at(t)
        return assemble(self.basis, delta, delta_t, self.forcing, t, self.grid,
                        options=self.options, mean_profile=self.mean_profile,
                        need_motion=need_motion)

    def linear_bending_diag(self):
        n = self.basis.n
        diag = np.zeros(n)
        stiff = plate_ops.bending_stiffness(
            self.basis.plate_k_max, bending=self.options.bending
        )
        diag[self.basis.plate_slots()] = stiff[: self.basis.n_plate]
        return diag

    def cubic_plate_force(self, b):
        """Membrane (cubic) part of the plate force for the state b."""
        eta = eta_profile(self.basis, b, self.mean_profile)
        force = plate_ops.membrane_force(
            eta, self.grid, membrane=self.options.membrane
        )
        out = np.zeros(self.basis.n)
        out[self.basis.plate_slots()] = force[: self.basis.n_plate]
        return out


def step(system, state, t, dt, inner_tol=1e-12, inner_max=50, inner_damping=1.0):
    """One implicit-midpoint step from t to t + dt.

    Returns ``(b_new, beta_new, stage, mid_system)`` where ``stage`` is the
    converged midpoint velocity (used for balance bookkeeping).
    """
    b, beta = state
    t_mid = t + 0.5 * dt
    sysm = system.assemble_at(t_mid)
    dlin = system.linear_bending_diag()

    smat = (sysm.mass
            + 0.5 * dt * (sysm.basis_motion + sysm.viscous + sysm.coupling)
            + 0.25 * dt * dt * np.diag(dlin))
    try:
        lu = lu_factor(smat)
    except Exception as exc:  # singular stage matrix: fatal diagnostic
        raise RuntimeError(f"stage matrix factorization failed at t={t_mid}") from exc

    rhs0 = sysm.mass @ beta + 0.5 * dt * (sysm.load - dlin * b)
    s = beta.copy()
    residual = np.inf
    for it in range(1, inner_max + 1):
        b_mid = b + 0.5 * dt * s
        fnl = sysm.convective(s) + system.cubic_plate_force(b_mid)
        s_new = lu_solve(lu, rhs0 - 0.5 * dt * fnl)
        if inner_damping != 1.0:
            s_new = (1.0 - inner_damping) * s + inner_damping * s_new
        residual = float(np.max(np.abs(s_new - s)))
        s = s_new
        if residual <= inner_tol * max(1.0, float(np.max(np.abs(s)))):
            break
    else:
        raise StepConvergenceError(t_mid, residual, inner_max)

    b_new = b + dt * s
    beta_new = 2.0 * s - beta
    return b_new, beta_new, s, sysm


def integrate(system, initial, nt, inner_tol=1e-12, inner_max=50,
              inner_damping=1.0, energy_ceiling=1e8):
    """Integrate over one period from given initial data.

    Returns ``(trajectory, series)``; the series carries per-node energies
    and the midpoint dissipation/power records that enter the discrete
    energy balance.  Raises :class:`EnergyBlowupError` when the energy
    passes the ceiling.
    """
    b0, beta0 = initial
    basis = system.basis
    n = basis.n
    T = system.geometry.T
    times = np.linspace(0.0, T, nt + 1)
    dt = T / nt

    values = np.zeros((nt + 1, n))
    derivs = np.zeros((nt + 1, n))
    values[0] = np.asarray(b0, dtype=float)
    derivs[0] = np.asarray(beta0, dtype=float)

    series = EnergySeries(times)
    _record_node(system, series, 0, values[0], derivs[0])

    for i in range(nt):
        b_new, beta_new, stage, sysm = step(
            system, (values[i], derivs[i]), times[i], dt,
            inner_tol=inner_tol, inner_max=inner_max, inner_damping=inner_damping,
        )
        values[i + 1] = b_new
        derivs[i + 1] = beta_new
        series.dissipation_mid[i] = float(stage @ sysm.viscous @ stage)
        series.power_mid[i] = float(stage @ sysm.load)
        _record_node(system, series, i + 1, b_new, beta_new)
        if series.energy[i + 1] > energy_ceiling:
            raise EnergyBlowupError(times[i + 1], series.energy[i + 1], energy_ceiling)

    series.fill_residuals()
    return CoefficientTrajectory(times, values, derivs), series


def _record_node(system, series, i, b, beta):
    t = series.times[i]
    sysn = system.assemble_at(t, need_motion=False)
    basis = system.basis
    series.energy[i] = energy_from_parts(
        sysn, b, beta, basis, system.mean_profile, system.options
    )
    series.dissipation[i] = float(beta @ sysn.viscous @ beta)
    series.power[i] = float(beta @ sysn.load)
    series.fluid_l2[i] = float(beta @ sysn.fluid_gram @ beta)
    series.plate_rate_l2[i] = float(beta @ sysn.plate_gram @ beta)
    eta = eta_profile(basis, b, system.mean_profile)
    series.mean_eta[i] = eta.mean
    series.sup_eta[i] = eta.sup_norm()
