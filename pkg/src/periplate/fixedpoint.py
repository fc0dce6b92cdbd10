"""Periodization and the single fixed point for coupled periodic solutions.

One application of the solution map does, in order: periodize every
coefficient channel of the input trajectory (identity up to T - eps, then
the line segment joining back to the initial value, so the prescribed
channel geometry closes up exactly); truncate and regularize the resulting
geometry; integrate the decoupled system over one period starting from the
input's terminal state.  A fixed point of this map is simultaneously
coupled (the prescribed geometry equals the plate part of the solution) and
time-periodic.  The fixed point is located by damped iteration, optionally
Anderson-accelerated; non-convergence is a reported outcome, not an error.
"""

import numpy as np
from scipy.interpolate import CubicSpline

from .diagnostics import forcing_norm
from .fields import PlateProfile, profile_from_plate_coeffs
from .geometry import GeometryTrajectory
from .integrator import CoefficientTrajectory, DecoupledSystem, integrate


class PeriodizationParams:
    """Width of the closing segment, expressed in whole time-grid cells."""

    def __init__(self, cells):
        if int(cells) != cells or cells < 2:
            raise ValueError("periodization width must be an integer >= 2 cells")
        self.cells = int(cells)

    def epsilon(self, dt):
        return self.cells * dt

    @classmethod
    def from_epsilon(cls, epsilon, dt):
        cells = epsilon / dt
        if abs(cells - round(cells)) > 1e-9:
            raise ValueError(
                f"epsilon = {epsilon!r} is not aligned with the time grid (dt = {dt!r})"
            )
        return cls(int(round(cells)))


def periodize(samples, times, params):
    """Identity up to T - eps, then the line segment joining back to f(0).

    The output's endpoint values are bitwise equal; the sup norm never
    exceeds the sup over [0, T - eps]; applying the operator twice with the
    same width reproduces the first application exactly.
    """
    samples = np.asarray(samples, dtype=float)
    times = np.asarray(times, dtype=float)
    nt = len(times) - 1
    dt = times[1] - times[0]
    if isinstance(params, (int, np.integer)):
        params = PeriodizationParams(params)
    elif isinstance(params, float):
        params = PeriodizationParams.from_epsilon(params, dt)
    cells = params.cells
    if cells > nt:
        raise ValueError("periodization width exceeds the time interval")
    j = nt - cells
    out = samples.copy()
    eps = cells * dt
    slope = (samples[..., 0] - samples[..., j]) / eps
    for i in range(j + 1, nt + 1):
        out[..., i] = samples[..., j] + slope * (times[i] - times[j])
    out[..., nt] = samples[..., 0]
    return out


class FixedPointConfig:
    """Damping, stopping rule and regularization of the outer iteration."""

    def __init__(self, omega=0.5, tol=1e-9, max_iter=60, anderson=False,
                 anderson_depth=5, eps_cells=2, sigma=0.0, clamp_level=None,
                 inner_tol=1e-12, inner_max=50, inner_damping=1.0,
                 energy_ceiling=1e8):
        if not 0.0 < omega <= 1.0:
            raise ValueError("damping weight must lie in (0, 1]")
        if tol <= 0.0:
            raise ValueError("tolerance must be positive")
        self.omega = float(omega)
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.anderson = bool(anderson)
        self.anderson_depth = int(anderson_depth)
        self.eps_cells = int(eps_cells)
        self.sigma = float(sigma)
        self.clamp_level = clamp_level
        self.inner_tol = float(inner_tol)
        self.inner_max = int(inner_max)
        self.inner_damping = float(inner_damping)
        self.energy_ceiling = float(energy_ceiling)


class PeriodicProblem:
    """Discretization bundle the fixed-point machinery operates on."""

    def __init__(self, basis, grid, forcing, nt, kappa, mean=0.0, bump=None,
                 options=None):
        from .assembly import AssemblyOptions
        from .plate import BumpWeight

        self.basis = basis
        self.grid = grid
        self.forcing = forcing
        self.nt = int(nt)
        self.kappa = float(kappa)
        self.mean = float(mean)
        self.bump = bump if bump is not None else BumpWeight()
        self.options = options if options is not None else AssemblyOptions()

    @property
    def T(self):
        return self.forcing.period

    @property
    def n(self):
        return self.basis.n

    def mean_profile(self):
        if self.mean == 0.0:
            return None
        return self.mean * self.bump.psi

    def zero_trajectory(self):
        return CoefficientTrajectory.zero(self.T, self.nt, self.n)


def geometry_from_channels(problem, channel_values, times):
    """Prescribed geometry from (already periodized) coefficient channels."""
    slots = problem.basis.plate_slots()
    k_max = problem.basis.plate_k_max
    mean_profile = problem.mean_profile()
    profiles = []
    for row in channel_values:
        prof = profile_from_plate_coeffs(row[slots], k_max=k_max)
        if mean_profile is not None:
            prof = prof + mean_profile
        profiles.append(prof)
    return GeometryTrajectory(times, profiles)


def clamp_and_regularize(geometry, kappa, sigma):
    """Pointwise truncation at kappa/2 followed by space-time mollification.

    The clamp acts on physical-space samples and preserves sign; the
    mollifier damps time harmonics and x wavenumbers with the heat-kernel
    factor exp(-(2 pi k sigma)^2 / 2), which never increases the sup norm.
    Unclamped input with sigma = 0 is returned unchanged (same object).
    """
    level = 0.5 * kappa
    kk = geometry.k_max
    nxs = max(16, 4 * kk + 4)
    x = np.arange(nxs) / nxs

    needs_clamp = False
    for p in geometry.profiles:
        if np.max(np.abs(p.values(x))) > level:
            needs_clamp = True
            break
    if not needs_clamp and sigma == 0.0:
        return geometry

    profiles = geometry.profiles
    if needs_clamp:
        # alternating pointwise clamp / band projection (both convex), with a
        # final scaling so the band-limited output respects the level exactly
        clamped = []
        for p in profiles:
            q = p
            for _ in range(64):
                v = q.values(x)
                if np.max(np.abs(v)) <= level * (1.0 + 1e-12):
                    break
                v = np.sign(v) * np.minimum(np.abs(v), level)
                q = PlateProfile.from_values(v, x, kk)
            sup = q.sup_norm()
            if sup > level:
                q = q * (level / sup)
            clamped.append(q)
        profiles = clamped

    if sigma == 0.0:
        return GeometryTrajectory(geometry.times, profiles)

    mat = np.array([np.concatenate([[p.mean], p.coefficients]) for p in profiles])
    # spectral damping of x modes
    kx = np.concatenate([[0.0], np.repeat(np.arange(1, kk + 1), 2)])
    mat = mat * np.exp(-0.5 * (2.0 * np.pi * kx * sigma) ** 2)[None, :]
    # periodic-in-time mollification of the same width
    T = geometry.T
    body = mat[:-1]
    nt = body.shape[0]
    spec = np.fft.rfft(body, axis=0)
    kt = np.arange(spec.shape[0])
    spec *= np.exp(-0.5 * (2.0 * np.pi * kt * sigma / T) ** 2)[:, None]
    dspec = spec * (2j * np.pi * kt / T)[:, None]
    body = np.fft.irfft(spec, n=nt, axis=0)
    dbody = np.fft.irfft(dspec, n=nt, axis=0)
    mat = np.vstack([body, body[0]])
    dmat = np.vstack([dbody, dbody[0]])
    return GeometryTrajectory.from_channel_matrix(geometry.times, mat, kk, dmat)


def solve_decoupled(problem, a, cfg):
    """One application of the solution map: a -> b.

    Periodizes the channels of ``a``, builds and regularizes the prescribed
    geometry, then integrates the decoupled system over one period from the
    terminal state (a(T), a'(T)).  Returns (b, series, geometry).
    """
    channels = periodize(a.values.T, a.times, PeriodizationParams(cfg.eps_cells)).T
    geometry = geometry_from_channels(problem, channels, a.times)
    kappa = problem.kappa if cfg.clamp_level is None else 2.0 * cfg.clamp_level
    geometry = clamp_and_regularize(geometry, kappa, cfg.sigma)
    system = DecoupledSystem(
        problem.basis, geometry, problem.forcing, problem.grid,
        options=problem.options, mean_profile=problem.mean_profile(),
    )
    b, series = integrate(
        system, (a.values[-1].copy(), a.derivatives[-1].copy()), problem.nt,
        inner_tol=cfg.inner_tol, inner_max=cfg.inner_max,
        inner_damping=cfg.inner_damping, energy_ceiling=cfg.energy_ceiling,
    )
    return b, series, geometry


class FixedPointResult:
    """Converged (or best) trajectory together with its run artifacts."""

    def __init__(self, trajectory, geometry, series, history, converged,
                 residual, iterations, periodicity_defect, coupling_defect,
                 message=""):
        self.trajectory = trajectory
        self.geometry = geometry
        self.series = series
        self.history = history
        self.converged = converged
        self.residual = residual
        self.iterations = iterations
        self.periodicity_defect = periodicity_defect
        self.coupling_defect = coupling_defect
        self.message = message


def trajectory_defects(problem, b, geometry):
    """(periodicity, coupling) defects of a candidate solution."""
    per = (float(np.max(np.abs(b.values[0] - b.values[-1])))
           + float(np.max(np.abs(b.derivatives[0] - b.derivatives[-1]))))
    x = problem.grid.x_nodes
    slots = problem.basis.plate_slots()
    k_max = problem.basis.plate_k_max
    mean_profile = problem.mean_profile()
    coup = 0.0
    for i in range(len(b.times)):
        eta = profile_from_plate_coeffs(b.values[i][slots], k_max=k_max)
        if mean_profile is not None:
            eta = eta + mean_profile
        diff = geometry.profiles[i].padded(max(k_max, geometry.k_max)) \
            - eta.padded(max(k_max, geometry.k_max))
        coup = max(coup, float(np.max(np.abs(diff.values(x)))))
    return per, coup


class _Anderson:
    """Type-II Anderson mixing over flattened iterates."""

    def __init__(self, depth, omega):
        self.depth = depth
        self.omega = omega
        self.prev_u = None
        self.prev_r = None
        self.du = []
        self.dr = []

    def update(self, u, r):
        if self.prev_u is not None:
            self.du.append(u - self.prev_u)
            self.dr.append(r - self.prev_r)
            if len(self.du) > self.depth:
                self.du.pop(0)
                self.dr.pop(0)
        self.prev_u = u.copy()
        self.prev_r = r.copy()
        if not self.du:
            return u + self.omega * r
        DU = np.column_stack(self.du)
        DR = np.column_stack(self.dr)
        gamma, *_ = np.linalg.lstsq(DR, r, rcond=None)
        return u + self.omega * r - (DU + self.omega * DR) @ gamma


def find_fixed_point(problem, cfg, initial=None, on_iteration=None):
    """Damped iteration a <- (1 - w) a + w T(a) towards the coupled solution.

    Stops when the discrete C^1 distance between a and T(a) is at most
    cfg.tol.  On success the returned trajectory is T(a) (a genuine solution
    of the decoupled system for its own geometry); on failure the best
    iterate and its artifacts are returned with ``converged = False``.
    """
    from .integrator import EnergyBlowupError, StepConvergenceError

    a = initial.copy() if initial is not None else problem.zero_trajectory()
    history = []
    best = None
    mixer = _Anderson(cfg.anderson_depth, cfg.omega) if cfg.anderson else None
    m = problem.mean

    for it in range(cfg.max_iter + 1):
        try:
            b, series, geometry = solve_decoupled(problem, a, cfg)
        except (StepConvergenceError, EnergyBlowupError) as exc:
            if best is None:
                raise
            res, b, series, geometry = best
            per, coup = trajectory_defects(problem, b, geometry)
            return FixedPointResult(
                b, geometry, series, history, False, res, it, per, coup,
                message=f"inner solve failed at iteration {it}: {exc}",
            )
        res = a.c1_distance(b)
        e0, et = float(series.energy[0]), float(series.energy[-1])
        sup_e = series.max_energy()
        entry = {
            "iteration": it,
            "residual": res,
            "energy_start": e0,
            "energy_end": et,
            "sup_energy": sup_e,
            "ball_case": bool(et >= e0),
        }
        if et >= e0:
            c = forcing_norm(problem.forcing, geometry, problem.grid)
            denom = c**2 + c + m**2
            entry["ball_constant"] = sup_e / denom if denom > 0 else 0.0
        history.append(entry)
        if on_iteration is not None:
            on_iteration(it, a, res)

        if best is None or res < best[0]:
            best = (res, b, series, geometry)

        if res <= cfg.tol:
            per, coup = trajectory_defects(problem, b, geometry)
            return FixedPointResult(b, geometry, series, history, True, res,
                                    it, per, coup)

        if mixer is not None:
            u = np.concatenate([a.values.ravel(), a.derivatives.ravel()])
            g = np.concatenate([b.values.ravel(), b.derivatives.ravel()])
            u_new = mixer.update(u, g - u)
            half = a.values.size
            a = CoefficientTrajectory(
                a.times,
                u_new[:half].reshape(a.values.shape),
                u_new[half:].reshape(a.derivatives.shape),
            )
        else:
            a = a.blend(b, cfg.omega)

    res, b, series, geometry = best
    per, coup = trajectory_defects(problem, b, geometry)
    return FixedPointResult(
        b, geometry, series, history, False, res, cfg.max_iter, per, coup,
        message=f"no convergence within {cfg.max_iter} iterations "
                f"(best residual {res:.3e})",
    )


class LadderLevel:
    """One refinement level of the empirical convergence ladder."""

    def __init__(self, n, nt, eps_cells, sigma):
        self.n = int(n)
        self.nt = int(nt)
        self.eps_cells = int(eps_cells)
        self.sigma = float(sigma)

    def as_dict(self):
        return {"n": self.n, "nt": self.nt,
                "eps_cells": self.eps_cells, "sigma": self.sigma}


def _validate_schedule(levels):
    for prev, nxt in zip(levels[:-1], levels[1:]):
        if nxt.n < prev.n or nxt.nt < prev.nt:
            raise ValueError("ladder schedule must refine: n and Nt nondecreasing")
        if nxt.eps_cells / nxt.nt > prev.eps_cells / prev.nt + 1e-12:
            raise ValueError("ladder schedule must shrink the periodization width")
        if nxt.sigma > prev.sigma + 1e-15:
            raise ValueError("ladder schedule must shrink the regularization width")


def warm_start(traj, nt_new, n_new):
    """Interpolate a trajectory onto a refined grid, zero-padding new channels."""
    times_new = np.linspace(0.0, traj.T, nt_new + 1)
    values = np.zeros((nt_new + 1, n_new))
    derivs = np.zeros((nt_new + 1, n_new))
    keep = min(traj.n, n_new)
    sp_v = CubicSpline(traj.times, traj.values[:, :keep])
    sp_d = CubicSpline(traj.times, traj.derivatives[:, :keep])
    values[:, :keep] = sp_v(times_new)
    derivs[:, :keep] = sp_d(times_new)
    return CoefficientTrajectory(times_new, values, derivs)


def refinement_ladder(levels, make_problem, cfg):
    """Run the fixed point per level, warm-started, and report Cauchy data.

    ``make_problem(n, nt)`` must return a PeriodicProblem; per-level failures
    are recorded and the ladder continues with the failed level's best
    iterate as the next warm start.
    """
    _validate_schedule(levels)
    results = []
    distances = []
    prev = None
    for level in levels:
        problem = make_problem(level.n, level.nt)
        lcfg = FixedPointConfig(
            omega=cfg.omega, tol=cfg.tol, max_iter=cfg.max_iter,
            anderson=cfg.anderson, anderson_depth=cfg.anderson_depth,
            eps_cells=level.eps_cells, sigma=level.sigma,
            clamp_level=cfg.clamp_level, inner_tol=cfg.inner_tol,
            inner_max=cfg.inner_max, inner_damping=cfg.inner_damping,
            energy_ceiling=cfg.energy_ceiling,
        )
        initial = warm_start(prev.trajectory, level.nt, level.n) if prev else None
        result = find_fixed_point(problem, lcfg, initial=initial)
        if prev is not None:
            distances.append(_level_distance(problem, prev, result))
        results.append(result)
        prev = result
    return results, distances


def _level_distance(problem, prev, curr):
    """Sup-in-time sup-in-x distance of the plate displacement across levels."""
    x = problem.grid.x_nodes
    slots_new = problem.basis.plate_slots()
    k_max = problem.basis.plate_k_max
    mean_profile = problem.mean_profile()
    times = curr.trajectory.times
    sp_prev = CubicSpline(prev.trajectory.times, prev.trajectory.values)
    n_prev = prev.trajectory.n
    d_eta = 0.0
    for i, t in enumerate(times):
        row = curr.trajectory.values[i]
        eta_new = profile_from_plate_coeffs(row[slots_new], k_max=k_max)
        row_prev = sp_prev(t)
        eta_prev = profile_from_plate_coeffs(
            row_prev[np.arange(0, n_prev, 2)], k_max=k_max
        )
        if mean_profile is not None:
            eta_new = eta_new + mean_profile
            eta_prev = eta_prev + mean_profile
        d_eta = max(d_eta, float(np.max(np.abs(eta_new.values(x) - eta_prev.values(x)))))
    d_sup_e = abs(curr.series.max_energy() - prev.series.max_energy())
    return {"d_eta": d_eta, "d_sup_energy": d_sup_e}
