import numpy as np
import pytest

from periplate import (AssemblyOptions, EnergyBlowupError, ForcingSpec,
                       PlateProfile, ReferenceSlab, build_interleaved_basis)
from periplate.diagnostics import check_trace_estimate
from periplate.geometry import GeometryTrajectory
from periplate.integrator import DecoupledSystem, integrate

TWO_PI = 2.0 * np.pi


def static_geometry(T, nt, k_max=2):
    times = np.linspace(0.0, T, nt + 1)
    return GeometryTrajectory(times, [PlateProfile.zero(k_max)] * (nt + 1))


def wavy_geometry(T, nt, amp=0.05, k_max=2):
    times = np.linspace(0.0, T, nt + 1)
    profs = [PlateProfile.single_mode(
        1, amplitude_cos=amp * np.cos(TWO_PI * t / T), k_max=k_max)
        for t in times]
    return GeometryTrajectory(times, profs)


@pytest.fixture(scope="module")
def setup4():
    grid = ReferenceSlab(nx=16, nz=12)
    basis = build_interleaved_basis(4, PlateProfile.zero(1), grid)
    return grid, basis


def test_zero_equilibrium_exact(setup4):
    grid, basis = setup4
    system = DecoupledSystem(basis, static_geometry(1.0, 32, 1),
                             ForcingSpec(1.0), grid)
    traj, series = integrate(system, (np.zeros(4), np.zeros(4)), 32)
    assert np.max(np.abs(traj.values)) == 0.0
    assert np.max(np.abs(traj.derivatives)) == 0.0
    assert series.max_energy() == 0.0


def test_plate_oscillator_second_order(setup4):
    # plate-only bending mode: b'' + 2 (2 pi)^4 b = 0
    grid, basis = setup4
    omega = np.sqrt(2.0) * TWO_PI**2
    T = 0.25
    b0 = 1e-3
    opts = AssemblyOptions(include_fluid=False, convective=False, membrane=0.0)
    errs = []
    for nt in (256, 512):
        system = DecoupledSystem(basis, static_geometry(T, nt, 1),
                                 ForcingSpec(T), grid, options=opts)
        init_b = np.zeros(4)
        init_b[0] = b0
        traj, _ = integrate(system, (init_b, np.zeros(4)), nt)
        exact = b0 * np.cos(omega * traj.times)
        errs.append(np.max(np.abs(traj.values[:, 0] - exact)))
    order = np.log2(errs[0] / errs[1])
    assert errs[1] < 1e-3 * b0
    assert order >= 1.9


def test_energy_balance_second_order(setup4):
    grid, basis = setup4
    T = 1.0
    forcing = ForcingSpec.from_entries(
        T,
        fluid_entries=[(1, "cos", 0, "const", 0, 0, 0.1)],
        plate_entries=[(1, "sin", 1, "cos", 0.1)],
    )
    resid = []
    for nt in (64, 128, 256):
        system = DecoupledSystem(basis, wavy_geometry(T, nt), forcing, grid)
        _, series = integrate(system, (np.zeros(4), np.zeros(4)), nt)
        resid.append(np.max(np.abs(series.residual)))
    order = np.polyfit(np.log([64, 128, 256]), np.log(resid), 1)[0]
    assert -order >= 1.9


def test_state_convergence_under_halving(setup4):
    grid, basis = setup4
    T = 0.5
    forcing = ForcingSpec.from_entries(T, plate_entries=[(1, "sin", 1, "cos", 0.2)])
    finals = []
    for nt in (64, 128, 256):
        system = DecoupledSystem(basis, wavy_geometry(T, nt), forcing, grid)
        traj, _ = integrate(system, (np.zeros(4), np.zeros(4)), nt)
        finals.append(traj.values[-1].copy())
    e1 = np.max(np.abs(finals[0] - finals[2]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    # Richardson-style: successive-refinement gap shrinks at order ~2
    assert e1 / e2 > 3.0


def test_mean_conservation(setup4):
    grid, basis = setup4
    from periplate.fixedpoint import PeriodicProblem
    T = 1.0
    forcing = ForcingSpec.from_entries(T, plate_entries=[(1, "sin", 1, "cos", 0.05)])
    problem = PeriodicProblem(basis, grid, forcing, 64, 0.5, mean=0.1)
    system = DecoupledSystem(basis, static_geometry(T, 64, 1), forcing, grid,
                             mean_profile=problem.mean_profile())
    _, series = integrate(system, (np.zeros(4), np.zeros(4)), 64)
    assert np.max(np.abs(series.mean_eta - 0.1)) <= 1e-12


def test_unforced_decay(setup4, rng):
    grid, basis = setup4
    system = DecoupledSystem(basis, static_geometry(1.0, 128, 1),
                             ForcingSpec(1.0), grid)
    b0 = 1e-3 * rng.standard_normal(4)
    beta0 = 1e-3 * rng.standard_normal(4)
    _, series = integrate(system, (b0, beta0), 128)
    growth = np.diff(series.energy)
    assert np.all(growth <= 1e-10 * series.energy[0])


def test_trace_estimate_along_run(setup4):
    grid, basis = setup4
    forcing = ForcingSpec.from_entries(1.0, plate_entries=[(1, "sin", 1, "cos", 0.1)])
    system = DecoupledSystem(basis, wavy_geometry(1.0, 64), forcing, grid)
    _, series = integrate(system, (np.zeros(4), np.zeros(4)), 64)
    ok, ratio = check_trace_estimate(series, kappa=0.5)
    assert ok
    assert ratio <= 1.5


def test_energy_ceiling_guard(setup4):
    grid, basis = setup4
    forcing = ForcingSpec.from_entries(1.0, plate_entries=[(1, "sin", 1, "cos", 5.0)])
    system = DecoupledSystem(basis, static_geometry(1.0, 64, 1), forcing, grid)
    with pytest.raises(EnergyBlowupError):
        integrate(system, (np.zeros(4), np.zeros(4)), 64, energy_ceiling=1e-9)


def test_trajectory_validation():
    from periplate.integrator import CoefficientTrajectory
    with pytest.raises(ValueError):
        CoefficientTrajectory(np.array([0.0, 0.1, 0.3]), np.zeros((3, 2)),
                              np.zeros((3, 2)))
    with pytest.raises(ValueError):
        CoefficientTrajectory(np.linspace(0, 1, 3), np.zeros((3, 2)),
                              np.zeros((2, 2)))


def test_inner_solve_nonconvergence_reports_residual(setup4):
    from periplate.integrator import StepConvergenceError
    grid, basis = setup4
    forcing = ForcingSpec.from_entries(1.0, plate_entries=[(1, "sin", 1, "cos", 0.1)])
    system = DecoupledSystem(basis, wavy_geometry(1.0, 32), forcing, grid)
    with pytest.raises(StepConvergenceError) as err:
        integrate(system, (np.zeros(4), np.zeros(4)), 32, inner_max=0)
    assert err.value.iterations == 0
