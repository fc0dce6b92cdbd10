"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict lines
as they appear; the expensive coupled periodic run is shared by the last
criteria through module-scoped fixtures.
"""

import numpy as np
import pytest

from periplate import (ForcingSpec, PlateProfile, ReferenceSlab, assemble,
                       build_interleaved_basis, coercivity_gap,
                       extend_divergence_free, find_fixed_point, koiter_energy,
                       periodize, piola_transform)
from periplate.basis import StreamMode, basis_quadrature, deformed_arrays
from periplate.diagnostics import (check_diffusion_estimate, default_test_fields,
                                   forcing_norm, weak_divergence_defect)
from periplate.fixedpoint import (FixedPointConfig, PeriodicProblem,
                                  PeriodizationParams, warm_start)
from periplate.geometry import ColumnQuadrature, GeometryTrajectory
from periplate.integrator import DecoupledSystem, integrate
from periplate.plate import force_pairing

TWO_PI = 2.0 * np.pi


def _verdict(num, name, ok, detail):
    print(f"ACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def _random_profile(rng, k_max, amplitude, mean=0.0):
    return PlateProfile(mean, rng.uniform(-amplitude, amplitude, (k_max, 2)))


# ---------------------------------------------------------------------------
# 1 & 2: plate energy calculus
# ---------------------------------------------------------------------------


def _sample_profiles(seed=20240809, count=200):
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        k_max = int(rng.integers(1, 9))
        eta = _random_profile(rng, k_max, 0.3 / (2 * k_max))
        xi = _random_profile(rng, k_max, 1.0)
        pairs.append((eta, xi))
    return pairs


def test_a01_koiter_gradient_consistency():
    h = 1e-5
    worst = 0.0
    for eta, xi in _sample_profiles():
        fd = (koiter_energy(eta + h * xi) - koiter_energy(eta - h * xi)) / (2 * h)
        pairing = force_pairing(eta, xi)
        rel = abs(pairing - fd) / max(1.0, abs(pairing))
        worst = max(worst, rel)
    _verdict(1, "Koiter gradient consistency", worst <= 1e-6,
             f"200 pairs, max rel err {worst:.2e} (tol 1e-6)")


def test_a02_coercivity_identity():
    floor = 0.0
    for eta, _ in _sample_profiles():
        floor = min(floor, coercivity_gap(eta))
    eta = PlateProfile.single_mode(1, amplitude_cos=0.1)
    oracle = 2.0 * (0.2 * np.pi) ** 4 * (3.0 / 8.0)  # = 0.11689090924080...
    err = abs(coercivity_gap(eta) - oracle)
    ok = floor >= -1e-12 and err <= 1e-9
    _verdict(2, "coercivity identity", ok,
             f"min gap {floor:.1e} (>= -1e-12), oracle err {err:.1e} (tol 1e-9)")


# ---------------------------------------------------------------------------
# 3 & 4: extension operator and Piola transform
# ---------------------------------------------------------------------------


def test_a03_extension_operator():
    rng = np.random.default_rng(7)
    grid = ReferenceSlab(nx=32, nz=16)
    worst_div = worst_trace = 0.0
    for _ in range(50):
        k_max = int(rng.integers(1, 5))
        xi = _random_profile(rng, k_max, 1.0)
        field = extend_divergence_free(xi, kappa=0.5)
        delta = _random_profile(rng, 3, 0.49 / 6)
        quad = ColumnQuadrature(grid, delta, breaks=field.ramp.breaks,
                                panel_nodes=16)
        div = field.divergence(quad.x[:, None], quad.z)
        worst_div = max(worst_div, float(np.max(np.abs(div))))
        x = grid.x_nodes
        top = 1.0 + delta.values(x)
        u1, u2 = field.values(x, top)
        worst_trace = max(worst_trace, float(np.max(np.abs(u1))),
                          float(np.max(np.abs(u2 - xi.values(x)))))
    ok = worst_div <= 1e-12 and worst_trace <= 1e-12
    _verdict(3, "divergence-free extension", ok,
             f"50 pairs, max div {worst_div:.1e}, max trace defect "
             f"{worst_trace:.1e} (tol 1e-12)")


def test_a04_piola_transform():
    rng = np.random.default_rng(11)
    grid = ReferenceSlab(nx=32, nz=16)
    g = StreamMode(1, "cos", 1)

    worst_weak = 0.0
    for _ in range(10):
        delta = _random_profile(rng, 2, 0.08)
        field = piola_transform(delta, g)
        for chi in default_test_fields():
            worst_weak = max(worst_weak,
                             abs(weak_divergence_defect(field, delta, grid, chi)))

    x = np.linspace(0, 1, 13)[:, None]
    zh = np.linspace(0.05, 0.95, 9)[None, :]
    ident = piola_transform(PlateProfile.zero(1), g)
    iv = ident.values(x, zh)
    gv = g.values(x, zh)
    err_id = max(float(np.max(np.abs(iv[0] - gv[0]))),
                 float(np.max(np.abs(iv[1] - gv[1]))))

    c = 0.3
    pc = piola_transform(PlateProfile.constant(c, 1), g)
    v1, v2 = pc.values(x, zh * (1 + c))
    err_c = max(float(np.max(np.abs(v1 - gv[0] / (1 + c)))),
                float(np.max(np.abs(v2 - gv[1]))))

    ok = worst_weak <= 1e-10 and err_id <= 1e-14 and err_c <= 1e-12
    _verdict(4, "Piola transform", ok,
             f"weak-div {worst_weak:.1e} (tol 1e-10), identity {err_id:.1e}, "
             f"constant-inflation formula {err_c:.1e} (tol 1e-12)")


# ---------------------------------------------------------------------------
# 5 & 6: assembled operators
# ---------------------------------------------------------------------------


def test_a05_mass_matrix_spd():
    rng = np.random.default_rng(13)
    worst_sym = 0.0
    min_eig = np.inf
    for n in (8, 16, 32):
        grid = ReferenceSlab(nx=max(16, 2 * n + 4), nz=16)
        basis = build_interleaved_basis(n, PlateProfile.zero(1), grid)
        for _ in range(20):
            delta = _random_profile(rng, 3, 0.45 / 6)
            sys_ = assemble(basis, delta, PlateProfile.zero(3), None, 0.0, grid,
                            need_motion=False)
            worst_sym = max(worst_sym,
                            float(np.max(np.abs(sys_.mass - sys_.mass.T))))
            min_eig = min(min_eig, float(np.linalg.eigvalsh(sys_.mass).min()))
    ok = worst_sym <= 1e-13 and min_eig > 0
    _verdict(5, "mass matrix SPD", ok,
             f"n in (8,16,32) x 20 draws: max asym {worst_sym:.1e} (tol 1e-13), "
             f"min eig {min_eig:.3e} (> 0)")


def test_a06_convective_tensor_oracle():
    rng = np.random.default_rng(17)
    grid = ReferenceSlab(nx=24, nz=16)
    basis = build_interleaved_basis(6, PlateProfile.zero(1), grid)
    delta = _random_profile(rng, 2, 0.08)
    sys_ = assemble(basis, delta, PlateProfile.zero(2), None, 0.0, grid)

    quad = basis_quadrature(basis, delta)
    arr = deformed_arrays(basis, delta, PlateProfile.zero(2), quad,
                          need_motion=False)
    n, w2 = basis.n, quad.weights
    tensor = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            adv = np.stack([
                arr.values[i, 0] * arr.grads[j, 0, 0]
                + arr.values[i, 1] * arr.grads[j, 0, 1],
                arr.values[i, 0] * arr.grads[j, 1, 0]
                + arr.values[i, 1] * arr.grads[j, 1, 1]])
            for k in range(n):
                t1 = np.sum(adv * arr.values[k] * w2)
                adv_k = np.stack([
                    arr.values[i, 0] * arr.grads[k, 0, 0]
                    + arr.values[i, 1] * arr.grads[k, 0, 1],
                    arr.values[i, 0] * arr.grads[k, 1, 0]
                    + arr.values[i, 1] * arr.grads[k, 1, 1]])
                t2 = np.sum(adv_k * arr.values[j] * w2)
                tensor[k, i, j] = 0.5 * (t1 - t2)

    worst = 0.0
    for _ in range(10):
        beta = rng.standard_normal(n)
        expect = np.einsum("kij,i,j->k", tensor, beta, beta)
        worst = max(worst, float(np.max(np.abs(sys_.convective(beta) - expect))))
    _verdict(6, "convective oracle", worst <= 1e-10,
             f"matrix-free vs rank-3 contraction, max abs err {worst:.2e} "
             f"(tol 1e-10)")


# ---------------------------------------------------------------------------
# 7 & 8: discrete energy balance and mean conservation
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def balance_runs():
    T = 1.0
    grid = ReferenceSlab(nx=24, nz=16)
    basis = build_interleaved_basis(8, PlateProfile.zero(2), grid, kappa=0.5)
    forcing = ForcingSpec.from_entries(
        T,
        fluid_entries=[(1, "cos", 0, "const", 0, 0, 0.1)],
        plate_entries=[(1, "sin", 1, "cos", 0.1)],
    )
    mean_profile = PlateProfile.constant(0.1, 2)
    out = {}
    for nt in (128, 256, 512):
        times = np.linspace(0.0, T, nt + 1)
        profiles = [PlateProfile.single_mode(
            1, amplitude_cos=0.05 * np.cos(TWO_PI * t / T), k_max=2, mean=0.1)
            for t in times]
        geometry = GeometryTrajectory(times, profiles)
        system = DecoupledSystem(basis, geometry, forcing, grid,
                                 mean_profile=mean_profile)
        _, series = integrate(system, (np.zeros(8), np.zeros(8)), nt)
        out[nt] = series
    return out


def test_a07_energy_balance_order(balance_runs):
    nts = np.array(sorted(balance_runs))
    resid = np.array([np.max(np.abs(balance_runs[nt].residual)) for nt in nts])
    order = -np.polyfit(np.log(nts), np.log(resid), 1)[0]
    _verdict(7, "discrete energy balance", order >= 1.9,
             f"max residuals {[f'{r:.2e}' for r in resid]} for Nt {list(nts)}, "
             f"fitted order {order:.2f} (>= 1.9)")


def test_a08_mean_conservation(balance_runs):
    worst = max(float(np.max(np.abs(series.mean_eta - 0.1)))
                for series in balance_runs.values())
    _verdict(8, "mean conservation", worst <= 1e-12,
             f"max |mean(eta) - m| over all runs {worst:.2e} (tol 1e-12)")


# ---------------------------------------------------------------------------
# 9: periodization operator
# ---------------------------------------------------------------------------


def test_a09_periodization():
    rng = np.random.default_rng(23)
    nt = 256
    times = np.linspace(0.0, 1.0, nt + 1)
    f = rng.standard_normal(nt + 1)
    out = periodize(f, times, PeriodizationParams(16))
    ok = out[0] == out[-1]
    ok &= np.max(np.abs(out)) <= np.max(np.abs(f[: nt - 16 + 1])) + 1e-15
    twice = periodize(out, times, PeriodizationParams(16))
    ok &= bool(np.array_equal(out, twice))
    g = np.sin(TWO_PI * times) + 0.4 * np.cos(2 * TWO_PI * times)
    bound_ok = True
    for cells in (8, 32, 128):
        pg = periodize(g, times, PeriodizationParams(cells))
        bound = 2.0 * np.max(np.abs(g[-cells - 1:] - g[-1]))
        bound_ok &= bool(np.max(np.abs(pg - g)) <= bound + 1e-13)
    ok &= bound_ok
    _verdict(9, "periodization operator", bool(ok),
             "endpoint equality exact, non-expansive, idempotent, "
             "periodic-sample bound 2 sup|f(T)-f(t)| holds")


# ---------------------------------------------------------------------------
# 10-12: the coupled periodic run and its estimates
# ---------------------------------------------------------------------------

AMPLITUDE = 1e-3


def _make_problem(nt, scale=1.0, grid=None, basis=None):
    if grid is None:
        grid = ReferenceSlab(nx=20, nz=16)
    if basis is None:
        basis = build_interleaved_basis(16, PlateProfile.zero(4), grid, kappa=0.5)
    forcing = ForcingSpec.from_entries(
        1.0, plate_entries=[(1, "sin", 1, "cos", AMPLITUDE * scale)])
    return PeriodicProblem(basis, grid, forcing, nt, 0.5, mean=0.0)


@pytest.fixture(scope="module")
def coupled_setup():
    grid = ReferenceSlab(nx=20, nz=16)
    basis = build_interleaved_basis(16, PlateProfile.zero(4), grid, kappa=0.5)
    return grid, basis


@pytest.fixture(scope="module")
def converged_run(coupled_setup):
    grid, basis = coupled_setup
    problem = _make_problem(256, grid=grid, basis=basis)
    cfg = FixedPointConfig(omega=0.5, tol=1e-9, max_iter=80, eps_cells=2)
    return find_fixed_point(problem, cfg), problem, cfg


def test_a10_fixed_point_run(converged_run):
    result, _, _ = converged_run
    ok = (result.converged and result.residual <= 1e-6
          and result.periodicity_defect <= 1e-8
          and result.coupling_defect <= 1e-6)
    _verdict(10, "coupled periodic fixed point", ok,
             f"{result.iterations} iterations, ||a - T(a)|| = "
             f"{result.residual:.2e} (tol 1e-6), periodicity "
             f"{result.periodicity_defect:.2e} (tol 1e-8), coupling "
             f"{result.coupling_defect:.2e} (tol 1e-6)")


@pytest.fixture(scope="module")
def amplitude_ladder(converged_run, coupled_setup):
    grid, basis = coupled_setup
    result, problem, cfg = converged_run
    runs = [(1.0, result, problem)]
    prev = result.trajectory
    for scale in (0.5, 0.25):
        prob = _make_problem(256, scale=scale, grid=grid, basis=basis)
        initial = prev.copy()
        ratio = scale / runs[-1][0]
        initial.values *= ratio
        initial.derivatives *= ratio
        res = find_fixed_point(prob, cfg, initial=initial)
        runs.append((scale, res, prob))
        prev = res.trajectory
    return runs


def test_a11_energy_ball_and_uniform_bound(amplitude_ladder):
    amps, sup_es, constants = [], [], []
    all_converged = True
    for scale, res, problem in amplitude_ladder:
        all_converged &= res.converged
        c = forcing_norm(problem.forcing, res.geometry, problem.grid)
        sup_e = res.series.max_energy()
        constants.append(sup_e / (c**2 + c))
        amps.append(AMPLITUDE * scale)
        sup_es.append(sup_e)
    shared = max(constants)
    exponent = np.polyfit(np.log(amps), np.log(sup_es), 1)[0]
    spread = max(constants) / min(constants)
    ok = (all_converged and np.isfinite(shared) and shared > 0
          and spread <= 2.0 and abs(exponent - 2.0) <= 0.2)
    _verdict(11, "energy ball / uniform bound", ok,
             f"shared constant {shared:.3e} (spread x{spread:.2f} <= 2), "
             f"sup E exponent {exponent:.3f} (2 +/- 0.2)")


def test_a12_diffusion_estimate(converged_run, coupled_setup):
    # the slack is dt^2 in the intrinsic forcing scale; halving dt shrinks it
    # fourfold and the inequality must survive the shrunken slack
    grid, basis = coupled_setup
    result, problem, cfg = converged_run
    lhs, rhs, gap256 = check_diffusion_estimate(result.series,
                                                result.periodicity_defect)
    assert lhs is not None
    c_forcing = forcing_norm(problem.forcing, result.geometry, problem.grid)
    slack256 = (1.0 / 256) ** 2 * max(lhs, rhs, c_forcing)

    prob512 = _make_problem(512, grid=grid, basis=basis)
    initial = warm_start(result.trajectory, 512, 16)
    res512 = find_fixed_point(prob512, cfg, initial=initial)
    lhs2, rhs2, gap512 = check_diffusion_estimate(res512.series,
                                                  res512.periodicity_defect)
    slack512 = (1.0 / 512) ** 2 * max(lhs2, rhs2, c_forcing)

    ok = (res512.converged and gap256 <= slack256 and gap512 <= slack512)
    _verdict(12, "diffusion estimate", ok,
             f"|diss - work| = {gap256:.2e} <= dt^2 slack {slack256:.2e} at "
             f"Nt=256; {gap512:.2e} <= {slack512:.2e} at Nt=512")


# ---------------------------------------------------------------------------
# 13 & 14: trivial data and transport identity
# ---------------------------------------------------------------------------


def test_a13_trivial_data():
    grid = ReferenceSlab(nx=16, nz=12)
    basis = build_interleaved_basis(8, PlateProfile.zero(2), grid, kappa=0.5)
    problem = PeriodicProblem(basis, grid, ForcingSpec(1.0), 64, 0.5, mean=0.0)
    result = find_fixed_point(problem, FixedPointConfig(tol=1e-12, max_iter=5))
    c = forcing_norm(problem.forcing, result.geometry, problem.grid)
    ok = (result.converged and result.iterations == 0
          and result.residual == 0.0
          and result.periodicity_defect == 0.0
          and result.coupling_defect == 0.0
          and result.series.max_energy() == 0.0
          and float(np.max(np.abs(result.series.residual))) == 0.0
          and c == 0.0)
    _verdict(13, "trivial data", ok,
             "zero fixed point at iteration 0, all report fields exactly zero")


def test_a14_reynolds_transport():
    from periplate import reynolds_transport_check

    T = 1.0
    times = np.linspace(0.0, T, 129)
    profs = [PlateProfile.single_mode(
        1, amplitude_sin=0.1 * np.cos(TWO_PI * t / T), k_max=2) for t in times]
    path = GeometryTrajectory(times, profs)

    class Field:
        def value(self, t, x, z):
            return z**2 * np.ones_like(x)

        def dt(self, t, x, z):
            return np.zeros(np.broadcast(x, z).shape)

    lhs, rhs = reynolds_transport_check(path, Field(), 0.4, 1e-4,
                                        ReferenceSlab(nx=32, nz=16))
    err = abs(lhs - rhs)
    _verdict(14, "Reynolds transport", err <= 1e-6,
             f"analytic case at dt = 1e-4: |lhs - rhs| = {err:.2e} (tol 1e-6)")
