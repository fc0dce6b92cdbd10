"""Built-in invariant suite behind the CLI selftest mode.

Each check returns (name, passed, detail).  The suite covers the geometry
identities, the plate energy calculus, the divergence-free basis families,
the assembled operators, the periodization operator and the trivial fixed
point; it is a fast subset of the full pytest suite meant for installation
smoke testing.
"""

import numpy as np

from . import plate as plate_ops
from .assembly import ForcingSpec, assemble, skew_symmetry_defect
from .basis import basis_quadrature, build_interleaved_basis, deformed_arrays
from .diagnostics import default_test_fields, weak_divergence_defect
from .fields import PlateProfile
from .fixedpoint import (FixedPointConfig, PeriodicProblem, PeriodizationParams,
                         clamp_and_regularize, find_fixed_point, periodize)
from .geometry import (DeformationMap, GeometryTrajectory, ReferenceSlab,
                       boundary_jacobian, integrate_moving_domain,
                       push_forward_point, reynolds_transport_check)


def random_profile(rng, k_max, amplitude, mean=0.0):
    coeffs = rng.uniform(-amplitude, amplitude, size=(k_max, 2))
    return PlateProfile(mean, coeffs)


def _check_geometry(rng):
    grid = ReferenceSlab(nx=32, nz=16)
    worst = 0.0
    for _ in range(5):
        delta = random_profile(rng, 3, 0.05, mean=rng.uniform(-0.1, 0.1))
        dmap = DeformationMap(delta, kappa=0.5)
        area = integrate_moving_domain(dmap, grid, np.ones((grid.nx, grid.nz)))
        worst = max(worst, abs(area - (1.0 + delta.mean)))
        x, z = push_forward_point(dmap, 0.37, 0.0)
        worst = max(worst, abs(z))
        jac = boundary_jacobian(delta, grid)
        worst = max(worst, max(0.0, 1.0 - jac.values.min()))
    return worst <= 1e-12, f"max defect {worst:.2e}"


def _check_reynolds(rng):
    T = 1.0
    times = np.linspace(0.0, T, 65)
    profs = [PlateProfile.single_mode(
        1, amplitude_sin=0.1 * np.cos(2 * np.pi * t / T), k_max=2) for t in times]
    path = GeometryTrajectory(times, profs)

    class Field:
        def value(self, t, x, z):
            return z**2 * np.ones_like(x)

        def dt(self, t, x, z):
            return np.zeros(np.broadcast(x, z).shape)

    lhs, rhs = reynolds_transport_check(path, Field(), 0.4, 1e-4,
                                        ReferenceSlab(nx=32, nz=16))
    return abs(lhs - rhs) <= 1e-6, f"|lhs - rhs| = {abs(lhs - rhs):.2e}"


def _check_plate(rng):
    worst = 0.0
    for _ in range(20):
        eta = random_profile(rng, 6, 0.3 / 6)
        xi = random_profile(rng, 6, 1.0)
        h = 1e-5
        fd = (plate_ops.koiter_energy(eta + h * xi)
              - plate_ops.koiter_energy(eta - h * xi)) / (2 * h)
        pairing = plate_ops.force_pairing(eta, xi)
        worst = max(worst, abs(pairing - fd) / max(1.0, abs(pairing)))
        if plate_ops.coercivity_gap(eta) < -1e-12:
            return False, "coercivity gap went negative"
    eta = PlateProfile.single_mode(1, amplitude_cos=0.1)
    gap = plate_ops.coercivity_gap(eta)
    oracle = 2.0 * (0.2 * np.pi) ** 4 * 0.375
    worst = max(worst, abs(gap - oracle) * 1e3)
    return worst <= 1e-6, f"max rel defect {worst:.2e}"


def _check_basis_fields(rng):
    grid = ReferenceSlab(nx=32, nz=16)
    basis = build_interleaved_basis(8, PlateProfile.zero(2), grid, kappa=0.5)
    worst_div = worst_trace = worst_weak = 0.0
    for _ in range(5):
        delta = random_profile(rng, 2, 0.12)
        quad = basis_quadrature(basis, delta)
        arr = deformed_arrays(basis, delta, PlateProfile.zero(2), quad)
        div = arr.grads[:, 0, 0] + arr.grads[:, 1, 1]
        worst_div = max(worst_div, float(np.max(np.abs(div))))
        x = grid.x_nodes
        top = 1.0 + delta.values(x)
        for p, ext in enumerate(basis.extensions):
            v1, v2 = ext.values(x, top)
            worst_trace = max(worst_trace, float(np.max(np.abs(v1))),
                              float(np.max(np.abs(v2 - basis.plate_profiles[p].values(x)))))
            worst_weak = max(worst_weak, abs(weak_divergence_defect(
                ext, delta, grid, default_test_fields()[0],
                breaks=basis.ramp.breaks)))
    ok = worst_div <= 1e-11 and worst_trace <= 1e-12 and worst_weak <= 1e-10
    return ok, (f"div {worst_div:.1e}, trace {worst_trace:.1e}, "
                f"weak {worst_weak:.1e}")


def _check_assembly(rng):
    grid = ReferenceSlab(nx=32, nz=16)
    basis = build_interleaved_basis(8, PlateProfile.zero(2), grid, kappa=0.5)
    worst_sym = 0.0
    min_eig = np.inf
    for _ in range(5):
        delta = random_profile(rng, 2, 0.1)
        delta_t = random_profile(rng, 2, 0.2)
        sys_ = assemble(basis, delta, delta_t, None, 0.0, grid)
        worst_sym = max(worst_sym, float(np.max(np.abs(sys_.mass - sys_.mass.T))))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(sys_.mass).min()))
        beta = rng.standard_normal(8)
        c1 = sys_.convective(beta)
        c2 = sys_.convective(2.0 * beta)
        if np.max(np.abs(c2 - 4.0 * c1)) > 1e-10 * max(1.0, np.max(np.abs(c2))):
            return False, "convective evaluator is not quadratic"
    # even-only static configuration: the pure skew form vanishes
    beta = np.zeros(8)
    beta[1::2] = rng.standard_normal(4)
    defect = skew_symmetry_defect(basis, PlateProfile.zero(2),
                                  PlateProfile.zero(2), beta, grid)
    ok = worst_sym <= 1e-13 and min_eig > 0 and abs(defect) <= 1e-10
    return ok, f"sym {worst_sym:.1e}, min eig {min_eig:.3f}, skew {defect:.1e}"


def _check_periodize(rng):
    nt = 64
    times = np.linspace(0.0, 1.0, nt + 1)
    f = times.copy()
    out = periodize(f, times, PeriodizationParams(16))
    j = nt - 16
    okay = np.array_equal(out[: j + 1], f[: j + 1])
    okay &= out[-1] == f[0]
    expected = f[j] + (f[0] - f[j]) / 0.25 * (times[j:] - times[j])
    okay &= np.max(np.abs(out[j:] - expected)) <= 1e-14
    twice = periodize(out, times, PeriodizationParams(16))
    okay &= np.array_equal(twice, out)
    okay &= np.max(np.abs(out)) <= np.max(np.abs(f[: j + 1])) + 1e-15
    # property (iv) bound on a periodic sample
    g = np.sin(2 * np.pi * times) + 0.3 * np.cos(4 * np.pi * times)
    pg = periodize(g, times, PeriodizationParams(8))
    bound = 2.0 * np.max(np.abs(g[-9:] - g[-1]))
    okay &= np.max(np.abs(pg - g)) <= bound + 1e-14
    return bool(okay), "piecewise definition, idempotence, sup bound"


def _check_clamp(rng):
    times = np.linspace(0.0, 1.0, 17)
    profs = [PlateProfile.constant(0.9 * 0.5) for _ in times]
    geom = GeometryTrajectory(times, profs)
    out = clamp_and_regularize(geom, 0.5, 0.0)
    okay = abs(out.profiles[3].mean - 0.25) <= 1e-14
    small = [PlateProfile.single_mode(1, amplitude_cos=0.1, k_max=2) for _ in times]
    geom2 = GeometryTrajectory(times, small)
    okay &= clamp_and_regularize(geom2, 0.5, 0.0) is geom2
    out3 = clamp_and_regularize(geom2, 0.5, 0.05)
    okay &= out3.sup_norm() <= geom2.sup_norm() + 1e-13
    return bool(okay), "clamp arithmetic, identity case, non-expansion"


def _check_trivial_fixpoint(rng):
    grid = ReferenceSlab(nx=16, nz=12)
    basis = build_interleaved_basis(4, PlateProfile.zero(1), grid, kappa=0.5)
    problem = PeriodicProblem(basis, grid, ForcingSpec(1.0), 32, 0.5, mean=0.0)
    result = find_fixed_point(problem, FixedPointConfig(tol=1e-12, max_iter=3))
    okay = (result.converged and result.iterations == 0
            and result.residual == 0.0
            and float(np.max(np.abs(result.trajectory.values))) == 0.0
            and result.series.max_energy() == 0.0)
    return bool(okay), f"converged at iteration {result.iterations}"


CHECKS = [
    ("geometry_identities", _check_geometry),
    ("reynolds_transport", _check_reynolds),
    ("plate_energy_calculus", _check_plate),
    ("divergence_free_basis", _check_basis_fields),
    ("assembled_operators", _check_assembly),
    ("periodization", _check_periodize),
    ("truncation_regularization", _check_clamp),
    ("trivial_fixed_point", _check_trivial_fixpoint),
]


def run_selftest(seed=0, out=print):
    rng = np.random.default_rng(seed)
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append({"name": name, "passed": bool(ok), "detail": detail})
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return results
