"""Evaluation of the Galerkin system operators at one time node.

For basis entries X_k (fluid part) / X_k (plate trace part) the assembled
objects are, with U the deformed channel and w the top displacement rate:

    mass[k, j]     = int_U X_j . X_k  +  (plate L2 Gram)[k, j]
    motion[k, j]   = int_U (d_t X_j) . X_k
    viscous[k, j]  = int_U grad X_j : grad X_k
    coupling[k, j] = 1/2 int_omega X_j w X_k
    conv(beta)_k   = 1/2 int_U (u.grad)u . X_k - 1/2 int_U (u.grad)X_k . u,
                     u = sum_j beta_j X_j   (skew form, matrix-free)
    plate(b)_k     = <K'(eta), X_k>, eta = sum_j b_j X_j + mean term
    load_k         = int_U f . X_k + int_omega g X_k

The convective evaluator is quadratic and contributes exactly zero when
contracted with its own argument; together with the coupling matrix this is
what keeps the discrete energy balance clean on a moving domain.
"""

import numpy as np

from . import plate as plate_ops
from .basis import basis_quadrature, deformed_arrays
from .fields import PlateProfile, profile_from_plate_coeffs


class AssemblyOptions:
    """Switches and weights threaded through every assembly call."""

    def __init__(self, convective=True, include_fluid=True,
                 membrane=1.0, bending=1.0, panel_nodes=None):
        self.convective = bool(convective)
        self.include_fluid = bool(include_fluid)
        self.membrane = float(membrane)
        self.bending = float(bending)
        self.panel_nodes = None if panel_nodes is None else int(panel_nodes)


class TimeFactor:
    """cos/sin(2 pi p t / T) with an integer wavenumber, exactly T-periodic."""

    def __init__(self, wavenumber, phase, period):
        if int(wavenumber) != wavenumber:
            raise ValueError("time wavenumber must be an integer")
        if phase not in ("cos", "sin"):
            raise ValueError("time phase must be 'cos' or 'sin'")
        self.wavenumber = int(wavenumber)
        self.phase = phase
        self.period = float(period)

    def __call__(self, t):
        arg = 2.0 * np.pi * self.wavenumber * np.asarray(t, dtype=float) / self.period
        return np.cos(arg) if self.phase == "cos" else np.sin(arg)


def _space_factor(k, phase, x):
    if phase == "const":
        return np.ones_like(np.asarray(x, dtype=float))
    arg = 2.0 * np.pi * k * np.asarray(x, dtype=float)
    if phase == "cos":
        return np.cos(arg)
    if phase == "sin":
        return np.sin(arg)
    raise ValueError("space phase must be 'const', 'cos' or 'sin'")


class PlateForceMode:
    """One separable term of the plate load g(t, x)."""

    def __init__(self, time_k, time_phase, space_k, space_phase, amplitude, period):
        self.time = TimeFactor(time_k, time_phase, period)
        self.space_k = int(space_k)
        self.space_phase = space_phase
        self.amplitude = float(amplitude)

    def values(self, t, x):
        return self.amplitude * self.time(t) * _space_factor(self.space_k, self.space_phase, x)


class FluidForceMode:
    """One separable term of the body force f(t, x, z) acting on one component."""

    def __init__(self, time_k, time_phase, space_k, space_phase,
                 z_power, component, amplitude, period):
        self.time = TimeFactor(time_k, time_phase, period)
        self.space_k = int(space_k)
        self.space_phase = space_phase
        self.z_power = int(z_power)
        if component not in (0, 1):
            raise ValueError("component must be 0 (horizontal) or 1 (vertical)")
        self.component = component
        self.amplitude = float(amplitude)

    def values(self, t, x, z):
        return (self.amplitude * self.time(t)
                * _space_factor(self.space_k, self.space_phase, x) * z**self.z_power)


class ForcingSpec:
    """Time-periodic forcing: a list of fluid modes and of plate modes."""

    def __init__(self, period, fluid=(), plate=()):
        self.period = float(period)
        self.fluid = list(fluid)
        self.plate = list(plate)

    @classmethod
    def from_entries(cls, period, fluid_entries=(), plate_entries=()):
        """Build from plain tuples; see FluidForceMode / PlateForceMode."""
        fluid = [FluidForceMode(*e, period) for e in fluid_entries]
        plate = [PlateForceMode(*e, period) for e in plate_entries]
        return cls(period, fluid, plate)

    def scaled(self, factor):
        spec = ForcingSpec(self.period)
        for mode in self.fluid:
            m = FluidForceMode.__new__(FluidForceMode)
            m.__dict__.update(mode.__dict__)
            m.amplitude = mode.amplitude * factor
            spec.fluid.append(m)
        for mode in self.plate:
            m = PlateForceMode.__new__(PlateForceMode)
            m.__dict__.update(mode.__dict__)
            m.amplitude = mode.amplitude * factor
            spec.plate.append(m)
        return spec

    def is_zero(self):
        return not self.fluid and not self.plate

    def fluid_values(self, t, x, z):
        f1 = np.zeros(np.broadcast(x, z).shape)
        f2 = np.zeros_like(f1)
        for mode in self.fluid:
            vals = mode.values(t, x, z)
            if mode.component == 0:
                f1 = f1 + vals
            else:
                f2 = f2 + vals
        return f1, f2

    def plate_values(self, t, x):
        g = np.zeros_like(np.asarray(x, dtype=float))
        for mode in self.plate:
            g = g + mode.values(t, x)
        return g


class AssembledSystem:
    """All matrices and matrix-free evaluators of the system at one time."""

    def __init__(self, mass, basis_motion, viscous, coupling, load,
                 convective, plate_force, fluid_gram, plate_gram):
        self.mass = mass
        self.basis_motion = basis_motion
        self.viscous = viscous
        self.coupling = coupling
        self.load = load
        self.convective = convective
        self.plate_force = plate_force
        self.fluid_gram = fluid_gram
        self.plate_gram = plate_gram

    @property
    def n(self):
        return self.mass.shape[0]


def plate_gram_matrix(basis):
    """L2(omega) Gram of the plate trace parts (zero on fluid slots)."""
    n = basis.n
    gram = np.zeros((n, n))
    tab = basis.plate_values_table()
    wx = basis.grid.x_weights
    block = (tab * wx) @ tab.T
    slots = basis.plate_slots()
    gram[np.ix_(slots, slots)] = block
    return gram


def _plate_force_closure(basis, mean_profile, options):
    n = basis.n
    slots = basis.plate_slots()
    n_plate = basis.n_plate
    k_max = basis.plate_k_max
    grid = basis.grid

    def plate_force(b):
        eta = profile_from_plate_coeffs(np.asarray(b)[slots], k_max=k_max)
        if mean_profile is not None:
            eta = eta + mean_profile
        force = plate_ops.koiter_force(
            eta, grid, membrane=options.membrane, bending=options.bending
        )
        out = np.zeros(n)
        # the first n_plate force coefficients follow the basis mode ordering
        out[slots] = force[:n_plate]
        return out

    return plate_force


def assemble(basis, delta, delta_t, forcing, t, grid, options=None,
             mean_profile=None, need_motion=True):
    """Assemble the full Galerkin system at time t on the channel of delta."""
    if options is None:
        options = AssemblyOptions()
    if grid is not basis.grid and not np.array_equal(grid.x_nodes, basis.grid.x_nodes):
        raise ValueError("assembly grid does not match the basis grid")
    n = basis.n
    quad = basis_quadrature(basis, delta, panel_nodes=options.panel_nodes)
    arrays = deformed_arrays(basis, delta, delta_t, quad, need_motion=need_motion)
    w2 = quad.weights
    V = arrays.values
    G = arrays.grads

    Vflat = V.reshape(n, -1)
    Gflat = G.reshape(n, -1)
    if options.include_fluid:
        Vw = (V * w2).reshape(n, -1)
        fluid_gram = Vflat @ Vw.T
        fluid_gram = 0.5 * (fluid_gram + fluid_gram.T)
        viscous = Gflat @ (G * w2).reshape(n, -1).T
        viscous = 0.5 * (viscous + viscous.T)
        if need_motion:
            basis_motion = Vflat @ (arrays.motion * w2).reshape(n, -1).T
        else:
            basis_motion = np.zeros((n, n))
    else:
        fluid_gram = np.zeros((n, n))
        viscous = np.zeros((n, n))
        basis_motion = np.zeros((n, n))

    plate_gram = plate_gram_matrix(basis)
    mass = fluid_gram + plate_gram
    if not options.include_fluid:
        # plate-only reduction: unit inertia keeps the resting fluid slots
        # well-posed without coupling them to anything
        fslots = basis.fluid_slots()
        mass[fslots, fslots] += 1.0

    # coupling: 1/2 int_omega X_j (d_t delta) X_k, nonzero on plate slots only
    coupling = np.zeros((n, n))
    tab = basis.plate_values_table()
    wx = grid.x_weights
    rate = delta_t.values(grid.x_nodes)
    slots = basis.plate_slots()
    coupling[np.ix_(slots, slots)] = 0.5 * ((tab * (wx * rate)) @ tab.T)

    load = np.zeros(n)
    if forcing is not None and not forcing.is_zero():
        if options.include_fluid and forcing.fluid:
            f1, f2 = forcing.fluid_values(t, quad.x[:, None], quad.z)
            load += Vflat @ (np.stack([f1, f2]) * w2).reshape(-1)
        if forcing.plate:
            gv = forcing.plate_values(t, grid.x_nodes)
            load[slots] += tab @ (wx * gv)

    if options.convective and options.include_fluid:
        def convective(beta):
            beta = np.asarray(beta, dtype=float)
            u = np.tensordot(beta, V, axes=(0, 0))       # (2, nx, nz)
            gu = np.tensordot(beta, G, axes=(0, 0))      # (2, 2, nx, nz)
            adv = (u[None, :] * gu).sum(axis=1)          # (u . grad) u
            t1 = Vflat @ (adv * w2).reshape(-1)
            uu = u[:, None] * u[None, :]                 # u_i u_j, symmetric
            t2 = Gflat @ (uu * w2).reshape(-1)
            return 0.5 * (t1 - t2)
    else:
        def convective(beta):
            return np.zeros(n)

    plate_force = _plate_force_closure(basis, mean_profile, options)

    return AssembledSystem(mass, basis_motion, viscous, coupling, load,
                           convective, plate_force, fluid_gram, plate_gram)


def eta_profile(basis, b, mean_profile=None):
    """Plate displacement profile of a coefficient vector b."""
    eta = profile_from_plate_coeffs(
        np.asarray(b)[basis.plate_slots()], k_max=basis.plate_k_max
    )
    if mean_profile is not None:
        eta = eta + mean_profile
    return eta


def energy_of_state(b, beta, delta, basis, grid, mean_profile=None, options=None):
    """Discrete energy: kinetic fluid + kinetic plate + elastic plate.

    E = 1/2 beta^T (fluid Gram + plate Gram) beta + K(eta), all Grams on the
    channel deformed by delta.
    """
    if options is None:
        options = AssemblyOptions()
    sys_ = assemble(basis, delta, PlateProfile.zero(delta.k_max), None, 0.0,
                    grid, options=options, mean_profile=mean_profile,
                    need_motion=False)
    return energy_from_parts(sys_, b, beta, basis, mean_profile, options)


def energy_from_parts(system, b, beta, basis, mean_profile=None, options=None):
    if options is None:
        options = AssemblyOptions()
    beta = np.asarray(beta, dtype=float)
    kinetic = 0.5 * float(beta @ system.mass @ beta)
    eta = eta_profile(basis, b, mean_profile)
    elastic = plate_ops.koiter_energy(
        eta, basis.grid, membrane=options.membrane, bending=options.bending
    )
    return kinetic + elastic


def skew_symmetry_defect(basis, delta, delta_t, beta, grid, options=None):
    """beta . [conv(beta) + coupling beta]: the energy-neutral combination.

    The two halves of the skew convective form cancel exactly under this
    contraction; what remains is the coupling quadratic, which the moving
    Gram's boundary flux absorbs in the energy identity.
    """
    system = assemble(basis, delta, delta_t, None, 0.0, grid,
                      options=options, need_motion=False)
    beta = np.asarray(beta, dtype=float)
    return float(beta @ (system.convective(beta) + system.coupling @ beta))
