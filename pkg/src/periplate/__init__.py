"""Spectral Galerkin solver for time-periodic channel flow under an elastic plate.

The package constructs discrete time-periodic solutions of a viscous
incompressible flow in a periodic channel whose top boundary is a nonlinear
elastic plate: an interleaved divergence-free Galerkin basis couples the two
phases by construction, a periodization operator closes the prescribed
geometry in time, and a damped fixed-point iteration over coefficient
trajectories delivers solutions that are simultaneously coupled and periodic.
"""

from .fields import PlateProfile, plate_mode
from .geometry import (
    BoundaryJacobian,
    ColumnQuadrature,
    DeformationMap,
    GeometryError,
    GeometryTrajectory,
    ReferenceSlab,
    boundary_jacobian,
    integrate_moving_domain,
    push_forward_point,
    reynolds_transport_check,
)
from .plate import (
    BumpWeight,
    coercivity_gap,
    koiter_energy,
    koiter_force,
    mean_free_project,
)
from .basis import (
    InterleavedBasis,
    PlateExtensionField,
    SmoothRamp,
    StreamMode,
    build_interleaved_basis,
    extend_divergence_free,
    piola_time_derivative,
    piola_transform,
)
from .assembly import (
    AssembledSystem,
    AssemblyOptions,
    ForcingSpec,
    assemble,
    energy_of_state,
    skew_symmetry_defect,
)
from .integrator import (
    CoefficientTrajectory,
    DecoupledSystem,
    EnergyBlowupError,
    StepConvergenceError,
    integrate,
    step,
)
from .fixedpoint import (
    FixedPointConfig,
    FixedPointResult,
    LadderLevel,
    PeriodicProblem,
    PeriodizationParams,
    clamp_and_regularize,
    find_fixed_point,
    periodize,
    refinement_ladder,
    solve_decoupled,
)
from .diagnostics import (
    EnergyReport,
    build_report,
    check_energy_balance,
    check_mean_conservation,
    check_uniform_bound,
    forcing_norm,
    korn_defect,
    weak_divergence_defect,
)

__version__ = "0.1.0"
