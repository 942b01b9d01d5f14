"""Structure-preserving 2D Navier-Stokes-Cahn-Hilliard-nutrient simulator."""
from .grid import (
    Grid,
    GridMismatchError,
    MacVelocity,
    ScalarField,
    advect_conservative,
    divergence,
    gradient,
    inner_product,
    kinetic_energy,
    l2_norm,
    laplacian_neumann,
    linf_norm,
)
from .potential import DomainError, HypothesisReport, Potential, validate_hypotheses
from .elliptic import (
    EllipticProblem,
    EllipticSolution,
    EllipticSolveError,
    margin_vs_data_bound,
    separation_margin,
    solve_singular_neumann,
)
from .stepper import (
    ConfigError,
    PhysParams,
    SimState,
    SolverAbort,
    SourceSpec,
    Stepper,
    StepperConfig,
    StepRejected,
    ch_substep,
    make_state,
    ns_substep,
    nutrient_substep,
    step,
)
from .diagnostics import (
    DiagnosticsRecord,
    analytic_mean_law_check,
    dissipation,
    energy,
    energy_law_residual,
)
from .runner import run
from .kernels import BACKEND

__version__ = "0.1.0"
