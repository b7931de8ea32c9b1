"""Numerical laboratory for the doubly nonlinear evolution
law(u_t) + A u + W'(u) = f in one space dimension.

Backward-Euler gradient-flow stepping with damped interior Newton solves,
energy-decay and smoothing diagnostics, separation from singular
potential barriers, stationary-state enumeration, and windowed-trajectory
contraction experiments.
"""

from .grids import (
    DIRICHLET,
    NEUMANN,
    Field,
    Grid,
    apply_elliptic,
    constant,
    from_function,
    inner_l2,
    norm_h1,
    norm_h2,
    norm_l2,
    norm_linf,
    norm_lp,
    zeros,
)
from .laws import (
    DissipationLaw,
    Potential,
    RegularizedPair,
    make_dissipation,
    make_potential,
    regularize,
)
from .stepper import (
    Model,
    StepFailure,
    StepReport,
    StepperConfig,
    TrajectorySegment,
    ode_oracle,
    solve_trajectory,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "DIRICHLET",
    "NEUMANN",
    "Field",
    "Grid",
    "apply_elliptic",
    "constant",
    "from_function",
    "inner_l2",
    "norm_h1",
    "norm_h2",
    "norm_l2",
    "norm_linf",
    "norm_lp",
    "zeros",
    "DissipationLaw",
    "Potential",
    "RegularizedPair",
    "make_dissipation",
    "make_potential",
    "regularize",
    "Model",
    "StepFailure",
    "StepReport",
    "StepperConfig",
    "TrajectorySegment",
    "ode_oracle",
    "solve_trajectory",
    "step",
    "__version__",
]
