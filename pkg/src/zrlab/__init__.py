"""zrlab: zero-range particle systems with slow sites.

An event-driven lattice simulator, a nonlinear-diffusion solver with
defect boundary conditions, and a harness that checks the first converges
to the second.
"""

from . import rates
from .defects import DefectSet, DefectSpec, empty_defects
from .harness import Scenario, grand_canonical, run_convergence
from .measures import build_invariant, build_local_equilibrium
from .profiles import CosineProfile, PiecewiseProfile, constant
from .solver import MacroState, Solver, SolverConfig, solve, total_mass
from .thermo import FugacityOverflowError, GrandCanonical

__version__ = "0.1.0"

__all__ = [
    "rates",
    "DefectSet",
    "DefectSpec",
    "empty_defects",
    "Scenario",
    "grand_canonical",
    "run_convergence",
    "build_invariant",
    "build_local_equilibrium",
    "CosineProfile",
    "PiecewiseProfile",
    "constant",
    "MacroState",
    "Solver",
    "SolverConfig",
    "solve",
    "total_mass",
    "GrandCanonical",
    "FugacityOverflowError",
    "__version__",
]
