"""nematoflow: Q-tensor nematic liquid crystal hydrodynamics on structured grids.

Pointwise tensor kernels, Landau-de Gennes energies, matrix-free
elliptic and generalized-Stokes solvers, an energy-monitoring coupled
time stepper, and a CLI for simulation and verification studies.
"""

from .landau_de_gennes import MaterialParams, legendre_min, uniaxial_critical_s, uniaxial_q
from .fields import BoundaryData, GridSpec, box_grid, periodic_grid
from .elliptic_solver import EllipticOptions, leray_project, solve_l
from .stokes_solver import StokesProblem, assemble_coefficient, solve_stokes
from .coupled_stepper import EnergyReport, SimState, StepperOptions, compatibility_residual, run, step
from .errors import ConfigError, NumericalContractError, SolverConvergenceError

__version__ = "0.1.0"

__all__ = [
    "MaterialParams", "legendre_min", "uniaxial_critical_s", "uniaxial_q",
    "BoundaryData", "GridSpec", "box_grid", "periodic_grid",
    "EllipticOptions", "leray_project", "solve_l",
    "StokesProblem", "assemble_coefficient", "solve_stokes",
    "EnergyReport", "SimState", "StepperOptions", "compatibility_residual", "run", "step",
    "ConfigError", "NumericalContractError", "SolverConvergenceError",
    "__version__",
]
