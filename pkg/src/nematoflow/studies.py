"""Built-in time-refinement study of the energy dissipation balance.

Runs the fully coupled stepper on a periodic box over a fixed physical
window at a ladder of time steps and reports the mean absolute
dissipation-balance residual for each.  With unit viscosity and
mobility the residual is pure time-discretization error, so it should
shrink at first order in dt.
"""

from __future__ import annotations

import numpy as np

from . import fields as fd
from .coupled_stepper import StepperOptions, initial_state, step
from .elliptic_solver import leray_project
from .landau_de_gennes import MaterialParams, uniaxial_q
from .manufactured import stokes_exact
from .tensor_algebra import deviatoric, sym

STUDY_PARAMS = MaterialParams(a=-1.0, b=1.0, c=1.0, L1=0.5, L2=0.1, L3=0.1,
                              xi=0.5, nu=1.0, gamma=1.0)


def study_fields(grid: fd.GridSpec, amp_q: float = 0.05, amp_u: float = 0.05):
    """Smooth periodic initial data: perturbed uniaxial state plus a
    solenoidal velocity (projected once so it starts discretely
    divergence free)."""
    x, y, z = grid.meshgrid()
    q_base = uniaxial_q(1.5, (0.0, 0.0, 1.0))
    d1 = deviatoric(sym(np.array([[0.2, 1.0, 0.0], [1.0, -0.1, 0.3], [0.0, 0.3, -0.1]])))
    d2 = deviatoric(sym(np.array([[-0.4, 0.1, 0.8], [0.1, 0.5, -0.2], [0.8, -0.2, -0.1]])))
    phase = (np.sin(2 * np.pi * x) + np.cos(2 * np.pi * y))[..., None, None]
    phase2 = (np.sin(2 * np.pi * z) * np.cos(2 * np.pi * x))[..., None, None]
    q0 = q_base + amp_q * (phase * d1 + phase2 * d2)

    u_raw, _, _, _, _ = stokes_exact(grid)
    u0, _ = leray_project(grid, amp_u * u_raw)
    return u0, q0


def energy_dt_study(dts=(4e-4, 2e-4, 1e-4), n: int = 16, t_final: float = 0.02,
                    params: MaterialParams = STUDY_PARAMS):
    """Mean |energy_law_residual| over a fixed window for each dt.

    Returns rows (dt, mean_abs_residual), largest dt first.
    """
    grid = fd.periodic_grid(n, 1.0 / n)
    u0, q0 = study_fields(grid)
    rows = []
    for dt in dts:
        n_steps = int(round(t_final / dt))
        opts = StepperOptions(dt=dt, cfl_check=True, check_legendre=False)
        state = initial_state(params, grid, u0, q0)
        resids = []
        for _ in range(n_steps):
            state = step(params, grid, state, None, opts)
            resids.append(abs(state.report.energy_law_residual))
        rows.append((dt, float(np.mean(resids))))
    return rows
