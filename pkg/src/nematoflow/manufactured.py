"""Closed-form fields and convergence ladders for solver verification.

The elliptic ladder uses Q*(x) = phi(x) Qhat with phi a product of
sines vanishing on the unit box; the Stokes ladder uses the divergence
free velocity u* = curl-of-bump and a cosine-product pressure.  All
right-hand sides are evaluated from hand-differentiated formulas, so a
broken stencil or solver shows up as a broken convergence order.
"""

from __future__ import annotations

import numpy as np

from . import fields as fd
from .elliptic_solver import EllipticOptions, solve_l
from .landau_de_gennes import MaterialParams
from .stokes_solver import StokesProblem, assemble_coefficient, solve_stokes

QHAT = np.array([[0.3, 0.4, -0.1],
                 [0.4, -0.5, 0.25],
                 [-0.1, 0.25, 0.2]])


def _xyz(grid: fd.GridSpec):
    return grid.meshgrid()


def phi_sines(grid: fd.GridSpec):
    x, y, z = _xyz(grid)
    return np.sin(np.pi * x) * np.sin(np.pi * y) * np.sin(np.pi * z)


def phi_hessian(grid: fd.GridSpec):
    """All second derivatives of the sine product, shape (..., 3, 3)."""
    x, y, z = _xyz(grid)
    s = [np.sin(np.pi * x), np.sin(np.pi * y), np.sin(np.pi * z)]
    c = [np.cos(np.pi * x), np.cos(np.pi * y), np.cos(np.pi * z)]
    hess = np.empty(grid.shape((3, 3)))
    phi = s[0] * s[1] * s[2]
    for a in range(3):
        for b in range(3):
            if a == b:
                hess[..., a, b] = -np.pi ** 2 * phi
            else:
                cc = [s[0], s[1], s[2]]
                cc[a] = c[a]
                cc[b] = c[b]
                hess[..., a, b] = np.pi ** 2 * cc[0] * cc[1] * cc[2]
    return hess


def elliptic_exact(p: MaterialParams, grid: fd.GridSpec):
    """(Q*, L(Q*)) for the zero-boundary manufactured orientation field."""
    phi = phi_sines(grid)
    q = phi[..., None, None] * QHAT
    hess = phi_hessian(grid)
    lap_phi = np.einsum("...aa->...", hess)
    qh = np.einsum("ik,...kj->...ij", QHAT, hess)
    tr = np.einsum("lk,...kl->...", QHAT, hess)
    aniso = qh + np.swapaxes(qh, -1, -2) - (2.0 / 3.0) * tr[..., None, None] * np.eye(3)
    f = -p.L1 * lap_phi[..., None, None] * QHAT - 0.5 * (p.L2 + p.L3) * aniso
    return q, f


def stokes_exact(grid: fd.GridSpec):
    """Manufactured no-slip velocity, its Jacobian and Hessian, and pressure.

    u = (d_y psi, -d_x psi, 0) with psi = prod sin^2(pi x_a): exactly
    divergence free and zero on the unit-box boundary.
    Returns (u, grad_u, hess_u, p, grad_p) with grad_u[..., i, j] =
    d_j u_i and hess_u[..., i, a, b] = d_a d_b u_i.
    """
    x, y, z = _xyz(grid)
    pi = np.pi
    sx2, sy2, sz2 = np.sin(pi * x) ** 2, np.sin(pi * y) ** 2, np.sin(pi * z) ** 2
    s2x, s2y, s2z = np.sin(2 * pi * x), np.sin(2 * pi * y), np.sin(2 * pi * z)
    c2x, c2y, c2z = np.cos(2 * pi * x), np.cos(2 * pi * y), np.cos(2 * pi * z)

    u = np.zeros(grid.shape((3,)))
    u[..., 0] = pi * sx2 * s2y * sz2
    u[..., 1] = -pi * s2x * sy2 * sz2

    grad_u = np.zeros(grid.shape((3, 3)))
    grad_u[..., 0, 0] = pi ** 2 * s2x * s2y * sz2
    grad_u[..., 0, 1] = 2 * pi ** 2 * sx2 * c2y * sz2
    grad_u[..., 0, 2] = pi ** 2 * sx2 * s2y * s2z
    grad_u[..., 1, 0] = -2 * pi ** 2 * c2x * sy2 * sz2
    grad_u[..., 1, 1] = -pi ** 2 * s2x * s2y * sz2
    grad_u[..., 1, 2] = -pi ** 2 * s2x * sy2 * s2z

    hess = np.zeros(grid.shape((3, 3, 3)))
    hess[..., 0, 0, 0] = 2 * pi ** 3 * c2x * s2y * sz2
    hess[..., 0, 0, 1] = hess[..., 0, 1, 0] = 2 * pi ** 3 * s2x * c2y * sz2
    hess[..., 0, 0, 2] = hess[..., 0, 2, 0] = pi ** 3 * s2x * s2y * s2z
    hess[..., 0, 1, 1] = -4 * pi ** 3 * sx2 * s2y * sz2
    hess[..., 0, 1, 2] = hess[..., 0, 2, 1] = 2 * pi ** 3 * sx2 * c2y * s2z
    hess[..., 0, 2, 2] = 2 * pi ** 3 * sx2 * s2y * c2z
    hess[..., 1, 0, 0] = 4 * pi ** 3 * s2x * sy2 * sz2
    hess[..., 1, 0, 1] = hess[..., 1, 1, 0] = -2 * pi ** 3 * c2x * s2y * sz2
    hess[..., 1, 0, 2] = hess[..., 1, 2, 0] = -2 * pi ** 3 * c2x * sy2 * s2z
    hess[..., 1, 1, 1] = -2 * pi ** 3 * s2x * c2y * sz2
    hess[..., 1, 1, 2] = hess[..., 1, 2, 1] = -pi ** 3 * s2x * s2y * s2z
    hess[..., 1, 2, 2] = -2 * pi ** 3 * s2x * sy2 * c2z

    cx, cy, cz = np.cos(pi * x), np.cos(pi * y), np.cos(pi * z)
    sx, sy, sz = np.sin(pi * x), np.sin(pi * y), np.sin(pi * z)
    pressure = cx * cy * cz
    grad_p = np.zeros(grid.shape((3,)))
    grad_p[..., 0] = -pi * sx * cy * cz
    grad_p[..., 1] = -pi * cx * sy * cz
    grad_p[..., 2] = -pi * cx * cy * sz
    return u, grad_u, hess, pressure, grad_p


def observed_orders(errors) -> list[float]:
    return [float(np.log2(errors[k] / errors[k + 1])) for k in range(len(errors) - 1)]


def elliptic_ladder(p: MaterialParams, ns=(8, 16, 32), tol_rel=1e-12):
    """Continuum manufactured-solution study for the elastic solve.

    Returns rows (n, h, l2_error); the expected observed order is 2.
    """
    rows = []
    opts = EllipticOptions(tol_rel=tol_rel)
    for n in ns:
        grid = fd.box_grid(n)
        q_exact, f = elliptic_exact(p, grid)
        bc = fd.BoundaryData(grid.zeros((3, 3)))
        q, _ = solve_l(p, grid, f, bc, opts)
        rows.append((n, grid.h, fd.norm_l2(grid, q - q_exact)))
    return rows


def stokes_ladder(p: MaterialParams, q_const: np.ndarray, ns=(8, 16, 32), tol_rel=1e-10):
    """Manufactured Stokes study at a spatially constant coefficient.

    q_const = 0 with xi = 0 exercises the Newtonian path; a nonzero
    constant orientation exercises the full tensor coefficient.
    Returns rows (n, h, velocity_l2_error, div_norm, u_norm).
    """
    rows = []
    coeff = assemble_coefficient(p, np.asarray(q_const, dtype=float))
    for n in ns:
        grid = fd.box_grid(n)
        u_exact, _, hess, _, grad_p = stokes_exact(grid)
        rhs = -np.einsum("klij,...ikl->...j", coeff, hess) + grad_p
        prob = StokesProblem(grid, coeff, rhs, EllipticOptions(tol_rel=tol_rel))
        u, _, info = solve_stokes(prob)
        rows.append((n, grid.h, fd.norm_l2(grid, u - u_exact), info.div_norm, fd.norm_l2(grid, u)))
    return rows
