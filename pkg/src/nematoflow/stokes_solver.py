"""Generalized Stokes solver with a tensor-valued viscosity coefficient.

Solves, on a box grid with no-slip velocity,

    alpha u - div( C : grad u ) + grad P = rhs,    div u = 0,

where C[k, l, i, j] contracts gradients as C : (g, h) =
g_ik C[k,l,i,j] h_jl and is the Newtonian part nu * delta_kl delta_ij
plus the positive-semidefinite nematic coupling coefficient.  alpha >= 0
is the mass shift a semi-implicit time step contributes; alpha = 0 is
the stationary system.

Saddle-point strategy: an Uzawa-type outer iteration on the pressure,
accelerated by conjugate gradients on the (SPD) Schur complement, with
matrix-free CG inner solves for the velocity operator.  The outer CG
residual is exactly the discrete divergence of the current velocity, so
the divergence target doubles as the stopping rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fields as fd
from .elliptic_solver import EllipticOptions, cg, div_central
from .errors import NumericalContractError, SolverConvergenceError
from .landau_de_gennes import MaterialParams
from .tensor_algebra import I3, a_hat

_NEWTONIAN = np.einsum("kl,ij->klij", I3, I3)


def coefficient_min_eigenvalue(coeff: np.ndarray) -> float:
    """Smallest eigenvalue of the nodewise 9x9 symmetrized coefficient form."""
    m = np.moveaxis(coeff, (-4, -3, -2, -1), (-4, -2, -3, -1))
    m = m.reshape(m.shape[:-4] + (9, 9))
    m = 0.5 * (m + np.swapaxes(m, -1, -2))
    return float(np.min(np.linalg.eigvalsh(m)))


def assemble_coefficient(p: MaterialParams, q: np.ndarray, check: bool = True) -> np.ndarray:
    """Total viscosity coefficient nu * identity + A(Q), nodewise.

    With ``check`` (the default) the nodewise ellipticity of the
    assembled coefficient is verified: the smallest eigenvalue of the
    9x9 form must be >= nu - 1e-10.  Disable for performance runs.
    """
    coeff = a_hat(p.xi, q) + p.nu * _NEWTONIAN
    if check:
        lam = coefficient_min_eigenvalue(coeff)
        if lam < p.nu - 1e-10:
            raise NumericalContractError(
                f"viscosity coefficient lost ellipticity: min eigenvalue {lam:.6e} < nu = {p.nu}"
            )
    return coeff


@dataclass
class StokesProblem:
    grid: fd.GridSpec
    coeff: np.ndarray  # (..., 3, 3, 3, 3), assembled by the caller
    rhs: np.ndarray    # (..., 3)
    opts: EllipticOptions = field(default_factory=EllipticOptions)
    alpha: float = 0.0
    stencil: str = "compact"  # "wide" pairs with the time stepper's central forms

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("mass shift alpha must be nonnegative")
        if self.stencil not in ("compact", "wide"):
            raise ValueError(f"unknown stencil {self.stencil!r}")
        if self.stencil == "wide" and self.alpha <= 0:
            raise ValueError("the wide stencil requires a positive mass shift")


def _zero_velocity_boundary(grid, u):
    mask = fd.boundary_mask(grid)
    if mask.any():
        u[mask] = 0.0
    return u


def _gradients(grid, u):
    """G[..., k, i] = d_k u_i with zero extension beyond the boundary."""
    P = fd.pad(grid, u, 1, "zero")
    return np.stack([fd.d1_padded(grid, P, ax) for ax in range(3)], axis=-2)


def make_velocity_operator(grid: fd.GridSpec, coeff: np.ndarray,
                           alpha: float = 0.0, stencil: str = "compact"):
    """Build the matvec u -> alpha u - div_l( C[k,l,i,j] d_k u_i ) (row j).

    "compact" discretizes the same-axis part conservatively with
    face-averaged coefficients (no odd-even decoupling, usable at
    alpha = 0); "wide" uses central differences throughout, which is the
    exact adjoint pairing for the centered gradient and is what the time
    stepper uses.  Cross-derivative terms are centered in both variants.
    Output rows at no-slip boundary nodes are zero.  Coefficient
    preprocessing (reshapes, face averages) happens once here so the
    returned closure is cheap inside CG.
    """
    constant = coeff.ndim == 4
    # C2[(k,i),(l,j)] so that v = g @ C2 with g flattened over (k,i)
    c2 = np.ascontiguousarray(coeff.transpose((0, 2, 1, 3)) if constant
                              else np.moveaxis(coeff, (-4, -3, -2, -1), (-4, -2, -3, -1)))
    c2 = c2.reshape(c2.shape[:-4] + (9, 9))
    cdiag = np.einsum("...kkij->...kij", coeff)
    if stencil == "compact":
        if constant:
            faces = [(cdiag[ax], cdiag[ax]) for ax in range(3)]
        else:
            Pc = fd.pad(grid, cdiag, 1, "mirror")
            faces = []
            for ax in range(3):
                c0 = fd._window(Pc, 1)[..., ax, :, :]
                cp = 0.5 * (c0 + fd._window(Pc, 1, fd._shift(ax, 1))[..., ax, :, :])
                cm = 0.5 * (c0 + fd._window(Pc, 1, fd._shift(ax, -1))[..., ax, :, :])
                faces.append((cp, cm))
    h2 = grid.h ** 2
    mask = fd.boundary_mask(grid)

    def contract(g):
        flat = g.reshape(g.shape[:-2] + (9,))
        if constant:
            out = flat @ c2
        else:
            out = np.matmul(flat[..., None, :], c2)[..., 0, :]
        return out.reshape(g.shape[:-2] + (3, 3))

    def apply(u):
        g = _gradients(grid, u)
        v = contract(g)
        if stencil == "wide":
            Pv = fd.pad(grid, v, 1, "zero")
            out = -sum(fd.d1_padded(grid, Pv[..., ax, :], ax) for ax in range(3))
        else:
            vdiag = np.einsum("...kij,...ki->...kj", cdiag, g)
            Pv = fd.pad(grid, v - vdiag, 1, "zero")
            out = -sum(fd.d1_padded(grid, Pv[..., ax, :], ax) for ax in range(3))
            Pu = fd.pad(grid, u, 1, "zero")
            for ax in range(3):
                du_p = fd._window(Pu, 1, fd._shift(ax, 1)) - fd._window(Pu, 1)
                du_m = fd._window(Pu, 1) - fd._window(Pu, 1, fd._shift(ax, -1))
                cp, cm = faces[ax]
                flux = (np.einsum("...ij,...i->...j", cp, du_p)
                        - np.einsum("...ij,...i->...j", cm, du_m))
                out = out - flux / h2
        if alpha != 0.0:
            out = out + alpha * u
        if mask.any():
            out[mask] = 0.0
        return out

    return apply


def apply_velocity_operator(grid: fd.GridSpec, coeff: np.ndarray, u: np.ndarray,
                            alpha: float = 0.0, stencil: str = "compact") -> np.ndarray:
    """One-shot convenience wrapper around make_velocity_operator."""
    return make_velocity_operator(grid, coeff, alpha, stencil)(u)


def pressure_gradient(grid: fd.GridSpec, p: np.ndarray) -> np.ndarray:
    """Centered pressure gradient on interior nodes, zero on no-slip rows."""
    P = fd.pad(grid, p, 1, "mirror")
    g = np.stack([fd.d1_padded(grid, P, ax) for ax in range(3)], axis=-1)
    return _zero_velocity_boundary(grid, g)


@dataclass
class StokesInfo:
    outer_iterations: int
    momentum_residual: float
    div_norm: float


def _spectral_symbols(grid: fd.GridSpec, stencil: str = "compact"):
    """Per-axis second-difference eigenvalues on the velocity unknowns
    (interior nodes of Dirichlet axes, all nodes of periodic axes).
    The wide variant is the symbol of the doubled central stencil."""
    syms = []
    for ax in range(3):
        if grid.bc[ax] == fd.DIRICHLET:
            m = grid.node_counts[ax] - 2
            theta = np.pi * np.arange(1, m + 1) / (m + 1)
        else:
            m = grid.node_counts[ax]
            theta = 2.0 * np.pi * np.arange(m) / m
        if stencil == "wide":
            lam = np.sin(theta) ** 2 / grid.h ** 2
        else:
            lam = 4.0 * np.sin(0.5 * theta) ** 2 / grid.h ** 2
        syms.append(lam)
    return syms


def make_velocity_preconditioner(grid: fd.GridSpec, coeff: np.ndarray, alpha: float,
                                 stencil: str = "compact"):
    """Exact inverse of alpha - nu_eff * lap on the no-slip velocity space.

    Sine transforms diagonalize the compact laplacian on Dirichlet axes,
    Fourier transforms on periodic axes.  nu_eff is the isotropic part
    of the coefficient; the anisotropic remainder is a spectrally
    bounded perturbation, so this is an effective CG preconditioner for
    both stencil variants (the mass shift covers the wide stencil's
    soft modes).
    """
    from scipy import fft as sfft

    nu_eff = float(np.mean(np.einsum("...kkii->...", coeff))) / 9.0
    syms = _spectral_symbols(grid, stencil)
    denom = (alpha + nu_eff * (syms[0][:, None, None] + syms[1][None, :, None]
                               + syms[2][None, None, :]))
    if alpha == 0.0 and fd.PERIODIC in grid.bc:
        denom = denom.copy()
        denom[denom <= 0] = np.inf  # project out constants on periodic axes
    dir_axes = [ax for ax in range(3) if grid.bc[ax] == fd.DIRICHLET]
    per_axes = [ax for ax in range(3) if grid.bc[ax] == fd.PERIODIC]
    inner = tuple(slice(1, -1) if grid.bc[ax] == fd.DIRICHLET else slice(None)
                  for ax in range(3))

    def apply(r):
        out = np.zeros_like(r)
        x = r[inner]
        for ax in dir_axes:
            x = sfft.dst(x, type=1, axis=ax, norm="ortho")
        if per_axes:
            x = sfft.fftn(x, axes=per_axes, norm="ortho")
        x = x / denom[..., None]
        if per_axes:
            x = sfft.ifftn(x, axes=per_axes, norm="ortho").real
        for ax in dir_axes:
            x = sfft.dst(x, type=1, axis=ax, norm="ortho")
        out[inner] = x
        return out

    return apply


def make_schur_preconditioner(grid: fd.GridSpec, coeff: np.ndarray, alpha: float,
                              stencil: str = "compact"):
    """Spectral symbol inverse of the pressure Schur complement.

    For the constant-coefficient operator the Schur symbol is
    |g(k)|^2 / (alpha + nu lap(k)) with g the centered-difference
    gradient symbol; multiplying by its (regularized) reciprocal in the
    cosine/Fourier basis flattens the spectrum, which keeps the outer
    iteration count grid-independent.  Boundary effects make this
    approximate; it is SPD, so CG convergence is unaffected in kind.
    """
    from scipy import fft as sfft

    nu_eff = float(np.mean(np.einsum("...kkii->...", coeff))) / 9.0
    lam_c, g2 = [], []
    for ax in range(3):
        m = grid.node_counts[ax]
        if grid.bc[ax] == fd.DIRICHLET:
            theta = np.pi * np.arange(m) / (m - 1)
        else:
            theta = 2.0 * np.pi * np.arange(m) / m
        if stencil == "wide":
            lam_c.append(np.sin(theta) ** 2 / grid.h ** 2)
        else:
            lam_c.append((2.0 - 2.0 * np.cos(theta)) / grid.h ** 2)
        g2.append(np.sin(theta) ** 2 / grid.h ** 2)
    lam = lam_c[0][:, None, None] + lam_c[1][None, :, None] + lam_c[2][None, None, :]
    gsym = g2[0][:, None, None] + g2[1][None, :, None] + g2[2][None, None, :]
    floor = 1e-8 * float(np.max(gsym))
    diag = (alpha + nu_eff * lam) / np.maximum(gsym, floor)
    diag[gsym <= floor] = 0.0  # kernel modes (constants, checkerboards) carry no update
    dir_axes = [ax for ax in range(3) if grid.bc[ax] == fd.DIRICHLET]
    per_axes = [ax for ax in range(3) if grid.bc[ax] == fd.PERIODIC]

    def apply(r):
        x = r
        for ax in dir_axes:
            x = sfft.dct(x, type=1, axis=ax, norm="ortho")
        if per_axes:
            x = sfft.fftn(x, axes=per_axes, norm="ortho")
        x = x * diag
        if per_axes:
            x = sfft.ifftn(x, axes=per_axes, norm="ortho").real
        for ax in dir_axes:
            x = sfft.dct(x, type=1, axis=ax, norm="ortho")
        return x

    return apply


def solve_stokes(prob: StokesProblem, u0: np.ndarray | None = None,
                 p0: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, StokesInfo]:
    """Solve the generalized Stokes system.

    Returns (u, pressure, info) with pressure in the mean-zero gauge and
    u exactly zero on no-slip boundaries.  The momentum residual is
    bounded by tol_rel * ||rhs|| and the divergence by the target
    max(1e-10 * ||u||-scale, 1e-12), both recomputed from the returned
    fields.  Raises SolverConvergenceError with the residual history on
    failure.
    """
    grid, coeff, opts = prob.grid, prob.coeff, prob.opts
    rhs = _zero_velocity_boundary(grid, prob.rhs.copy())
    rhs_norm = fd.norm_l2(grid, rhs)
    if rhs_norm == 0.0:
        zero_u = grid.zeros((3,))
        return zero_u, grid.zeros(), StokesInfo(0, 0.0, 0.0)

    nvel = rhs.size
    max_inner = opts.max_iter if opts.max_iter is not None else 10 * nvel
    inner_tol = min(1e-10, 10.0 * opts.tol_rel)
    precond = make_velocity_preconditioner(grid, coeff, prob.alpha, prob.stencil)
    warm = {"u": u0.copy() if u0 is not None else None}
    a_op = make_velocity_operator(grid, coeff, prob.alpha, prob.stencil)

    def a_solve(b, tol):
        x, _ = cg(a_op, b, x0=warm["u"], tol_rel=tol, max_iter=max_inner,
                  precond=precond, name="velocity solve")
        warm["u"] = x.copy()
        return x

    def schur(p):
        # S = G^T A^{-1} G, SPD on the mean-zero pressure space
        return -div_central(grid, a_solve(pressure_gradient(grid, p), inner_tol))

    # Schur equation S p = -D A^{-1} rhs; the outer CG residual is exactly
    # -div u(p), so the divergence target is the stopping rule.
    u_rhs = a_solve(rhs, inner_tol)
    b = -div_central(grid, u_rhs)
    div_scale = max(fd.norm_l2(grid, b), 1e-30)
    u_scale = fd.norm_l2(grid, u_rhs)
    div_target = max(1e-11, min(1e-9 * max(u_scale, 1.0),
                                1e-5 * grid.h ** 2 * u_scale))
    outer_tol = max(div_target / div_scale, 1e-14)
    max_outer = max(200, 4 * int(round(np.cbrt(b.size))))
    schur_precond = make_schur_preconditioner(grid, coeff, prob.alpha, prob.stencil)
    try:
        pressure, outer_iters = cg(schur, b, x0=p0, tol_rel=outer_tol,
                                   max_iter=max_outer, precond=schur_precond,
                                   name="pressure schur")
    except SolverConvergenceError as err:
        raise SolverConvergenceError(
            f"generalized Stokes solve did not reach its divergence target: {err}",
            residual=err.residual, history=err.history)
    g_final = rhs - pressure_gradient(grid, pressure)
    scale = max(fd.norm_l2(grid, g_final), 1e-30)
    final_tol = max(min(1e-12, 0.5 * opts.tol_rel * rhs_norm / scale), 1e-15)
    u = a_solve(g_final, final_tol)
    pressure = pressure - np.mean(pressure)

    mom = a_op(u) + pressure_gradient(grid, pressure) - rhs
    mom_res = fd.norm_l2(grid, mom) / rhs_norm
    div_norm = fd.norm_l2(grid, div_central(grid, u))
    if mom_res > max(10 * opts.tol_rel, 1e-9):
        raise SolverConvergenceError(
            f"momentum residual {mom_res:.3e} exceeds tolerance {opts.tol_rel:.1e}",
            residual=mom_res)
    return u, pressure, StokesInfo(outer_iters, mom_res, div_norm)
