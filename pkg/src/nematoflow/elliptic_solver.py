"""Matrix-free solvers: the anisotropic elliptic system and the Leray projection.

The elastic operator with admissible coefficients is symmetric positive
definite on zero-boundary fields (its bilinear form is coercive), so a
plain conjugate-gradient iteration applies.  Inhomogeneous Dirichlet
data is handled by lifting: solve for the zero-boundary correction to a
componentwise discrete-harmonic extension of the anchor values.

The Leray projection removes the gradient part of a velocity field via
compact-stencil Neumann Poisson solves; passes are repeated until the
discrete divergence meets its target, which makes the projection
idempotent and gradient-annihilating to solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fields as fd
from .errors import SolverConvergenceError
from .landau_de_gennes import MaterialParams


@dataclass(frozen=True)
class EllipticOptions:
    tol_rel: float = 1e-10
    max_iter: int | None = None  # defaults to 10x the unknown count
    preconditioner: str = "none"  # or "jacobi-L1-laplacian"

    def __post_init__(self):
        if not self.tol_rel > 0:
            raise ValueError("tol_rel must be positive")
        if self.preconditioner not in ("none", "jacobi-L1-laplacian"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class SolveInfo:
    iterations: int
    residual: float  # recomputed from the returned solution, not the CG estimate


def _dot(a, b):
    return float(np.vdot(a, b).real)


def cg(apply_op, b, x0=None, tol_rel=1e-10, max_iter=1000, precond=None, name="cg", dot=_dot):
    """Conjugate gradients for a matrix-free operator that is SPD with
    respect to the supplied inner product.

    Iterates until ||b - A x|| <= tol_rel * ||b|| or the budget runs
    out (raising SolverConvergenceError with the residual history).
    """
    bnorm = np.sqrt(dot(b, b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_op(x) if x0 is not None else b.copy()
    history = [np.sqrt(dot(r, r)) / bnorm]
    if history[0] <= tol_rel:
        return x, 0
    z = precond(r) if precond else r
    p = z.copy()
    rz = dot(r, z)
    for it in range(1, max_iter + 1):
        ap = apply_op(p)
        pap = dot(p, ap)
        if pap <= 0.0:
            raise SolverConvergenceError(
                f"{name}: operator lost positive definiteness (p.Ap = {pap:.3e})",
                residual=history[-1], history=history)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rnorm = np.sqrt(dot(r, r))
        history.append(rnorm / bnorm)
        if rnorm <= tol_rel * bnorm:
            return x, it
        z = precond(r) if precond else r
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverConvergenceError(
        f"{name}: no convergence in {max_iter} iterations (residual {history[-1]:.3e})",
        residual=history[-1], history=history)


def _zero_boundary(grid, x):
    mask = fd.boundary_mask(grid)
    if mask.any():
        x[mask] = 0.0
    return x


def l_operator(p: MaterialParams, grid: fd.GridSpec, shift: float = 0.0, wide: bool = False):
    """Zero-boundary elastic operator (optionally shifted by alpha*I)."""

    def apply_op(q):
        out = fd.l_op_apply(p, grid, q, wide=wide)
        if shift != 0.0:
            out = out + shift * q
        return _zero_boundary(grid, out)

    return apply_op


def harmonic_extension(grid: fd.GridSpec, bc: fd.BoundaryData, opts: EllipticOptions) -> np.ndarray:
    """Componentwise discrete L1-harmonic extension of the anchor data."""
    lift = grid.zeros((3, 3))
    mask = fd.boundary_mask(grid)
    if not mask.any():
        return lift
    lift[mask] = bc.q_anchor[mask]
    # -lap(lift + correction) = 0 with correction zero on the boundary
    rhs = _zero_boundary(grid, -fd.laplacian(grid, lift))
    n = rhs.size
    max_iter = opts.max_iter if opts.max_iter is not None else 10 * n

    def neg_lap(x):
        return _zero_boundary(grid, -fd.laplacian(grid, x))

    corr, _ = cg(neg_lap, rhs, tol_rel=min(opts.tol_rel, 1e-12), max_iter=max_iter, name="harmonic lift")
    return lift + corr


def solve_l(p: MaterialParams, grid: fd.GridSpec, f: np.ndarray, bc: fd.BoundaryData | None,
            opts: EllipticOptions = EllipticOptions(), shift: float = 0.0,
            wide: bool = False) -> tuple[np.ndarray, SolveInfo]:
    """Solve (shift*I + L)(Q) = f with Dirichlet anchor data.

    f must be symmetric traceless nodewise; the output satisfies the
    boundary data exactly and stays symmetric traceless to roundoff
    (the discrete operator preserves the Q-tensor space).  Residuals are
    measured in the discrete L2 norm relative to ||f||.
    """
    from .tensor_algebra import check_q

    check_q(f, tol=1e-10)
    op = l_operator(p, grid, shift, wide)
    lift = grid.zeros((3, 3))
    if bc is not None and fd.boundary_mask(grid).any():
        bc.validate(grid)
        lift = harmonic_extension(grid, bc, opts)
    rhs = f - fd.l_op_apply(p, grid, lift, wide=wide) - shift * lift
    rhs = _zero_boundary(grid, rhs.copy())
    n = rhs.size
    max_iter = opts.max_iter if opts.max_iter is not None else 10 * n
    precond = None
    if opts.preconditioner == "jacobi-L1-laplacian":
        diag = shift + p.L1 * 6.0 / grid.h ** 2
        precond = lambda r: r / diag
    corr, iters = cg(op, rhs, tol_rel=opts.tol_rel, max_iter=max_iter, precond=precond, name="elastic solve")
    q = lift + corr
    if bc is not None:
        bc.apply_q(grid, q)
    # keep the Q-tensor invariants tight after the linear combination
    q = 0.5 * (q + np.swapaxes(q, -1, -2))
    resid_field = _zero_boundary(grid, (fd.l_op_apply(p, grid, q, wide=wide) + shift * q - f).copy())
    fn = fd.norm_l2(grid, f)
    resid = fd.norm_l2(grid, resid_field) / (fn if fn > 0 else 1.0)
    return q, SolveInfo(iterations=iters, residual=resid)


# ---------------------------------------------------------------------------
# pressure Poisson and Leray projection

def _node_weights(grid):
    """Trapezoid node weights (no h^3); the Neumann laplacian is
    self-adjoint in this inner product."""
    return fd.quad_weights(grid) / grid.h ** 3


def poisson_compact(grid: fd.GridSpec, rhs: np.ndarray, opts: EllipticOptions = EllipticOptions(),
                    tol_rel: float | None = None) -> np.ndarray:
    """Compact 7-point Poisson solve lap(q) = rhs with homogeneous Neumann
    data on Dirichlet-velocity faces (mirror ghosts), periodic elsewhere.

    The right side is projected onto the solvable (weighted-mean-zero)
    subspace and the returned q carries the mean-zero gauge.
    """
    w = _node_weights(grid)
    wsum = float(np.sum(w))

    def mean_zero(x):
        return x - float(np.sum(w * x)) / wsum

    def dot_w(a, b):
        return float(np.sum(w * a * b))

    def neg_lap(x):
        P = fd.pad(grid, x, 1, "mirror")
        return mean_zero(-sum(fd.d2_padded(grid, P, ax) for ax in range(3)))

    b = mean_zero(-rhs)
    n = b.size
    max_iter = opts.max_iter if opts.max_iter is not None else 10 * n
    tol = tol_rel if tol_rel is not None else opts.tol_rel
    q, _ = cg(neg_lap, b, tol_rel=tol, max_iter=max_iter, name="pressure poisson", dot=dot_w)
    return mean_zero(q)


def div_central(grid: fd.GridSpec, u: np.ndarray) -> np.ndarray:
    """Central divergence with zero extension (adjoint of -grad on no-slip fields)."""
    P = fd.pad(grid, u, 1, "zero")
    return sum(fd.d1_padded(grid, P[..., ax], ax) for ax in range(3))


def grad_central(grid: fd.GridSpec, q: np.ndarray) -> np.ndarray:
    P = fd.pad(grid, q, 1, "mirror")
    return np.stack([fd.d1_padded(grid, P, ax) for ax in range(3)], axis=-1)


def leray_project(grid: fd.GridSpec, u: np.ndarray, opts: EllipticOptions = EllipticOptions(),
                  max_passes: int = 8, target: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Project a velocity field onto (discretely) divergence-free fields.

    Returns (u - grad q, q).  Each pass solves the compact-stencil
    Poisson problem lap q = div u with homogeneous Neumann data and
    subtracts the gradient; passes repeat until the central-difference
    divergence reaches the target (default max(1e-12, 1e-10 ||u||)) or
    the pass budget is spent.  No-slip boundary values are re-imposed on
    Dirichlet faces.
    """
    unorm = fd.norm_l2(grid, u)
    if target is None:
        target = max(1e-12, 1e-10 * unorm)
    mask = fd.boundary_mask(grid)
    qtotal = grid.zeros()
    uc = u.copy()
    for _ in range(max_passes):
        div = div_central(grid, uc)
        if fd.norm_l2(grid, div) <= target:
            break
        q = poisson_compact(grid, div, opts, tol_rel=1e-12)
        uc = uc - grad_central(grid, q)
        if mask.any():
            uc[mask] = 0.0
        qtotal += q
    return uc, qtotal
