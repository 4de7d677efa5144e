"""Pointwise 3x3 tensor kernels for nematic hydrodynamics.

All operations act on the trailing two axes of numpy arrays, so a single
code path serves scalars (shape ``(3, 3)``) and whole structured-grid
fields (shape ``(nx, ny, nz, 3, 3)``).  Every function is pure; nothing
here owns mutable state, so concurrent use is safe.

Conventions: a velocity gradient ``m`` is stored Jacobian-style,
``m[i, j] = d u_i / d x_j``.  The Frobenius product ``a : b`` is the
entrywise sum ``a_ij b_ij``.
"""

from __future__ import annotations

import numpy as np

I3 = np.eye(3)

# Trace drift above this threshold triggers re-projection onto the
# traceless subspace when constructing Q-tensors.
TRACE_TOL = 1e-14


def frobenius(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Frobenius product a:b = sum_ij a_ij b_ij (batched over leading axes)."""
    return np.einsum("...ij,...ij->...", a, b)


def norm(a: np.ndarray) -> np.ndarray:
    """Frobenius norm |a| per tensor."""
    return np.sqrt(frobenius(a, a))


def sym(m: np.ndarray) -> np.ndarray:
    """Symmetric part (m + m^T)/2."""
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def antisym(m: np.ndarray) -> np.ndarray:
    """Antisymmetric part (m - m^T)/2."""
    return 0.5 * (m - np.swapaxes(m, -1, -2))


def trace(m: np.ndarray) -> np.ndarray:
    return np.einsum("...ii->...", m)


def deviatoric(m: np.ndarray) -> np.ndarray:
    """Remove the isotropic part: m - (tr m / 3) I."""
    return m - trace(m)[..., None, None] * (I3 / 3.0)


def make_q(m: np.ndarray) -> np.ndarray:
    """Project m onto the symmetric traceless (Q-tensor) space.

    Symmetrizes exactly and subtracts the trace when the drift exceeds
    TRACE_TOL, which keeps long operator compositions from accumulating
    a secular trace.
    """
    q = sym(np.asarray(m, dtype=float))
    tr = trace(q)
    if np.max(np.abs(tr)) > TRACE_TOL:
        q = q - tr[..., None, None] * (I3 / 3.0)
    return q


def check_q(q: np.ndarray, tol: float = 1e-12) -> None:
    """Raise ValueError unless q is symmetric traceless within tol."""
    q = np.asarray(q)
    asym = np.max(np.abs(q - np.swapaxes(q, -1, -2))) if q.size else 0.0
    tr = np.max(np.abs(trace(q))) if q.size else 0.0
    if asym > tol or tr > tol:
        raise ValueError(
            f"tensor is not symmetric traceless: |q - q^T| = {asym:.3e}, "
            f"|tr q| = {tr:.3e} (tol {tol:.1e})"
        )


# Packed storage for I/O: the five independent components of a symmetric
# traceless matrix, ordered (q00, q01, q02, q11, q12).

def pack5(q: np.ndarray) -> np.ndarray:
    return np.stack(
        [q[..., 0, 0], q[..., 0, 1], q[..., 0, 2], q[..., 1, 1], q[..., 1, 2]],
        axis=-1,
    )


def unpack5(c: np.ndarray) -> np.ndarray:
    shape = c.shape[:-1] + (3, 3)
    q = np.empty(shape, dtype=c.dtype)
    q[..., 0, 0] = c[..., 0]
    q[..., 0, 1] = q[..., 1, 0] = c[..., 1]
    q[..., 0, 2] = q[..., 2, 0] = c[..., 2]
    q[..., 1, 1] = c[..., 3]
    q[..., 1, 2] = q[..., 2, 1] = c[..., 4]
    q[..., 2, 2] = -c[..., 0] - c[..., 3]
    return q


def _as_coeff(xi) -> np.ndarray:
    """Broadcast a scalar or per-point coefficient over tensor axes."""
    xi = np.asarray(xi, dtype=float)
    return xi[..., None, None]


def s_q(xi, q: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Flow-alignment coupling operator.

    S_Q(M) = xi * ( D.(Q + I/3) + (Q + I/3).D - 2 (Q + I/3) ((Q + I/3) : M) )

    with D the symmetric part of M.  The output is symmetric by
    construction and traceless up to roundoff for any 3x3 input M; the
    operator is linear in M.
    """
    qh = q + I3 / 3.0
    d = sym(m)
    coupling = np.einsum("...ij,...ij->...", qh, m)[..., None, None]
    out = d @ qh + qh @ d - 2.0 * qh * coupling
    return _as_coeff(xi) * out


def corotation(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Co-rotation commutator q.w - w.q for an antisymmetric w.

    Rejects w whose symmetric part exceeds 1e-10 in Frobenius norm: that
    signals the caller passed a full gradient instead of its rotation
    part.
    """
    wsym = np.max(norm(sym(w)))
    if wsym > 1e-10:
        raise ValueError(f"corotation expects an antisymmetric matrix, |sym(w)| = {wsym:.3e}")
    return q @ w - w @ q


def t_tensor(xi, q: np.ndarray, gradv: np.ndarray) -> np.ndarray:
    """Traceless symmetric viscous coupling T(Q, grad v).

    T = S_Q(D(v)) - Q.W(v) + W(v).Q with D/W the symmetric/antisymmetric
    parts of the velocity gradient.  Linear in gradv.
    """
    w = antisym(gradv)
    return s_q(xi, q, gradv) - q @ w + w @ q


def sigma_viscous(xi, q: np.ndarray, gradv: np.ndarray) -> np.ndarray:
    """Nonlinear viscous stress sigma(Q, grad v).

    sigma = S_Q(T) - Q.T + T.Q with T = t_tensor(xi, q, gradv).  Its
    defining property is the contraction identity

        sigma(Q, grad u) : grad v = T(Q, grad u) : T(Q, grad v),

    so sigma : grad u = |T|^2 >= 0.
    """
    t = t_tensor(xi, q, gradv)
    return s_q(xi, q, t) - q @ t + t @ q


# Canonical basis of velocity gradients: _GRAD_BASIS[i, k] has
# d u_i / d x_k = 1 and all other entries zero.
_GRAD_BASIS = np.zeros((3, 3, 3, 3))
for _i in range(3):
    for _k in range(3):
        _GRAD_BASIS[_i, _k, _i, _k] = 1.0


def a_hat(xi, q: np.ndarray) -> np.ndarray:
    """Rank-4 viscous coupling coefficient A(Q).

    Returns an array with trailing axes (k, l, i, j) such that for all
    gradients g, h:

        g_ik a[k, l, i, j] h_jl = T(Q, g) : T(Q, h)

    (g_ik = d u_i / d x_k).  Assembled as a Gram matrix of t_tensor
    applied to the 9 canonical basis gradients, which guarantees exact
    consistency with t_tensor and makes the 9x9 flattening symmetric
    positive semidefinite by construction.
    """
    q = np.asarray(q, dtype=float)
    # tb[i, k] = T(Q, e_i x e_k), batched over the leading axes of q.
    batch = q.shape[:-2]
    tb = np.empty((3, 3) + batch + (3, 3))
    for i in range(3):
        for k in range(3):
            tb[i, k] = t_tensor(xi, q, _GRAD_BASIS[i, k])
    return np.einsum("ik...ab,jl...ab->...klij", tb, tb)


def a_hat_contract(a: np.ndarray, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Contract a rank-4 coefficient with two gradients: g_ik a_klij h_jl."""
    return np.einsum("...klij,...ik,...jl->...", a, g, h)


def cancellation_check(xi, q: np.ndarray, m: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Two-sided evaluation of the nonlinear-term cancellation law.

    For symmetric traceless m and arbitrary p with symmetric part S and
    antisymmetric part A:

        (-S_Q(M) + Q.M - M.Q) : P  ==  (-S_Q(S) + Q.A - A.Q) : M.

    Returns |lhs - rhs|, which the contract requires below 1e-12.
    """
    check_q(m, tol=1e-10)
    s, a = sym(p), antisym(p)
    lhs = frobenius(-s_q(xi, q, m) + q @ m - m @ q, p)
    rhs = frobenius(-s_q(xi, q, s) + q @ a - a @ q, m)
    return np.abs(lhs - rhs)
