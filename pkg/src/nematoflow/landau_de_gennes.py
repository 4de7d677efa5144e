"""Bulk and elastic free-energy densities and their algebraic machinery.

Covers the double-well bulk potential, its tensor derivative, the
anisotropic elastic density with three independent constants, the rank-6
coefficient tensors of the elastic operator in divergence form, and the
ellipticity (strong Legendre) verifier built on their exact 27x27
quadratic-form matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .tensor_algebra import I3, frobenius, norm

_D = np.eye(3)


@dataclass(frozen=True)
class MaterialParams:
    """Material coefficients for the coupled model.

    a, b, c      bulk potential coefficients (b, c > 0; a may have any sign)
    L1, L2, L3   elastic constants; requires L1 > 0 and L1 + L2 + L3 > 0
    xi           flow-alignment parameter
    nu           Newtonian viscosity (> 0)
    gamma        rotational mobility (> 0, default 1)
    """

    a: float = -1.0
    b: float = 1.0
    c: float = 1.0
    L1: float = 1.0
    L2: float = 0.0
    L3: float = 0.0
    xi: float = 0.0
    nu: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.b > 0 or not self.c > 0:
            raise ValueError(f"bulk coefficients require b > 0 and c > 0, got b={self.b}, c={self.c}")
        if not self.L1 > 0 or not self.L0 > 0:
            raise ValueError(
                "elastic coefficients require L1 > 0 and L1 + L2 + L3 > 0, "
                f"got L1={self.L1}, L1+L2+L3={self.L0}"
            )
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got nu={self.nu}")
        if not self.gamma > 0:
            raise ValueError(f"rotational mobility must be positive, got gamma={self.gamma}")

    @property
    def L0(self) -> float:
        return self.L1 + self.L2 + self.L3


def bulk_density(p: MaterialParams, q: np.ndarray) -> np.ndarray:
    """Bulk energy density (a/2) tr Q^2 - (b/3) tr Q^3 + (c/4) (tr Q^2)^2."""
    tr2 = frobenius(q, q)
    tr3 = np.einsum("...ij,...jk,...ki->...", q, q, q)
    return 0.5 * p.a * tr2 - p.b / 3.0 * tr3 + 0.25 * p.c * tr2 ** 2


def bulk_derivative(p: MaterialParams, q: np.ndarray) -> np.ndarray:
    """Tensor derivative J(Q) of the bulk density on the traceless symmetric space.

    J(Q) = a Q - b (Q^2 - tr(Q^2) I / 3) + c tr(Q^2) Q; symmetric traceless.
    """
    tr2 = frobenius(q, q)[..., None, None]
    q2 = q @ q
    return p.a * q - p.b * (q2 - tr2 * (I3 / 3.0)) + p.c * tr2 * q


def elastic_density(p: MaterialParams, g: np.ndarray) -> np.ndarray:
    """Elastic energy density for a Q-gradient g, g[..., i, j, k] = d_k Q_ij.

    (1/2) (L1 |g|^2 + L2 (div Q)_i (div Q)_i + L3 g_ijk g_ikj)
    """
    full = np.einsum("...ijk,...ijk->...", g, g)
    divq = np.einsum("...ijj->...i", g)
    e2 = np.einsum("...i,...i->...", divq, divq)
    e3 = np.einsum("...ijk,...ikj->...", g, g)
    return 0.5 * (p.L1 * full + p.L2 * e2 + p.L3 * e3)


def elastic_tensor(p: MaterialParams, variant: str = "A") -> np.ndarray:
    """Rank-6 coefficient tensor of the elastic operator in divergence form.

    Indexed [l, k, i, j, ip, jp]: the operator applied to a (not
    necessarily traceless) 3x3 field Q is -d_l ( A[l,k,i,j,ip,jp] d_k
    Q_ipjp ).  ``variant="A_tilde"`` interchanges the two derivative
    slots l and k, which represents the same operator but a different
    quadratic form; the form of A is bounded below by L1+L2+L3, the form
    of A_tilde by L1.
    """
    if variant not in ("A", "A_tilde"):
        raise ValueError(f"unknown elastic tensor variant {variant!r}")
    c4 = 0.25 * (p.L2 + p.L3)
    d = _D
    A = p.L1 * np.einsum("lk,ip,jq->lkijpq", d, d, d)
    if variant == "A":
        # delta^j_ip delta^k_i delta^l_jp
        A = A + c4 * np.einsum("jp,ki,lq->lkijpq", d, d, d)
        # delta^i_ip delta^l_jp delta^k_j
        A = A + c4 * np.einsum("ip,lq,kj->lkijpq", d, d, d)
        # delta^i_k delta^ip_l delta^j_jp
        A = A + c4 * np.einsum("ik,pl,jq->lkijpq", d, d, d)
        # delta^j_k delta^ip_l delta^jp_i
        A = A + c4 * np.einsum("jk,pl,qi->lkijpq", d, d, d)
        # -(4/3) delta^ip_jp delta^i_l delta^j_k
        A = A - c4 * (4.0 / 3.0) * np.einsum("pq,il,jk->lkijpq", d, d, d)
        # -(4/3) delta^i_j delta^ip_l delta^jp_k
        A = A - c4 * (4.0 / 3.0) * np.einsum("ij,pl,qk->lkijpq", d, d, d)
        # +(4/9) delta^i_j delta^ip_jp delta^k_l
        A = A + c4 * (4.0 / 9.0) * np.einsum("ij,pq,kl->lkijpq", d, d, d)
    else:
        # same seven terms with the derivative indices k and l swapped
        A = A + c4 * np.einsum("jp,li,kq->lkijpq", d, d, d)
        A = A + c4 * np.einsum("ip,kq,lj->lkijpq", d, d, d)
        A = A + c4 * np.einsum("il,pk,jq->lkijpq", d, d, d)
        A = A + c4 * np.einsum("jl,pk,qi->lkijpq", d, d, d)
        A = A - c4 * (4.0 / 3.0) * np.einsum("pq,ik,jl->lkijpq", d, d, d)
        A = A - c4 * (4.0 / 3.0) * np.einsum("ij,pk,ql->lkijpq", d, d, d)
        A = A + c4 * (4.0 / 9.0) * np.einsum("ij,pq,kl->lkijpq", d, d, d)
    return A


def elastic_form_matrix(p: MaterialParams, variant: str = "A") -> np.ndarray:
    """Symmetrized 27x27 matrix of the rank-6 tensor's quadratic form.

    The form acts on gradient-type arguments xi[l, i, j] (27 components):
    form(xi) = A[l,k,i,j,ip,jp] xi[l,i,j] xi[k,ip,jp].
    """
    A = elastic_tensor(p, variant)
    m = A.transpose(0, 2, 3, 1, 4, 5).reshape(27, 27)
    return 0.5 * (m + m.T)


def elastic_form_apply(A: np.ndarray, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Contract the rank-6 tensor with two gradients g, h (g[..., i, j, k] = d_k Q_ij)."""
    return np.einsum("lkijpq,...ijl,...pqk->...", A, g, h)


def legendre_min(p: MaterialParams) -> float:
    """Exact ellipticity margin of the elastic operator.

    Selects the divergence-form tensor whose quadratic form is coercive
    for the sign of L2+L3 (A for L2+L3 <= 0, the slot-interchanged
    variant otherwise) and returns the smallest eigenvalue of its 27x27
    symmetrized matrix.  Guaranteed >= min(L1, L1+L2+L3) up to roundoff.
    """
    variant = "A" if p.L2 + p.L3 <= 0 else "A_tilde"
    eigs = np.linalg.eigvalsh(elastic_form_matrix(p, variant))
    return float(eigs[0])


def uniaxial_q(s: float, n=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Uniaxial Q-tensor s (n x n - I/3) for a unit director n."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    return s * (np.outer(n, n) - I3 / 3.0)


def uniaxial_critical_s(p: MaterialParams) -> list[float]:
    """All scalar order parameters at which the bulk density is critical.

    Restricted to uniaxial states Q = s (n x n - I/3) the bulk density is
    a quartic in s, so its critical points are s = 0 plus the real roots
    of a quadratic.  Roots are located by bracketed root-finding
    (tolerance ~1e-14) and each returned s is verified to annihilate the
    bulk derivative to 1e-10.
    """
    # d/ds bulk(s) = (2 s / 9) (2 c s^2 - b s + 3 a)
    def g(s):
        return 2.0 * p.c * s * s - p.b * s + 3.0 * p.a

    roots = [0.0]
    disc = p.b * p.b - 24.0 * p.a * p.c
    if disc >= 0.0:
        vertex = p.b / (4.0 * p.c)
        half_width = np.sqrt(disc) / (4.0 * p.c)
        lo, hi = vertex - half_width, vertex + half_width
        pad = max(1.0, half_width)
        for bracket in ((lo - pad, vertex), (vertex, hi + pad)):
            if g(bracket[0]) * g(bracket[1]) < 0:
                s = brentq(g, bracket[0], bracket[1], xtol=1e-14, rtol=1e-14)
                if abs(s) > 1e-13 and all(abs(s - r) > 1e-10 for r in roots):
                    roots.append(float(s))
        if disc == 0.0 and abs(vertex) > 1e-13:
            roots.append(float(vertex))
    for s in roots:
        resid = norm(bulk_derivative(p, uniaxial_q(s)))
        if resid >= 1e-10:
            raise AssertionError(f"critical point s={s} has residual {resid:.3e}")
    return sorted(roots)
