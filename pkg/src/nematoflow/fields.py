"""Structured-grid fields and finite-difference operators on a box domain.

Vertex-centered collocated grid.  A Dirichlet axis with n cells carries
n+1 nodes including both boundary nodes; a periodic axis carries n nodes
covering [0, L).  All stencils are second order.  Ghost values at
Dirichlet faces come from quadratic extrapolation through the boundary
node, which makes the centered formulas at boundary nodes coincide with
the one-sided second-order ones.

Array layout: spatial axes first, tensor component axes trailing, e.g. a
Q-tensor field has shape (N0, N1, N2, 3, 3) and its gradient
(N0, N1, N2, 3, 3, 3) with g[..., i, j, k] = d_k Q_ij.

Kernels are data-parallel over nodes (pure numpy, no shared mutable
state) and reductions use numpy's deterministic summation order, so
repeated runs are bit-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .landau_de_gennes import MaterialParams, bulk_density, bulk_derivative, elastic_density, elastic_tensor
from .tensor_algebra import I3, trace

DIRICHLET = "dirichlet"
PERIODIC = "periodic"

_BIN_MAGIC = b"NMFBIN01"
_BIN_HEADER = "<8s3idi"  # magic, dims, spacing, component count
_BIN_HEADER_LEN = 64


@dataclass(frozen=True)
class GridSpec:
    """Uniform box grid: n cells per axis, spacing h, boundary mode per axis."""

    n: tuple[int, int, int]
    h: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    bc: tuple[str, str, str] = (DIRICHLET, DIRICHLET, DIRICHLET)

    def __post_init__(self):
        if len(self.n) != 3 or any(int(m) < 4 for m in self.n):
            raise ValueError(f"grid needs at least 4 cells per axis, got {self.n}")
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        for mode in self.bc:
            if mode not in (DIRICHLET, PERIODIC):
                raise ValueError(f"unknown boundary mode {mode!r}")

    @property
    def node_counts(self) -> tuple[int, int, int]:
        return tuple(m + 1 if mode == DIRICHLET else m for m, mode in zip(self.n, self.bc))

    @property
    def extent(self) -> tuple[float, float, float]:
        return tuple(m * self.h for m in self.n)

    def shape(self, comp: tuple = ()) -> tuple:
        return self.node_counts + comp

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.h * np.arange(self.node_counts[axis])

    def meshgrid(self):
        return np.meshgrid(*(self.axis_coords(a) for a in range(3)), indexing="ij")

    def zeros(self, comp: tuple = ()) -> np.ndarray:
        return np.zeros(self.shape(comp))


def periodic_grid(n: int, h: float, origin=(0.0, 0.0, 0.0)) -> GridSpec:
    return GridSpec((n, n, n), h, origin, (PERIODIC,) * 3)


def box_grid(n: int, length: float = 1.0) -> GridSpec:
    """Dirichlet unit-style box [0, length]^3 with n cells per axis."""
    return GridSpec((n, n, n), length / n)


# ---------------------------------------------------------------------------
# padding and stencil primitives

def _edge(f, axis, index):
    sl = [slice(None)] * f.ndim
    sl[axis] = slice(index, index + 1) if index >= 0 else slice(index, index + 1 or None)
    return f[tuple(sl)]


def pad(grid: GridSpec, f: np.ndarray, depth: int = 1, mode: str = "extrapolate") -> np.ndarray:
    """Add ghost layers on every face.

    Periodic axes wrap regardless of mode.  Dirichlet axes support:
    "extrapolate" (quadratic through the boundary node), "zero"
    (zero extension), "mirror" (even reflection about the boundary node,
    i.e. homogeneous Neumann).
    """
    if depth not in (1, 2):
        raise ValueError("pad depth must be 1 or 2")
    P = f
    for ax in range(3):
        if grid.bc[ax] == PERIODIC:
            sl_lo = [slice(None)] * P.ndim
            sl_lo[ax] = slice(P.shape[ax] - depth, None)
            sl_hi = [slice(None)] * P.ndim
            sl_hi[ax] = slice(0, depth)
            P = np.concatenate([P[tuple(sl_lo)], P, P[tuple(sl_hi)]], axis=ax)
            continue
        f0, f1, f2 = _edge(P, ax, 0), _edge(P, ax, 1), _edge(P, ax, 2)
        g0, g1, g2 = _edge(P, ax, -1), _edge(P, ax, -2), _edge(P, ax, -3)
        if mode == "extrapolate":
            lo = [3 * f0 - 3 * f1 + f2]
            hi = [3 * g0 - 3 * g1 + g2]
            if depth == 2:
                lo = [6 * f0 - 8 * f1 + 3 * f2] + lo
                hi = hi + [6 * g0 - 8 * g1 + 3 * g2]
        elif mode == "zero":
            z = np.zeros_like(f0)
            lo = [z] * depth
            hi = [z] * depth
        elif mode == "mirror":
            lo = [f1]
            hi = [g1]
            if depth == 2:
                lo = [f2] + lo
                hi = hi + [g2]
        else:
            raise ValueError(f"unknown pad mode {mode!r}")
        P = np.concatenate(lo + [P] + hi, axis=ax)
    return P


def _window(P: np.ndarray, depth: int, shifts=(0, 0, 0)):
    """Physical window of a padded array, offset by per-axis shifts."""
    sl = [slice(None)] * P.ndim
    for ax in range(3):
        sl[ax] = slice(depth + shifts[ax], P.shape[ax] - depth + shifts[ax])
    return P[tuple(sl)]


def _shift(ax, s):
    out = [0, 0, 0]
    out[ax] = s
    return tuple(out)


def d1_padded(grid, P, ax, depth=1):
    return (_window(P, depth, _shift(ax, 1)) - _window(P, depth, _shift(ax, -1))) / (2.0 * grid.h)


def d2_padded(grid, P, ax, depth=1):
    c = _window(P, depth)
    return (_window(P, depth, _shift(ax, 1)) - 2.0 * c + _window(P, depth, _shift(ax, -1))) / grid.h ** 2


def d2_wide_padded(grid, P, ax, depth=2):
    c = _window(P, depth)
    return (_window(P, depth, _shift(ax, 2)) - 2.0 * c + _window(P, depth, _shift(ax, -2))) / (4.0 * grid.h ** 2)


def cross_padded(grid, P, ax1, ax2, depth=1):
    s = [0, 0, 0]
    s[ax1] += 1
    s[ax2] += 1
    pp = _window(P, depth, tuple(s))
    s[ax2] -= 2
    pm = _window(P, depth, tuple(s))
    s[ax1] -= 2
    mm = _window(P, depth, tuple(s))
    s[ax2] += 2
    mp = _window(P, depth, tuple(s))
    return (pp - pm - mp + mm) / (4.0 * grid.h ** 2)


def second_padded(grid, P, a, b, depth, wide):
    """d_a d_b on a padded array; the diagonal uses the compact stencil
    unless wide, cross terms are always the centered corner stencil."""
    if a == b:
        return d2_wide_padded(grid, P, a, depth) if wide else d2_padded(grid, P, a, depth)
    return cross_padded(grid, P, a, b, depth)


# ---------------------------------------------------------------------------
# differential operators on physical fields

def d1(grid, f, ax, mode="extrapolate"):
    return d1_padded(grid, pad(grid, f, 1, mode), ax)


def grad_scalar(grid, f, mode="extrapolate"):
    P = pad(grid, f, 1, mode)
    return np.stack([d1_padded(grid, P, ax) for ax in range(3)], axis=-1)


def grad_vec(grid, u, mode="extrapolate"):
    """Jacobian J[..., i, j] = d_j u_i of a vector field."""
    P = pad(grid, u, 1, mode)
    return np.stack([d1_padded(grid, P, ax) for ax in range(3)], axis=-1)


def div_vec(grid, u, mode="extrapolate"):
    P = pad(grid, u, 1, mode)
    return sum(d1_padded(grid, P[..., ax], ax) for ax in range(3))


def grad_q(grid, q, mode="extrapolate"):
    """Gradient of a tensor field, g[..., i, j, k] = d_k Q_ij."""
    P = pad(grid, q, 1, mode)
    return np.stack([d1_padded(grid, P, ax) for ax in range(3)], axis=-1)


def div_mat(grid, m, mode="extrapolate"):
    """Row divergence (div M)_i = d_j M_ij of a matrix field."""
    P = pad(grid, m, 1, mode)
    return sum(d1_padded(grid, P[..., :, ax], ax) for ax in range(3))


def laplacian(grid, f, mode="extrapolate"):
    P = pad(grid, f, 1, mode)
    return sum(d2_padded(grid, P, ax) for ax in range(3))


def mixed_second(grid, f, k, j, mode="extrapolate"):
    """Mixed second derivative d_k d_j applied componentwise."""
    P = pad(grid, f, 1, mode)
    return second_padded(grid, P, k, j, 1, False)


def advect(grid, u, f, mode="extrapolate"):
    """Advection u . grad f for f of any tensor rank."""
    P = pad(grid, f, 1, mode)
    out = None
    for ax in range(3):
        uc = u[..., ax]
        df = d1_padded(grid, P, ax)
        uc = uc.reshape(uc.shape + (1,) * (df.ndim - uc.ndim))
        out = uc * df if out is None else out + uc * df
    return out


# ---------------------------------------------------------------------------
# elastic operator, molecular field

def l_op_apply(p: MaterialParams, grid: GridSpec, q: np.ndarray, bc=None, wide: bool = False) -> np.ndarray:
    """Anisotropic elastic operator L applied to a Q-tensor field.

    L(Q)_ij = -L1 lap(Q_ij) - (L2+L3)/2 (M_ij + M_ji - 2/3 tr(M) delta_ij)
    with M_ij = d_j d_k Q_ik.  For L2+L3 = 0 this is exactly -L1 times
    the laplacian stencil.  The operator maps symmetric traceless fields
    to symmetric traceless fields.

    With ``wide=True`` the diagonal second derivatives use the doubled
    central stencil; that variant is the exact gradient of the discrete
    elastic energy and is what the time stepper uses internally.
    """
    depth = 2 if wide else 1
    P = pad(grid, q, depth, "extrapolate")
    lap = sum(second_padded(grid, P, ax, ax, depth, wide) for ax in range(3))
    m1 = np.empty(q.shape)
    for j in range(3):
        acc = 0.0
        for k in range(3):
            acc = acc + second_padded(grid, P[..., :, k], k, j, depth, wide)
        m1[..., :, j] = acc
    tr = trace(m1)
    aniso = m1 + np.swapaxes(m1, -1, -2) - (2.0 / 3.0) * tr[..., None, None] * I3
    return -p.L1 * lap - 0.5 * (p.L2 + p.L3) * aniso


def l_tilde_op_apply(p: MaterialParams, grid: GridSpec, q: np.ndarray) -> np.ndarray:
    """Independent code path for L via the rank-6 divergence-form tensor.

    Contracts the coefficient tensor entrywise with the stack of second
    derivatives: L(Q)_ij = -A[l,k,i,j,ip,jp] d_l d_k Q_ipjp.  Agrees
    with l_op_apply nodewise on symmetric traceless fields.
    """
    A = elastic_tensor(p, "A")
    P = pad(grid, q, 1, "extrapolate")
    d2 = np.empty((3, 3) + q.shape)
    for l in range(3):
        for k in range(3):
            d2[l, k] = second_padded(grid, P, l, k, 1, False)
    return -np.einsum("lkijpq,lk...pq->...ij", A, d2)


def molecular_field(p: MaterialParams, grid: GridSpec, q: np.ndarray, bc=None, wide: bool = False) -> np.ndarray:
    """Molecular field H(Q) = -L(Q) - J(Q), the negative energy gradient."""
    return -l_op_apply(p, grid, q, bc, wide=wide) - bulk_derivative(p, q)


# ---------------------------------------------------------------------------
# boundary data

@dataclass
class BoundaryData:
    """Time-independent strong anchoring for Q plus no-slip velocity.

    q_anchor is a full-shape field; only its Dirichlet-boundary nodes are
    ever read.
    """

    q_anchor: np.ndarray

    @staticmethod
    def constant(grid: GridSpec, q0: np.ndarray) -> "BoundaryData":
        return BoundaryData(np.broadcast_to(q0, grid.shape((3, 3))).copy())

    def validate(self, grid: GridSpec, tol=1e-12):
        mask = boundary_mask(grid)
        if not mask.any():
            return
        qb = self.q_anchor[mask]
        asym = np.max(np.abs(qb - np.swapaxes(qb, -1, -2)))
        tr = np.max(np.abs(trace(qb)))
        if asym > tol or tr > tol:
            raise ValueError("anchoring data must be symmetric traceless on the boundary")

    def apply_q(self, grid: GridSpec, q: np.ndarray) -> np.ndarray:
        mask = boundary_mask(grid)
        q[mask] = self.q_anchor[mask]
        return q


def boundary_mask(grid: GridSpec) -> np.ndarray:
    mask = np.zeros(grid.node_counts, dtype=bool)
    for ax in range(3):
        if grid.bc[ax] == DIRICHLET:
            sl = [slice(None)] * 3
            sl[ax] = 0
            mask[tuple(sl)] = True
            sl[ax] = -1
            mask[tuple(sl)] = True
    return mask


def interior_mask(grid: GridSpec) -> np.ndarray:
    return ~boundary_mask(grid)


# ---------------------------------------------------------------------------
# quadrature and energies

def quad_weights(grid: GridSpec) -> np.ndarray:
    """Trapezoidal node weights (uniform on periodic axes), including h^3."""
    vecs = []
    for ax in range(3):
        m = grid.node_counts[ax]
        w = np.ones(m)
        if grid.bc[ax] == DIRICHLET:
            w[0] = w[-1] = 0.5
        vecs.append(w)
    w3 = vecs[0][:, None, None] * vecs[1][None, :, None] * vecs[2][None, None, :]
    return w3 * grid.h ** 3


def integrate(grid: GridSpec, density: np.ndarray) -> float:
    return float(np.sum(quad_weights(grid) * density))


def inner_l2(grid: GridSpec, a: np.ndarray, b: np.ndarray) -> float:
    """Quadrature inner product, contracting any trailing component axes."""
    comp_axes = tuple(range(3, a.ndim))
    dens = np.sum(a * b, axis=comp_axes) if comp_axes else a * b
    return integrate(grid, dens)


def norm_l2(grid: GridSpec, a: np.ndarray) -> float:
    return float(np.sqrt(max(inner_l2(grid, a, a), 0.0)))


def free_energy(p: MaterialParams, grid: GridSpec, q: np.ndarray) -> tuple[float, float]:
    """(bulk, elastic) free-energy integrals over the box."""
    fb = integrate(grid, bulk_density(p, q))
    fe = integrate(grid, elastic_density(p, grad_q(grid, q)))
    return fb, fe


def kinetic_energy(grid: GridSpec, u: np.ndarray) -> float:
    return 0.5 * integrate(grid, np.sum(u * u, axis=-1))


def distortion_stress(p: MaterialParams, grid: GridSpec, q: np.ndarray) -> np.ndarray:
    """Distortion stress sigma^d_ij = -(dF/d(d_j Q_kl)) d_i Q_kl.

    With the elastic density used here, dF/d(d_j Q_kl) =
    L1 d_j Q_kl + L2 (div Q)_k delta_lj + L3 d_l Q_kj.  Generally
    non-symmetric; for L2 = L3 = 0 it is symmetric negative
    semidefinite.
    """
    g = grad_q(grid, q)
    divq = np.einsum("...kjj->...k", g)
    coef = p.L1 * g + p.L3 * np.swapaxes(g, -1, -2)
    coef = coef + p.L2 * divq[..., :, None, None] * I3
    return -np.einsum("...klj,...kli->...ij", coef, g)


def coercivity_check(p: MaterialParams, grid: GridSpec, q: np.ndarray) -> tuple[float, float]:
    """Discrete elastic bilinear form vs its coercivity bound.

    For a zero-boundary field, returns (a(Q,Q), min(L1, L0) * |grad Q|^2)
    computed with zero-extension central differences and uniform weights,
    for which the lower bound holds exactly at the discrete level.
    Rejects fields with boundary trace above 1e-12.
    """
    mask = boundary_mask(grid)
    if mask.any():
        btrace = np.max(np.abs(q[mask]))
        if btrace > 1e-12:
            raise ValueError(f"coercivity check requires zero boundary trace, got {btrace:.3e}")
    g = grad_q(grid, q, mode="zero")
    w = grid.h ** 3
    full = float(np.sum(g * g)) * w
    divq = np.einsum("...ijj->...i", g)
    e2 = float(np.sum(divq * divq)) * w
    e3 = float(np.sum(np.einsum("...ijk,...ikj->...", g, g))) * w
    lhs = p.L1 * full + p.L2 * e2 + p.L3 * e3
    rhs = min(p.L1, p.L0) * full
    return lhs, rhs


# ---------------------------------------------------------------------------
# snapshots: legacy structured-points text and raw binary

def _flat_points(grid: GridSpec, data: np.ndarray) -> np.ndarray:
    ncomp = int(np.prod(data.shape[3:], dtype=int)) if data.ndim > 3 else 1
    flat = data.reshape(grid.node_counts + (ncomp,))
    # first axis varies fastest in the legacy point ordering
    return flat.transpose(2, 1, 0, 3).reshape(-1, ncomp)


def write_structured_points(path, grid: GridSpec, fields: dict) -> None:
    """One-file-per-snapshot legacy structured-points ASCII dump."""
    nx, ny, nz = grid.node_counts
    npoints = nx * ny * nz
    lines = [
        "# vtk DataFile Version 3.0",
        "nematoflow snapshot",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} {nz}",
        f"ORIGIN {grid.origin[0]!r} {grid.origin[1]!r} {grid.origin[2]!r}",
        f"SPACING {grid.h!r} {grid.h!r} {grid.h!r}",
        f"POINT_DATA {npoints}",
        f"FIELD snapshot {len(fields)}",
    ]
    for name, data in fields.items():
        pts = _flat_points(grid, np.asarray(data, dtype=float))
        lines.append(f"{name} {pts.shape[1]} {npoints} double")
        for row in pts:
            lines.append(" ".join(repr(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_raw_binary(path, grid: GridSpec, data: np.ndarray) -> None:
    """Little-endian float64 dump with a 64-byte self-describing header."""
    data = np.ascontiguousarray(data, dtype="<f8")
    ncomp = int(np.prod(data.shape[3:], dtype=int)) if data.ndim > 3 else 1
    header = struct.pack(_BIN_HEADER, _BIN_MAGIC, *grid.node_counts, grid.h, ncomp)
    header = header + b"\x00" * (_BIN_HEADER_LEN - len(header))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_raw_binary(path):
    """Inverse of write_raw_binary; returns (dims, h, array)."""
    with open(path, "rb") as fh:
        header = fh.read(_BIN_HEADER_LEN)
        magic, n0, n1, n2, h, ncomp = struct.unpack_from(_BIN_HEADER, header)
        if magic != _BIN_MAGIC:
            raise ValueError(f"not a nematoflow binary dump: magic {magic!r}")
        raw = np.frombuffer(fh.read(), dtype="<f8")
    shape = (n0, n1, n2) if ncomp == 1 else (n0, n1, n2, ncomp)
    return (n0, n1, n2), h, raw.reshape(shape)
