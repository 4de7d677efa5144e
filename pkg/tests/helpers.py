"""Shared helpers for the test suite: random tensors, smooth fields, rotations."""

import numpy as np

from nematoflow.tensor_algebra import deviatoric, sym


def random_q(rng, shape=()):
    """Random symmetric traceless tensors with O(1) entries."""
    return deviatoric(sym(rng.uniform(-1.0, 1.0, size=shape + (3, 3))))


def random_rotation(rng):
    a = rng.standard_normal((3, 3))
    r, _ = np.linalg.qr(a)
    if np.linalg.det(r) < 0:
        r[:, 0] = -r[:, 0]
    return r


def smooth_q_field(grid, rng, n_modes=3, amplitude=1.0, zero_boundary=False):
    """Smooth random Q-tensor field built from a few separable trig modes."""
    x, y, z = grid.meshgrid()
    ex = grid.extent
    out = np.zeros(grid.shape((3, 3)))
    for _ in range(n_modes):
        qhat = random_q(rng)
        if zero_boundary:
            kx, ky, kz = rng.integers(1, 3, size=3)
            mode = (np.sin(np.pi * kx * x / ex[0]) * np.sin(np.pi * ky * y / ex[1])
                    * np.sin(np.pi * kz * z / ex[2]))
        else:
            kx, ky, kz = rng.integers(1, 3, size=3)
            mode = (np.sin(2 * np.pi * kx * x / ex[0] + rng.uniform(0, 2 * np.pi))
                    * np.cos(2 * np.pi * ky * y / ex[1])
                    * np.cos(2 * np.pi * kz * z / ex[2] + rng.uniform(0, 2 * np.pi)))
        out = out + amplitude * mode[..., None, None] * qhat
    return out


def zero_boundary_noise_q(grid, rng, amplitude=1.0):
    from nematoflow.fields import boundary_mask

    q = amplitude * random_q(rng, grid.node_counts)
    q[boundary_mask(grid)] = 0.0
    return q
