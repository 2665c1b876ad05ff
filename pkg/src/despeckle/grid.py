"""Finite-difference operators and proximal primitives on 2-D pixel grids.

Images are float64 arrays of shape ``(m, n)``. Gradient fields are arrays of
shape ``(2, m, n)``: index 0 holds horizontal (column) differences, index 1
vertical (row) differences.
"""
import numpy as np
from scipy import ndimage

LAPLACIAN_NORM_BOUND = 8.0


def gradient(u):
    """Forward differences with Neumann boundary (zero in the last column/row)."""
    u = np.asarray(u, dtype=float)
    g = np.zeros((2,) + u.shape)
    g[0, :, :-1] = u[:, 1:] - u[:, :-1]
    g[1, :-1, :] = u[1:, :] - u[:-1, :]
    return g


def divergence(z):
    """Backward-difference divergence, the exact negative adjoint of `gradient`.

    ``<gradient(u), z> == -<u, divergence(z)>`` for all ``u`` and ``z``.
    """
    h, v = z[0], z[1]
    m, n = h.shape
    d = np.zeros((m, n))
    if n > 1:
        d[:, 0] = h[:, 0]
        d[:, 1:-1] = h[:, 1:-1] - h[:, :-2]
        d[:, -1] = -h[:, -2]
    if m > 1:
        d[0, :] += v[0, :]
        d[1:-1, :] += v[1:-1, :] - v[:-2, :]
        d[-1, :] -= v[-2, :]
    return d


def laplacian(u):
    return divergence(gradient(u))


def pixel_norm(z):
    """Per-pixel Euclidean norm of a gradient field."""
    return np.sqrt(z[0] ** 2 + z[1] ** 2)


def tv_norm(u):
    """Isotropic total variation."""
    return float(np.sum(pixel_norm(gradient(u))))


def shrink(v, c):
    """Vectorial soft-thresholding ``max(|v| - c, 0) * v / |v|``.

    ``v`` is either a single 2-vector (shape ``(2,)``) or a gradient field of
    shape ``(2, m, n)``; ``c`` is a nonnegative scalar or an ``(m, n)`` array.
    Zero vectors map to zero.
    """
    v = np.asarray(v, dtype=float)
    if np.any(np.asarray(c) < 0):
        raise ValueError("shrinkage threshold must be nonnegative")
    norm = np.sqrt(v[0] ** 2 + v[1] ** 2)
    safe = np.where(norm > 0, norm, 1.0)
    scale = np.where(norm > 0, np.maximum(norm - c, 0.0) / safe, 0.0)
    return v * scale


def box_mean_filter(x, r):
    """Mean over the ``r x r`` window centred on each pixel.

    Boundaries use symmetric (half-sample) reflection. ``r`` must be odd and
    no larger than the smallest image side. ``r=None`` selects the limiting
    whole-image window: every output pixel is the global mean.
    """
    x = np.asarray(x, dtype=float)
    if r is None:
        return np.full(x.shape, x.mean())
    if r < 1 or r % 2 == 0:
        raise ValueError(f"window size must be a positive odd integer, got {r}")
    if r > min(x.shape):
        raise ValueError(f"window size {r} exceeds image size {x.shape}")
    if r == 1:
        return x.copy()
    return ndimage.uniform_filter(x, size=r, mode="reflect")


def laplacian_norm_estimate(shape, iterations=500, seed=0):
    """Power-iteration estimate of the spectral norm of ``-div(grad(.))``."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    value = 0.0
    for _ in range(iterations):
        y = -laplacian(x)
        value = np.linalg.norm(y)
        x = y / value
    return float(value)
