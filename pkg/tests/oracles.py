"""Independent numerical oracles shared by the test modules."""
import numpy as np
from scipy.special import roots_legendre

TWO_PI_CUBED = (2 * np.pi) ** 3


def _gl(n, lo, hi):
    x, w = roots_legendre(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def box_points(box, n=64):
    """Product Gauss-Legendre nodes (lab frame) and weights filling ``box``."""
    axes = [_gl(n, -h / 2, h / 2) for h in box.side_lengths]
    y = np.stack(np.meshgrid(*(a[0] for a in axes), indexing="ij"), -1).reshape(-1, 3)
    w = np.einsum("i,j,k->ijk", *(a[1] for a in axes)).ravel()
    return box.center + y @ box.rotation.T, w


def ball_points(ball, n=64):
    """Spherical product rule: Gauss-Legendre in r and cos(theta), trapezoid in phi."""
    r, wr = _gl(n, 0.0, ball.radius)
    c, wc = _gl(n, -1.0, 1.0)
    phi = 2 * np.pi * np.arange(n) / n
    R, C, P = np.meshgrid(r, c, phi, indexing="ij")
    S = np.sqrt(1 - C**2)
    x = np.stack([R * S * np.cos(P), R * S * np.sin(P), R * C], -1).reshape(-1, 3)
    w = np.einsum("i,j,k->ijk", wr * r**2, wc, np.full(n, 2 * np.pi / n)).ravel()
    return ball.center + x, w


def direct_kernel(points, weights, q):
    """Direct evaluation of the Fourier integral of the region's indicator."""
    return (weights * np.exp(-1j * (points @ np.asarray(q, float)))).sum() / TWO_PI_CUBED


def midpoint_box_kernel(box, q, n=64):
    """Midpoint rule on n**3 cells of the box."""
    h = box.side_lengths / n
    axes = [(-box.side_lengths[i] / 2 + h[i] * (np.arange(n) + 0.5)) for i in range(3)]
    y = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)
    x = box.center + y @ box.rotation.T
    return np.prod(h) * np.exp(-1j * (x @ np.asarray(q, float))).sum() / TWO_PI_CUBED
