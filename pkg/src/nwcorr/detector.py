"""Detector regions and the Newton-Wigner localization kernel.

The kernel of a region ``Omega`` is

    Delta(q) = (2 pi)^-3 * integral over Omega of exp(-i q.x) d^3x,

available in closed form for (possibly rotated, off-center) boxes and for
balls. All-space localization has the Dirac delta as kernel and is
therefore only represented symbolically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DistributionalKernelError, DomainError
from .kinematics import as_vector

TWO_PI = 2.0 * np.pi
BOX_SERIES_BELOW = 1e-4
# sin(y) - y cos(y) cancels catastrophically well above 1e-4; the series is
# used below this larger threshold (terms through y**10, truncation < 1e-20).
BALL_SERIES_BELOW = 0.25


def _frozen(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Box:
    """Rectangular box ``center + rotation @ y`` with ``|y_i| <= side_lengths[i] / 2``.

    ``rotation`` maps box-frame axes to lab axes; the default is the identity
    (axis-aligned box). Lengths are in inverse-mass units.
    """

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    side_lengths: np.ndarray = field(default_factory=lambda: np.ones(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        center = as_vector(self.center, "center")
        sides = as_vector(self.side_lengths, "side_lengths")
        if np.any(sides <= 0):
            raise DomainError(f"box side lengths must be positive, got {sides.tolist()}")
        rot = np.asarray(self.rotation, dtype=float)
        if rot.shape != (3, 3) or not np.allclose(rot.T @ rot, np.eye(3), atol=1e-10):
            raise DomainError("box rotation must be an orthogonal 3x3 matrix")
        object.__setattr__(self, "center", _frozen(center.copy()))
        object.__setattr__(self, "side_lengths", _frozen(sides.copy()))
        object.__setattr__(self, "rotation", _frozen(rot.copy()))

    def __repr__(self):
        return f"Box(center={self.center.tolist()}, side_lengths={self.side_lengths.tolist()})"


@dataclass(frozen=True, eq=False)
class Ball:
    """Ball of radius ``radius`` around ``center``."""

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    radius: float = 1.0

    def __post_init__(self):
        center = as_vector(self.center, "center")
        radius = float(self.radius)
        if not (radius > 0 and np.isfinite(radius)):
            raise DomainError(f"ball radius must be positive, got {radius!r}")
        object.__setattr__(self, "center", _frozen(center.copy()))
        object.__setattr__(self, "radius", radius)

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


@dataclass(frozen=True)
class AllSpace:
    """The whole of space: no localization condition."""


DetectorRegion = Box | Ball | AllSpace


def volume(region) -> float:
    """Region volume; ``math.inf`` for :class:`AllSpace`."""
    if isinstance(region, Box):
        return float(np.prod(region.side_lengths))
    if isinstance(region, Ball):
        return 4.0 * np.pi * region.radius**3 / 3.0
    if isinstance(region, AllSpace):
        return math.inf
    raise DomainError(f"unknown detector region {region!r}")


def _sin_over_x(x):
    out = np.empty_like(x)
    small = np.abs(x) < BOX_SERIES_BELOW / 2.0
    xs = x[small]
    out[small] = 1.0 - xs * xs / 6.0 + xs**4 / 120.0
    xl = x[~small]
    out[~small] = np.sin(xl) / xl
    return out


def _ball_shape(y):
    """(sin y - y cos y) / y**3, accurate down to y = 0."""
    out = np.empty_like(y)
    small = y < BALL_SERIES_BELOW
    ys2 = y[small] ** 2
    acc = np.zeros_like(ys2)
    for n in range(6, 0, -1):
        acc = acc * ys2 + (-1) ** (n + 1) * 2 * n / math.factorial(2 * n + 1)
    out[small] = acc
    yl = y[~small]
    out[~small] = (np.sin(yl) - yl * np.cos(yl)) / yl**3
    return out


def delta_kernel(region, q):
    """Localization kernel of ``region`` at momentum transfer ``q``.

    Parameters
    ----------
    region : Box or Ball
    q : array_like, shape (..., 3)

    Returns
    -------
    complex ndarray of shape ``q.shape[:-1]`` (a Python complex for a single q).

    Raises
    ------
    DistributionalKernelError
        For :class:`AllSpace`, whose kernel is the delta function.
    """
    q = np.asarray(q, dtype=float)
    if q.shape[-1:] != (3,):
        raise DomainError(f"q must have a trailing axis of length 3, got shape {q.shape}")
    if isinstance(region, AllSpace):
        raise DistributionalKernelError(
            "the all-space kernel is a Dirac delta; use correlation_sharp / the sharp regime"
        )
    phase = np.exp(-1j * (q @ region.center))
    if isinstance(region, Box):
        qb = q @ region.rotation  # components along the box axes
        half = 0.5 * qb * region.side_lengths
        shape = np.prod(_sin_over_x(np.atleast_1d(half).reshape(-1, 3)), axis=-1).reshape(q.shape[:-1])
        value = phase * shape * (volume(region) / TWO_PI**3)
    elif isinstance(region, Ball):
        y = np.linalg.norm(q, axis=-1) * region.radius
        shape = _ball_shape(np.atleast_1d(y).ravel()).reshape(q.shape[:-1])
        value = phase * shape * (region.radius**3 / (2.0 * np.pi**2))
    else:
        raise DomainError(f"unknown detector region {region!r}")
    if q.ndim == 1:
        return complex(value)
    return value


def extent_along(region, direction) -> float:
    """``2 * max |x . n|`` over the region: twice the largest kernel frequency along ``n``."""
    n = np.asarray(direction, dtype=float)
    if isinstance(region, Box):
        reach = abs(region.center @ n) + 0.5 * np.abs(n @ region.rotation) @ region.side_lengths
    elif isinstance(region, Ball):
        reach = abs(region.center @ n) + region.radius * np.linalg.norm(n)
    else:
        raise DistributionalKernelError("all-space region has unbounded extent")
    return 2.0 * float(reach)


def max_extent(region) -> float:
    """``2 * max |x|`` over the region."""
    if isinstance(region, Box):
        reach = np.linalg.norm(region.center) + 0.5 * np.linalg.norm(region.side_lengths)
    elif isinstance(region, Ball):
        reach = np.linalg.norm(region.center) + region.radius
    else:
        raise DistributionalKernelError("all-space region has unbounded extent")
    return 2.0 * float(reach)


def rotated(region, rotation):
    """The image of ``region`` under the proper rotation ``rotation``."""
    rotation = np.asarray(rotation, dtype=float)
    if isinstance(region, Box):
        return Box(rotation @ region.center, region.side_lengths, rotation @ region.rotation)
    if isinstance(region, Ball):
        return Ball(rotation @ region.center, region.radius)
    return region
