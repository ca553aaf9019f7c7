"""Momentum-space wave packets.

Radial profiles ``f(|k|)`` feed the fixed-direction and isotropic
regimes; :class:`GaussianPacket` is a three-dimensional packet around a
mean momentum for the general factorized regime. Profiles are real and
deliberately unnormalized: every correlation is a ratio, so the overall
scale drops out.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .exceptions import DomainError
from .kinematics import as_unit, as_vector, check_mass


def _gaussian_z(mass_tail):
    if not 0.0 < mass_tail < 1.0:
        raise DomainError(f"mass_tail must lie in (0, 1), got {mass_tail!r}")
    return float(norm.isf(0.5 * mass_tail))


@dataclass(frozen=True)
class Gaussian:
    """``amplitude * exp(-(t - k0)**2 / (4 sigma**2))``; ``|f|**2`` has standard deviation ``sigma``."""

    k0: float
    sigma: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not (self.k0 >= 0 and np.isfinite(self.k0)):
            raise DomainError(f"Gaussian k0 must be >= 0, got {self.k0!r}")
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise DomainError(f"Gaussian sigma must be > 0, got {self.sigma!r}")
        if not self.amplitude > 0:
            raise DomainError("profile amplitude must be positive")

    def _eval(self, t):
        return self.amplitude * np.exp(-((t - self.k0) ** 2) / (4.0 * self.sigma**2))

    def _bounds(self, mass_tail):
        half = _gaussian_z(mass_tail) * self.sigma * np.sqrt(2.0)
        return max(0.0, self.k0 - half), self.k0 + half


@dataclass(frozen=True)
class Rectangular:
    """``amplitude`` on ``[kmin, kmax]`` and zero elsewhere."""

    kmin: float
    kmax: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.kmin >= 0:
            raise DomainError(f"Rectangular kmin must be >= 0, got {self.kmin!r}")
        if not (self.kmax > self.kmin and np.isfinite(self.kmax)):
            raise DomainError(f"Rectangular support [{self.kmin}, {self.kmax}] is empty")
        if not self.amplitude > 0:
            raise DomainError("profile amplitude must be positive")

    def _eval(self, t):
        return np.where((t >= self.kmin) & (t <= self.kmax), self.amplitude, 0.0)

    def _bounds(self, mass_tail):
        if not 0.0 < mass_tail < 1.0:
            raise DomainError(f"mass_tail must lie in (0, 1), got {mass_tail!r}")
        return float(self.kmin), float(self.kmax)


RadialProfile = Gaussian | Rectangular


def profile_eval(profile, t):
    """Evaluate the radial profile at ``t >= 0`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("radial profile argument must be non-negative")
    out = profile._eval(t_arr)
    return float(out) if out.ndim == 0 else out


def support_bounds(profile, mass_tail=1e-10):
    """Truncation interval ``(tmin, tmax)`` holding at least ``1 - mass_tail`` of the profile.

    For a Gaussian the bound is ``k0 +/- z * sigma * sqrt(2)`` with ``z`` the
    two-sided normal quantile of ``mass_tail``, clipped at zero. This covers
    ``1 - mass_tail`` of ``f`` itself and therefore far more of ``f**2``.
    """
    return profile._bounds(mass_tail)


@dataclass(frozen=True, eq=False)
class GaussianPacket:
    """Isotropic 3D Gaussian ``amplitude * exp(-|k - center|**2 / (4 sigma**2))``."""

    center: np.ndarray
    sigma: float
    amplitude: float = 1.0

    def __post_init__(self):
        center = as_vector(self.center, "center")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise DomainError(f"packet sigma must be > 0, got {self.sigma!r}")

    def __call__(self, k):
        d = np.asarray(k, dtype=float) - self.center
        return self.amplitude * np.exp(-np.einsum("...i,...i->...", d, d) / (4.0 * self.sigma**2))

    def box_bounds(self, mass_tail=1e-10):
        """Per-axis truncation box (union bound over the three axes)."""
        half = _gaussian_z(mass_tail / 3.0) * self.sigma * np.sqrt(2.0)
        return self.center - half, self.center + half


@dataclass(frozen=True, eq=False)
class FactorizedState:
    """Product wave function with momenta pinned to the rays ``dir_a`` and ``dir_b``."""

    profile_a: Gaussian | Rectangular
    profile_b: Gaussian | Rectangular
    dir_a: np.ndarray
    dir_b: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "dir_a", as_unit(self.dir_a, "dir_a"))
        object.__setattr__(self, "dir_b", as_unit(self.dir_b, "dir_b"))
        object.__setattr__(self, "mass", check_mass(self.mass))
        for p in (self.profile_a, self.profile_b):
            if not isinstance(p, (Gaussian, Rectangular)):
                raise DomainError(f"unsupported radial profile {p!r}")
