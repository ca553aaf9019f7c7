"""scikit-learn style front end.

:class:`LocalizedCorrelation` separates the expensive, measurement
independent part (per-detector momentum integrals, computed in ``fit``)
from the cheap assembly for many spin-measurement settings (``predict``).
A row of ``X`` is ``[a_x, a_y, a_z, b_x, b_y, b_z]``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .correlator import (
    CHSHResult,
    fixed_direction_value,
    general_value,
    sharp_closed_form,
)
from .detector import AllSpace, Ball, Box
from .exceptions import DomainError
from .integrals import QuadratureSpec, fixed_direction_integrals, general_integrals
from .kinematics import UNIT_TOL, as_unit, check_mass, on_shell
from .wavepacket import Gaussian, GaussianPacket, Rectangular

REGIMES = ("sharp", "fixed_direction", "general")


def check_measurements(X):
    """Validate measurement settings: an (n, 6) float array of two unit vectors per row."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != 6:
        raise DomainError(f"X must have 6 columns (a and b), got {X.shape[1]}")
    a, b = X[:, :3], X[:, 3:]
    for name, v in (("a", a), ("b", b)):
        bad = np.abs(np.linalg.norm(v, axis=1) - 1.0) > UNIT_TOL
        if np.any(bad):
            raise DomainError(f"row {int(np.argmax(bad))}: measurement direction {name} is not a unit vector")
    return a, b


def _check_region(region, name):
    if not isinstance(region, (Box, Ball, AllSpace)):
        raise DomainError(f"{name} must be a Box, Ball or AllSpace, got {region!r}")
    return region


class LocalizedCorrelation(BaseEstimator):
    """Localized EPR spin correlation for one state and pair of detectors.

    Parameters
    ----------
    regime : {"sharp", "fixed_direction", "general"}
    mass : float
        Common particle mass (natural units).
    momentum_a, momentum_b : array_like of shape (3,)
        Sharp 3-momenta (``regime="sharp"``).
    profile_a, profile_b : Gaussian, Rectangular or GaussianPacket
        Radial profiles along the fixed rays (``"fixed_direction"``) or
        single-particle wave functions (``"general"``).
    direction_a, direction_b : array_like of shape (3,)
        Momentum rays (``"fixed_direction"``).
    detector_a, detector_b : Box, Ball or AllSpace
        Detector regions. Sharp momenta accept any region (including
        AllSpace); the quadrature regimes need Box or Ball.
    quadrature : QuadratureSpec, optional

    Examples
    --------
    >>> est = LocalizedCorrelation(regime="sharp").fit()
    >>> float(est.predict([[0, 0, 1, 0, 0, 1]])[0])
    -1.0
    """

    def __init__(self, regime="fixed_direction", mass=1.0, momentum_a=(0.0, 0.0, 0.0),
                 momentum_b=(0.0, 0.0, 0.0), profile_a=None, profile_b=None, direction_a=(0.0, 0.0, 1.0),
                 direction_b=(0.0, 0.0, -1.0), detector_a=None, detector_b=None, quadrature=None):
        self.regime = regime
        self.mass = mass
        self.momentum_a = momentum_a
        self.momentum_b = momentum_b
        self.profile_a = profile_a
        self.profile_b = profile_b
        self.direction_a = direction_a
        self.direction_b = direction_b
        self.detector_a = detector_a
        self.detector_b = detector_b
        self.quadrature = quadrature

    def fit(self, X=None, y=None):
        """Compute the measurement-independent part; ``X`` and ``y`` are ignored."""
        if self.regime not in REGIMES:
            raise DomainError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        mass = check_mass(self.mass)
        det_a = _check_region(self.detector_a if self.detector_a is not None else AllSpace(), "detector_a")
        det_b = _check_region(self.detector_b if self.detector_b is not None else AllSpace(), "detector_b")
        spec = self.quadrature if self.quadrature is not None else QuadratureSpec()
        self.integrals_a_ = self.integrals_b_ = None
        if self.regime == "sharp":
            self.qa_ = on_shell(mass, self.momentum_a)
            self.qb_ = on_shell(mass, self.momentum_b)
        elif self.regime == "fixed_direction":
            for p in (self.profile_a, self.profile_b):
                if not isinstance(p, (Gaussian, Rectangular)):
                    raise DomainError("fixed_direction regime needs Gaussian or Rectangular profiles")
            self.integrals_a_ = fixed_direction_integrals(
                self.profile_a, as_unit(self.direction_a, "direction_a"), det_a, mass, spec)
            self.integrals_b_ = fixed_direction_integrals(
                self.profile_b, as_unit(self.direction_b, "direction_b"), det_b, mass, spec)
        else:
            for p in (self.profile_a, self.profile_b):
                if not isinstance(p, (Gaussian, Rectangular, GaussianPacket)):
                    raise DomainError("general regime needs Gaussian, Rectangular or GaussianPacket wave functions")
            self.integrals_a_ = general_integrals(self.profile_a, det_a, mass, spec)
            self.integrals_b_ = general_integrals(self.profile_b, det_b, mass, spec)
        self.warnings_ = tuple(i.warning for i in (self.integrals_a_, self.integrals_b_) if i and i.warning)
        self.mass_ = mass
        return self

    def predict(self, X, return_error=False):
        """Correlation value for each measurement row of ``X``.

        With ``return_error=True`` also return the absolute error estimates.
        """
        check_is_fitted(self, "mass_")
        a, b = check_measurements(X)
        if self.regime == "sharp":
            value = np.clip(sharp_closed_form(self.qa_, self.qb_, a, b, self.mass_), -1.0, 1.0)
            err = np.zeros_like(value)
        elif self.regime == "fixed_direction":
            value, err = fixed_direction_value(self.integrals_a_, self.integrals_b_, a, b)
        else:
            value, err = general_value(self.integrals_a_, self.integrals_b_, a, b, self.mass_)
        value = np.asarray(value, dtype=float)
        err = np.broadcast_to(np.asarray(err, dtype=float), value.shape).copy()
        return (value, err) if return_error else value

    def chsh(self, a, aprime, b, bprime):
        """CHSH combination ``C(a,b) - C(a,b') + C(a',b) + C(a',b')``."""
        rows = np.array([np.r_[a, b], np.r_[a, bprime], np.r_[aprime, b], np.r_[aprime, bprime]], dtype=float)
        value, err = self.predict(rows, return_error=True)
        return CHSHResult(float(value @ [1.0, -1.0, 1.0, 1.0]), float(err.sum()))
