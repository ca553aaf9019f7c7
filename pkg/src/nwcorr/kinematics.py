"""On-shell four-momenta and 3-vector helpers in natural units (hbar = c = 1)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

UNIT_TOL = 1e-10
SHELL_RTOL = 1e-12


def as_vector(v, name="vector"):
    """Return ``v`` as a float64 array of shape (3,)."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise DomainError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def as_unit(v, name="direction", tol=UNIT_TOL):
    """Validate that ``v`` is a unit 3-vector and return it as an array.

    The vector is not renormalized; callers pass exact unit vectors.
    """
    arr = as_vector(v, name)
    norm = np.linalg.norm(arr)
    if abs(norm - 1.0) > tol:
        raise DomainError(f"{name} must have unit length, |{name}| = {norm!r}")
    return arr


def normalized(v):
    arr = np.asarray(v, dtype=float)
    return arr / np.linalg.norm(arr)


def check_mass(mass):
    mass = float(mass)
    if not (mass > 0 and np.isfinite(mass)):
        raise DomainError(f"mass must be positive and finite, got {mass!r}")
    return mass


@dataclass(frozen=True, eq=False)
class FourMomentum:
    """On-shell four-momentum ``(e, p)`` of a particle of mass ``mass``.

    Use :func:`on_shell` to construct one; the constructor validates the
    mass-shell relation ``e**2 - |p|**2 = mass**2``.
    """

    e: float
    p: np.ndarray
    mass: float

    def __post_init__(self):
        p = as_vector(self.p, "p")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "e", float(self.e))
        mass = check_mass(self.mass)
        if self.e < mass:
            raise DomainError(f"energy {self.e!r} is below the mass {mass!r}")
        shell = self.e * self.e - p @ p
        if abs(shell - mass * mass) > SHELL_RTOL * max(self.e * self.e, mass * mass):
            raise DomainError(f"four-momentum is off-shell: e^2 - p^2 = {shell!r}, m^2 = {mass * mass!r}")

    def __repr__(self):
        return f"FourMomentum(e={self.e!r}, p={self.p.tolist()!r}, mass={self.mass!r})"


def energy(mass, p):
    """Vectorized on-shell energy ``sqrt(mass**2 + |p|**2)`` along the last axis."""
    p = np.asarray(p, dtype=float)
    return np.sqrt(mass * mass + np.einsum("...i,...i->...", p, p))


def on_shell(mass, p):
    """Build the on-shell four-momentum of a particle with 3-momentum ``p``.

    Examples
    --------
    >>> on_shell(1.0, (0, 0, 1)).e  # doctest: +ELLIPSIS
    1.414213562373...
    """
    mass = check_mass(mass)
    p = as_vector(p, "p")
    return FourMomentum(float(np.sqrt(mass * mass + p @ p)), p, mass)


def minkowski_dot(a: FourMomentum, b: FourMomentum) -> float:
    """Minkowski product ``a.e * b.e - a.p . b.p`` (signature +---)."""
    return a.e * b.e - float(a.p @ b.p)


def rotation_matrix(axis, angle):
    """Rotation by ``angle`` about ``axis`` (Rodrigues formula)."""
    axis = normalized(as_vector(axis, "axis"))
    x, y, z = axis
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def random_rotation(rng):
    """Uniformly distributed proper rotation (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_unit(rng, size=None):
    shape = (3,) if size is None else (size, 3)
    v = rng.normal(size=shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
