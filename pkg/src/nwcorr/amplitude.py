"""Covariant singlet amplitude matrix and its two spin traces.

Each trace exists twice: a closed form (the production path, vectorized
over momentum arrays) and a direct 2x2 complex matrix product used as an
oracle. Setting the environment variable ``NWCORR_CHECK_TRACES=1`` makes
:func:`trace_ab` and :func:`trace_plain` cross-check both on every call.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .kinematics import FourMomentum, as_unit, check_mass, energy

SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_1, SIGMA_2, SIGMA_3])
IDENTITY_2 = np.eye(2, dtype=complex)

ORACLE_RTOL = 1e-10


def _check_enabled():
    return os.environ.get("NWCORR_CHECK_TRACES", "") not in ("", "0")


def sigma_dot(n):
    """``n . sigma`` for a real 3-vector ``n``."""
    return np.einsum("i,ijk->jk", np.asarray(n, dtype=float), PAULI)


@dataclass(frozen=True, eq=False)
class SingletAmplitude:
    """The 2x2 matrix M(k, p) of the Lorentz-covariant singlet state."""

    mat: np.ndarray
    k: FourMomentum
    p: FourMomentum
    mass: float


def _pair_scalars(k, p, mass):
    """``(m + k0)(m + p0) - k.p``, ``k x p`` and ``(m + k0)(m + p0)`` for momentum arrays."""
    k0 = energy(mass, k)
    p0 = energy(mass, p)
    mk = mass + k0
    mp = mass + p0
    x = mk * mp - np.einsum("...i,...i->...", k, p)
    return x, np.cross(k, p), mk * mp


def amplitude_matrix(k: FourMomentum, p: FourMomentum, mass) -> SingletAmplitude:
    """Singlet amplitude matrix for particle momenta ``k`` (first) and ``p`` (second)."""
    mass = check_mass(mass)
    for name, q in (("k", k), ("p", p)):
        if not isinstance(q, FourMomentum):
            raise DomainError(f"{name} must be a FourMomentum")
        if abs(q.mass - mass) > 1e-12 * mass:
            raise DomainError(f"{name} is on-shell for mass {q.mass!r}, not {mass!r}")
    x = (mass + k.e) * (mass + p.e) - float(k.p @ p.p)
    c = np.cross(k.p, p.p)
    pref = -1j / (2.0 * mass * np.sqrt((mass + p.e) * (mass + k.e)))
    mat = pref * ((x * IDENTITY_2 - 1j * sigma_dot(c)) @ SIGMA_2)
    mat.setflags(write=False)
    return SingletAmplitude(mat, k, p, mass)


def trace_ab_closed(a, b, k, p, kp, pp, mass):
    """Closed form of Tr{(a.sigma) M(k,p) (b.sigma^T) M^dagger(k',p')}.

    All momentum arguments are arrays broadcasting over leading axes with a
    trailing axis of length 3. The result is real for real momenta.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, c, w = _pair_scalars(k, p, mass)
    xp, cp, wp = _pair_scalars(kp, pp, mass)
    ac = np.einsum("...i,...i->...", a, c)
    bc = np.einsum("...i,...i->...", b, c)
    acp = np.einsum("...i,...i->...", a, cp)
    bcp = np.einsum("...i,...i->...", b, cp)
    ab = np.einsum("...i,...i->...", a, b)
    axb = np.cross(a, b)
    ccp = np.einsum("...i,...i->...", c, cp)
    mixed = np.einsum("...i,...i->...", axb, cp * x[..., None] + c * xp[..., None])
    brace = ac * bcp + acp * bc - ab * ccp + ab * x * xp - mixed
    return -brace / (2.0 * mass * mass * np.sqrt(w * wp))


def trace_plain_closed(k, p, kp, pp, mass):
    """Closed form of Tr{M(k,p) M^dagger(k',p')}, vectorized like :func:`trace_ab_closed`."""
    x, c, w = _pair_scalars(k, p, mass)
    xp, cp, wp = _pair_scalars(kp, pp, mass)
    return (x * xp + np.einsum("...i,...i->...", c, cp)) / (2.0 * mass * mass * np.sqrt(w * wp))


def trace_ab_direct(a, b, M: SingletAmplitude, Mprime: SingletAmplitude):
    """Oracle: the spin-weighted trace by explicit 2x2 matrix multiplication."""
    return complex(np.trace(sigma_dot(a) @ M.mat @ sigma_dot(b).T @ Mprime.mat.conj().T))


def trace_plain_direct(M: SingletAmplitude, Mprime: SingletAmplitude):
    """Oracle: Tr{M M'^dagger} by explicit matrix multiplication."""
    return complex(np.trace(M.mat @ Mprime.mat.conj().T))


def _same_mass(M, Mprime):
    if abs(M.mass - Mprime.mass) > 1e-12 * M.mass:
        raise DomainError("amplitudes were built for different masses")


def _verify(closed, direct, M, Mprime, what):
    scale = np.linalg.norm(M.mat) * np.linalg.norm(Mprime.mat)
    if abs(closed - direct) > ORACLE_RTOL * max(scale, abs(direct)):
        raise AssertionError(f"{what}: closed form {closed!r} disagrees with matrix product {direct!r}")


def trace_ab(a, b, M: SingletAmplitude, Mprime: SingletAmplitude) -> complex:
    """Tr{(a.sigma) M (b.sigma^T) M'^dagger} for unit measurement directions ``a``, ``b``.

    Parameters
    ----------
    a, b : array_like, shape (3,)
        Unit spin-measurement directions of the first and second particle.
    M, Mprime : SingletAmplitude
        Amplitudes at the unprimed and primed momentum pairs.
    """
    a = as_unit(a, "a")
    b = as_unit(b, "b")
    _same_mass(M, Mprime)
    value = complex(trace_ab_closed(a, b, M.k.p, M.p.p, Mprime.k.p, Mprime.p.p, M.mass))
    if _check_enabled():
        _verify(value, trace_ab_direct(a, b, M, Mprime), M, Mprime, "trace_ab")
    return value


def trace_plain(M: SingletAmplitude, Mprime: SingletAmplitude) -> complex:
    """Tr{M M'^dagger}."""
    _same_mass(M, Mprime)
    value = complex(trace_plain_closed(M.k.p, M.p.p, Mprime.k.p, Mprime.p.p, M.mass))
    if _check_enabled():
        _verify(value, trace_plain_direct(M, Mprime), M, Mprime, "trace_plain")
    return value


def amplitude_matrices(k, p, mass):
    """Amplitude matrices M(k, p) for momentum arrays of shape (..., 3); returns (..., 2, 2)."""
    k = np.asarray(k, dtype=float)
    p = np.asarray(p, dtype=float)
    x, c, w = _pair_scalars(k, p, mass)
    pref = -1j / (2.0 * mass * np.sqrt(w))
    inner = x[..., None, None] * IDENTITY_2 - 1j * np.einsum("...i,ijk->...jk", c, PAULI)
    return pref[..., None, None] * (inner @ SIGMA_2)
