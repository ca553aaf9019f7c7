"""Normalized spin-correlation function in the sharp, fixed-direction and general regimes."""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .amplitude import amplitude_matrix, trace_ab, trace_plain
from .detector import volume
from .exceptions import DegenerateStateError, DomainError
from .integrals import (
    MomentumIntegrals,
    QuadratureSpec,
    fixed_direction_integrals,
    general_integrals,
)
from .kinematics import FourMomentum, as_unit, check_mass, minkowski_dot
from .wavepacket import FactorizedState

EPS = np.finfo(float).eps
SHARP_ORACLE_TOL = 1e-12

_LEVI_CIVITA = np.zeros((3, 3, 3))
_LEVI_CIVITA[0, 1, 2] = _LEVI_CIVITA[1, 2, 0] = _LEVI_CIVITA[2, 0, 1] = 1.0
_LEVI_CIVITA[0, 2, 1] = _LEVI_CIVITA[2, 1, 0] = _LEVI_CIVITA[1, 0, 2] = -1.0


class Regime(str, enum.Enum):
    SHARP_MOMENTUM = "sharp"
    FIXED_DIRECTION = "fixed_direction"
    GENERAL_FACTORIZED = "general"
    BRUTE_FORCE_ORACLE = "brute_force"


@dataclass(frozen=True)
class CorrelationResult:
    """One value of the correlation function with its absolute error estimate."""

    value: float
    abs_error: float
    regime: Regime
    inputs_digest: str = ""
    warnings: tuple = field(default_factory=tuple)


class CHSHResult(NamedTuple):
    value: float
    abs_error: float


def _dot(x, y):
    return np.einsum("...i,...i->...", x, y)


# -- assembly ------------------------------------------------------------------


def assemble_moments(IA: MomentumIntegrals, IB: MomentumIntegrals, a, b, mass):
    """Numerator and denominator of the correlation from per-detector integrals.

    The numerator carries the ``-1 / (2**5 m**2)`` prefactor and the
    denominator ``1 / (2**3 m**2)``; :func:`correlation_from_moments`
    applies the overall factor 4. ``a`` and ``b`` may be arrays of shape
    (n, 3) for many measurement settings at once. Conjugate pairs such as
    ``X + conj(X)`` are formed literally, so complex integrals are handled
    exactly as written.
    """
    return _assemble(IA.i1, IA.i2, IA.i3, IB.i1, IB.i2, IB.i3, np.asarray(a, float), np.asarray(b, float), mass)


def _assemble(A1, A2, A3, B1, B2, B3, a, b, mass):
    ab = _dot(a, b)
    A3c = np.conj(A3)
    B3c = np.conj(B3)
    i2dot = A2 @ B2
    i2x = np.cross(A2, B2)
    tr_a3b3c = np.trace(A3 @ B3c)
    tr_a3b3 = np.trace(A3 @ B3)
    tr_tr = np.trace(A3) * np.trace(B3)
    sym = A1 * B1 - i2dot - np.conj(i2dot) + tr_a3b3c
    bracket_ab = sym + tr_a3b3 - tr_tr
    cross_term = _dot(np.cross(a, b), i2x + np.conj(i2x))
    sandwich = A3 @ B3c - B3 @ A3c + A3c @ B3 - B3c @ A3
    sandwich_term = np.einsum("...i,ij,...j->...", a, sandwich, b)
    eps_term = np.einsum("ijk,qrs,...i,...q,jr,ks->...", _LEVI_CIVITA, _LEVI_CIVITA, a, b, A3, B3)
    numerator = -(ab * bracket_ab - cross_term + sandwich_term + eps_term + np.conj(eps_term)) / (32.0 * mass * mass)
    denominator = (sym - tr_a3b3 + tr_tr) / (8.0 * mass * mass)
    return numerator, denominator


def correlation_from_moments(numerator, denominator):
    """``4 * numerator / denominator``: the normalized correlation."""
    return 4.0 * numerator / denominator


def assemble_fixed_direction(sA, sB, n, m, a, b):
    """Correlation for fixed momentum directions from the six 1D-pair integrals.

    ``sA = (I1, I2, I3)`` along ``n`` for the first detector, ``sB`` along
    ``m`` for the second. Returns ``(numerator, denominator)`` of the
    reduced ratio (no mass factors survive).
    """
    A1, A2, A3 = sA
    B1, B2, B3 = sB
    ab = _dot(a, b)
    nxm = np.cross(n, m)
    nm = float(n @ m)
    pair2 = A2 * B2 + np.conj(A2 * B2)
    coeff3 = (ab * float(nxm @ nxm) - ab * nm**2 - 2.0 * _dot(a, nxm) * _dot(b, nxm)
              - 2.0 * _dot(np.cross(a, b), nxm) * nm)
    coeff2 = ab * nm + _dot(np.cross(a, b), nxm)
    numerator = -ab * A1 * B1 + coeff3 * A3 * B3 + coeff2 * pair2
    denominator = A1 * B1 + A3 * B3 - nm * pair2
    return numerator, denominator


def _propagate(func, values, errors, label):
    """First-order error of the real ratio ``N/D`` returned by ``func(values)``.

    Numerator and denominator are linear in every single input component,
    so each component's contribution is obtained exactly by shifting it by
    its own error along the real and imaginary axes.
    """
    num, den = func(values)
    _check_denominator(den, label)
    total = np.zeros(np.shape(num), dtype=float)
    for j, e in enumerate(errors):
        if e == 0:
            continue
        for shift in (e, 1j * e):
            moved = values.copy()
            moved[j] += shift
            n2, d2 = func(moved)
            total = total + np.abs(n2 / d2 - num / den)
    return num, den, total


def _check_denominator(den, label):
    if np.any(den == 0) or not np.all(np.isfinite(den)):
        raise DegenerateStateError(f"{label}: the normalization vanishes for this state and detectors")


def fixed_direction_value(IA: MomentumIntegrals, IB: MomentumIntegrals, a, b):
    """Correlation values and errors (arrays) from fixed-direction integrals."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n, m = IA.direction, IB.direction
    vals = np.array(list(IA.scalars) + list(IB.scalars), dtype=complex)
    errs = np.array(list(IA.scalar_errors) + list(IB.scalar_errors))
    func = lambda v: assemble_fixed_direction(v[:3], v[3:], n, m, a, b)  # noqa: E731
    num, den, err = _propagate(func, vals, errs, "fixed-direction correlation")
    value = np.real(num / den)
    return value, err + 4.0 * EPS * (1.0 + np.abs(value))


def general_value(IA: MomentumIntegrals, IB: MomentumIntegrals, a, b, mass):
    """Correlation values and errors (arrays) from full 3D integrals."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    va, ea = IA.flat()
    vb, eb = IB.flat()
    vals = np.concatenate([va, vb])
    errs = np.concatenate([ea, eb])

    def func(v):
        return _assemble(v[0], v[1:4], v[4:13].reshape(3, 3), v[13], v[14:17], v[17:26].reshape(3, 3), a, b, mass)

    num, den, err = _propagate(func, vals, errs, "general correlation")
    value = np.real(correlation_from_moments(num, den))
    return value, 4.0 * err + 4.0 * EPS * (1.0 + np.abs(value))


# -- regimes -------------------------------------------------------------------


def _digest(**parts):
    def fmt(v):
        if isinstance(v, np.ndarray):
            return "[" + ",".join(f"{x:.17g}" for x in v.ravel()) + "]"
        if isinstance(v, FourMomentum):
            return fmt(v.p)
        return repr(v)

    return ";".join(f"{k}={fmt(v)}" for k, v in parts.items())


def sharp_closed_form(qa: FourMomentum, qb: FourMomentum, a, b, mass):
    """The closed-form sharp-momentum correlation (``m**2 + qa.qb`` with the Minkowski product).

    ``a`` and ``b`` may be (n, 3) arrays.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    qa_v, qb_v = qa.p, qb.p
    inner = np.cross(a, b) + (_dot(a, qa_v)[..., None] * np.cross(b, qb_v)
                              - _dot(b, qb_v)[..., None] * np.cross(a, qa_v)) / ((qa.e + mass) * (qb.e + mass))
    return -_dot(a, b) + inner @ np.cross(qa_v, qb_v) / (mass * mass + minkowski_dot(qa, qb))


def sharp_trace_ratio(qa: FourMomentum, qb: FourMomentum, a, b, mass):
    """Oracle for the sharp regime: Tr{(a.s) M (b.s^T) M^+} / Tr{M M^+}."""
    M = amplitude_matrix(qa, qb, mass)
    return float(np.real(trace_ab(a, b, M, M) / trace_plain(M, M)))


def sharp_moments(qa: FourMomentum, qb: FourMomentum, a, b, mass, detA, detB):
    """Sharp-momentum numerator and denominator including detector volumes.

    Both carry ``qa0 qb0 Vol(A) Vol(B) / (2 pi)**6``; the ratio
    ``4 * numerator / denominator`` does not depend on the detectors.
    """
    M = amplitude_matrix(qa, qb, mass)
    common = qa.e * qb.e * volume(detA) * volume(detB) / (2.0 * np.pi) ** 6
    return trace_ab(a, b, M, M) * common, 4.0 * trace_plain(M, M) * common


def correlation_sharp(qa: FourMomentum, qb: FourMomentum, a, b, mass, detA=None, detB=None) -> CorrelationResult:
    """Correlation for sharp momenta ``qa``, ``qb``; exact, so ``abs_error`` is 0.

    Detector regions may be given but do not influence the result. The
    value is clipped to [-1, 1] against rounding (``|C| <= 1`` holds exactly).
    With ``NWCORR_CHECK_TRACES=1`` the closed form is cross-checked against
    the trace ratio.
    """
    mass = check_mass(mass)
    a = as_unit(a, "a")
    b = as_unit(b, "b")
    for q in (qa, qb):
        if abs(q.mass - mass) > 1e-12 * mass:
            raise DomainError("sharp momenta must be on-shell for the given mass")
    value = float(sharp_closed_form(qa, qb, a, b, mass))
    if os.environ.get("NWCORR_CHECK_TRACES", "") not in ("", "0"):
        oracle = sharp_trace_ratio(qa, qb, a, b, mass)
        if abs(oracle - value) > SHARP_ORACLE_TOL:
            raise AssertionError(f"sharp closed form {value!r} disagrees with trace ratio {oracle!r}")
    return CorrelationResult(float(np.clip(value, -1.0, 1.0)), 0.0, Regime.SHARP_MOMENTUM,
                             _digest(a=a, b=b, qa=qa, qb=qb, mass=mass))


def _collect_warnings(*integrals):
    return tuple(i.warning for i in integrals if i.warning)


def correlation_fixed_directions(state: FactorizedState, detA, detB, a, b,
                                 spec: QuadratureSpec = QuadratureSpec()) -> CorrelationResult:
    """Correlation for momenta pinned to the rays ``state.dir_a`` and ``state.dir_b``.

    For back-to-back rays the result is ``-a.b`` whatever the detectors.
    """
    a = as_unit(a, "a")
    b = as_unit(b, "b")
    IA = fixed_direction_integrals(state.profile_a, state.dir_a, detA, state.mass, spec)
    IB = fixed_direction_integrals(state.profile_b, state.dir_b, detB, state.mass, spec)
    value, err = fixed_direction_value(IA, IB, a, b)
    return CorrelationResult(float(value), float(err), Regime.FIXED_DIRECTION,
                             _digest(a=a, b=b, state=state, detA=detA, detB=detB),
                             _collect_warnings(IA, IB))


def correlation_general(phi_a, phi_b, detA, detB, a, b, mass, spec: QuadratureSpec = QuadratureSpec(),
                        grid_a=None, grid_b=None) -> CorrelationResult:
    """Correlation for a product state ``phi_a(k) phi_b(p)`` with full angular structure.

    ``phi_a`` / ``phi_b`` are radial profiles (isotropic wave functions),
    :class:`~nwcorr.wavepacket.GaussianPacket` instances or callables (then
    ``grid_a`` / ``grid_b`` are required).
    """
    mass = check_mass(mass)
    a = as_unit(a, "a")
    b = as_unit(b, "b")
    IA = general_integrals(phi_a, detA, mass, spec, grid=grid_a)
    IB = general_integrals(phi_b, detB, mass, spec, grid=grid_b)
    value, err = general_value(IA, IB, a, b, mass)
    return CorrelationResult(float(value), float(err), Regime.GENERAL_FACTORIZED,
                             _digest(a=a, b=b, phi_a=phi_a, phi_b=phi_b, detA=detA, detB=detB),
                             _collect_warnings(IA, IB))


def chsh(correlation: Callable, a, aprime, b, bprime) -> CHSHResult:
    """``C(a,b) - C(a,b') + C(a',b) + C(a',b')`` with errors added in absolute value."""
    terms = [(correlation(a, b), 1.0), (correlation(a, bprime), -1.0),
             (correlation(aprime, b), 1.0), (correlation(aprime, bprime), 1.0)]
    value = sum(sign * r.value for r, sign in terms)
    return CHSHResult(float(value), float(sum(r.abs_error for r, _ in terms)))
