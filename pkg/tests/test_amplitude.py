import math

import numpy as np
import pytest
import sympy as sp

from nwcorr.amplitude import (
    SIGMA_2,
    amplitude_matrices,
    amplitude_matrix,
    trace_ab,
    trace_ab_direct,
    trace_plain,
    trace_plain_direct,
)
from nwcorr.exceptions import DomainError
from nwcorr.kinematics import on_shell, random_rotation, random_unit

REST = on_shell(1.0, (0, 0, 0))


def random_momentum(rng, pmax=10.0, mass=1.0):
    return on_shell(mass, random_unit(rng) * rng.uniform(0, pmax))


def test_rest_amplitude_is_minus_i_sigma2():
    M = amplitude_matrix(REST, REST, 1.0)
    np.testing.assert_allclose(M.mat, -1j * SIGMA_2, atol=1e-15, rtol=0)


def test_parallel_momenta_give_pure_sigma2(rng):
    n = random_unit(rng)
    M = amplitude_matrix(on_shell(1.0, 2.0 * n), on_shell(1.0, 0.7 * n), 1.0)
    ratio = M.mat[0, 1] / SIGMA_2[0, 1]
    np.testing.assert_allclose(M.mat, ratio * SIGMA_2, atol=1e-14)


def test_perpendicular_unit_momenta_against_symbolic_evaluation():
    m = sp.Integer(1)
    k = sp.Matrix([1, 0, 0])
    p = sp.Matrix([0, 1, 0])
    k0 = sp.sqrt(m**2 + k.dot(k))
    p0 = sp.sqrt(m**2 + p.dot(p))
    s1 = sp.Matrix([[0, 1], [1, 0]])
    s2 = sp.Matrix([[0, -sp.I], [sp.I, 0]])
    s3 = sp.Matrix([[1, 0], [0, -1]])
    c = k.cross(p)
    inner = ((m + k0) * (m + p0) - k.dot(p)) * sp.eye(2) - sp.I * (c[0] * s1 + c[1] * s2 + c[2] * s3)
    M_sym = (-sp.I / (2 * m * sp.sqrt((m + p0) * (m + k0))) * inner * s2).evalf(30)
    expected = np.array(M_sym.tolist(), dtype=complex)
    M = amplitude_matrix(on_shell(1.0, (1, 0, 0)), on_shell(1.0, (0, 1, 0)), 1.0)
    np.testing.assert_allclose(M.mat, expected, atol=1e-15)
    # frozen values from the symbolic evaluation
    assert M.mat[0, 1] == pytest.approx(-1.2071067811865475 + 0.20710678118654752j, abs=1e-15)
    assert M.mat[1, 0] == pytest.approx(1.2071067811865475 + 0.20710678118654752j, abs=1e-15)


def test_off_shell_or_mismatched_mass_rejected():
    with pytest.raises(DomainError):
        amplitude_matrix(on_shell(2.0, (0, 0, 0)), REST, 1.0)


def test_vectorized_matrices_match_scalar_builder(rng):
    k = random_unit(rng, 20) * rng.uniform(0, 5, (20, 1))
    p = random_unit(rng, 20) * rng.uniform(0, 5, (20, 1))
    batch = amplitude_matrices(k, p, 1.0)
    for i in range(20):
        np.testing.assert_allclose(batch[i], amplitude_matrix(on_shell(1, k[i]), on_shell(1, p[i]), 1.0).mat,
                                   atol=1e-15)


def test_trace_ab_rest_parallel_is_minus_two():
    M = amplitude_matrix(REST, REST, 1.0)
    assert trace_ab((0, 0, 1), (0, 0, 1), M, M) == pytest.approx(-2.0, abs=1e-15)


def test_trace_ab_rest_perpendicular_vanishes():
    M = amplitude_matrix(REST, REST, 1.0)
    assert abs(trace_ab((0, 0, 1), (1, 0, 0), M, M)) < 1e-15


def test_trace_plain_rest_is_two():
    M = amplitude_matrix(REST, REST, 1.0)
    assert trace_plain(M, M) == pytest.approx(2.0, abs=1e-15)


def test_trace_ab_rejects_non_unit_direction():
    M = amplitude_matrix(REST, REST, 1.0)
    with pytest.raises(DomainError):
        trace_ab((0, 0, 2), (1, 0, 0), M, M)


@pytest.mark.parametrize("mass", [1.0, 0.511, 938.0])
def test_closed_forms_match_matrix_products(rng, mass):
    for _ in range(200):
        a, b = random_unit(rng), random_unit(rng)
        k, p, kp, pp = (random_momentum(rng, 10 * mass, mass) for _ in range(4))
        M, Mp = amplitude_matrix(k, p, mass), amplitude_matrix(kp, pp, mass)
        direct = trace_ab_direct(a, b, M, Mp)
        scale = np.linalg.norm(M.mat) * np.linalg.norm(Mp.mat)
        assert abs(trace_ab(a, b, M, Mp) - direct) <= 1e-10 * max(abs(direct), scale)
        direct = trace_plain_direct(M, Mp)
        assert abs(trace_plain(M, Mp) - direct) <= 1e-10 * abs(direct)


def test_trace_plain_diagonal_real_positive(rng):
    for _ in range(200):
        M = amplitude_matrix(random_momentum(rng), random_momentum(rng), 1.0)
        t = trace_plain(M, M)
        assert t.real > 0
        assert abs(t.imag) < 1e-12 * abs(t)


def test_exchange_conjugation(rng):
    for _ in range(100):
        a, b = random_unit(rng), random_unit(rng)
        M = amplitude_matrix(random_momentum(rng), random_momentum(rng), 1.0)
        Mp = amplitude_matrix(random_momentum(rng), random_momentum(rng), 1.0)
        assert trace_ab(a, b, M, Mp) == pytest.approx(np.conj(trace_ab(a, b, Mp, M)), abs=1e-12)


def test_rotational_covariance(rng):
    for _ in range(100):
        R = random_rotation(rng)
        a, b = random_unit(rng), random_unit(rng)
        moms = [random_momentum(rng).p for _ in range(4)]
        M = amplitude_matrix(on_shell(1, moms[0]), on_shell(1, moms[1]), 1.0)
        Mp = amplitude_matrix(on_shell(1, moms[2]), on_shell(1, moms[3]), 1.0)
        RM = amplitude_matrix(on_shell(1, R @ moms[0]), on_shell(1, R @ moms[1]), 1.0)
        RMp = amplitude_matrix(on_shell(1, R @ moms[2]), on_shell(1, R @ moms[3]), 1.0)
        t, tr = trace_ab(a, b, M, Mp), trace_ab(R @ a, R @ b, RM, RMp)
        assert abs(t - tr) <= 1e-10 * max(1.0, abs(t))
        t, tr = trace_plain(M, Mp), trace_plain(RM, RMp)
        assert abs(t - tr) <= 1e-10 * abs(t)


def test_oracle_check_raises_on_disagreement(monkeypatch):
    import nwcorr.amplitude as amp

    M = amplitude_matrix(on_shell(1, (1, 0, 0)), on_shell(1, (0, 1, 0)), 1.0)
    monkeypatch.setattr(amp, "trace_plain_closed", lambda *args: 123.0)
    with pytest.raises(AssertionError):
        amp.trace_plain(M, M)


def test_mass_scaling_of_rest_trace():
    # At rest the normalization is mass independent.
    for mass in (0.1, 1.0, 10.0):
        q = on_shell(mass, (0, 0, 0))
        M = amplitude_matrix(q, q, mass)
        assert trace_plain(M, M) == pytest.approx(2.0, abs=1e-14)
        assert math.isclose(trace_ab((1, 0, 0), (1, 0, 0), M, M).real, -2.0, abs_tol=1e-14)
