import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nwcorr.correlator import (
    Regime,
    assemble_fixed_direction,
    chsh,
    correlation_fixed_directions,
    correlation_general,
    correlation_sharp,
    fixed_direction_value,
    sharp_closed_form,
    sharp_moments,
    sharp_trace_ratio,
)
from nwcorr.detector import AllSpace, Ball, Box, delta_kernel, rotated
from nwcorr.exceptions import DegenerateStateError, DomainError
from nwcorr.integrals import MomentumIntegrals, QuadratureSpec
from nwcorr.kinematics import on_shell, random_rotation, random_unit
from nwcorr.wavepacket import FactorizedState, Gaussian, GaussianPacket, Rectangular

REST = on_shell(1.0, (0, 0, 0))
S2 = 1 / math.sqrt(2)
TSIRELSON = ((1, 0, 0), (0, 0, 1), (S2, 0, S2), (-S2, 0, S2))


def sharp(qa, qb, a, b, m=1.0):
    return correlation_sharp(on_shell(m, qa), on_shell(m, qb), a, b, m).value


# -- sharp momenta --------------------------------------------------------------


@pytest.mark.parametrize("b, expected", [((0, 0, 1), -1.0), ((1, 0, 0), 0.0), ((0, 0, -1), 1.0)])
def test_rest_frame_singlet(b, expected):
    assert sharp((0, 0, 0), (0, 0, 0), (0, 0, 1), b) == pytest.approx(expected, abs=1e-15)


def test_rest_frame_cosine_law():
    for theta in np.linspace(0, np.pi, 13):
        b = (np.sin(theta), 0, np.cos(theta))
        assert sharp((0, 0, 0), (0, 0, 0), (0, 0, 1), b) == pytest.approx(-np.cos(theta), abs=1e-15)


def test_perpendicular_momenta_example():
    c = sharp((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 0, 0))
    assert c == pytest.approx(sharp_trace_ratio(on_shell(1, (1, 0, 0)), on_shell(1, (0, 1, 0)),
                                                (0, 0, 1), (1, 0, 0), 1.0), abs=1e-12)


def test_result_metadata():
    res = correlation_sharp(REST, REST, (0, 0, 1), (0, 0, 1), 1.0)
    assert res.abs_error == 0.0
    assert res.regime is Regime.SHARP_MOMENTUM
    assert res.regime == "sharp"
    assert "mass=1.0" in res.inputs_digest


def test_rejects_non_unit_measurement():
    with pytest.raises(DomainError):
        correlation_sharp(REST, REST, (0, 0, 2), (0, 0, 1), 1.0)


def test_rejects_momentum_of_other_mass():
    with pytest.raises(DomainError):
        correlation_sharp(on_shell(2.0, (0, 0, 0)), REST, (0, 0, 1), (0, 0, 1), 1.0)


def test_detectors_do_not_change_sharp_value(rng):
    qa, qb = on_shell(1, (0.3, 1, 2)), on_shell(1, (-1, 0.5, 0))
    a, b = random_unit(rng), random_unit(rng)
    base = correlation_sharp(qa, qb, a, b, 1.0).value
    for det in (Box(), Ball(radius=3), AllSpace()):
        assert correlation_sharp(qa, qb, a, b, 1.0, det, Box(side_lengths=(1, 2, 3))).value == base


def test_sharp_moments_ratio_matches_closed_form(rng):
    qa, qb = on_shell(1, (0.3, 1, 2)), on_shell(1, (-1, 0.5, 0))
    a, b = random_unit(rng), random_unit(rng)
    for detA, detB in ((Box(), Ball()), (Ball(radius=2), Box(side_lengths=(2, 2, 2)))):
        num, den = sharp_moments(qa, qb, a, b, 1.0, detA, detB)
        assert (4 * num / den).real == pytest.approx(sharp_closed_form(qa, qb, a, b, 1.0), abs=1e-12)


def test_sharp_vectorized_over_settings(rng):
    qa, qb = on_shell(1, (1, 2, 0)), on_shell(1, (0, -1, 3))
    a, b = random_unit(rng, 50), random_unit(rng, 50)
    batch = sharp_closed_form(qa, qb, a, b, 1.0)
    for i in range(50):
        assert batch[i] == pytest.approx(sharp_trace_ratio(qa, qb, a[i], b[i], 1.0), abs=1e-12)


momenta = st.tuples(*[st.floats(-20, 20)] * 3)
seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=300, deadline=None)
@given(momenta, momenta, seeds)
def test_sharp_bounded_and_symmetric(qa, qb, seed):
    rng = np.random.default_rng(seed)
    a, b = random_unit(rng), random_unit(rng)
    c = sharp(qa, qb, a, b)
    assert -1.0 <= c <= 1.0
    # exchanging the particles together with their measurements
    assert sharp(qb, qa, b, a) == pytest.approx(c, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(momenta, momenta, seeds)
def test_sharp_rotation_invariant(qa, qb, seed):
    rng = np.random.default_rng(seed)
    R = random_rotation(rng)
    a, b = random_unit(rng), random_unit(rng)
    c = sharp(qa, qb, a, b)
    assert sharp(R @ np.array(qa), R @ np.array(qb), R @ a, R @ b) == pytest.approx(c, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(momenta, momenta, seeds, st.sampled_from([0.1, 0.511, 1.0, 938.0]))
def test_sharp_mass_scaling(qa, qb, seed, m):
    # only momentum over mass matters
    rng = np.random.default_rng(seed)
    a, b = random_unit(rng), random_unit(rng)
    c = sharp(qa, qb, a, b, 1.0)
    assert sharp(np.multiply(qa, m), np.multiply(qb, m), a, b, m) == pytest.approx(c, abs=1e-10)


def test_back_to_back_sharp_momenta_give_minus_a_dot_b(rng):
    for _ in range(100):
        q = random_unit(rng) * rng.uniform(0, 50)
        a, b = random_unit(rng), random_unit(rng)
        assert sharp(q, -q, a, b) == pytest.approx(-a @ b, abs=1e-12)


def test_tsirelson_bound_at_rest():
    corr = lambda a, b: correlation_sharp(REST, REST, a, b, 1.0)
    res = chsh(corr, *TSIRELSON)
    assert res.value == pytest.approx(-2 * math.sqrt(2), abs=1e-12)
    assert res.abs_error == 0.0


def test_relativistic_chsh_degrades():
    q = 5.0
    corr = lambda a, b: correlation_sharp(on_shell(1, (0, q, 0)), on_shell(1, (q, 0, 0)), a, b, 1.0)
    assert abs(chsh(corr, *TSIRELSON).value) < 2 * math.sqrt(2) - 1e-3


# -- fixed directions -------------------------------------------------------------


def test_fixed_direction_assembly_rest_limit():
    # I2 = I3 = 0 reproduces the rest-frame singlet for any rays
    a, b = np.array([0, 0, 1.0]), np.array([0.6, 0, 0.8])
    num, den = assemble_fixed_direction((2.0, 0, 0), (3.0, 0, 0), np.array([0, 0, 1.0]),
                                        np.array([1.0, 0, 0]), a, b)
    assert num / den == pytest.approx(-0.8)


def test_back_to_back_rays_give_minus_a_dot_b(rng):
    for _ in range(10):
        n = random_unit(rng)
        state = FactorizedState(Gaussian(rng.uniform(0.5, 2), 0.2), Rectangular(0.3, 1.2), n, -n)
        a, b = random_unit(rng), random_unit(rng)
        detA = Box(center=rng.normal(size=3), side_lengths=rng.uniform(0.5, 2, 3), rotation=random_rotation(rng))
        detB = Ball(center=rng.normal(size=3), radius=rng.uniform(0.5, 2))
        need = max(_need(state.profile_a, n, detA), _need(state.profile_b, -n, detB), 64)
        res = correlation_fixed_directions(state, detA, detB, a, b, QuadratureSpec(nodes_1d=need))
        assert res.value == pytest.approx(-a @ b, abs=1e-12)
        assert abs(res.value + a @ b) <= max(10 * res.abs_error, 1e-13)


def _need(profile, n, det):
    from nwcorr.integrals import min_nodes_1d
    return min_nodes_1d(profile, n, det)


def test_equal_rays_and_parallel_settings_give_minus_one():
    n = np.array([0.0, 0.0, 1.0])
    state = FactorizedState(Gaussian(1.0, 0.2), Gaussian(2.0, 0.3), n, n)
    res = correlation_fixed_directions(state, Box(), Ball(radius=1.0), n, n)
    assert res.value == pytest.approx(-1.0, abs=1e-12)


def test_narrow_profiles_approach_sharp_momenta():
    n, m = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    state = FactorizedState(Gaussian(1.0, 0.01), Gaussian(1.0, 0.01), n, m)
    a, b = np.array([0.6, 0, 0.8]), np.array([0, 0.8, 0.6])
    res = correlation_fixed_directions(state, Box(), Box(), a, b)
    target = sharp(n, m, a, b)
    assert res.value == pytest.approx(target, rel=1e-3)


def test_exchange_symmetry_fixed_direction(rng):
    n, m = random_unit(rng), random_unit(rng)
    ga, gb = Gaussian(1.0, 0.2), Rectangular(0.5, 1.5)
    detA, detB = Box(center=(0.2, 0, 0)), Ball(radius=0.8)
    a, b = random_unit(rng), random_unit(rng)
    forward = correlation_fixed_directions(FactorizedState(ga, gb, n, m), detA, detB, a, b)
    backward = correlation_fixed_directions(FactorizedState(gb, ga, m, n), detB, detA, b, a)
    assert forward.value == pytest.approx(backward.value, abs=1e-12)


def test_rotation_invariance_fixed_direction(rng):
    n, m = random_unit(rng), random_unit(rng)
    ga, gb = Gaussian(1.0, 0.2), Gaussian(0.7, 0.1)
    detA, detB = Box(center=(0.2, 0.5, 0), side_lengths=(1, 2, 1)), Ball(center=(0, 0, 1), radius=0.8)
    a, b = random_unit(rng), random_unit(rng)
    R = random_rotation(rng)
    base = correlation_fixed_directions(FactorizedState(ga, gb, n, m), detA, detB, a, b)
    rot = correlation_fixed_directions(FactorizedState(ga, gb, R @ n, R @ m), rotated(detA, R),
                                       rotated(detB, R), R @ a, R @ b)
    assert abs(base.value - rot.value) <= 10 * base.abs_error


def test_vanishing_normalization_is_reported():
    zero = MomentumIntegrals(0j, np.zeros(3, complex), np.zeros((3, 3), complex), 0.0, np.zeros(3),
                             np.zeros((3, 3)), Box(), direction=np.array([0, 0, 1.0]),
                             scalars=(0j, 0j, 0j), scalar_errors=(0.0, 0.0, 0.0))
    with pytest.raises(DegenerateStateError):
        fixed_direction_value(zero, zero, np.array([0, 0, 1.0]), np.array([0, 0, 1.0]))


# -- general ------------------------------------------------------------------------


def test_narrow_packets_approach_sharp_momenta():
    spec = QuadratureSpec(nodes_3d=4, target_rel_error=1e-6)
    qa, qb = np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])
    a, b = np.array([0.6, 0, 0.8]), np.array([0, 0.8, 0.6])
    res = correlation_general(GaussianPacket(qa, 0.01), GaussianPacket(qb, 0.01), Box(), Ball(radius=1),
                              a, b, 1.0, spec)
    assert res.value == pytest.approx(sharp(qa, qb, a, b), rel=1e-3)
    assert res.abs_error < 1e-6
    assert res.regime is Regime.GENERAL_FACTORIZED


def test_isotropic_state_in_centered_balls_is_proportional_to_minus_a_dot_b(rng):
    # with i2 = 0 and i3 proportional to the identity, C(a, b) = -c * a.b for one constant c
    spec = QuadratureSpec(nodes_3d=4, target_rel_error=1e-2)
    g = Gaussian(0.5, 0.1)
    z = np.array([0, 0, 1.0])
    c = correlation_general(g, g, Ball(radius=1), Ball(radius=1), z, z, 1.0, spec).value
    assert -1.0 <= c < 0
    for _ in range(3):
        a, b = random_unit(rng), random_unit(rng)
        res = correlation_general(g, g, Ball(radius=1), Ball(radius=1), a, b, 1.0, spec)
        assert res.value == pytest.approx(c * (a @ b), abs=1e-8)


# -- modelling checks ---------------------------------------------------------------


def _sharp_with_product(qa, qb, a, b, m, product):
    a, b = np.asarray(a), np.asarray(b)
    inner = np.cross(a, b) + ((a @ qa.p) * np.cross(b, qb.p) - (b @ qb.p) * np.cross(a, qa.p)) / (
        (qa.e + m) * (qb.e + m))
    return -(a @ b) + inner @ np.cross(qa.p, qb.p) / (m * m + product(qa, qb))


def test_minkowski_reading_of_sharp_product_and_euclidean_rejected(rng):
    minkowski = lambda x, y: x.e * y.e - x.p @ y.p
    euclidean = lambda x, y: x.p @ y.p
    worst_m = worst_e = 0.0
    for _ in range(200):
        qa, qb = on_shell(1, random_unit(rng) * rng.uniform(0.5, 5)), on_shell(1, random_unit(rng) * rng.uniform(0.5, 5))
        a, b = random_unit(rng), random_unit(rng)
        oracle = sharp_trace_ratio(qa, qb, a, b, 1.0)
        worst_m = max(worst_m, abs(_sharp_with_product(qa, qb, a, b, 1.0, minkowski) - oracle))
        worst_e = max(worst_e, abs(_sharp_with_product(qa, qb, a, b, 1.0, euclidean) - oracle))
    assert worst_m < 1e-12
    assert worst_e > 1e-2


def test_spin_projection_commutes_with_localization(rng):
    # one particle on a small grid: position projector acts on momenta, spin on the 2-dim index
    from nwcorr.amplitude import sigma_dot
    from nwcorr.integrals import cartesian_grid
    grid = cartesian_grid((-1, -1, -1), (1, 1, 1), 3)
    k, w = grid.points, grid.weights
    e = np.sqrt(1.0 + np.sum(k * k, axis=1))
    for det in (Box(center=(0.3, 0, 0), side_lengths=(1, 2, 1)), Ball(radius=0.7)):
        K = delta_kernel(det, k[:, None, :] - k[None, :, :])
        P = np.sqrt(w)[:, None] * K * np.sqrt(w)[None, :] / np.sqrt(4 * e[:, None] * e[None, :])
        Pi = np.kron(P, np.eye(2))
        for _ in range(5):
            S = np.kron(np.eye(len(k)), sigma_dot(random_unit(rng)) / 2)
            comm = S @ Pi - Pi @ S
            assert np.linalg.norm(comm) <= 1e-15 * np.linalg.norm(S) * np.linalg.norm(Pi)
