import math

import numpy as np
import pytest

from ergodic import (apply_cesaro2d, apply_finite_mean, apply_mean_operator, apply_time_mean, ergodic_residual,
                     mean_orbit)
from errors import InvalidArgumentError
from mean import CesaroSchedule, TimeMean, TimeSchedule, cesaro2d, point_mass, uniform_mean
from operators import (GOLDEN_ANGLE, AffineContraction, Ball, CommutingPair, LinearFlow, Rotation, RotationFlow,
                       build_family)
from oracle import linear_flow_mean_closed_form, rotation_cesaro_closed_form
from semigroup import Grid2D, Time

TOL = 1e-12
QUAD_TOL = 1e-9
UNIT_DISK = Ball([0.0, 0.0], 1.0)
WIDE_DISK = Ball([0.0, 0.0], 2.0)


def quarter_turn_pair():
    return CommutingPair(Rotation(math.pi / 2), Rotation(math.pi / 2), UNIT_DISK)


class TestFiniteMeans:

    def test_point_mass_is_act(self):
        pair = quarter_turn_pair()
        s = Grid2D(2, 3)
        x = np.array([0.3, -0.4])
        assert apply_finite_mean(pair, point_mass(s), x).point == pytest.approx(pair.act(s, x), abs=TOL)

    def test_uniform_mean(self):
        pair = quarter_turn_pair()
        mu = uniform_mean([Grid2D(1, 1), Grid2D(2, 2)])
        # half turn and full turn of (1, 0) average to the origin
        assert apply_mean_operator(pair, mu, [1.0, 0.0]).point == pytest.approx([0.0, 0.0], abs=TOL)

    def test_support_must_match_family(self):
        flow = LinearFlow(np.diag([0.0, 1.0]), UNIT_DISK)
        with pytest.raises(InvalidArgumentError):
            apply_mean_operator(flow, cesaro2d(2), [0.1, 0.1])

    def test_fixed_point_is_kept(self):
        flow = LinearFlow(np.diag([0.0, 1.0]), UNIT_DISK)
        mu = uniform_mean([Time(0.5), Time(3.0), Time(9.0)])
        assert apply_mean_operator(flow, mu, [0.7, 0.0]).point == pytest.approx([0.7, 0.0], abs=TOL)


class TestCesaro:

    @pytest.mark.parametrize("factorize", [False, True])
    def test_quarter_turns(self, factorize):
        result = apply_cesaro2d(quarter_turn_pair(), 2, [1.0, 0.0], factorize=factorize)
        assert result.point == pytest.approx([0.0, -0.5], abs=TOL)

    def test_order_one(self):
        pair = quarter_turn_pair()
        x = np.array([0.2, 0.5])
        assert apply_cesaro2d(pair, 1, x).point == pytest.approx(pair.T(pair.U(x)), abs=TOL)

    def test_identity_pair(self):
        identity = AffineContraction(np.eye(2))
        pair = CommutingPair(identity, identity, UNIT_DISK)
        for n in (1, 4, 9):
            assert apply_cesaro2d(pair, n, [0.3, 0.3]).point == pytest.approx([0.3, 0.3], abs=TOL)

    def test_order_zero(self):
        with pytest.raises(InvalidArgumentError):
            apply_cesaro2d(quarter_turn_pair(), 0, [0.0, 0.0])

    def test_needs_pair(self):
        with pytest.raises(InvalidArgumentError):
            apply_cesaro2d(LinearFlow(np.eye(2), UNIT_DISK), 2, [0.0, 0.0])

    def test_projection_pair_full_sum(self):
        pair = build_family({"type": "projection_pair", "T": {"lower": [-0.5, -2], "upper": [0.5, 2]},
                             "U": {"lower": [-2, -0.3], "upper": [2, 0.3]}})
        # both projections are idempotent, so every term is the clamped point
        result = apply_cesaro2d(pair, 3, [0.9, -0.4], factorize=True)
        assert result.point == pytest.approx([0.5, -0.3], abs=TOL)

    def test_matches_closed_form(self):
        theta, phi = GOLDEN_ANGLE, 1.0
        pair = CommutingPair(Rotation(theta), Rotation(phi), UNIT_DISK)
        rng = np.random.default_rng(3)
        for x in UNIT_DISK.sample(rng, 20):
            for n in (1, 2, 5, 13, 50):
                expected = rotation_cesaro_closed_form(theta, phi, n, x)
                assert apply_cesaro2d(pair, n, x).point == pytest.approx(expected, abs=TOL)
            for n in range(1, 51):
                expected = rotation_cesaro_closed_form(theta, phi, n, x)
                assert apply_cesaro2d(pair, n, x, factorize=True).point == pytest.approx(expected, abs=TOL)


class TestTimeMeans:

    def test_linear_flow(self):
        flow = LinearFlow(np.diag([0.0, 1.0]), WIDE_DISK)
        result = apply_time_mean(flow, 2.0, [1.0, 1.0])
        assert result.point == pytest.approx([1.0, 0.4323323584], abs=1e-9)
        assert result.quad_error_estimate <= 1e-9

    def test_rotation_center_is_fixed(self):
        flow = RotationFlow(1.3, [0.2, 0.1], Ball([0.2, 0.1], 0.5))
        for t_n in (0.7, 5.0, 40.0):
            assert apply_time_mean(flow, t_n, [0.2, 0.1]).point == pytest.approx([0.2, 0.1], abs=TOL)

    def test_zero_generator(self):
        flow = LinearFlow(np.zeros((2, 2)), UNIT_DISK)
        assert apply_time_mean(flow, 3.5, [0.4, -0.2]).point == pytest.approx([0.4, -0.2], abs=TOL)

    def test_needs_flow(self):
        with pytest.raises(InvalidArgumentError):
            apply_time_mean(quarter_turn_pair(), 2.0, [0.0, 0.0])

    @pytest.mark.parametrize("tau", [1.0, 10.0, 100.0])
    def test_matches_closed_form(self, tau):
        A = np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 0.0]])
        flow = LinearFlow(A, Ball(np.zeros(3), 1.0))
        rng = np.random.default_rng(11)
        for x in flow.domain.sample(rng, 20):
            expected = linear_flow_mean_closed_form(A, tau, x)
            assert apply_time_mean(flow, tau, x).point == pytest.approx(expected, abs=QUAD_TOL)


class TestResidual:

    def test_fixed_point(self):
        flow = LinearFlow(np.diag([0.0, 1.0]), UNIT_DISK)
        assert ergodic_residual(flow, TimeMean(4.0), [0.6, 0.0]) <= 1e-10

    def test_quarter_turns(self):
        residual = ergodic_residual(quarter_turn_pair(), cesaro2d(2), [1.0, 0.0])
        assert residual == pytest.approx(1.1180339887, abs=1e-10)

    def test_linear_flow(self):
        flow = LinearFlow(np.diag([0.0, 1.0]), WIDE_DISK)
        assert ergodic_residual(flow, TimeMean(2.0), [1.0, 1.0]) == pytest.approx(0.5676676416, abs=1e-9)


class TestMeanOrbit:

    def test_affine_path_matches_direct(self):
        pair = build_family({"type": "affine_pair",
                             "T": {"matrix": [[0.5, 0.0], [0.0, 1.0]], "offset": [0.25, 0.0]},
                             "U": {"matrix": [[1.0, 0.0], [0.0, 0.5]], "offset": [0.0, 0.1]},
                             "domain": {"type": "box", "lower": [-1, -1], "upper": [1, 1]}})
        x = np.array([0.1, 0.4])
        for n, result in mean_orbit(pair, CesaroSchedule(), x, 12):
            assert result.point == pytest.approx(apply_cesaro2d(pair, n, x).point, abs=TOL)

    def test_flow_path(self):
        flow = LinearFlow([[1.0]], Ball([0.0], 1.0))
        orbit = list(mean_orbit(flow, TimeSchedule(), [1.0], 5))
        assert [n for n, _ in orbit] == [1, 2, 3, 4, 5]
        for n, result in orbit:
            assert result.point[0] == pytest.approx(-math.expm1(-n) / n, abs=1e-9)


def golden_pair():
    return build_family({"type": "rotation_pair", "theta": "golden"})


def diagonal_affine_pair():
    return build_family({"type": "affine_pair",
                         "T": {"matrix": [[0.5, 0.0], [0.0, 1.0]], "offset": [0.25, 0.0]},
                         "U": {"matrix": [[1.0, 0.0], [0.0, 0.5]], "offset": [0.0, 0.1]},
                         "domain": {"type": "box", "lower": [-1, -1], "upper": [1, 1]}})


def mean_operator_cases():
    projection_pair = build_family({"type": "projection_pair", "T": {"lower": [-0.5, -2], "upper": [0.5, 2]},
                                    "U": {"lower": [-2, -0.3], "upper": [2, 0.3]}})
    return [
        (golden_pair(), cesaro2d(7)),
        (golden_pair(), uniform_mean([Grid2D(1, 1), Grid2D(3, 2), Grid2D(5, 8)])),
        (diagonal_affine_pair(), cesaro2d(6)),
        (projection_pair, cesaro2d(4)),
        (LinearFlow([[2.0, 1.0], [1.0, 2.0]], UNIT_DISK), TimeMean(3.0)),
        (RotationFlow(1.3, [0.0, 0.0], UNIT_DISK), TimeMean(2.5)),
        (LinearFlow(np.diag([0.0, 1.0]), UNIT_DISK), point_mass(Time(1.5))),
    ]


class TestMeanOperatorProperties:

    @pytest.mark.parametrize("family, mean", mean_operator_cases())
    def test_nonexpansive(self, family, mean):
        rng = np.random.default_rng(21)
        xs, ys = family.domain.sample(rng, 500), family.domain.sample(rng, 500)
        for x, y in zip(xs, ys):
            tx = apply_mean_operator(family, mean, x, QUAD_TOL / 10).point
            ty = apply_mean_operator(family, mean, y, QUAD_TOL / 10).point
            assert np.linalg.norm(tx - ty) <= np.linalg.norm(x - y) + QUAD_TOL

    @pytest.mark.parametrize("t_n", [100.0, 1000.0])
    def test_rotation_flow_mean_decays(self, t_n):
        omega, center = 1.3, np.array([0.2, -0.1])
        flow = RotationFlow(omega, center, Ball(center, 0.8))
        rng = np.random.default_rng(8)
        for z in flow.domain.sample(rng, 10):
            averaged = apply_time_mean(flow, t_n, z).point
            bound = 2 * np.linalg.norm(z - center) * 2 / (abs(omega) * t_n)
            assert np.linalg.norm(averaged - center) <= bound + QUAD_TOL

    @pytest.mark.parametrize("pair", [golden_pair(), diagonal_affine_pair()], ids=["rotation", "affine"])
    def test_cesaro_matches_finite_mean_path(self, pair):
        rng = np.random.default_rng(13)
        for x in pair.domain.sample(rng, 3):
            for n in range(1, 21):
                direct = apply_finite_mean(pair, cesaro2d(n), x).point
                assert apply_cesaro2d(pair, n, x).point == pytest.approx(direct, abs=TOL)
                assert apply_cesaro2d(pair, n, x, factorize=True).point == pytest.approx(direct, abs=TOL)
