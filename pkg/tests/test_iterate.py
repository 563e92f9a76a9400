import math

import numpy as np
import pytest

from config import ITERATION
from ergodic import ergodic_residual
from errors import DomainError, InvalidArgumentError, IterationLimitError, NumericError
from iterate import (MannConfig, Trace, characterize, constant_alpha, fejer_violation, lambda_estimate,
                     mann_gap_diagnostic, mann_iterate, projected_retraction, retraction_apply,
                     retraction_sensitivity, table_alpha)
from mean import CesaroSchedule, TimeMean, TimeSchedule, cesaro2d
from operators import Ball, CommutingPair, LinearFlow, Rotation, RotationFlow, build_family
from oracle import fixed_set_for, kernel_projection
from semigroup import Time

UNIT_DISK = Ball([0.0, 0.0], 1.0)
ACCEPT_TOL = 1e-6
FEJER_SLACK = 1e-12
VERDICT_WINDOW = ITERATION["verdict_window"]


def quarter_turn_pair():
    return CommutingPair(Rotation(math.pi / 2), Rotation(math.pi / 2), UNIT_DISK)


def half_turn_pair():
    return CommutingPair(Rotation(math.pi), Rotation(math.pi), UNIT_DISK)


def golden_pair():
    return build_family({"type": "rotation_pair", "theta": "golden"})


def scalar_flow():
    return LinearFlow([[1.0]], Ball([0.0], 1.0))


def axis_flow():
    return LinearFlow(np.diag([0.0, 1.0]), UNIT_DISK)


class BrokenFlow(LinearFlow):
    """Scalar flow whose orbits turn into NaN once ``broken`` is set and |x| < 0.9."""

    broken = False

    def trajectory(self, ts, x):
        values = super().trajectory(ts, x)
        if self.broken and abs(x[0]) < 0.9:
            values = np.full_like(values, np.nan)
        return values


class TestMannConfig:

    def test_alpha_bounds(self):
        with pytest.raises(InvalidArgumentError):
            MannConfig(alpha_schedule=constant_alpha(1.0)).validate()
        with pytest.raises(InvalidArgumentError):
            MannConfig(alpha_schedule=table_alpha([0.5, 0.005]), max_iter=3).validate()

    def test_table_repeats_last(self):
        alpha = table_alpha([0.9, 0.3])
        assert [alpha(n) for n in (1, 2, 3, 10)] == [0.9, 0.3, 0.3, 0.3]

    def test_bad_max_iter(self):
        with pytest.raises(InvalidArgumentError):
            MannConfig(max_iter=0).validate()


class TestMannIterate:

    def test_quarter_turns_reach_center_in_one_step(self):
        trace, final = mann_iterate(quarter_turn_pair(), MannConfig(), [1.0, 0.0])
        first = trace.records[0]
        assert first.w == pytest.approx([-1.0, 0.0], abs=1e-15)
        assert first.x_next == pytest.approx([0.0, 0.0], abs=1e-15)
        assert trace.converged
        assert final == pytest.approx([0.0, 0.0], abs=1e-15)
        assert all(r.residual <= 1e-15 for r in trace.records[1:])

    def test_fixed_start(self):
        trace, final = mann_iterate(quarter_turn_pair(), MannConfig(), [0.0, 0.0])
        assert len(trace) == VERDICT_WINDOW
        assert trace.converged
        assert trace.records[0].residual == 0.0
        assert final == pytest.approx([0.0, 0.0])

    def test_scalar_flow_first_step(self):
        config = MannConfig(mean_schedule=TimeSchedule(), max_iter=1)
        trace, final = mann_iterate(scalar_flow(), config, [1.0])
        assert final[0] == pytest.approx(0.5 * (1 - math.exp(-1)) + 0.5, abs=1e-9)
        assert final[0] == pytest.approx(0.8160602794, abs=1e-9)
        assert not trace.converged

    def test_scalar_flow_converges(self):
        trace, final = mann_iterate(scalar_flow(), MannConfig(max_iter=200), [1.0])
        assert trace.converged
        assert len(trace) <= 200
        assert abs(final[0]) <= ACCEPT_TOL
        assert fejer_violation(trace, z0=[0.0]) <= FEJER_SLACK
        assert mann_gap_diagnostic(trace)[-1] <= ACCEPT_TOL

    def test_golden_rotations_converge(self):
        family = golden_pair()
        rng = np.random.default_rng(2024)
        for x1 in UNIT_DISK.sample(rng, 20):
            trace, final = mann_iterate(family, MannConfig(alpha_schedule=constant_alpha(0.5), max_iter=500), x1)
            assert trace.converged
            assert np.linalg.norm(final) <= ACCEPT_TOL
            assert fejer_violation(trace, z0=np.zeros(2)) <= FEJER_SLACK
            assert mann_gap_diagnostic(trace)[-1] <= ACCEPT_TOL

    def test_final_point_is_nearly_fixed(self):
        config = MannConfig(max_iter=500)
        trace, final = mann_iterate(golden_pair(), config, [0.6, -0.3])
        assert ergodic_residual(golden_pair(), cesaro2d(len(trace)), final) <= 10 * config.tol

    def test_confirm_steps(self):
        config = MannConfig(confirm_steps=7)
        trace, _ = mann_iterate(quarter_turn_pair(), config, [0.0, 0.0])
        assert len(trace) == 7

    def test_first_mean_fixing_the_start_is_not_enough(self):
        # T(1, 1) is a full turn, so w_1 = x_1, but cesaro2d(2) maps (1, 0) to 0
        pair = half_turn_pair()
        assert ergodic_residual(pair, cesaro2d(1), [1.0, 0.0]) <= 1e-15
        assert ergodic_residual(pair, cesaro2d(2), [1.0, 0.0]) == pytest.approx(1.0, abs=1e-12)

        trace, final = mann_iterate(pair, MannConfig(max_iter=200), [1.0, 0.0])
        assert len(trace) > 2
        assert trace.records[1].residual == pytest.approx(1.0, abs=1e-12)
        assert trace.converged
        assert np.linalg.norm(final) <= ACCEPT_TOL
        assert all(r.residual <= MannConfig().tol for r in trace.records[-VERDICT_WINDOW:])

    def test_start_outside_domain(self):
        with pytest.raises(DomainError):
            mann_iterate(quarter_turn_pair(), MannConfig(), [3.0, 0.0])

    def test_numeric_failure_keeps_partial_trace(self):
        flow = BrokenFlow([[1.0]], Ball([0.0], 1.0))
        flow.broken = True
        with pytest.raises(NumericError) as info:
            mann_iterate(flow, MannConfig(max_iter=10), [1.0])
        assert isinstance(info.value.trace, Trace)
        assert len(info.value.trace) == 1


class TestDiagnostics:

    def test_single_step(self):
        config = MannConfig(mean_schedule=TimeSchedule(), max_iter=1)
        trace, _ = mann_iterate(scalar_flow(), config, [1.0])
        assert mann_gap_diagnostic(trace) == [trace.records[0].residual]

    def test_running_minimum_after_two_steps(self):
        trace, _ = mann_iterate(quarter_turn_pair(), MannConfig(), [1.0, 0.0])
        assert mann_gap_diagnostic(trace)[1] == pytest.approx(0.0, abs=1e-15)

    def test_running_minimum_is_monotone(self):
        trace, _ = mann_iterate(scalar_flow(), MannConfig(tol=1e-300, max_iter=50), [1.0])
        gaps = mann_gap_diagnostic(trace)
        assert len(gaps) == 50
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] <= 1e-8

    def test_empty_trace(self):
        empty = Trace((), False, np.zeros(2))
        with pytest.raises(InvalidArgumentError):
            mann_gap_diagnostic(empty)
        with pytest.raises(InvalidArgumentError):
            fejer_violation(empty)


class TestRetraction:

    def test_kernel_axis(self):
        q = retraction_apply(axis_flow(), 50.0, [0.5, 0.8])
        assert q == pytest.approx([0.5, 0.0], abs=ACCEPT_TOL)
        assert q == pytest.approx(kernel_projection(np.diag([0.0, 1.0]), [0.5, 0.8]), abs=ACCEPT_TOL)

    def test_fixed_point(self):
        q = retraction_apply(axis_flow(), 50.0, [-0.3, 0.0])
        assert q == pytest.approx([-0.3, 0.0], abs=1e-12)

    def test_quarter_turns(self):
        q = retraction_apply(quarter_turn_pair(), 64, [0.9, 0.0])
        assert q == pytest.approx([0.0, 0.0], abs=1e-4)

    def test_identities(self):
        flow = axis_flow()
        rng = np.random.default_rng(5)
        for x in UNIT_DISK.sample(rng, 50):
            t = Time(float(rng.random() * 10))
            q = retraction_apply(flow, 50.0, x)
            assert np.linalg.norm(retraction_apply(flow, 50.0, flow.act(t, x)) - q) <= ACCEPT_TOL
            assert np.linalg.norm(flow.act(t, q) - q) <= ACCEPT_TOL

    def test_nonexpansive(self):
        flow = axis_flow()
        rng = np.random.default_rng(6)
        xs, ys = UNIT_DISK.sample(rng, 200), UNIT_DISK.sample(rng, 200)
        for x, y in zip(xs, ys):
            gap = np.linalg.norm(retraction_apply(flow, 50.0, x) - retraction_apply(flow, 50.0, y))
            assert gap <= np.linalg.norm(x - y) + 1e-9

    @pytest.mark.parametrize("make_family", [
        lambda domain: LinearFlow(np.diag([0.0, 1.0]), domain),
        lambda domain: RotationFlow(0.7, [0.0, 0.0], domain),
    ], ids=["axis_flow", "rotation_flow"])
    def test_restricted_domain_is_invariant(self, make_family):
        inner = Ball([0.0, 0.0], 0.4)
        full, restricted = make_family(UNIT_DISK), make_family(inner)
        rng = np.random.default_rng(9)
        for x in inner.sample(rng, 20):
            q = retraction_apply(full, 50.0, x)
            assert inner.contains(q)
            assert retraction_apply(restricted, 50.0, x) == pytest.approx(q, abs=1e-12)

    def test_surrogate_sensitivity(self):
        assert retraction_sensitivity(axis_flow(), 50.0, [0.5, 0.8]) <= ACCEPT_TOL

    def test_projected_retraction(self):
        flow = axis_flow()
        q = projected_retraction(flow, fixed_set_for(flow), TimeMean(50.0), [0.5, 0.8])
        assert q == pytest.approx([0.5, 0.0], abs=1e-9)

    def test_iteration_limit(self):
        family = golden_pair()
        with pytest.raises(IterationLimitError) as info:
            retraction_apply(family, 1, [0.5, 0.0], max_inner=1)
        assert info.value.last_iterate is not None

    def test_cesaro_index_must_be_integer(self):
        with pytest.raises(InvalidArgumentError):
            retraction_apply(golden_pair(), 2.5, [0.5, 0.0])


class TestLambda:

    def test_fixed_point(self):
        assert lambda_estimate(axis_flow(), [0.4, 0.0]) <= 1e-15

    def test_rotation_flow(self):
        flow = RotationFlow(math.pi / 2, [0.0, 0.0], UNIT_DISK)
        assert lambda_estimate(flow, [1.0, 0.0], horizon=10) == pytest.approx(2.0, abs=ACCEPT_TOL)

    def test_quarter_turn_pair(self):
        assert lambda_estimate(quarter_turn_pair(), [1.0, 0.0]) == pytest.approx(2.0, abs=1e-12)


class TestCharacterize:

    def test_center_of_rotations(self):
        report = characterize(quarter_turn_pair(), [0.0, 0.0])
        assert report.verdict
        assert max(report.residual_sequence) == 0.0
        assert report.lambda_estimate == 0.0

    def test_off_center(self):
        report = characterize(quarter_turn_pair(), [1.0, 0.0], n_max=200)
        assert not report.verdict
        assert report.residual_sequence[-1] == pytest.approx(1.0, abs=1e-3)
        assert len(report.residual_sequence) == 200

    def test_kernel_axis_point(self):
        report = characterize(axis_flow(), [0.7, 0.0], n_max=30)
        assert report.verdict
        assert max(report.residual_sequence) <= 1e-10

    def test_rotation_lambda(self):
        report = characterize(quarter_turn_pair(), [1.0, 0.0], n_max=50, tol=ACCEPT_TOL)
        assert report.lambda_estimate == pytest.approx(2.0, abs=ACCEPT_TOL)
        assert not report.verdict

    def test_bad_n_max(self):
        with pytest.raises(InvalidArgumentError):
            characterize(axis_flow(), [0.0, 0.0], n_max=0)

    @pytest.mark.parametrize("family, extra", [
        (golden_pair(), [[1e-8, 0.0], [0.0, -2e-7], [2e-7, 2e-7], [-3e-7, 0.0], [1e-5, 0.0], [0.0, 3e-6],
                         [-4e-6, 4e-6], [1e-4, -1e-4], [0.05, 0.0], [0.0, 0.3], [0.5, 0.5], [-0.9, 0.1],
                         [0.2, -0.95], [0.6, 0.6], [1e-9, 1e-9], [-2e-3, 0.0], [0.0, 1e-7], [0.99, 0.0],
                         [0.1, 0.1]]),
        (axis_flow(), [[0.95, 0.0], [-0.95, 0.0], [0.33, 0.0], [0.0, 0.0], [0.5, 3e-7], [-0.2, -3e-7],
                       [0.1, 1e-5], [0.4, -3e-6], [0.0, 0.5], [0.8, 0.1], [-0.6, 0.01], [0.25, 0.0],
                       [-0.45, 2e-7], [0.7, -1e-3], [0.3, 0.3], [-0.85, 0.0], [0.05, 0.05], [0.6, 0.0],
                       [0.9, -1e-8]]),
    ], ids=["rotation_pair", "linear_flow"])
    def test_agrees_with_fixed_set(self, family, extra):
        fixed_set = fixed_set_for(family)
        grid = np.linspace(-0.7, 0.7, 9)
        points = [np.array([a, b]) for a in grid for b in grid] + [np.array(p) for p in extra]
        assert len(points) == 100
        schedule = CesaroSchedule() if isinstance(family, CommutingPair) else TimeSchedule()
        for z in points:
            report = characterize(family, z, schedule, n_max=300, tol=ACCEPT_TOL)
            assert report.verdict == (fixed_set.distance(z) <= ACCEPT_TOL), z
            if report.verdict:
                assert report.lambda_estimate <= ACCEPT_TOL
                assert report.orbit_excess <= ACCEPT_TOL
