import math

import numpy as np
import pytest

from oracles import signed_distance_scan
from parkmpc import sim as sim_mod
from parkmpc.errors import ConfigurationError
from parkmpc.mpc import ControlCommand
from parkmpc.sim import (
    Sample,
    Scenario,
    SimResult,
    compute_metrics,
    make_s_curve_scenario,
    run_closed_loop,
    s_curve_trajectory,
)
from parkmpc.trajectory import Trajectory
from parkmpc.vehicle import ControlInput, VehicleState


def straight(n=120, v=1.0):
    x = np.arange(n) * 0.5
    return Trajectory.from_arrays(x, np.zeros(n), np.zeros(n), np.full(n, v))


def fake_result(traj, positions):
    sc = Scenario(traj, VehicleState(0, 0, 0, 0), duration=1.0)
    res = SimResult(sc)
    for k, (x, y) in enumerate(positions):
        cmd = ControlCommand(delta_cmd=0.0, tan_delta=0.0, a_cmd=0.0)
        res.samples.append(Sample(k * 0.05, VehicleState(x, y, 0.0, 0.0), cmd, ControlInput(0, 0), 0, 0, 0, 0))
    res.final_state = res.samples[-1].state
    return res


class TestSCurve:
    def test_speed_profile(self):
        traj = s_curve_trajectory(3.0, 15.0, 2.0)
        assert traj.v[0] == 0 and traj.v[-1] == 0
        assert traj.v.max() == pytest.approx(2.0)
        assert traj.y[-1] == pytest.approx(3.0)

    def test_headings_follow_waypoints(self):
        traj = s_curve_trajectory(3.0, 15.0, 2.0)
        fd = np.arctan2(np.diff(traj.y), np.diff(traj.x))
        assert np.max(np.abs(fd - traj.theta[:-1])) < 0.05
        assert np.max(np.abs(fd - traj.theta[1:])) < 0.05

    def test_equidistant(self):
        traj = s_curve_trajectory(3.0, 15.0, 2.0)
        assert np.allclose(traj.segment_lengths, traj.segment_lengths[0], atol=1e-3)
        assert traj.spacing_problems() == []

    def test_zero_offset_is_straight(self):
        traj = s_curve_trajectory(0.0, 15.0, 2.0)
        assert np.all(traj.y == 0)

    @pytest.mark.parametrize("args", [(3.0, 15.0, 10.0), (3.0, 0.0, 2.0), (3.0, 15.0, -1.0)])
    def test_rejects(self, args):
        with pytest.raises(ConfigurationError):
            s_curve_trajectory(*args)


class TestRun:
    def test_zero_duration_rejected(self):
        with pytest.raises(ConfigurationError, match="duration"):
            Scenario(straight(), VehicleState(0, 0, 1, 0), duration=0.0)

    def test_straight_line_fixed_point(self):
        sc = Scenario(straight(), VehicleState(0, 0, 1, 0), duration=10.0, actuation_delay_steps=0)
        res = run_closed_loop(sc)
        assert not res.failed and len(res.samples) == 200
        assert compute_metrics(res, sc.trajectory).max_cross_track < 1e-3

    def test_samples_equally_spaced(self):
        res = run_closed_loop(make_s_curve_scenario(duration=3.0))
        t = res.column("t")
        assert t[0] == 0 and np.allclose(np.diff(t), 0.05)

    def test_delay_line(self):
        res = run_closed_loop(make_s_curve_scenario(duration=2.0, actuation_delay_steps=2))
        s = res.samples
        assert s[0].applied.a == 0 and s[1].applied.a == 0
        for k in range(2, len(s)):
            assert s[k].applied.a == s[k - 2].command.a_cmd
            assert s[k].applied.tan_delta == s[k - 2].command.tan_delta

    def test_s_curve_completes(self):
        sc = make_s_curve_scenario(3.0, 15.0, 2.0)
        res = run_closed_loop(sc)
        m = compute_metrics(res, sc.trajectory)
        assert res.reached_goal
        assert m.final_speed < 0.01 and m.final_position_error < 0.1

    def test_velocity_passthrough_runs(self):
        from parkmpc.mpc import MpcConfig
        sc = make_s_curve_scenario(mpc=MpcConfig(output_mode="velocity_passthrough"), duration=8.0)
        res = run_closed_loop(sc)
        assert not res.failed
        assert all(s.command.v_cmd is not None for s in res.samples)
        assert max(s.state.v for s in res.samples) > 1.0

    def test_controller_fault_returns_partial(self, monkeypatch):
        real = sim_mod.control_step
        calls = {"n": 0}

        def flaky(*args):
            calls["n"] += 1
            if calls["n"] > 5:
                raise RuntimeError("boom")
            return real(*args)

        monkeypatch.setattr(sim_mod, "control_step", flaky)
        res = run_closed_loop(make_s_curve_scenario(duration=2.0))
        assert res.failed and "boom" in res.error and len(res.samples) == 5

    def test_deterministic(self):
        a = run_closed_loop(make_s_curve_scenario(duration=4.0))
        b = run_closed_loop(make_s_curve_scenario(duration=4.0))
        assert [s.state for s in a.samples] == [s.state for s in b.samples]


class TestMetrics:
    def test_zero_error(self):
        traj = s_curve_trajectory(3.0, 15.0, 2.0)
        res = fake_result(traj, list(zip(traj.x, traj.y)))
        m = compute_metrics(res, traj)
        assert m.max_cross_track < 1e-12 and m.rms_cross_track < 1e-12
        assert m.final_position_error == 0 and m.max_steering_rate == 0

    def test_single_offset(self):
        traj = straight()
        m = compute_metrics(fake_result(traj, [(3.0, 0.2)]), traj)
        assert m.max_cross_track == pytest.approx(0.2)

    def test_against_segment_scan(self):
        traj = s_curve_trajectory(3.0, 15.0, 2.0)
        rng = np.random.default_rng(7)
        pts = np.column_stack([rng.uniform(0, 25, 100), rng.uniform(-1, 4, 100)])
        res = fake_result(traj, pts)
        m = compute_metrics(res, traj)
        ref = [signed_distance_scan(list(zip(traj.x, traj.y)), p) for p in pts]
        assert m.max_cross_track == pytest.approx(max(abs(r) for r in ref), abs=1e-9)
        assert m.rms_cross_track == pytest.approx(math.sqrt(np.mean(np.square(ref))), abs=1e-9)

    def test_overshoot_sign(self):
        traj = s_curve_trajectory(3.0, 15.0, 2.0)
        # first turn bends left; a point to the right of it is outside the turn
        i = int(np.argmax(np.diff(traj.theta) > 1e-3)) + 2
        nx, ny = -math.sin(traj.theta[i]), math.cos(traj.theta[i])
        outside = fake_result(traj, [(traj.x[i] - 0.1 * nx, traj.y[i] - 0.1 * ny)])
        inside = fake_result(traj, [(traj.x[i] + 0.1 * nx, traj.y[i] + 0.1 * ny)])
        assert compute_metrics(outside, traj).max_overshoot == pytest.approx(0.1, abs=1e-3)
        assert compute_metrics(inside, traj).max_overshoot == pytest.approx(-0.1, abs=1e-3)

    def test_empty(self):
        traj = straight()
        with pytest.raises(ConfigurationError):
            compute_metrics(SimResult(Scenario(traj, VehicleState(0, 0, 0, 0))), traj)
