"""Digital-twin physics: kinematics, servo tracking, fault injection
invariants, and the source/target reality gap."""

import numpy as np
import pytest

from twinadapt.errors import ConfigError
from twinadapt.twin import (
    GapConfig,
    LINK_LENGTHS,
    TwinConfig,
    fault_for_class,
    forward_kinematics,
    simulate_traces,
)


def _no_gap():
    return GapConfig(
        gain_offset=0.0, lag_tau=0.0, noise_std=0.0,
        sensor_gain_std=0.0, sensor_offset_std=0.0,
    )


def _tiny_cfg(**kwargs):
    kwargs.setdefault("sequence_length", 60)
    kwargs.setdefault("duration", 3.0)
    return TwinConfig(**kwargs)


class TestFaultMapping:
    def test_healthy_has_no_fault(self):
        assert fault_for_class(0) is None

    @pytest.mark.parametrize(
        "class_id,expected",
        [(1, (0, "stuck")), (2, (0, "sse")), (3, (1, "stuck")),
         (6, (2, "sse")), (7, (3, "stuck")), (8, (3, "sse"))],
    )
    def test_mapping(self, class_id, expected):
        assert fault_for_class(class_id) == expected

    def test_only_first_four_motors_ever_fault(self):
        motors = {fault_for_class(c)[0] for c in range(1, 9)}
        assert motors == {0, 1, 2, 3}

    def test_out_of_range_rejected(self):
        with pytest.raises(ConfigError):
            fault_for_class(9)
        with pytest.raises(ConfigError):
            fault_for_class(-1)


class TestForwardKinematics:
    def test_zero_joints_extend_along_x(self):
        pos = forward_kinematics(np.zeros((4, 6)))
        expected = np.array([sum(LINK_LENGTHS), 0.0, 0.0])
        np.testing.assert_allclose(pos, np.tile(expected, (4, 1)), atol=1e-15)

    def test_base_quarter_turn_points_along_y(self):
        joints = np.zeros((2, 6))
        joints[:, 0] = np.pi / 2
        pos = forward_kinematics(joints)
        np.testing.assert_allclose(
            pos, np.tile([0.0, sum(LINK_LENGTHS), 0.0], (2, 1)), atol=1e-12
        )

    def test_second_joint_quarter_turn_folds_down(self):
        joints = np.zeros((1, 6))
        joints[0, 1] = np.pi / 2
        pos = forward_kinematics(joints)
        expected = [LINK_LENGTHS[0], 0.0, -sum(LINK_LENGTHS[1:])]
        np.testing.assert_allclose(pos, [expected], atol=1e-12)

    def test_reach_never_exceeds_total_length(self):
        rng = np.random.default_rng(0)
        joints = rng.uniform(-np.pi, np.pi, (50, 6))
        pos = forward_kinematics(joints)
        assert np.all(np.linalg.norm(pos, axis=1) <= sum(LINK_LENGTHS) + 1e-12)

    def test_shape_validated(self):
        with pytest.raises(ValueError, match="joints must be"):
            forward_kinematics(np.zeros((4, 5)))


class TestServoAndResiduals:
    def test_constant_command_stays_settled_exactly(self):
        from twinadapt.twin import _servo_track

        cfg = _tiny_cfg()
        cmd = np.tile(np.array([0.3, -0.1, 0.5, 0.0, -0.7, 0.2]), (40, 1))
        out = _servo_track(cmd, cfg)
        assert np.array_equal(out, cmd)

    def test_step_command_converges(self):
        from twinadapt.twin import _servo_track

        cfg = _tiny_cfg(sequence_length=400, duration=8.0)
        cmd = np.zeros((400, 6))
        cmd[1:, 0] = 1.0
        out = _servo_track(cmd, cfg)
        assert abs(out[-1, 0] - 1.0) < 1e-3
        assert np.max(out[:, 0]) < 1.5  # damped, bounded overshoot

    def test_residual_shrinks_as_servo_bandwidth_grows(self):
        # the perfect-tracking limit: stiffer servos, smaller residuals
        rms = []
        for wn in (4.0, 8.0, 20.0):
            cfg = _tiny_cfg(sequence_length=200, duration=4.0,
                            natural_freq=wn, gap=_no_gap())
            traces = simulate_traces(cfg, 0, "source", seed=11)
            rms.append(float(np.sqrt(np.mean(traces["features"][:, 3:] ** 2))))
        assert rms[2] < rms[1] < rms[0]


class TestFaultInvariants:
    def test_stuck_trace_exactly_constant_after_onset(self):
        cfg = _tiny_cfg()
        for class_id in (1, 3, 5, 7):
            motor = fault_for_class(class_id)[0]
            traces = simulate_traces(cfg, class_id, "source", seed=5)
            post = traces["realized"][traces["onset"]:, motor]
            assert np.all(post == post[0])

    def test_stuck_only_touches_faulty_motor_from_onset(self):
        cfg = _tiny_cfg()
        healthy = simulate_traces(cfg, 0, "source", seed=6)
        faulty = simulate_traces(cfg, 1, "source", seed=6)
        onset = faulty["onset"]
        assert onset == healthy["onset"]
        diff = faulty["realized"] != healthy["realized"]
        assert not diff[:onset].any()
        assert not diff[:, 1:].any()

    def test_sse_adds_exact_offset_after_onset(self):
        cfg = _tiny_cfg()
        offset = cfg.sse_offset_frac * cfg.joint_range
        for class_id in (2, 4, 6, 8):
            motor = fault_for_class(class_id)[0]
            healthy = simulate_traces(cfg, 0, "source", seed=7)
            faulty = simulate_traces(cfg, class_id, "source", seed=7)
            onset = faulty["onset"]
            # exact identity: post-onset trace is the healthy trace + offset
            assert np.array_equal(
                faulty["realized"][onset:, motor],
                healthy["realized"][onset:, motor] + offset,
            )
            np.testing.assert_allclose(
                faulty["realized"][onset:, motor] - healthy["realized"][onset:, motor],
                offset, rtol=1e-12,
            )
            untouched = faulty["realized"].copy()
            untouched[onset:, motor] = healthy["realized"][onset:, motor]
            assert np.array_equal(untouched, healthy["realized"])

    def test_default_offset_magnitude(self):
        cfg = TwinConfig()
        assert cfg.sse_offset_frac * cfg.joint_range == pytest.approx(0.09)

    def test_onset_lies_in_configured_window(self):
        cfg = TwinConfig(sequence_length=1000)
        for seed in range(10):
            onset = simulate_traces(cfg, 1, "source", seed=seed)["onset"]
            assert 100 <= onset <= 900
        small = _tiny_cfg(sequence_length=200, duration=4.0)
        for seed in range(10):
            onset = simulate_traces(small, 1, "source", seed=seed)["onset"]
            assert 20 <= onset <= 180

    def test_all_classes_share_trajectory_and_onset(self):
        cfg = _tiny_cfg()
        base = simulate_traces(cfg, 0, "source", seed=9)
        for class_id in range(1, 9):
            other = simulate_traces(cfg, class_id, "source", seed=9)
            assert np.array_equal(other["cmd"], base["cmd"])
            assert np.array_equal(other["desired_xyz"], base["desired_xyz"])
            assert other["onset"] == base["onset"]


class TestRealityGap:
    def test_zero_gap_target_equals_source_bitwise(self):
        cfg = _tiny_cfg(gap=_no_gap())
        for class_id in (0, 4):
            src = simulate_traces(cfg, class_id, "source", seed=3)
            tgt = simulate_traces(cfg, class_id, "target", seed=3)
            assert np.array_equal(src["features"], tgt["features"])
            assert np.array_equal(src["realized"], tgt["realized"])

    def test_default_gap_changes_target_only(self):
        cfg = _tiny_cfg()
        src1 = simulate_traces(cfg, 0, "source", seed=4)
        src2 = simulate_traces(cfg, 0, "source", seed=4)
        tgt = simulate_traces(cfg, 0, "target", seed=4)
        assert np.array_equal(src1["features"], src2["features"])
        assert not np.array_equal(src1["features"], tgt["features"])
        assert np.array_equal(src1["cmd"], tgt["cmd"])  # same commanded motion

    def test_target_deterministic(self):
        cfg = _tiny_cfg()
        a = simulate_traces(cfg, 2, "target", seed=8)
        b = simulate_traces(cfg, 2, "target", seed=8)
        assert np.array_equal(a["features"], b["features"])

    def test_robot_identity_is_fixed_across_samples(self):
        gap = GapConfig(robot_seed=1)
        gains_a = gap.motor_gains(1.0)
        gains_b = gap.motor_gains(1.0)
        assert np.array_equal(gains_a, gains_b)
        cal_a = gap.sensor_calibration()
        cal_b = gap.sensor_calibration()
        assert np.array_equal(cal_a[0], cal_b[0])
        assert np.array_equal(cal_a[1], cal_b[1])

    def test_different_robot_seeds_give_different_robots(self):
        g0 = GapConfig(robot_seed=0)
        g1 = GapConfig(robot_seed=7)
        assert not np.array_equal(g0.motor_gains(1.0), g1.motor_gains(1.0))
        cfg0 = _tiny_cfg(gap=g0)
        cfg1 = _tiny_cfg(gap=g1)
        t0 = simulate_traces(cfg0, 0, "target", seed=2)
        t1 = simulate_traces(cfg1, 0, "target", seed=2)
        assert not np.array_equal(t0["features"], t1["features"])

    def test_gains_within_configured_band(self):
        gap = GapConfig(gain_offset=0.1)
        gains = gap.motor_gains(1.0)
        assert np.all((gains >= 0.9) & (gains <= 1.1))
        assert gains.shape == (6,)


class TestFeatureLayout:
    def test_features_are_desired_then_residual(self):
        cfg = _tiny_cfg()
        traces = simulate_traces(cfg, 5, "target", seed=1)
        feats = traces["features"]
        assert feats.shape == (60, 6)
        assert np.array_equal(feats[:, :3], traces["desired_xyz"])
        assert np.array_equal(
            feats[:, 3:], traces["desired_xyz"] - traces["realized_xyz"]
        )
        assert np.all(np.isfinite(feats))

    def test_domain_string_validated(self):
        with pytest.raises(ConfigError, match="source"):
            simulate_traces(_tiny_cfg(), 0, "middle", seed=0)


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"sequence_length": 1},
            {"duration": 0.0},
            {"n_waypoints": 1},
            {"joint_low": 0.9, "joint_high": 0.9},
            {"natural_freq": 0.0},
            {"damping": -0.5},
            {"sequence_length": 40, "duration": 20.0},  # euler unstable
            {"onset_low_frac": 0.0},
            {"onset_low_frac": 0.5, "onset_high_frac": 0.4},
            {"sse_offset_frac": 0.0},
        ],
    )
    def test_twin_config_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            TwinConfig(**kwargs).validate()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"gain_offset": 1.0},
            {"gain_offset": -0.1},
            {"lag_tau": -1.0},
            {"noise_std": -0.001},
            {"sensor_gain_std": 1.0},
            {"sensor_offset_std": -0.1},
        ],
    )
    def test_gap_config_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            GapConfig(**kwargs).validate()
