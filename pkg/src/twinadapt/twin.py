"""Digital twin of a six-motor serial robot with injectable motor faults.

A sample is one trajectory: smooth random joint waypoints are tracked by
second-order servo models, the resulting joint angles run through forward
kinematics, and the features are the desired end-effector path plus the
tracking residual (desired minus realized), six channels per time step.

Faults hit exactly one of motors 1-4 from a random onset onward:

* ``stuck``: the joint output freezes at its onset value.
* ``sse``: a constant offset is added to the joint output (steady-state
  error, default 5% of the joint range).

The "real" robot differs from the twin by a reality gap applied only to
target-domain samples: a per-motor gain offset, a first-order response lag,
a fixed position-sensor miscalibration (per-axis scale and offset), and
millimetre-scale observation noise on the end-effector position.  With all
gap parameters at zero a target sample is bit-identical to the source
sample of the same seed, which the tests rely on.

Order of operations: command -> gain -> servo -> lag -> fault -> forward
kinematics -> sensor calibration -> observation noise.  Faults are applied
before kinematics in joint space so fault invariants (frozen trace, exact
offset) hold exactly on the internal traces regardless of gap settings.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError
from .rng import stream

__all__ = [
    "GapConfig",
    "TwinConfig",
    "LINK_LENGTHS",
    "simulate_sample",
    "simulate_traces",
    "forward_kinematics",
    "fault_for_class",
]

# Link lengths in metres, base to tip.  Joints alternate rotation about the
# base z axis and the local y axis, each link extends along local x.
LINK_LENGTHS = (0.3, 0.25, 0.25, 0.1, 0.1, 0.05)

N_MOTORS = 6
N_CLASSES = 9
_FAULT_MODES = ("stuck", "sse")


@dataclass
class GapConfig:
    """Twin-to-reality mismatch, applied to target-domain samples only.

    The gap models one specific real robot: the per-motor gain offsets and
    the sensor calibration error are drawn once from ``robot_seed`` and
    shared by every target sample, so the twin-to-real shift is systematic
    rather than fresh noise per sample.  Only the observation noise is
    re-drawn per sample.
    """

    gain_offset: float = 0.16  # per-motor gain drawn once from 1 +/- this
    lag_tau: float = 0.02  # first-order response lag time constant, seconds
    noise_std: float = 0.001  # end-effector observation noise, metres
    sensor_gain_std: float = 0.05  # per-axis position sensor scale error
    sensor_offset_std: float = 0.01  # per-axis position sensor offset, metres
    robot_seed: int = 0  # identity of the simulated real robot

    def validate(self) -> None:
        if not 0.0 <= self.gain_offset < 1.0:
            raise ConfigError(f"gain_offset must be in [0, 1), got {self.gain_offset}")
        if self.lag_tau < 0.0 or self.noise_std < 0.0:
            raise ConfigError("lag_tau and noise_std must be non-negative")
        if not 0.0 <= self.sensor_gain_std < 1.0:
            raise ConfigError(
                f"sensor_gain_std must be in [0, 1), got {self.sensor_gain_std}"
            )
        if self.sensor_offset_std < 0.0:
            raise ConfigError("sensor_offset_std must be non-negative")

    def motor_gains(self, twin_gain: float) -> np.ndarray:
        rng = stream(self.robot_seed, "twin", "robot-gains")
        return twin_gain * (1.0 + self.gain_offset * rng.uniform(-1.0, 1.0, N_MOTORS))

    def sensor_calibration(self) -> tuple[np.ndarray, np.ndarray]:
        """Fixed measured-position scale and offset of the real robot's sensor."""
        rng = stream(self.robot_seed, "twin", "sensor-calibration")
        gain = 1.0 + self.sensor_gain_std * rng.normal(size=3)
        offset = self.sensor_offset_std * rng.normal(size=3)
        return gain, offset


@dataclass
class TwinConfig:
    """Geometry, servo dynamics, trajectory and fault parameters."""

    sequence_length: int = 1000
    duration: float = 10.0  # seconds covered by one trajectory
    n_waypoints: int = 12
    joint_low: float = -0.9  # radians
    joint_high: float = 0.9
    natural_freq: float = 8.0  # servo natural frequency, rad/s
    damping: float = 0.9  # servo damping ratio
    motor_gain: float = 1.0  # twin-side DC gain
    sse_offset_frac: float = 0.05  # steady-state error as fraction of joint range
    onset_low_frac: float = 0.1  # fault onset window, fraction of sequence
    onset_high_frac: float = 0.9
    gap: GapConfig = field(default_factory=GapConfig)

    def validate(self) -> None:
        if self.sequence_length < 2:
            raise ConfigError(f"sequence_length must be >= 2, got {self.sequence_length}")
        if self.duration <= 0.0:
            raise ConfigError(f"duration must be positive, got {self.duration}")
        if self.n_waypoints < 2:
            raise ConfigError(f"n_waypoints must be >= 2, got {self.n_waypoints}")
        if not self.joint_low < self.joint_high:
            raise ConfigError("joint_low must be below joint_high")
        if self.natural_freq <= 0.0 or self.damping <= 0.0:
            raise ConfigError("servo needs positive natural_freq and damping")
        # Semi-implicit Euler is stable for wn * dt < 2.
        if self.natural_freq * self.dt >= 2.0:
            raise ConfigError(
                f"natural_freq {self.natural_freq} too high for step {self.dt:.4g} s"
            )
        if not 0.0 < self.onset_low_frac < self.onset_high_frac < 1.0:
            raise ConfigError("onset window must satisfy 0 < low < high < 1")
        if self.sse_offset_frac <= 0.0:
            raise ConfigError("sse_offset_frac must be positive")
        self.gap.validate()

    @property
    def dt(self) -> float:
        return self.duration / self.sequence_length

    @property
    def joint_range(self) -> float:
        return self.joint_high - self.joint_low

    def to_dict(self) -> dict:
        return asdict(self)


def fault_for_class(class_id: int) -> tuple[int, str] | None:
    """Map a class label to (motor index, fault mode); None for healthy.

    Classes interleave motor and mode: 1 = motor 0 stuck, 2 = motor 0 sse,
    3 = motor 1 stuck, ... 8 = motor 3 sse.  Motors 4 and 5 never fault.
    """
    if not 0 <= class_id < N_CLASSES:
        raise ConfigError(f"class_id must be in [0, {N_CLASSES}), got {class_id}")
    if class_id == 0:
        return None
    return (class_id - 1) // 2, _FAULT_MODES[(class_id - 1) % 2]


def _rotation(theta: np.ndarray, axis: str) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    rot = np.zeros((theta.shape[0], 3, 3))
    if axis == "z":
        rot[:, 0, 0] = c
        rot[:, 0, 1] = -s
        rot[:, 1, 0] = s
        rot[:, 1, 1] = c
        rot[:, 2, 2] = 1.0
    else:  # y
        rot[:, 0, 0] = c
        rot[:, 0, 2] = s
        rot[:, 1, 1] = 1.0
        rot[:, 2, 0] = -s
        rot[:, 2, 2] = c
    return rot


def forward_kinematics(joints: np.ndarray, link_lengths=LINK_LENGTHS) -> np.ndarray:
    """End-effector xyz for joint angles [steps, 6] -> [steps, 3]."""
    joints = np.asarray(joints, dtype=np.float64)
    if joints.ndim != 2 or joints.shape[1] != len(link_lengths):
        raise ValueError(f"joints must be [steps, {len(link_lengths)}], got {joints.shape}")
    steps = joints.shape[0]
    frame = np.broadcast_to(np.eye(3), (steps, 3, 3)).copy()
    pos = np.zeros((steps, 3))
    for j, length in enumerate(link_lengths):
        frame = frame @ _rotation(joints[:, j], "z" if j % 2 == 0 else "y")
        pos = pos + frame[:, :, 0] * length
    return pos


def _waypoint_trajectory(rng: np.random.Generator, cfg: TwinConfig) -> np.ndarray:
    """Cosine-smoothed interpolation through random joint waypoints."""
    way = rng.uniform(cfg.joint_low, cfg.joint_high, (cfg.n_waypoints, N_MOTORS))
    s = np.linspace(0.0, cfg.n_waypoints - 1.0, cfg.sequence_length)
    seg = np.minimum(s.astype(np.int64), cfg.n_waypoints - 2)
    frac = s - seg
    w = 0.5 - 0.5 * np.cos(np.pi * frac)
    return way[seg] * (1.0 - w[:, None]) + way[seg + 1] * w[:, None]


def _servo_track(cmd: np.ndarray, cfg: TwinConfig) -> np.ndarray:
    """Second-order servo response to a commanded trajectory, per motor.

    Semi-implicit Euler; the state starts settled on the first command so
    there is no artificial startup transient.
    """
    dt = cfg.dt
    wn2 = cfg.natural_freq ** 2
    two_zw = 2.0 * cfg.damping * cfg.natural_freq
    out = np.empty_like(cmd)
    x = cmd[0].copy()
    v = np.zeros(N_MOTORS)
    out[0] = x
    for t in range(1, cmd.shape[0]):
        v += dt * (wn2 * (cmd[t] - x) - two_zw * v)
        x = x + dt * v
        out[t] = x
    return out


def _apply_fault(
    joints: np.ndarray, class_id: int, onset: int, cfg: TwinConfig
) -> np.ndarray:
    fault = fault_for_class(class_id)
    if fault is None:
        return joints
    motor, mode = fault
    out = joints.copy()
    if mode == "stuck":
        out[onset:, motor] = out[onset, motor]
    else:
        out[onset:, motor] += cfg.sse_offset_frac * cfg.joint_range
    return out


def simulate_traces(cfg: TwinConfig, class_id: int, domain: str, seed: int) -> dict:
    """Run one trajectory and return all internal traces (for tests).

    Keys: cmd and realized joint traces [len, 6], onset step, desired and
    realized end-effector paths [len, 3], and the [len, 6] feature matrix
    (desired xyz, then desired minus realized xyz).
    """
    cfg.validate()
    if domain not in ("source", "target"):
        raise ConfigError(f"domain must be 'source' or 'target', got {domain!r}")

    traj_rng = stream(seed, "twin", "trajectory")
    cmd = _waypoint_trajectory(traj_rng, cfg)
    # Drawn for every class so all 9 classes of a seed share one trajectory
    # and one onset; healthy simply ignores it.
    onset_frac = traj_rng.uniform(cfg.onset_low_frac, cfg.onset_high_frac)
    onset = int(round(onset_frac * cfg.sequence_length))
    onset = min(max(onset, 1), cfg.sequence_length - 1)

    if domain == "target":
        gain = cfg.gap.motor_gains(cfg.motor_gain)
    else:
        gain = np.full(N_MOTORS, cfg.motor_gain)

    tracked = _servo_track(gain * cmd, cfg)
    if domain == "target" and cfg.gap.lag_tau > 0.0:
        beta = cfg.dt / (cfg.gap.lag_tau + cfg.dt)
        lagged = np.empty_like(tracked)
        lagged[0] = tracked[0]
        for t in range(1, tracked.shape[0]):
            lagged[t] = lagged[t - 1] + beta * (tracked[t] - lagged[t - 1])
        tracked = lagged

    realized = _apply_fault(tracked, class_id, onset, cfg)

    desired_xyz = forward_kinematics(cmd)
    realized_xyz = forward_kinematics(realized)
    if domain == "target" and (
        cfg.gap.sensor_gain_std > 0.0 or cfg.gap.sensor_offset_std > 0.0
    ):
        sensor_gain, sensor_offset = cfg.gap.sensor_calibration()
        realized_xyz = realized_xyz * sensor_gain + sensor_offset
    if domain == "target" and cfg.gap.noise_std > 0.0:
        noise_rng = stream(seed, "twin", "observation-noise")
        realized_xyz = realized_xyz + noise_rng.normal(
            0.0, cfg.gap.noise_std, realized_xyz.shape
        )

    features = np.hstack([desired_xyz, desired_xyz - realized_xyz])
    return {
        "cmd": cmd,
        "realized": realized,
        "onset": onset,
        "desired_xyz": desired_xyz,
        "realized_xyz": realized_xyz,
        "features": features,
    }


def simulate_sample(cfg: TwinConfig, class_id: int, domain: str, seed: int):
    """One labelled sequence sample; see the data module for the container."""
    from .data import SequenceSample

    traces = simulate_traces(cfg, class_id, domain, seed)
    return SequenceSample(
        features=traces["features"], class_label=class_id, domain_label=domain
    )
