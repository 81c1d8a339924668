"""Seed-driven simulation of coordinated random movements and tactile pressure.

Movement model: every `decision_interval` steps each joint independently
becomes active with probability 1 - p_coordination and draws a fresh target
angle pair uniformly from [-pi, pi] clipped to its limits; inactive joints
hold their current angles. Active angles track their targets with a
first-order linear controller. The trunk (root part) is fixed at the origin.

Pressure model (viscosity-free fluid): a sensor moving with velocity v and
outward normal n reads rho * (v . n)^2 when v . n > 0, else 0. Velocities are
finite differences of world positions; the first step has no predecessor and
reads 0.

A single run is strictly sequential in time. Runs with different configs or
seeds share no state and may execute in parallel; TactileLog is immutable
after creation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .agent import AgentModel, MotionConfig

_CHUNK = 2048   # time steps per forward-kinematics batch


@dataclass(frozen=True)
class TactileLog:
    """Per-sensor pressure time series, raw and (optionally) quantized."""
    raw: np.ndarray                  # (M, T) float32, non-negative
    dt: float
    seed: int
    agent_fingerprint: str
    quantized: np.ndarray | None = None   # (M, T) uint8 with values in {1..N}
    n_levels: int = 0

    @property
    def n_sensors(self) -> int:
        return self.raw.shape[0]

    @property
    def n_steps(self) -> int:
        return self.raw.shape[1]


@dataclass(frozen=True)
class MotionTrace:
    """Diagnostics: joint angles per step and activation decisions per epoch."""
    angles: np.ndarray        # (T, n_joints, 2)
    activations: np.ndarray   # (n_epochs, n_joints) bool
    targets: np.ndarray       # (n_epochs, n_joints, 2)


def _rotation_about(axis: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Rodrigues rotation matrices for a fixed axis and a vector of angles."""
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    c = np.cos(theta)[:, None, None]
    s = np.sin(theta)[:, None, None]
    eye = np.eye(3)
    return c * eye + s * K + (1 - c) * np.outer(axis, axis)


def _rest_rotation(rest_axis: np.ndarray) -> np.ndarray:
    """Rotation taking local +z to `rest_axis` (minimal-angle rotation)."""
    z = np.array([0.0, 0.0, 1.0])
    a = rest_axis / np.linalg.norm(rest_axis)
    v = np.cross(z, a)
    c = float(np.dot(z, a))
    if np.linalg.norm(v) < 1e-12:
        if c > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])   # flip about x for the antiparallel case
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + K + K @ K / (1 + c)


def _angle_trajectories(agent: AgentModel, cfg: MotionConfig,
                        rng: np.random.Generator) -> MotionTrace:
    """All joint angles for every step, plus the per-epoch decisions.

    Within an epoch the controller theta += gain*(target-theta)*dt has the
    closed form theta_k = target + (theta_0 - target) * (1 - gain*dt)^k,
    which we evaluate directly. When root motion is enabled, one extra
    trailing column carries the root's virtual world joint.
    """
    n_joints = len(agent.joints)
    T, J = cfg.total_steps, n_joints + (1 if cfg.root_motion else 0)
    interval = cfg.decision_interval
    n_epochs = (T + interval - 1) // interval
    r = 1.0 - cfg.controller_gain * cfg.dt

    angles = np.zeros((T, J, 2))
    activations = np.zeros((n_epochs, J), dtype=bool)
    targets = np.zeros((n_epochs, J, 2))
    if J == 0:
        return MotionTrace(angles, activations, targets)

    half_pi = np.array([[-np.pi / 2, np.pi / 2]] * 2)
    lims = np.stack([j.limits for j in agent.joints] +
                    ([half_pi] if cfg.root_motion else []))   # (J, 2, 2)
    theta = np.zeros((J, 2))                                  # angles at previous step
    for e in range(n_epochs):
        # one activation draw and one target draw per joint per epoch;
        # targets of inactive joints are discarded (keeps the stream shape fixed)
        active = rng.random(J) < (1.0 - cfg.p_coordination)
        tgt = rng.uniform(-np.pi, np.pi, size=(J, 2))
        tgt = np.clip(tgt, lims[:, :, 0], lims[:, :, 1])
        activations[e] = active
        targets[e] = np.where(active[:, None], tgt, theta)

        t0 = e * interval
        t1 = min(t0 + interval, T)
        if e == 0:
            angles[0] = theta                                  # initial pose, no update
            k = np.arange(1, t1 - t0, dtype=float)
            lo = 1
        else:
            k = np.arange(1, t1 - t0 + 1, dtype=float)
            lo = t0
        if k.size:
            goal = targets[e]
            seg = goal[None] + (theta[None] - goal[None]) * (r ** k)[:, None, None]
            angles[lo:t1] = seg
        theta = angles[t1 - 1].copy()
    return MotionTrace(angles, activations, targets)


def _world_kinematics(agent: AgentModel, trace_angles: np.ndarray, sl: slice,
                      root_motion: bool) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Per-part world rotations (L,3,3) and origins (L,3) for a step slice."""
    L = trace_angles[sl].shape[0]
    joint_by_child = {j.child: j for j in agent.joints}
    joint_index = {j.child: i for i, j in enumerate(agent.joints)}

    order: list[str] = [agent.root]
    remaining = [p.id for p in agent.parts if p.id != agent.root]
    while remaining:
        for pid in list(remaining):
            if agent.ground_truth_tree[pid] in order:
                order.append(pid)
                remaining.remove(pid)

    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    if root_motion:
        th = trace_angles[sl][:, len(agent.joints), :]
        root_R = _rotation_about(ex, th[:, 0]) @ _rotation_about(ey, th[:, 1])
    else:
        root_R = np.broadcast_to(np.eye(3), (L, 3, 3))
    R: dict[str, np.ndarray] = {agent.root: root_R}
    O: dict[str, np.ndarray] = {agent.root: np.zeros((L, 3))}
    for pid in order[1:]:
        j = joint_by_child[pid]
        th = trace_angles[sl][:, joint_index[pid], :]          # (L, 2)
        R_joint = _rotation_about(ex, th[:, 0]) @ _rotation_about(ey, th[:, 1])
        R_parent = R[j.parent]
        R[pid] = R_parent @ _rest_rotation(j.rest_axis) @ R_joint
        O[pid] = O[j.parent] + np.einsum("tij,j->ti", R_parent, j.anchor)
    return R, O


def pressure_from_normal_speed(dot: np.ndarray | float, rho: float) -> np.ndarray:
    """Tactile pressure rho * (v . n)^2 when the surface moves into the fluid
    (v . n > 0), zero otherwise."""
    return rho * np.square(np.maximum(dot, 0.0))


def simulate(agent: AgentModel, cfg: MotionConfig,
             return_motion: bool = False) -> TactileLog | tuple[TactileLog, MotionTrace]:
    """Run the movement model and record every sensor's pressure at every step.

    Deterministic: identical (agent, cfg) including the seed yields a
    bit-identical log on a given platform/numpy build.
    """
    rng = np.random.default_rng(cfg.seed)
    trace = _angle_trajectories(agent, cfg, rng)

    M, T = agent.n_sensors, cfg.total_steps
    by_part: dict[str, list[int]] = {}
    for s in agent.sensors:
        by_part.setdefault(s.part, []).append(s.sensor_id)
    local_pos = {pid: np.stack([agent.sensors[i].position for i in ids])
                 for pid, ids in by_part.items()}
    local_nrm = {pid: np.stack([agent.sensors[i].normal for i in ids])
                 for pid, ids in by_part.items()}

    raw = np.empty((M, T), dtype=np.float32)
    prev_pos: dict[str, np.ndarray] = {}
    for t0 in range(0, T, _CHUNK):
        sl = slice(t0, min(t0 + _CHUNK, T))
        R, O = _world_kinematics(agent, trace.angles, sl, cfg.root_motion)
        for pid, ids in by_part.items():
            pos = np.einsum("tij,sj->tsi", R[pid], local_pos[pid]) + O[pid][:, None, :]
            nrm = np.einsum("tij,sj->tsi", R[pid], local_nrm[pid])
            if t0 == 0:
                vel = np.empty_like(pos)
                vel[0] = 0.0                                   # no predecessor step
                vel[1:] = (pos[1:] - pos[:-1]) / cfg.dt
            else:
                vel = (pos - np.concatenate([prev_pos[pid][None], pos[:-1]])) / cfg.dt
            dot = np.einsum("tsi,tsi->ts", vel, nrm)
            f = pressure_from_normal_speed(dot, cfg.rho)
            raw[ids, sl] = f.T.astype(np.float32)
            prev_pos[pid] = pos[-1]

    raw.flags.writeable = False
    log = TactileLog(raw=raw, dt=cfg.dt, seed=cfg.seed,
                     agent_fingerprint=agent.fingerprint())
    if return_motion:
        return log, trace
    return log


def quantize(log: TactileLog, n_levels: int) -> TactileLog:
    """Per-sensor equal-frequency binning of raw pressures into {1..n_levels}.

    Bin boundaries are the per-channel quantiles at k/n_levels; a value equal
    to a boundary goes to the lower bin. Constant channels map entirely to
    bin 1.
    """
    if n_levels < 2:
        raise ValueError("n_levels must be >= 2")
    if log.raw is None:
        raise ValueError("raw log required before quantization")
    M, T = log.raw.shape
    q = np.quantile(log.raw, np.arange(1, n_levels) / n_levels, axis=1).T  # (M, N-1)
    out = np.empty((M, T), dtype=np.uint8)
    for i in range(M):
        out[i] = np.searchsorted(q[i], log.raw[i], side="left") + 1
    out.flags.writeable = False
    return replace(log, quantized=out, n_levels=n_levels)
