"""Differentiable 2D mass-spring simulation on rigid terrain.

Dynamics per step: spring elastic force with axial damping, effective
rest length l0*(1 - c_max*u) on actuated springs, gravity, and penalty
ground contact (normal max(0, k_c*p - c_c*v_y), tangential Coulomb
friction smoothed by tanh(v_x/v_eps)); velocities then positions are
integrated semi-implicitly.

Gradients come from a hand-written reverse sweep through the time loop
with checkpointed state recomputation; the result is independent of the
checkpoint interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from . import _kernels
from .mesher import RobotMesh


class SimulationError(Exception):
    """Base class for simulator failures."""


class NonFiniteStateError(SimulationError):
    """NaN/Inf appeared in the state; rollout aborted."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state detected at step {step}")
        self.step = step


class NonFiniteGradientError(SimulationError):
    """NaN/Inf appeared in the reverse sweep."""


@dataclass(frozen=True)
class Flat:
    """Flat ground at height 0."""

    def height(self, x):
        arr = np.zeros_like(np.asarray(x, dtype=np.float64))
        return arr if arr.shape else float(arr)

    def encode(self) -> tuple[int, float, float, int, float]:
        return (0, 1.0, 0.0, 0, 0.0)

    def to_json_dict(self) -> dict:
        return {"kind": "flat"}


@dataclass(frozen=True)
class Stairs:
    """Staircase descending in +x.

    Height is step_height*n_steps on the top platform (x < x_start), then
    drops one step_height every step_width, reaching the floor (height 0)
    at end_x = x_start + (n_steps-1)*step_width.
    """

    step_width: float = 2.0
    step_height: float = 0.5
    n_steps: int = 4
    x_start: float = 3.0

    def __post_init__(self) -> None:
        if self.step_width <= 0 or self.step_height <= 0 or self.n_steps < 1:
            raise ValueError("stairs need positive step size and n_steps >= 1")

    @property
    def end_x(self) -> float:
        """x coordinate where the ground floor (height 0) begins."""
        return self.x_start + (self.n_steps - 1) * self.step_width

    def height(self, x):
        x = np.asarray(x, dtype=np.float64)
        k = np.floor((x - self.x_start) / self.step_width)
        level = np.maximum(self.n_steps - 1 - k, 0.0)
        h = np.where(x < self.x_start, self.step_height * self.n_steps,
                     self.step_height * level)
        return h if h.shape else float(h)

    def encode(self) -> tuple[int, float, float, int, float]:
        return (1, self.step_width, self.step_height, self.n_steps, self.x_start)

    def to_json_dict(self) -> dict:
        return {
            "kind": "stairs",
            "step_width": self.step_width,
            "step_height": self.step_height,
            "n_steps": self.n_steps,
            "x_start": self.x_start,
        }


Terrain = Flat | Stairs


def terrain_from_json(obj: dict) -> Terrain:
    kind = obj.get("kind")
    if kind == "flat":
        return Flat()
    if kind == "stairs":
        return Stairs(
            step_width=float(obj["step_width"]),
            step_height=float(obj["step_height"]),
            n_steps=int(obj["n_steps"]),
            x_start=float(obj["x_start"]),
        )
    raise ValueError(f"unknown terrain kind: {kind!r}")


@dataclass(frozen=True)
class SimConfig:
    """Physical and numerical constants of one simulation setup.

    The contact and friction constants are calibrated jointly: stiff
    enough for effective push-off, soft enough that a settling robot
    stays within the penalty-depth bound, with friction smoothing wide
    enough to keep gait gradients informative.
    """

    dt: float = 1.0e-3
    n_steps: int = 2048
    gravity: float = 4.8
    contact_stiffness: float = 1700.0
    contact_damping: float = 70.0
    friction: float = 1.0
    friction_vel_eps: float = 0.2
    contraction_max: float = 0.3
    clearance: float = 0.01
    checkpoint_every: int = 32

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.friction_vel_eps <= 0:
            raise ValueError("friction_vel_eps must be positive")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be at least 1")
        if min(self.contact_stiffness, self.contact_damping, self.friction) < 0:
            raise ValueError("contact constants must be non-negative")
        if not 0.0 <= self.contraction_max < 1.0:
            raise ValueError("contraction_max must lie in [0, 1)")


@dataclass
class Trajectory:
    """Rollout record. `com_track[t]` is the center of mass after t steps."""

    dt: float
    com_track: np.ndarray  # (n_steps+1, 2)
    final_positions: np.ndarray  # (n, 2)
    final_velocities: np.ndarray  # (n, 2)
    positions: np.ndarray | None = None  # (n_steps+1, n, 2) when recorded
    loss: float | None = None
    completion_step: int | None = None

    @property
    def n_steps(self) -> int:
        return self.com_track.shape[0] - 1

    @property
    def com_x(self) -> np.ndarray:
        return self.com_track[:, 0]


@runtime_checkable
class ControlSource(Protocol):
    """Anything that can produce per-step actuation signals."""

    def signals(self, n_steps: int, dt: float) -> np.ndarray: ...


class TrajectoryLoss:
    """Scalar objective over a trajectory.

    `com_x_grads` returns {state index: dL/d com_x(index)} and
    `position_grads` returns {state index: (n, 2) dL/dx array}; indices
    run from 0 (initial state) to n_steps. The default is a constant
    loss with an exactly zero gradient.
    """

    def value(self, traj: Trajectory) -> float:
        return 0.0

    def com_x_grads(self, traj: Trajectory) -> dict[int, float]:
        return {}

    def position_grads(self, traj: Trajectory) -> dict[int, np.ndarray]:
        return {}


def initial_state(mesh: RobotMesh, terrain: Terrain, config: SimConfig
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Rest pose translated onto the terrain: min x at 0, minimum ground
    gap equal to config.clearance, zero velocity."""
    x = mesh.positions.copy()
    x[:, 0] -= x[:, 0].min()
    gap = x[:, 1] - np.asarray(terrain.height(x[:, 0]))
    x[:, 1] += config.clearance - gap.min()
    return x, np.zeros_like(x)


def resolve_signals(control, n_steps: int, n_actuators: int, dt: float) -> np.ndarray:
    """Normalize a control source, raw array, or None into a (T, n_act)
    float64 array in [0, 1]."""
    if control is None:
        return np.zeros((n_steps, n_actuators))
    if isinstance(control, np.ndarray):
        u = np.ascontiguousarray(control, dtype=np.float64)
    else:
        u = np.ascontiguousarray(control.signals(n_steps, dt), dtype=np.float64)
    if u.shape != (n_steps, n_actuators):
        raise ValueError(
            f"signals shape {u.shape} != ({n_steps}, {n_actuators})"
        )
    if u.size and (u.min() < 0.0 or u.max() > 1.0):
        raise ValueError("actuation signals must lie in [0, 1]")
    return u


def _run_forward(mesh: RobotMesh, terrain: Terrain, u: np.ndarray,
                 config: SimConfig, store_every: int):
    x, v = initial_state(mesh, terrain, config)
    n_steps = u.shape[0]
    n_stored = (n_steps + store_every - 1) // store_every
    xs = np.empty((n_stored, mesh.n_particles, 2))
    vs = np.empty_like(xs)
    com = np.empty((n_steps + 1, 2))
    status = _kernels.forward_rollout(
        x, v, mesh.masses, mesh.spring_i, mesh.spring_j, mesh.rest_length,
        mesh.stiffness, mesh.damping, mesh.actuator, u,
        config.dt, config.gravity, config.contact_stiffness,
        config.contact_damping, config.friction, config.friction_vel_eps,
        config.contraction_max, *terrain.encode(), store_every, xs, vs, com)
    if status >= 0:
        raise NonFiniteStateError(status)
    return x, v, xs, vs, com


def rollout(mesh: RobotMesh, terrain: Terrain, control, config: SimConfig,
            record_positions: bool = False) -> Trajectory:
    """Simulate config.n_steps steps from the rest pose.

    `control` may be None (all-zero signals), a (n_steps, n_actuators)
    array, or any ControlSource. With record_positions, every state is
    kept (positions has n_steps+1 entries).
    """
    u = resolve_signals(control, config.n_steps, mesh.n_actuators, config.dt)
    store_every = 1 if record_positions else config.checkpoint_every
    x, v, xs, _, com = _run_forward(mesh, terrain, u, config, store_every)
    positions = None
    if record_positions:
        positions = np.concatenate([xs, x[None]], axis=0)
    return Trajectory(dt=config.dt, com_track=com, final_positions=x,
                      final_velocities=v, positions=positions)


def step(mesh: RobotMesh, terrain: Terrain, x: np.ndarray, v: np.ndarray,
         u_t: np.ndarray, config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """One semi-implicit Euler step from an explicit state."""
    u = resolve_signals(np.asarray(u_t, dtype=np.float64)[None, :], 1,
                        mesh.n_actuators, config.dt)
    x2 = np.array(x, dtype=np.float64)
    v2 = np.array(v, dtype=np.float64)
    xs = np.empty((1, mesh.n_particles, 2))
    vs = np.empty_like(xs)
    com = np.empty((2, 2))
    status = _kernels.forward_rollout(
        x2, v2, mesh.masses, mesh.spring_i, mesh.spring_j, mesh.rest_length,
        mesh.stiffness, mesh.damping, mesh.actuator, u,
        config.dt, config.gravity, config.contact_stiffness,
        config.contact_damping, config.friction, config.friction_vel_eps,
        config.contraction_max, *terrain.encode(), 1, xs, vs, com)
    if status >= 0:
        raise NonFiniteStateError(status)
    return x2, v2


def gradient_u(mesh: RobotMesh, terrain: Terrain, u: np.ndarray,
               loss: TrajectoryLoss, config: SimConfig
               ) -> tuple[float, np.ndarray, Trajectory]:
    """Loss, dL/du, and the trajectory, via the checkpointed adjoint."""
    u = resolve_signals(u, config.n_steps, mesh.n_actuators, config.dt)
    interval = config.checkpoint_every
    n_steps = config.n_steps
    n = mesh.n_particles
    xf, vf, xs, vs, com = _run_forward(mesh, terrain, u, config, interval)
    traj = Trajectory(dt=config.dt, com_track=com, final_positions=xf,
                      final_velocities=vf)
    value = float(loss.value(traj))
    traj.loss = value

    weights = mesh.masses / mesh.masses.sum()  # d com_x / d x[:, 0]
    seeds: dict[int, np.ndarray] = {}
    for t, g in loss.com_x_grads(traj).items():
        arr = seeds.setdefault(t, np.zeros((n, 2)))
        arr[:, 0] += g * weights
    for t, g_arr in loss.position_grads(traj).items():
        arr = seeds.setdefault(t, np.zeros((n, 2)))
        arr += np.asarray(g_arr, dtype=np.float64)
    for t in seeds:
        if not 0 <= t <= n_steps:
            raise ValueError(f"loss seed at step {t} outside [0, {n_steps}]")

    xbar = seeds.pop(n_steps, np.zeros((n, 2))).copy()
    vbar = np.zeros((n, 2))
    ubar = np.zeros_like(u)

    xs_buf = np.empty((interval + 1, n, 2))
    vs_buf = np.empty_like(xs_buf)
    seeds_buf = np.zeros((interval, n, 2))
    terrain_enc = terrain.encode()

    n_segments = (n_steps + interval - 1) // interval
    for s in range(n_segments - 1, -1, -1):
        start = s * interval
        seg_len = min(interval, n_steps - start)
        u_seg = u[start:start + seg_len]
        _kernels.segment_states(
            xs[s], vs[s], mesh.masses, mesh.spring_i, mesh.spring_j,
            mesh.rest_length, mesh.stiffness, mesh.damping, mesh.actuator,
            u_seg, config.dt, config.gravity, config.contact_stiffness,
            config.contact_damping, config.friction, config.friction_vel_eps,
            config.contraction_max, *terrain_enc,
            xs_buf[:seg_len + 1], vs_buf[:seg_len + 1])
        seeds_buf[:seg_len] = 0.0
        for t, arr in seeds.items():
            if start <= t < start + seg_len:
                seeds_buf[t - start] = arr
        _kernels.segment_backward(
            xs_buf[:seg_len + 1], vs_buf[:seg_len + 1], u_seg,
            seeds_buf[:seg_len], mesh.masses, mesh.spring_i, mesh.spring_j,
            mesh.rest_length, mesh.stiffness, mesh.damping, mesh.actuator,
            config.dt, config.contact_stiffness, config.contact_damping,
            config.friction, config.friction_vel_eps, config.contraction_max,
            *terrain_enc, xbar, vbar, ubar[start:start + seg_len])

    if not np.isfinite(ubar).all():
        raise NonFiniteGradientError("non-finite values in dL/du")
    return value, ubar, traj


class DifferentiablePlan(Protocol):
    """Control source with parameters and a VJP from signals to them."""

    def signals(self, n_steps: int, dt: float) -> np.ndarray: ...

    def signal_vjp(self, u_bar: np.ndarray, n_steps: int, dt: float
                   ) -> np.ndarray: ...


def gradient_full(mesh: RobotMesh, terrain: Terrain, plan: DifferentiablePlan,
                  loss: TrajectoryLoss, config: SimConfig
                  ) -> tuple[float, np.ndarray, Trajectory]:
    value, ubar, traj = gradient_u(
        mesh, terrain, plan.signals(config.n_steps, config.dt), loss, config)
    theta_bar = plan.signal_vjp(ubar, config.n_steps, config.dt)
    if not np.isfinite(theta_bar).all():
        raise NonFiniteGradientError("non-finite values in dL/dtheta")
    return value, theta_bar, traj


def gradient(mesh: RobotMesh, terrain: Terrain, plan: DifferentiablePlan,
             loss: TrajectoryLoss, config: SimConfig
             ) -> tuple[float, np.ndarray]:
    """Loss and its gradient with respect to the plan parameters."""
    value, theta_bar, _ = gradient_full(mesh, terrain, plan, loss, config)
    return value, theta_bar


def mechanical_energy(mesh: RobotMesh, terrain: Terrain, x: np.ndarray,
                      v: np.ndarray, config: SimConfig) -> float:
    """Kinetic + elastic (passive rest lengths) + gravitational + contact
    penalty energy. Used by invariant checks with actuation off."""
    kinetic = 0.5 * float((mesh.masses[:, None] * v * v).sum())
    d = x[mesh.spring_i] - x[mesh.spring_j]
    r = np.linalg.norm(d, axis=1)
    elastic = 0.5 * float((mesh.stiffness * (r - mesh.rest_length) ** 2).sum())
    grav = config.gravity * float((mesh.masses * x[:, 1]).sum())
    pen = np.maximum(np.asarray(terrain.height(x[:, 0])) - x[:, 1], 0.0)
    contact = 0.5 * config.contact_stiffness * float((pen * pen).sum())
    return kinetic + elastic + grav + contact
