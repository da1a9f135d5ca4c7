"""Open-loop actuation plans, locomotion objectives, and gait optimization.

The trainable controller is a per-actuator sinusoid u_a(t) = clip(bias_a
+ amp_a*sin(omega*t + phase_a), 0, 1) with a fixed shared frequency.
Optimization runs Adam on (amplitudes, phases, biases) against a
differentiable trajectory loss and returns the best iterate seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .mesher import RobotMesh
from .simulator import (
    Flat,
    SimConfig,
    Stairs,
    Terrain,
    Trajectory,
    TrajectoryLoss,
    gradient_full,
    rollout,
    terrain_from_json,
)

# One actuation cycle spans 500 steps regardless of dt.
OMEGA_STEPS_PER_CYCLE = 500

# Default required travel (block lengths) when a task does not pin one.
DEFAULT_DISTANCE = 4.0

# A back-and-forth run counts as returned when |com_x - start| falls
# inside this band after the outbound leg.
RETURN_BAND = 0.5

TASK_OBJECTIVES = ("uni", "back_forth", "downstairs")

INIT_AMPLITUDE = 0.15
INIT_BIAS = 0.3


def default_omega(dt: float) -> float:
    return 2.0 * math.pi / (OMEGA_STEPS_PER_CYCLE * dt)


@dataclass
class SinusoidPlan:
    """Per-actuator sinusoid parameters with a shared frequency."""

    amplitude: np.ndarray
    phase: np.ndarray
    bias: np.ndarray
    omega: float

    def __post_init__(self) -> None:
        self.amplitude = np.asarray(self.amplitude, dtype=np.float64)
        self.phase = np.asarray(self.phase, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if not self.amplitude.shape == self.phase.shape == self.bias.shape:
            raise ValueError("amplitude, phase, bias must have equal shape")

    @property
    def n_actuators(self) -> int:
        return self.amplitude.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.amplitude, self.phase, self.bias])

    def with_theta(self, theta: np.ndarray) -> "SinusoidPlan":
        n = self.n_actuators
        if theta.shape != (3 * n,):
            raise ValueError(f"theta must have shape ({3 * n},)")
        return SinusoidPlan(
            amplitude=theta[:n].copy(),
            phase=theta[n:2 * n].copy(),
            bias=theta[2 * n:].copy(),
            omega=self.omega,
        )

    def _raw(self, n_steps: int, dt: float) -> np.ndarray:
        t = np.arange(n_steps) * dt
        ph = self.omega * t[:, None] + self.phase[None, :]
        return self.bias[None, :] + self.amplitude[None, :] * np.sin(ph)

    def signals(self, n_steps: int, dt: float) -> np.ndarray:
        return np.clip(self._raw(n_steps, dt), 0.0, 1.0)

    def signal_vjp(self, u_bar: np.ndarray, n_steps: int, dt: float
                   ) -> np.ndarray:
        """Chain dL/du back to (amplitude, phase, bias).

        The clip to [0, 1] uses the zero subgradient outside the open
        interval, so saturated samples contribute nothing.
        """
        t = np.arange(n_steps) * dt
        ph = self.omega * t[:, None] + self.phase[None, :]
        raw = self.bias[None, :] + self.amplitude[None, :] * np.sin(ph)
        gate = (raw > 0.0) & (raw < 1.0)
        g = np.where(gate, u_bar, 0.0)
        d_amp = (g * np.sin(ph)).sum(axis=0)
        d_phase = (g * self.amplitude[None, :] * np.cos(ph)).sum(axis=0)
        d_bias = g.sum(axis=0)
        return np.concatenate([d_amp, d_phase, d_bias])

    def to_json_dict(self) -> dict:
        return {
            "kind": "sinusoid",
            "omega": self.omega,
            "amplitude": [float(a) for a in self.amplitude],
            "phase": [float(p) for p in self.phase],
            "bias": [float(b) for b in self.bias],
        }


@dataclass
class PiecewiseConstantPlan:
    """Cyclic per-actuator step schedule: [(n_steps, level), ...] each."""

    schedules: tuple[tuple[tuple[int, float], ...], ...]

    def __post_init__(self) -> None:
        for sched in self.schedules:
            if not sched:
                raise ValueError("each actuator needs at least one segment")
            for steps, level in sched:
                if steps < 1:
                    raise ValueError("segment length must be >= 1 step")
                if not 0.0 <= level <= 1.0:
                    raise ValueError("levels must lie in [0, 1]")

    @property
    def n_actuators(self) -> int:
        return len(self.schedules)

    def signals(self, n_steps: int, dt: float) -> np.ndarray:
        u = np.zeros((n_steps, self.n_actuators))
        for a, sched in enumerate(self.schedules):
            period = sum(steps for steps, _ in sched)
            track = np.empty(period)
            at = 0
            for steps, level in sched:
                track[at:at + steps] = level
                at += steps
            reps = -(-n_steps // period)
            u[:, a] = np.tile(track, reps)[:n_steps]
        return u

    def to_json_dict(self) -> dict:
        return {
            "kind": "piecewise",
            "schedules": [
                [[int(s), float(l)] for s, l in sched] for sched in self.schedules
            ],
        }


def plan_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "sinusoid":
        return SinusoidPlan(
            amplitude=np.asarray(obj["amplitude"], dtype=np.float64),
            phase=np.asarray(obj["phase"], dtype=np.float64),
            bias=np.asarray(obj["bias"], dtype=np.float64),
            omega=float(obj["omega"]),
        )
    if kind == "piecewise":
        return PiecewiseConstantPlan(
            schedules=tuple(
                tuple((int(s), float(l)) for s, l in sched)
                for sched in obj["schedules"]
            )
        )
    raise ValueError(f"unknown plan kind: {kind!r}")


@dataclass(frozen=True)
class TaskSpec:
    """Locomotion objective plus the terrain it runs on.

    Objectives: `uni` (travel +x), `back_forth` (out past the distance,
    then return to the start band), `downstairs` (clear the staircase).
    Distances are in block lengths.
    """

    objective: str
    terrain: Terrain
    distance: float = DEFAULT_DISTANCE

    def __post_init__(self) -> None:
        if self.objective not in TASK_OBJECTIVES:
            raise ValueError(f"unknown objective: {self.objective!r}")
        if self.distance <= 0:
            raise ValueError("distance must be positive")
        is_stairs = isinstance(self.terrain, Stairs)
        if self.objective == "downstairs" and not is_stairs:
            raise ValueError("downstairs requires stairs terrain")
        if self.objective != "downstairs" and is_stairs:
            raise ValueError(f"{self.objective} runs on flat terrain")

    def to_json_dict(self) -> dict:
        return {
            "objective": self.objective,
            "terrain": self.terrain.to_json_dict(),
            "distance": self.distance,
        }


def task_from_json(obj: dict) -> TaskSpec:
    return TaskSpec(
        objective=str(obj["objective"]),
        terrain=terrain_from_json(obj["terrain"]),
        distance=float(obj.get("distance", DEFAULT_DISTANCE)),
    )


class ForwardProgressLoss(TrajectoryLoss):
    """Negated net +x travel of the center of mass."""

    def value(self, traj: Trajectory) -> float:
        return float(traj.com_x[0] - traj.com_x[-1])

    def com_x_grads(self, traj: Trajectory) -> dict[int, float]:
        return {traj.n_steps: -1.0, 0: 1.0}


class OutAndBackLoss(TrajectoryLoss):
    """Rewards +x travel at the horizon midpoint, penalizes squared final
    offset from the start."""

    def value(self, traj: Trajectory) -> float:
        com = traj.com_x
        half = traj.n_steps // 2
        out = com[half] - com[0]
        back = com[-1] - com[0]
        return float(-out + back * back)

    def com_x_grads(self, traj: Trajectory) -> dict[int, float]:
        com = traj.com_x
        half = traj.n_steps // 2
        back = float(com[-1] - com[0])
        grads: dict[int, float] = {}
        # Both terms touch com_x(0); indices may also collide on tiny horizons.
        for idx, g in ((half, -1.0), (traj.n_steps, 2.0 * back),
                       (0, 1.0 - 2.0 * back)):
            grads[idx] = grads.get(idx, 0.0) + g
        return grads


def loss_for(task: TaskSpec) -> TrajectoryLoss:
    if task.objective == "back_forth":
        return OutAndBackLoss()
    return ForwardProgressLoss()


def completion_step(task: TaskSpec, com_x: np.ndarray) -> int | None:
    """First state index satisfying the task predicate, None if never.

    uni: com moved >= distance in +x. back_forth: first reach of the
    distance, then first return to within RETURN_BAND of the start.
    downstairs: com strictly past the last step edge.
    """
    start = com_x[0]
    if task.objective == "uni":
        hits = np.nonzero(com_x - start >= task.distance)[0]
        return int(hits[0]) if hits.size else None
    if task.objective == "back_forth":
        out = np.nonzero(com_x - start >= task.distance)[0]
        if not out.size:
            return None
        back = np.nonzero(np.abs(com_x[out[0]:] - start) <= RETURN_BAND)[0]
        return int(out[0] + back[0]) if back.size else None
    edge = task.terrain.end_x
    hits = np.nonzero(com_x > edge)[0]
    return int(hits[0]) if hits.size else None


def progress_score(task: TaskSpec, com_x: np.ndarray) -> float:
    """Task-direction travel in block lengths over a (long) rollout.

    uni/downstairs: net +x displacement. back_forth: distance credited
    per completed leg (out legs end at +distance, back legs inside the
    return band) plus clamped progress along the current leg.
    """
    start = com_x[0]
    if task.objective != "back_forth":
        return float(com_x[-1] - start)
    total = 0.0
    outbound = True
    at = 0
    n = com_x.shape[0]
    while at < n:
        rel = com_x[at:] - start
        if outbound:
            hits = np.nonzero(rel >= task.distance)[0]
        else:
            hits = np.nonzero(np.abs(rel) <= RETURN_BAND)[0]
        if not hits.size:
            break
        total += task.distance
        at += int(hits[0]) + 1
        outbound = not outbound
    if at < n:
        rel_end = float(com_x[-1] - start)
        if outbound:
            total += min(max(rel_end, 0.0), task.distance)
        else:
            # Returning: credit approach toward the start band.
            total += min(max(task.distance - abs(rel_end), 0.0), task.distance)
    return total


class BudgetError(ValueError):
    """Optimization budget must allow at least one iteration."""


@dataclass(frozen=True)
class AdamParams:
    learning_rate: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1.0e-8


@dataclass
class OptimizeResult:
    plan: SinusoidPlan
    trajectory: Trajectory
    loss_history: list[float]
    best_iteration: int


def init_plan(n_actuators: int, seed: int, dt: float) -> SinusoidPlan:
    """Fixed amplitudes/biases, phases drawn uniformly from [0, 2*pi)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return SinusoidPlan(
        amplitude=np.full(n_actuators, INIT_AMPLITUDE),
        phase=rng.uniform(0.0, 2.0 * math.pi, n_actuators),
        bias=np.full(n_actuators, INIT_BIAS),
        omega=default_omega(dt),
    )


def optimize(mesh: RobotMesh, task: TaskSpec, seed: int, budget: int,
             config: SimConfig, adam: AdamParams | None = None
             ) -> OptimizeResult:
    """Adam on sinusoid parameters; returns the best iterate by loss.

    Deterministic given (mesh, task, seed, budget, config). The returned
    trajectory is the best iterate's forward pass with completion_step
    filled in from the task predicate.
    """
    if budget < 1:
        raise BudgetError(f"budget must be >= 1, got {budget}")
    adam = adam or AdamParams()
    loss_fn = loss_for(task)
    plan = init_plan(mesh.n_actuators, seed, config.dt)
    theta = plan.theta
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)

    best_loss = math.inf
    best_theta = theta.copy()
    best_traj: Trajectory | None = None
    best_iter = 0
    history: list[float] = []

    for it in range(budget):
        current = plan.with_theta(theta)
        value, grad, traj = gradient_full(mesh, task.terrain, current,
                                          loss_fn, config)
        history.append(value)
        if value < best_loss:
            best_loss = value
            best_theta = theta.copy()
            best_traj = traj
            best_iter = it
        m = adam.beta1 * m + (1.0 - adam.beta1) * grad
        v = adam.beta2 * v + (1.0 - adam.beta2) * grad * grad
        mhat = m / (1.0 - adam.beta1 ** (it + 1))
        vhat = v / (1.0 - adam.beta2 ** (it + 1))
        theta = theta - adam.learning_rate * mhat / (np.sqrt(vhat) + adam.eps)

    assert best_traj is not None
    best_plan = plan.with_theta(best_theta)
    best_traj.completion_step = completion_step(task, best_traj.com_x)
    return OptimizeResult(plan=best_plan, trajectory=best_traj,
                          loss_history=history, best_iteration=best_iter)
