"""Tests for actuation plans, task predicates, and gait optimization."""

import math

import numpy as np
import pytest

import softmod.controller as ctl
import softmod.mesher as mesher
import softmod.presets as presets
import softmod.simulator as simulator


def make_traj(com_x, dt=1.0e-3):
    """Trajectory stub carrying only the fields the losses look at."""
    com = np.asarray(com_x, dtype=np.float64)
    track = np.stack([com, np.zeros_like(com)], axis=1)
    return simulator.Trajectory(
        dt=dt,
        com_track=track,
        final_positions=np.zeros((1, 2)),
        final_velocities=np.zeros((1, 2)),
    )


class TestSinusoidPlan:
    def test_theta_round_trip(self):
        plan = ctl.SinusoidPlan(
            amplitude=np.array([0.1, 0.2]),
            phase=np.array([0.3, 0.4]),
            bias=np.array([0.5, 0.6]),
            omega=ctl.default_omega(1.0e-3),
        )
        again = plan.with_theta(plan.theta)
        np.testing.assert_array_equal(again.theta, plan.theta)
        assert again.omega == plan.omega

    def test_with_theta_rejects_bad_shape(self):
        plan = ctl.init_plan(3, seed=0, dt=1.0e-3)
        with pytest.raises(ValueError):
            plan.with_theta(np.zeros(7))

    def test_mismatched_shapes_rejected(self):
        with pytest.raises(ValueError):
            ctl.SinusoidPlan(np.zeros(2), np.zeros(3), np.zeros(2), 1.0)

    def test_signals_clipped_to_unit_interval(self):
        plan = ctl.SinusoidPlan(
            amplitude=np.array([2.0]),
            phase=np.array([0.0]),
            bias=np.array([0.5]),
            omega=ctl.default_omega(1.0e-3),
        )
        u = plan.signals(1000, 1.0e-3)
        assert u.min() == 0.0 and u.max() == 1.0
        raw = plan._raw(1000, 1.0e-3)
        inside = (raw > 0.0) & (raw < 1.0)
        np.testing.assert_array_equal(u[inside], raw[inside])

    def test_signal_vjp_matches_fd(self):
        # J(theta) = sum(W * u(theta)) for a fixed random weight field.
        rng = np.random.Generator(np.random.PCG64(5))
        n_act, n_steps, dt = 3, 200, 1.0e-3
        plan = ctl.SinusoidPlan(
            amplitude=rng.uniform(0.05, 0.25, n_act),
            phase=rng.uniform(0.0, 2.0 * math.pi, n_act),
            bias=rng.uniform(0.35, 0.6, n_act),
            omega=ctl.default_omega(dt),
        )
        w = rng.normal(size=(n_steps, n_act))
        g_ad = plan.signal_vjp(w, n_steps, dt)
        h = 1.0e-7
        theta0 = plan.theta
        g_fd = np.empty_like(theta0)
        for k in range(theta0.size):
            tp = theta0.copy()
            tp[k] += h
            tm = theta0.copy()
            tm[k] -= h
            jp = float((w * plan.with_theta(tp).signals(n_steps, dt)).sum())
            jm = float((w * plan.with_theta(tm).signals(n_steps, dt)).sum())
            g_fd[k] = (jp - jm) / (2.0 * h)
        np.testing.assert_allclose(g_ad, g_fd, rtol=1.0e-5, atol=1.0e-7)

    def test_saturated_samples_blocked_in_vjp(self):
        # bias 2.0 pins every sample at the clip ceiling.
        plan = ctl.SinusoidPlan(
            amplitude=np.array([0.1]),
            phase=np.array([0.0]),
            bias=np.array([2.0]),
            omega=ctl.default_omega(1.0e-3),
        )
        g = plan.signal_vjp(np.ones((50, 1)), 50, 1.0e-3)
        np.testing.assert_array_equal(g, np.zeros(3))

    def test_json_round_trip(self):
        plan = ctl.init_plan(4, seed=9, dt=1.0e-3)
        again = ctl.plan_from_json(plan.to_json_dict())
        np.testing.assert_array_equal(again.theta, plan.theta)
        assert again.omega == plan.omega


class TestPiecewisePlan:
    def test_cyclic_tiling(self):
        plan = ctl.PiecewiseConstantPlan(
            schedules=(((2, 1.0), (1, 0.0)),)
        )
        u = plan.signals(8, 1.0e-3)
        np.testing.assert_array_equal(
            u[:, 0], [1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            ctl.PiecewiseConstantPlan(schedules=((),))
        with pytest.raises(ValueError):
            ctl.PiecewiseConstantPlan(schedules=(((0, 0.5),),))
        with pytest.raises(ValueError):
            ctl.PiecewiseConstantPlan(schedules=(((3, 1.5),),))

    def test_json_round_trip(self):
        plan = ctl.PiecewiseConstantPlan(
            schedules=(((5, 0.2), (3, 0.8)), ((4, 1.0),)))
        again = ctl.plan_from_json(plan.to_json_dict())
        np.testing.assert_array_equal(
            again.signals(16, 1.0e-3), plan.signals(16, 1.0e-3))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            ctl.plan_from_json({"kind": "spline"})


class TestTaskSpec:
    def test_objective_terrain_pairing(self):
        ctl.TaskSpec("uni", simulator.Flat())
        ctl.TaskSpec("downstairs", simulator.Stairs())
        with pytest.raises(ValueError):
            ctl.TaskSpec("downstairs", simulator.Flat())
        with pytest.raises(ValueError):
            ctl.TaskSpec("uni", simulator.Stairs())
        with pytest.raises(ValueError):
            ctl.TaskSpec("sideways", simulator.Flat())
        with pytest.raises(ValueError):
            ctl.TaskSpec("uni", simulator.Flat(), distance=0.0)

    def test_json_round_trip(self):
        task = ctl.TaskSpec(
            "downstairs",
            simulator.Stairs(step_width=1.5, step_height=0.4, n_steps=3,
                             x_start=2.0),
            distance=5.5,
        )
        again = ctl.task_from_json(task.to_json_dict())
        assert again == task


class TestLosses:
    def test_forward_progress_value(self):
        traj = make_traj([0.0, 0.5, 1.25])
        assert ctl.ForwardProgressLoss().value(traj) == -1.25

    def test_out_and_back_value(self):
        # half index = 2 for 4 steps; out 0.8, final offset 0.2.
        traj = make_traj([0.0, 0.5, 0.8, 0.5, 0.2])
        loss = ctl.OutAndBackLoss()
        assert loss.value(traj) == pytest.approx(-0.8 + 0.04)

    def test_loss_for_mapping(self):
        flat = simulator.Flat()
        assert isinstance(ctl.loss_for(ctl.TaskSpec("uni", flat)),
                          ctl.ForwardProgressLoss)
        assert isinstance(ctl.loss_for(ctl.TaskSpec("back_forth", flat)),
                          ctl.OutAndBackLoss)
        task = ctl.TaskSpec("downstairs", simulator.Stairs())
        assert isinstance(ctl.loss_for(task), ctl.ForwardProgressLoss)


class TestCompletionStep:
    def test_uni_first_crossing(self):
        task = ctl.TaskSpec("uni", simulator.Flat(), distance=2.0)
        com = np.array([0.0, 1.0, 1.9, 2.0, 3.0])
        assert ctl.completion_step(task, com) == 3
        assert ctl.completion_step(task, com[:3]) is None

    def test_uni_offset_start(self):
        task = ctl.TaskSpec("uni", simulator.Flat(), distance=1.0)
        com = np.array([5.0, 5.5, 6.0])
        assert ctl.completion_step(task, com) == 2

    def test_uni_monotone_in_distance(self):
        """First crossing of a higher bar can never come earlier."""
        rng = np.random.Generator(np.random.PCG64(11))
        for _ in range(50):
            com = np.cumsum(rng.normal(0.05, 0.3, 120))
            steps = []
            for d in (0.5, 1.0, 2.0, 4.0):
                task = ctl.TaskSpec("uni", simulator.Flat(), distance=d)
                s = ctl.completion_step(task, com)
                steps.append(math.inf if s is None else s)
            assert steps == sorted(steps)

    def test_back_forth_reach_then_return(self):
        task = ctl.TaskSpec("back_forth", simulator.Flat(), distance=2.0)
        #                 0    1    2    3    4    5    6
        com = np.array([0.0, 1.0, 2.0, 2.5, 1.0, 0.4, 0.1])
        # reach at 2; first |rel| <= 0.5 from there is index 5.
        assert ctl.completion_step(task, com) == 5

    def test_back_forth_band_requires_prior_reach(self):
        task = ctl.TaskSpec("back_forth", simulator.Flat(), distance=2.0)
        # Sits inside the return band the whole time but never goes out.
        assert ctl.completion_step(task, np.array([0.0, 0.1, 0.0])) is None
        # Goes out but never comes back.
        assert ctl.completion_step(task, np.array([0.0, 2.0, 3.0])) is None

    def test_downstairs_strictly_past_edge(self):
        stairs = simulator.Stairs(step_width=2.0, step_height=0.5, n_steps=3,
                                  x_start=1.0)
        task = ctl.TaskSpec("downstairs", stairs)
        edge = stairs.end_x
        com = np.array([0.0, edge, edge + 0.01])
        assert ctl.completion_step(task, com) == 2
        assert ctl.completion_step(task, com[:2]) is None


class TestProgressScore:
    def test_uni_net_displacement(self):
        task = ctl.TaskSpec("uni", simulator.Flat())
        assert ctl.progress_score(task, np.array([1.0, 3.5])) == 2.5
        assert ctl.progress_score(task, np.array([1.0, 0.25])) == -0.75

    def test_back_forth_completed_legs_plus_residual(self):
        task = ctl.TaskSpec("back_forth", simulator.Flat(), distance=2.0)
        # out leg (credit 2), back into the band (credit 2), then 1.2 out.
        com = np.array([0.0, 1.0, 2.0, 1.0, 0.3, 0.7, 1.2])
        assert ctl.progress_score(task, com) == pytest.approx(5.2)

    def test_back_forth_partial_return_leg(self):
        task = ctl.TaskSpec("back_forth", simulator.Flat(), distance=2.0)
        # completed out leg, then returning: credit distance - |rel_end|.
        com = np.array([0.0, 2.0, 0.8])
        assert ctl.progress_score(task, com) == pytest.approx(2.0 + 1.2)

    def test_back_forth_outbound_residual_clamped(self):
        task = ctl.TaskSpec("back_forth", simulator.Flat(), distance=2.0)
        # Negative drift on the first leg scores zero, not negative.
        assert ctl.progress_score(task, np.array([0.0, -1.5])) == 0.0


class TestOptimize:
    def test_budget_must_be_positive(self):
        mesh = mesher.build_mesh(presets.CHAIN_4)
        task = ctl.TaskSpec("uni", simulator.Flat())
        with pytest.raises(ctl.BudgetError):
            ctl.optimize(mesh, task, seed=0, budget=0,
                         config=simulator.SimConfig())

    def test_init_plan_deterministic(self):
        a = ctl.init_plan(5, seed=3, dt=1.0e-3)
        b = ctl.init_plan(5, seed=3, dt=1.0e-3)
        c = ctl.init_plan(5, seed=4, dt=1.0e-3)
        np.testing.assert_array_equal(a.theta, b.theta)
        assert not np.array_equal(a.phase, c.phase)
        np.testing.assert_array_equal(a.amplitude,
                                      np.full(5, ctl.INIT_AMPLITUDE))
        np.testing.assert_array_equal(a.bias, np.full(5, ctl.INIT_BIAS))

    def test_optimize_deterministic_and_best_iterate(self):
        mesh = mesher.build_mesh(presets.CHAIN_4)
        task = ctl.TaskSpec("uni", simulator.Flat())
        config = simulator.SimConfig(n_steps=300)
        r1 = ctl.optimize(mesh, task, seed=1, budget=4, config=config)
        r2 = ctl.optimize(mesh, task, seed=1, budget=4, config=config)
        np.testing.assert_array_equal(r1.plan.theta, r2.plan.theta)
        assert r1.loss_history == r2.loss_history
        assert len(r1.loss_history) == 4
        assert r1.best_iteration == int(np.argmin(r1.loss_history))
        assert min(r1.loss_history) <= r1.loss_history[0]
        # The stored trajectory belongs to the best iterate.
        best = ctl.loss_for(task).value(r1.trajectory)
        assert best == pytest.approx(r1.loss_history[r1.best_iteration])

    def test_optimize_completion_matches_predicate(self):
        mesh = mesher.build_mesh(presets.TWO_LEG_5)
        task = ctl.TaskSpec("uni", simulator.Flat(), distance=0.05)
        config = simulator.SimConfig(n_steps=600)
        result = ctl.optimize(mesh, task, seed=0, budget=2, config=config)
        expect = ctl.completion_step(task, result.trajectory.com_x)
        assert result.trajectory.completion_step == expect
        assert expect is not None
