import numpy as np
import pytest

from formation_flow import (
    IntegratorConfig, InvalidArgumentError, LockedState, Method, Realization, TerminalReason,
    integrate, locked_initial, potential)
from formation_flow.dynamics import csv_header, read_trajectory_csv, trajectory_to_csv, write_trajectory_csv
from formation_flow.energy import planar_errors

from conftest import P_BAR, Q_STAR


def random_locked(seed, z=1.0):
    rng = np.random.default_rng(seed)
    return np.append(rng.uniform(-5, 5, 8), z)


class TestConfig:
    @pytest.mark.parametrize("field, value", [("dt", 0.0), ("t_max", -1.0), ("grad_tol", 0.0),
                                              ("record_every", 0)])
    def test_rejects(self, field, value):
        with pytest.raises(InvalidArgumentError):
            IntegratorConfig(**{field: value})

    def test_replace(self):
        cfg = IntegratorConfig().replace(dt=0.01)
        assert cfg.dt == 0.01 and cfg.t_max == 200.0


class TestLockedInitial:
    def test_example(self):
        state = locked_initial(Realization(P_BAR, 2), 1.0)
        np.testing.assert_array_equal(state.to_vector(), Q_STAR)
        assert state.virtual_vertex == 4

    @pytest.mark.parametrize("alpha", [0.0, np.inf])
    def test_rejects(self, alpha):
        with pytest.raises(InvalidArgumentError):
            locked_initial(Realization(P_BAR, 2), alpha)

    def test_needs_planar(self):
        with pytest.raises(InvalidArgumentError):
            locked_initial(Realization(np.zeros(12), 3), 1.0)


class TestFlow:
    def test_target_terminates_at_once(self, locked_sys):
        traj = integrate(locked_sys, Q_STAR)
        assert traj.terminal_reason is TerminalReason.GRADIENT_BELOW_TOL
        assert len(traj) == 1 and traj.times[0] == 0.0
        np.testing.assert_array_equal(traj.final_state, Q_STAR)

    def test_accepts_state_objects(self, locked_sys, plain2d_sys):
        assert len(integrate(locked_sys, LockedState.from_vector(Q_STAR))) == 1
        assert len(integrate(plain2d_sys, Realization(P_BAR, 2))) == 1
        with pytest.raises(InvalidArgumentError):
            integrate(plain2d_sys, LockedState.from_vector(Q_STAR))

    @pytest.mark.parametrize("seed", range(5))
    def test_locked_converges(self, locked_sys, seed):
        traj = integrate(locked_sys, random_locked(seed))
        assert traj.terminal_reason is TerminalReason.GRADIENT_BELOW_TOL
        assert traj.final_grad_norm <= 1e-8
        assert np.max(np.abs(planar_errors(locked_sys, traj.final_state))) <= 1e-6

    def test_monotone(self, locked_sys, five_sys):
        for sys, x0 in ((locked_sys, random_locked(1)),
                        (five_sys, np.random.default_rng(1).uniform(-5, 5, 10))):
            traj = integrate(sys, x0, IntegratorConfig(record_every=1, t_max=20.0))
            assert np.all(np.diff(traj.potentials) <= 1e-10)

    def test_recorded_potentials(self, locked_sys):
        traj = integrate(locked_sys, random_locked(2))
        for x, v in zip(traj.states[::10], traj.potentials[::10]):
            assert v == pytest.approx(potential(locked_sys, x), rel=1e-12, abs=1e-300)

    def test_virtual_sign_preserved(self, locked_sys):
        for seed in range(5):
            for z in (1.0, -1.0, 0.05):
                traj = integrate(locked_sys, random_locked(seed, z), IntegratorConfig(record_every=1))
                assert np.all(np.sign(traj.states[:, -1]) == np.sign(z))

    def test_flat_stays_flat(self, locked_sys):
        traj = integrate(locked_sys, random_locked(3, 0.0), IntegratorConfig(t_max=5.0))
        assert np.all(traj.states[:, -1] == 0.0)

    def test_centroid_fixed(self, plain2d_sys, five_sys):
        for sys in (plain2d_sys, five_sys):
            x0 = np.random.default_rng(4).uniform(-5, 5, sys.state_size)
            traj = integrate(sys, x0, IntegratorConfig(t_max=10.0))
            c = traj.states.reshape(len(traj), sys.num_vertices, 2).mean(axis=1)
            np.testing.assert_allclose(c - c[0], 0.0, atol=1e-10)

    def test_locked_centroid_fixed(self, locked_sys):
        traj = integrate(locked_sys, random_locked(5))
        c = traj.states[:, :8].reshape(len(traj), 4, 2).mean(axis=1)
        np.testing.assert_allclose(c - c[0], 0.0, atol=1e-10)

    def test_fourth_order(self, locked_sys):
        x0 = random_locked(6)
        def end(dt):
            cfg = IntegratorConfig(dt=dt, t_max=0.2, grad_tol=1e-300, record_every=10 ** 9)
            return integrate(locked_sys, x0, cfg).final_state
        ref = end(1e-4 / 8)
        e1 = np.linalg.norm(end(1e-4) - ref)
        e2 = np.linalg.norm(end(5e-5) - ref)
        assert e1 / e2 >= 8.0

    def test_point_convergence(self, locked_sys):
        # Cauchy tail: once the gradient is small the state stops moving, and
        # the remaining path length is bounded by the recorded step lengths
        for seed in range(5):
            traj = integrate(locked_sys, random_locked(seed), IntegratorConfig(record_every=1))
            tail = traj.states[len(traj) * 9 // 10:]
            steps = np.linalg.norm(np.diff(tail, axis=0), axis=1)
            assert np.linalg.norm(tail[-1] - tail[0]) <= steps.sum() + 1e-15
            assert steps.sum() <= 1e-6

    def test_horizon(self, five_sys):
        x0 = np.random.default_rng(0).uniform(-5, 5, 10)
        traj = integrate(five_sys, x0, IntegratorConfig(t_max=0.5))
        assert traj.terminal_reason is TerminalReason.HORIZON_REACHED
        assert traj.times[-1] == pytest.approx(0.5)
        assert traj.final_grad_norm > 1e-8

    def test_step_failure(self, plain2d_sys):
        x0 = np.random.default_rng(0).uniform(-50, 50, 8)
        traj = integrate(plain2d_sys, x0, IntegratorConfig(dt=1.0, t_max=100.0))
        assert traj.terminal_reason is TerminalReason.STEP_FAILURE
        assert np.all(np.isfinite(traj.final_state))

    def test_rk45(self, locked_sys):
        cfg = IntegratorConfig(method=Method.RK45_ADAPTIVE, record_every=1)
        traj = integrate(locked_sys, random_locked(7), cfg)
        assert traj.terminal_reason is TerminalReason.GRADIENT_BELOW_TOL
        assert np.max(np.abs(planar_errors(locked_sys, traj.final_state))) <= 1e-6
        steps = np.diff(traj.times)
        assert np.all(steps[1:] <= 2.0 * steps[:-1] * (1 + 1e-12))
        assert np.all(np.diff(traj.potentials) <= 1e-10)

    def test_rk45_agrees_with_rk4(self, locked_sys):
        x0 = random_locked(8)
        cfg = IntegratorConfig(t_max=1.0, grad_tol=1e-300)
        a = integrate(locked_sys, x0, cfg).final_state
        b = integrate(locked_sys, x0, cfg.replace(method=Method.RK45_ADAPTIVE)).final_state
        np.testing.assert_allclose(a, b, atol=1e-7)


class TestCsv:
    def test_header(self, locked_sys, plain2d_sys, tetra_sys):
        assert csv_header(locked_sys) == ["t", "p1x", "p1y", "p2x", "p2y", "p3x", "p3y",
                                          "p4x", "p4y", "p4z", "V"]
        assert csv_header(plain2d_sys)[-3:] == ["p4x", "p4y", "V"]
        assert csv_header(tetra_sys)[1:4] == ["p1x", "p1y", "p1z"]

    def test_round_trip(self, locked_sys, tmp_path):
        traj = integrate(locked_sys, random_locked(9))
        path = write_trajectory_csv(locked_sys, traj, tmp_path / "run.csv")
        header, data = read_trajectory_csv(path)
        assert header == csv_header(locked_sys)
        assert np.array_equal(data[:, 0], traj.times)
        assert np.array_equal(data[:, 1:-1], traj.states)
        assert np.array_equal(data[:, -1], traj.potentials)

    def test_text_is_deterministic(self, locked_sys):
        x0 = random_locked(10)
        a = trajectory_to_csv(locked_sys, integrate(locked_sys, x0))
        b = trajectory_to_csv(locked_sys, integrate(locked_sys, x0))
        assert a == b
