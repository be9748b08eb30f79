from dataclasses import replace

import numpy as np
import pytest

from swarmforge.benchmarks import get_benchmark
from swarmforge.core.errors import NonFiniteFitnessError, ShapeMismatchError
from swarmforge.core.runner import (
    ClassicSwarm,
    FitnessProblem,
    ParticleLoopSwarm,
    RunReport,
    TensorSwarm,
    run_algorithm,
    run_dppso_reference,
    run_dtpso,
    run_pso_reference,
    update_bests,
)
from swarmforge.core.swarm import HyperMatrix, RngStream, SearchBounds, SwarmState, inertia_at, init_swarm, step


class NanAfterOrigin(FitnessProblem):
    """Sphere that turns NaN for particles with a positive first coordinate"""

    name = "nan-sphere"

    @property
    def dimension(self):
        return 2

    @property
    def bounds(self):
        return SearchBounds.box(-1.0, 1.0, 2)

    def evaluate(self, positions):
        f = np.sum(positions ** 2, axis=-1)
        return np.where(positions[..., 0] > 0, np.nan, f)


class ConstantFive(FitnessProblem):
    name = "constant"

    @property
    def dimension(self):
        return 3

    @property
    def bounds(self):
        return SearchBounds.box(-2.0, 2.0, 3)

    def evaluate(self, positions):
        return np.full(positions.shape[:-1], 5.0)


def _random_hypers(rng, groups):
    rows = []
    for _ in range(groups):
        omega_init = rng.uniform(0.2, 1.0)
        rows.append({
            "c1": rng.uniform(0, 2.5), "c2": rng.uniform(0, 2.5), "c3": rng.uniform(0, 2.5),
            "omega_init": omega_init, "omega_end": rng.uniform(0.0, omega_init),
            "v_limit": rng.uniform(0.05, 1.0),
        })
    return HyperMatrix.from_rows(rows)


class TestUpdateBests:
    def _state(self, hypers):
        bounds = SearchBounds.box(-1.0, 1.0, 2)
        return init_swarm(hypers, bounds, hypers.groups, 3, 2, RngStream(0))

    def test_first_update_installs_everything(self, small_hypers):
        state = self._state(small_hypers)
        fitness = np.array([[3.0, 1.0, 2.0], [0.5, 4.0, 4.0], [9.0, 8.0, 7.0]])
        updated = update_bests(state, fitness)
        np.testing.assert_array_equal(updated.pbest_f, fitness)
        np.testing.assert_array_equal(updated.gbest_f, [1.0, 0.5, 7.0])
        np.testing.assert_array_equal(updated.gbest_x[1], state.x[1, 0])
        assert updated.tbest_f == 0.5
        np.testing.assert_array_equal(updated.tbest_x, state.x[1, 0])

    def test_ties_keep_incumbent(self, small_hypers):
        state = update_bests(self._state(small_hypers), np.ones((3, 3)))
        incumbent = state.pbest_x.copy()
        moved = SwarmState(**{**state.__dict__, "x": state.x + 0.1})
        again = update_bests(moved, np.ones((3, 3)))
        np.testing.assert_array_equal(again.pbest_x, incumbent)
        np.testing.assert_array_equal(again.tbest_x, state.tbest_x)

    def test_worse_fitness_changes_nothing(self, small_hypers):
        state = update_bests(self._state(small_hypers), np.ones((3, 3)))
        again = update_bests(state, np.full((3, 3), 2.0))
        np.testing.assert_array_equal(again.pbest_f, state.pbest_f)
        assert again.tbest_f == state.tbest_f

    def test_matches_history_replay(self, small_hypers):
        rng = np.random.default_rng(31)
        bounds = SearchBounds.box(-1.0, 1.0, 2)
        state = init_swarm(small_hypers, bounds, 3, 5, 2, RngStream(2))
        positions, scores = [], []
        for _ in range(25):
            state = replace(state, x=rng.uniform(-1, 1, size=(3, 5, 2)))
            fitness = rng.uniform(0, 10, size=(3, 5))
            positions.append(state.x)
            scores.append(fitness)
            state = update_bests(state, fitness)

        X, F = np.stack(positions), np.stack(scores)
        first_best = np.argmin(F, axis=0)
        np.testing.assert_array_equal(state.pbest_f, F.min(axis=0))
        np.testing.assert_array_equal(state.pbest_x, np.take_along_axis(X, first_best[None, ..., None], 0)[0])
        for g in range(3):
            t, n = np.unravel_index(np.argmin(F[:, g, :]), (25, 5))
            assert state.gbest_f[g] == F[t, g, n]
            np.testing.assert_array_equal(state.gbest_x[g], X[t, g, n])
        t, g, n = np.unravel_index(np.argmin(F), F.shape)
        assert state.tbest_f == F[t, g, n]
        np.testing.assert_array_equal(state.tbest_x, X[t, g, n])

    def test_shape_mismatch(self, small_hypers):
        with pytest.raises(ShapeMismatchError):
            update_bests(self._state(small_hypers), np.ones((2, 3)))


class TestRuns:
    def test_trace_non_increasing(self, table8, sphere5):
        report = run_dtpso(sphere5, table8, 8, 10, 60, seed=1)
        assert len(report.trace) == 60
        assert all(b <= a for a, b in zip(report.trace, report.trace[1:]))
        assert report.best_f == report.trace[-1]
        assert report.evaluations == 8 * 10 * 60
        assert sphere5.evaluate(np.array(report.best_x)) == pytest.approx(report.best_f)

    def test_same_seed_same_report(self, table8, sphere5):
        a = run_dtpso(sphere5, table8, 8, 10, 20, seed=4)
        b = run_dtpso(sphere5, table8, 8, 10, 20, seed=4)
        assert a.trace == b.trace
        assert a.best_x == b.best_x

    def test_tensor_matches_particle_loop(self):
        rng = np.random.default_rng(2024)
        problems = ["BF1", "BF2", "BF3", "BF4"]
        for instance in range(40):
            G = int(rng.integers(1, 5))
            N = int(rng.integers(1, 9))
            D = int(rng.integers(1, 9))
            T = int(rng.integers(1, 21))
            problem = get_benchmark(problems[instance % 4], D)
            hypers = _random_hypers(rng, G)
            seed = int(rng.integers(0, 2 ** 31))
            tensor = run_dtpso(problem, hypers, G, N, T, seed)
            loop = run_dppso_reference(problem, hypers, G, N, T, seed)
            np.testing.assert_allclose(tensor.trace, loop.trace, rtol=1e-9, atol=0)
            np.testing.assert_allclose(tensor.best_x, loop.best_x, rtol=1e-9, atol=1e-12)

    def test_single_iteration_is_one_evaluation(self, table8, sphere5):
        report = run_dtpso(sphere5, table8, 8, 4, 1, seed=11)
        state = init_swarm(table8, sphere5.bounds, 8, 4, 5, RngStream(11))
        state = update_bests(state, sphere5.evaluate(state.x))
        assert report.trace == (state.tbest_f,)
        assert report.best_x == tuple(float(v) for v in state.tbest_x)

    def test_two_iterations_compose_evaluate_and_step(self, table8, sphere5):
        report = run_dtpso(sphere5, table8, 8, 4, 2, seed=11)
        rng = RngStream(11)
        state = init_swarm(table8, sphere5.bounds, 8, 4, 5, rng)
        state = update_bests(state, sphere5.evaluate(state.x))
        first = state.tbest_f
        state = step(state, table8, sphere5.bounds, rng, 0, 2)
        state = update_bests(state, sphere5.evaluate(state.x))
        assert report.trace == (first, state.tbest_f)
        assert report.best_x == tuple(float(v) for v in state.tbest_x)

    def test_first_move_uses_initial_inertia(self, sphere5):
        row = {"c1": 0, "c2": 0, "c3": 0, "omega_init": 0.9, "omega_end": 0.1, "v_limit": 0.5}
        hypers = HyperMatrix.from_rows([row])
        swarm = TensorSwarm(sphere5, hypers, 1, 1)
        state = SwarmState.from_positions(np.zeros((1, 1, 5)), np.full((1, 1, 5), 10.0))
        report = run_algorithm(swarm, 2, seed=0, initial_state=state)
        np.testing.assert_allclose(report.best_x, np.zeros(5))
        assert report.trace == (0.0, 0.0)
        moved = swarm.advance(swarm.evaluate(state), RngStream(0), 0, 2)
        np.testing.assert_array_equal(moved.v, np.full((1, 1, 5), 9.0))

    def test_constant_fitness(self, table8):
        problem = ConstantFive()
        report = run_dtpso(problem, table8, 8, 3, 12, seed=6)
        assert report.trace == (5.0,) * 12
        first = init_swarm(table8, problem.bounds, 8, 3, 3, RngStream(6))
        assert report.best_x == tuple(float(v) for v in first.x[0, 0])

    def test_pso_without_attraction_drifts_by_inertia(self, sphere5):
        hypers = HyperMatrix.from_rows([
            {"c1": 0, "c2": 0, "c3": 0, "omega_init": 0.9, "omega_end": 0.4, "v_limit": 0.5}
        ])
        T = 8
        x0 = np.array([1.0, -2.0, 0.5, 3.0, 0.0])
        v0 = np.array([10.0, -20.0, 5.0, 0.0, 3.0])
        initial = SwarmState.from_positions(x0.reshape(1, 1, 5), v0.reshape(1, 1, 5))
        report = run_algorithm(ClassicSwarm(sphere5, 1, hypers), T, seed=2, initial_state=initial)

        x, v, trajectory = x0.copy(), v0.copy(), [x0.copy()]
        for k in range(T - 1):
            v = inertia_at(hypers, k, T)[0] * v
            x = x + v
            trajectory.append(x.copy())
        values = [float(np.sum(p ** 2)) for p in trajectory]
        np.testing.assert_allclose(report.trace, np.minimum.accumulate(values), rtol=1e-12)
        np.testing.assert_allclose(report.best_x, trajectory[int(np.argmin(values))], rtol=1e-12)

    def test_single_group_without_third_term_is_classic_pso(self, sphere5):
        hypers = HyperMatrix.from_rows([
            {"c1": 2, "c2": 2, "c3": 0, "omega_init": 0.9, "omega_end": 0.4, "v_limit": 0.5}
        ])
        grouped = ParticleLoopSwarm(sphere5, hypers, 1, 6)
        classic = ClassicSwarm(sphere5, 6, hypers)
        state = grouped.evaluate(grouped.initialize(RngStream(3)))
        np.testing.assert_array_equal(state.gbest_x[0], state.tbest_x)
        assert state.gbest_f[0] == state.tbest_f

        a = grouped.advance(state, RngStream(9), 0, 10)
        b = classic.advance(state, RngStream(9), 0, 10)
        np.testing.assert_array_equal(a.v, b.v)
        np.testing.assert_array_equal(a.x, b.x)

    def test_pso_baseline(self, sphere5):
        report = run_pso_reference(sphere5, T=30, M=12, seed=3)
        assert report.algorithm == "pso"
        assert report.evaluations == 12 * 30
        assert all(b <= a for a, b in zip(report.trace, report.trace[1:]))

    def test_pso_uses_single_group(self, sphere5):
        swarm = ClassicSwarm(sphere5, 12)
        assert swarm.groups == 1 and swarm.particles == 12
        assert swarm.hypers == HyperMatrix.preset("pso")

    def test_zero_iterations_rejected(self, table8, sphere5):
        with pytest.raises(ValueError):
            run_dtpso(sphere5, table8, 8, 10, 0, seed=0)

    def test_group_mismatch_rejected(self, table8, sphere5):
        with pytest.raises(ShapeMismatchError):
            TensorSwarm(sphere5, table8, 4, 10)

    def test_non_finite_fitness_reports_particle(self, small_hypers):
        with pytest.raises(NonFiniteFitnessError) as excinfo:
            run_dtpso(NanAfterOrigin(), small_hypers, 3, 10, 5, seed=0)
        assert len(excinfo.value.index) == 2
        assert excinfo.value.problem == "nan-sphere"

    def test_non_finite_fitness_in_particle_loop(self, small_hypers):
        with pytest.raises(NonFiniteFitnessError):
            run_dppso_reference(NanAfterOrigin(), small_hypers, 3, 10, 5, seed=0)

    def test_evaluation_counter(self, table8, sphere5):
        swarm = TensorSwarm(sphere5, table8, 8, 10)
        run_algorithm(swarm, 7, seed=0)
        assert swarm.evaluations == 8 * 10 * 7


class TestRunReport:
    def test_dict_round_trip(self, table8, sphere5):
        report = run_dtpso(sphere5, table8, 8, 10, 5, seed=2)
        assert RunReport.from_dict(report.to_dict()) == report

    def test_timing_excluded_on_request(self, table8, sphere5):
        data = run_dtpso(sphere5, table8, 8, 10, 5, seed=2).to_dict(include_timing=False)
        assert "wall_seconds" not in data
        assert set(data) >= {"trace", "final_point", "final_fitness"}


@pytest.mark.slow
def test_tensor_runs_match_particle_loop_at_scale():
    rng = np.random.default_rng(7)
    for instance in range(200):
        G, N, D, T = (int(rng.integers(1, 5)), int(rng.integers(1, 9)),
                      int(rng.integers(1, 9)), int(rng.integers(1, 21)))
        problem = get_benchmark(["BF1", "BF2", "BF3", "BF4"][instance % 4], D)
        hypers = _random_hypers(rng, G)
        seed = int(rng.integers(0, 2 ** 31))
        tensor = run_dtpso(problem, hypers, G, N, T, seed)
        loop = run_dppso_reference(problem, hypers, G, N, T, seed)
        np.testing.assert_allclose(tensor.trace, loop.trace, rtol=1e-9, atol=0)


@pytest.mark.slow
def test_dtpso_beats_pso_on_benchmarks(table8):
    for problem_id in ["BF1", "BF2", "BF3", "BF4"]:
        problem = get_benchmark(problem_id, 30)
        dtpso = [run_dtpso(problem, table8, 8, 10, 1400, seed=s).best_f for s in range(10)]
        pso = [run_pso_reference(problem, 1400, 80, seed=s).best_f for s in range(10)]
        assert min(dtpso + pso) >= 0.0
        assert np.median(dtpso) <= np.median(pso), problem_id
