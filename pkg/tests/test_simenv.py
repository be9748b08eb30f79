import json

import numpy as np
import pytest
from pydantic import ValidationError

from swarmforge.core.errors import PlacementError
from swarmforge.core.planner import PlannerConfig
from swarmforge.core.swarm import HyperMatrix
from swarmforge.geometry import Obstacle, Point2, PolygonWorld
from swarmforge.simenv import (
    ScenarioConfig,
    SimMetrics,
    generate_world,
    resolve_variant_hypers,
    run_scenario,
    step_world,
)


@pytest.fixture
def scenario():
    return ScenarioConfig(frames=3, seed=21)


@pytest.fixture
def tiny_planner():
    return PlannerConfig(groups=8, particles_per_group=5, dimension=8, max_iters_per_frame=10,
                         fixed_iters_per_frame=5, tw=3)


class TestScenarioConfig:
    def test_defaults(self):
        s = ScenarioConfig()
        assert (s.width, s.height) == (366.0, 366.0)
        assert s.dynamic_obstacles == 6 and s.static_obstacles == 2
        assert s.start_velocity == (0.0, 3.0)

    def test_bad_side_range(self):
        with pytest.raises(ValidationError):
            ScenarioConfig(side_range=(50.0, 40.0))
        with pytest.raises(ValidationError):
            ScenarioConfig(side_range=(30.0, 400.0))

    def test_start_outside(self):
        with pytest.raises(ValidationError):
            ScenarioConfig(start=(400.0, 10.0))

    def test_json_round_trip(self, tmp_path):
        s = ScenarioConfig(seed=9, dynamic_obstacles=3)
        path = s.to_json(tmp_path / "scenario.json")
        assert ScenarioConfig.from_json(path) == s
        assert json.loads(path.read_text())["seed"] == 9


class TestGenerateWorld:
    def test_population(self, scenario):
        world = generate_world(scenario)
        assert len(world.obstacles) == 8
        kinds = [o.kind for o in world.obstacles]
        assert kinds == ["dynamic"] * 6 + ["static"] * 2
        for obstacle in world.obstacles:
            speed = float(np.hypot(*obstacle.velocity))
            if obstacle.kind == "static":
                assert speed == 0.0
            else:
                assert 0.0 < speed <= 5.0 + 1e-12

    def test_sides_and_clearance(self, scenario):
        world = generate_world(scenario)
        for obstacle in world.obstacles:
            x_min, y_min, x_max, y_max = obstacle.extent
            assert 30.0 <= x_max - x_min <= 80.0
            assert 30.0 <= y_max - y_min <= 80.0
            for p in (world.start, world.target):
                assert not (x_min - 15 <= p.x <= x_max + 15 and y_min - 15 <= p.y <= y_max + 15)

    def test_no_overlap(self, scenario):
        extents = [o.extent for o in generate_world(scenario).obstacles]
        for i, a in enumerate(extents):
            for b in extents[i + 1:]:
                assert not (a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3])

    def test_deterministic(self, scenario):
        assert generate_world(scenario, seed=3) == generate_world(scenario, seed=3)
        assert generate_world(scenario, seed=3) != generate_world(scenario, seed=4)

    def test_overcrowded_map(self):
        crowded = ScenarioConfig(dynamic_obstacles=50, side_range=(80.0, 80.0))
        with pytest.raises(PlacementError):
            generate_world(crowded)


class TestStepWorld:
    def test_start_and_target_drift(self):
        world = PolygonWorld(366, 366, (20, 60), (346, 306), start_velocity=(0, 3), target_velocity=(0, -8))
        for _ in range(10):
            world = step_world(world)
        assert world.start == Point2(20.0, 90.0)
        assert world.target == Point2(346.0, 226.0)

    def test_point_reflects_off_border(self):
        world = PolygonWorld(366, 366, (364, 100), (10, 10), start_velocity=(5, 0))
        moved = step_world(world)
        assert moved.start == Point2(363.0, 100.0)
        assert moved.start_velocity == Point2(-5.0, 0.0)

    def test_obstacle_reflects_off_border(self):
        box = Obstacle.rectangle(10, 100, 20, 20, velocity=(-12, 0), kind="dynamic")
        world = PolygonWorld(366, 366, (200, 200), (300, 300), obstacles=(box,))
        moved = step_world(world).obstacles[0]
        assert moved.extent == pytest.approx((2.0, 100.0, 22.0, 120.0))
        assert moved.velocity == Point2(12.0, 0.0)

    def test_static_obstacles_stay(self):
        box = Obstacle.rectangle(10, 100, 20, 20)
        world = PolygonWorld(366, 366, (200, 200), (300, 300), obstacles=(box,))
        assert step_world(world).obstacles[0] is box

    def test_long_run_stays_inside(self, scenario):
        world = generate_world(scenario)
        sizes = [(o.extent[2] - o.extent[0], o.extent[3] - o.extent[1]) for o in world.obstacles]
        for _ in range(500):
            world = step_world(world)
            for obstacle, (w, h) in zip(world.obstacles, sizes):
                x_min, y_min, x_max, y_max = obstacle.extent
                assert 0 <= x_min and x_max <= 366 and 0 <= y_min and y_max <= 366
                assert x_max - x_min == pytest.approx(w)
                assert y_max - y_min == pytest.approx(h)

    def test_rejects_bad_dt(self, empty_world):
        with pytest.raises(ValueError):
            step_world(empty_world, 0.0)


class TestResolveVariantHypers:
    def test_presets(self):
        assert resolve_variant_hypers("dtpso") == HyperMatrix.preset("table8")
        assert resolve_variant_hypers("sepso") == HyperMatrix.preset("path_evolved")
        assert resolve_variant_hypers("pso") == HyperMatrix.preset("pso")

    def test_evolved_file_only_for_sepso(self, table8):
        assert resolve_variant_hypers("sepso-noat", table8) == table8
        with pytest.raises(ValueError):
            resolve_variant_hypers("dtpso", table8)


class TestRunScenario:
    def test_small_run(self, scenario, tiny_planner):
        seen = []
        metrics = run_scenario(scenario, "sepso", planner_config=tiny_planner,
                               on_frame=lambda frame, world, record: seen.append((frame, record.frame)))
        assert metrics.frames == 3
        assert seen == [(0, 0), (1, 1), (2, 2)]
        assert metrics.mean_iterations == pytest.approx(np.mean([r.iterations for r in metrics.records]))
        assert 0.0 <= metrics.collision_free_fraction <= 1.0
        for record in metrics.records:
            if record.truncated:
                assert record.q == 0

    def test_frame_table(self, scenario, tiny_planner):
        metrics = run_scenario(scenario, "dtpso", planner_config=tiny_planner)
        table = metrics.frame_table(include_timing=False)
        assert len(table) == 3
        assert "best_path" not in table.columns
        assert "wall_seconds" not in table.columns
        assert list(table["frame"]) == [0, 1, 2]
        assert (table["iterations"] == tiny_planner.fixed_iters_per_frame).all()
        assert "wall_seconds" in metrics.frame_table().columns

    def test_summary_and_csv(self, tmp_path, scenario, tiny_planner):
        metrics = run_scenario(scenario, "sepso-nopi", planner_config=tiny_planner)
        summary = metrics.summary(include_timing=False)
        assert summary["variant"] == "sepso-nopi"
        assert summary["frames"] == 3
        assert "mean_wall_seconds" not in summary
        path = metrics.to_csv(tmp_path / "metrics.csv")
        assert path.read_text().splitlines()[0].startswith("variant,frames")

    def test_world_trajectory_ignores_the_planner(self, scenario, tiny_planner):
        worlds = {}
        for variant in ("sepso", "pso"):
            seen = []
            run_scenario(scenario, variant, planner_config=tiny_planner,
                         on_frame=lambda frame, world, record: seen.append(world))
            worlds[variant] = seen
        assert worlds["sepso"] == worlds["pso"]

    def test_deterministic(self, scenario, tiny_planner):
        a = run_scenario(scenario, "sepso", planner_config=tiny_planner)
        b = run_scenario(scenario, "sepso", planner_config=tiny_planner)
        assert [r.to_dict(False) for r in a.records] == [r.to_dict(False) for r in b.records]

    def test_frame_count_validation(self, scenario, tiny_planner):
        with pytest.raises(ValueError):
            run_scenario(scenario, "sepso", frames=0, planner_config=tiny_planner)

    def test_empty_metrics(self):
        metrics = SimMetrics(variant="sepso")
        assert metrics.frames == 0
        assert np.isnan(metrics.mean_path_length)


class TestFixedBudgetVariants:
    def test_noat_runs_exactly_the_fixed_budget(self, scenario, tiny_planner):
        metrics = run_scenario(scenario, "sepso-noat", planner_config=tiny_planner)
        assert metrics.mean_iterations == float(tiny_planner.fixed_iters_per_frame)
        assert metrics.truncated_fraction == 0.0


ACCEPTANCE_MODES = {
    "fresh": {"window_carryover": False},
    "carried": {"window_carryover": True},
}


@pytest.fixture(scope="module", params=sorted(ACCEPTANCE_MODES))
def acceptance_runs(request):
    """Hundred-frame runs on one seeded scenario, once per truncation-window mode"""
    scenario = ScenarioConfig(seed=0, frames=100)
    planner = PlannerConfig.from_settings(**ACCEPTANCE_MODES[request.param])
    runs = {variant: run_scenario(scenario, variant, planner_config=planner)
            for variant in ("sepso", "sepso-noat", "sepso-nopi")}
    return request.param, planner, runs


@pytest.mark.slow
def test_truncation_shortens_frames(acceptance_runs):
    mode, planner, runs = acceptance_runs
    with_at, without_at = runs["sepso"], runs["sepso-noat"]
    truncated = [r for r in with_at.records if r.truncated]
    assert truncated
    assert all(r.q == 0 for r in truncated)
    assert without_at.mean_iterations == float(planner.fixed_iters_per_frame)
    if mode == "carried":
        assert with_at.mean_iterations <= 0.6 * without_at.mean_iterations
    else:
        # a fresh window needs tw values before the first check
        assert all(r.iterations >= planner.tw for r in truncated)
        assert with_at.mean_iterations < planner.max_iters_per_frame


@pytest.mark.slow
def test_priori_initialization_helps(acceptance_runs):
    mode, _, runs = acceptance_runs
    with_pi, without_pi = runs["sepso"], runs["sepso-nopi"]
    assert with_pi.mean_path_length <= 1.02 * without_pi.mean_path_length
    if mode == "carried":
        assert with_pi.mean_iterations < without_pi.mean_iterations
    else:
        assert with_pi.mean_iterations <= without_pi.mean_iterations


@pytest.mark.slow
def test_planning_time_per_frame(acceptance_runs):
    _, _, runs = acceptance_runs
    assert runs["sepso"].mean_wall_seconds < 0.05


@pytest.mark.slow
def test_sepso_paths_are_shorter_than_pso():
    scenario = ScenarioConfig(seed=4, frames=20)
    planner = PlannerConfig.from_settings(particles_per_group=40)
    sepso = run_scenario(scenario, "sepso-noat", planner_config=planner)
    pso = run_scenario(scenario, "pso", planner_config=planner)
    assert sepso.mean_iterations == pso.mean_iterations
    assert sepso.mean_path_length < pso.mean_path_length
