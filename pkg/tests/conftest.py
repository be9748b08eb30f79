"""
Shared fixtures: small worlds, small swarms and throwaway output directories
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from swarmforge.benchmarks import get_benchmark
from swarmforge.core.planner import PlannerConfig
from swarmforge.core.swarm import HyperMatrix, SearchBounds
from swarmforge.geometry import Obstacle, Point2, PolygonWorld


@pytest.fixture
def table8():
    return HyperMatrix.preset("table8")


@pytest.fixture
def small_hypers():
    return HyperMatrix.from_rows([
        {"c1": 2, "c2": 1, "c3": 1, "omega_init": 0.4, "omega_end": 0.2, "v_limit": 0.2},
        {"c1": 1, "c2": 1, "c3": 2, "omega_init": 0.7, "omega_end": 0.3, "v_limit": 0.1},
        {"c1": 2, "c2": 2, "c3": 1, "omega_init": 0.8, "omega_end": 0.1, "v_limit": 0.6},
    ])


@pytest.fixture
def unit_box():
    return SearchBounds.box(-1.0, 1.0, 4)


@pytest.fixture
def sphere5():
    return get_benchmark("BF1", 5)


@pytest.fixture
def empty_world():
    return PolygonWorld(366.0, 366.0, Point2(20.0, 183.0), Point2(346.0, 183.0))


@pytest.fixture
def block_world():
    """Stand-in world: one 100x100 block, so a path through it and back makes four contacts"""
    return PolygonWorld(
        366.0, 366.0, Point2(50.0, 150.0), Point2(50.0, 170.0),
        obstacles=(Obstacle.rectangle(100.0, 100.0, 100.0, 100.0),),
    )


@pytest.fixture
def small_planner():
    return PlannerConfig(groups=2, particles_per_group=20, dimension=8, max_iters_per_frame=40,
                         fixed_iters_per_frame=15)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
