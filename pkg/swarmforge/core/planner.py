"""
Per-frame real-time path planning.

Each frame runs a swarm on the path fitness of a frozen world snapshot. Two
mechanisms cut latency: priori initialization seeds a fraction of every group
around the previous frame's best path, and auto truncation stops once the
recent best-fitness values have settled and the best path is collision-free.
"""

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from swarmforge.core.config import config
from swarmforge.core.runner import (
    ClassicSwarm,
    FitnessProblem,
    ParticleLoopSwarm,
    SwarmAlgorithm,
    TensorSwarm,
)
from swarmforge.core.swarm import (
    HyperMatrix,
    RngStream,
    SearchBounds,
    SwarmState,
    derive_seed,
    init_swarm,
)
from swarmforge.geometry import (
    Path,
    PolygonWorld,
    count_intersections_batch,
    decode_path,
    encode_path,
    path_fitness_batch,
    path_length_batch,
)


class PlannerConfig(BaseModel):
    """Penalty, PI and AT parameters plus swarm sizing for one planner"""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(30.0, ge=0)
    beta: float = Field(4.0, ge=1)
    gamma: float = Field(0.25, ge=0, le=1)
    delta: float = Field(10.0, gt=0)
    tw: int = Field(20, ge=2)
    pi_radius: float = Field(20.0, gt=0)
    max_iters_per_frame: int = Field(50, ge=1)
    fixed_iters_per_frame: int = Field(30, ge=1)
    window_carryover: bool = False
    groups: int = Field(8, ge=1)
    particles_per_group: int = Field(170, ge=1)
    dimension: int = Field(16, ge=2)
    use_pi: bool = True
    use_at: bool = True

    @field_validator("dimension")
    @classmethod
    def _even_dimension(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"dimension must be even (x and y per waypoint), got {value}")
        return value

    @classmethod
    def from_settings(cls, **overrides: Any) -> "PlannerConfig":
        values = dict(config.get_planner_config())
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def iteration_budget(self) -> int:
        return self.max_iters_per_frame if self.use_at else self.fixed_iters_per_frame


@dataclass(frozen=True)
class PathProblem(FitnessProblem):
    """Path length plus alpha * Q**beta over a frozen world"""

    world: PolygonWorld
    alpha: float = 30.0
    beta: float = 4.0
    dim: int = 16

    name = "path"

    @property
    def dimension(self) -> int:
        return self.dim

    @cached_property
    def bounds(self) -> SearchBounds:
        half = self.dim // 2
        hi = np.concatenate([np.full(half, self.world.width), np.full(half, self.world.height)])
        return SearchBounds(np.zeros(self.dim), hi)

    def evaluate(self, positions: np.ndarray) -> np.ndarray:
        return path_fitness_batch(positions, self.world, self.alpha, self.beta)

    def collisions(self, position: np.ndarray) -> int:
        return int(count_intersections_batch(position, self.world))


@dataclass(frozen=True)
class PlanRecord:
    """Outcome of planning one frame"""

    best_path: Path
    best_fitness: float
    path_length: float
    q: int
    iterations: int
    truncated: bool
    reason: str                  # converged | cap_reached | fixed_budget
    trace: Tuple[float, ...] = ()
    window: Tuple[float, ...] = ()
    wall_seconds: float = 0.0
    frame: int = 0

    @property
    def collision_free(self) -> bool:
        return self.q == 0

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        data = {
            "frame": self.frame,
            "best_path": self.best_path.to_list(),
            "best_fitness": self.best_fitness,
            "path_length": self.path_length,
            "q": self.q,
            "collision_free": self.collision_free,
            "iterations": self.iterations,
            "truncated": self.truncated,
            "reason": self.reason,
        }
        if include_timing:
            data["wall_seconds"] = self.wall_seconds
        return data


class AlgorithmKind(str, Enum):
    TENSOR = "tensor"
    LOOP = "loop"
    CLASSIC = "classic"


@dataclass(frozen=True)
class VariantSpec:
    algorithm: AlgorithmKind
    hypers_preset: str
    use_pi: bool
    use_at: bool
    evolved: bool = False


VARIANTS: Dict[str, VariantSpec] = {
    "sepso": VariantSpec(AlgorithmKind.TENSOR, "path_evolved", True, True, evolved=True),
    "sepso-noat": VariantSpec(AlgorithmKind.TENSOR, "path_evolved", True, False, evolved=True),
    "sepso-nopi": VariantSpec(AlgorithmKind.TENSOR, "path_evolved", False, True, evolved=True),
    "dtpso": VariantSpec(AlgorithmKind.TENSOR, "table8", True, False),
    "dppso": VariantSpec(AlgorithmKind.LOOP, "table8", True, False),
    "pso": VariantSpec(AlgorithmKind.CLASSIC, "pso", True, False),
}


def get_variant(name: str) -> VariantSpec:
    key = name.lower()
    if key not in VARIANTS:
        raise KeyError(f"Unknown planner variant '{name}', known: {sorted(VARIANTS)}")
    return VARIANTS[key]


def build_algorithm(kind: AlgorithmKind, problem: FitnessProblem, hypers: HyperMatrix,
                    planner_config: PlannerConfig) -> SwarmAlgorithm:
    G, N = planner_config.groups, planner_config.particles_per_group
    if kind == AlgorithmKind.TENSOR:
        return TensorSwarm(problem, hypers, G, N)
    if kind == AlgorithmKind.LOOP:
        return ParticleLoopSwarm(problem, hypers, G, N)
    return ClassicSwarm(problem, G * N, hypers)


def priori_init(prev_best: Optional[Path], planner_config: PlannerConfig, bounds: SearchBounds,
                rng: RngStream, hypers: HyperMatrix, groups: Optional[int] = None,
                particles: Optional[int] = None, pi_rng: Optional[RngStream] = None) -> SwarmState:
    """Initial swarm with floor(gamma * N) particles per group near the previous best path.

    The first frame (no previous path) and gamma = 0 give plain uniform
    initialisation. Velocities are always drawn fresh.
    """
    G = groups if groups is not None else planner_config.groups
    N = particles if particles is not None else planner_config.particles_per_group
    D = bounds.dimension
    state = init_swarm(hypers, bounds, G, N, D, rng)
    if prev_best is None:
        return state
    if 2 * len(prev_best) != D:
        raise ValueError(f"Previous path has {len(prev_best)} waypoints, swarm expects {D // 2}")

    n_prior = int(math.floor(planner_config.gamma * N))
    if n_prior == 0:
        return state

    centre = encode_path(prev_best)
    lo = np.maximum(centre - planner_config.pi_radius, bounds.lo)
    hi = np.minimum(centre + planner_config.pi_radius, bounds.hi)
    draws = (pi_rng or rng).uniform((G, n_prior, D))
    x = state.x.copy()
    x[:, :n_prior, :] = lo + (hi - lo) * draws
    return SwarmState.from_positions(x, state.v)


def should_truncate(lfv_window: Sequence[float], best_is_collision_free: bool,
                    planner_config: PlannerConfig) -> bool:
    """Population std of the last TW best values below delta, and no collision"""
    values = list(lfv_window)
    if len(values) < planner_config.tw:
        return False
    recent = np.asarray(values[-planner_config.tw:], dtype=np.float64)
    return bool(np.std(recent) < planner_config.delta and best_is_collision_free)


def plan_frame(world: PolygonWorld, prev_best: Optional[Path], hypers: HyperMatrix,
               planner_config: PlannerConfig, seed: int,
               algorithm: AlgorithmKind = AlgorithmKind.TENSOR,
               carry_window: Iterable[float] = ()) -> PlanRecord:
    """Plan one frame on a frozen world snapshot"""
    started = time.perf_counter()
    problem = PathProblem(world, planner_config.alpha, planner_config.beta, planner_config.dimension)
    swarm = build_algorithm(algorithm, problem, hypers, planner_config)
    rng = RngStream(derive_seed(seed, "swarm"))
    pi_rng = RngStream(derive_seed(seed, "pi"))

    state = priori_init(
        prev_best if planner_config.use_pi else None,
        planner_config,
        problem.bounds,
        rng,
        hypers,
        groups=swarm.groups,
        particles=swarm.particles,
        pi_rng=pi_rng,
    )

    budget = planner_config.iteration_budget
    window = deque(carry_window if planner_config.window_carryover else (), maxlen=planner_config.tw)
    trace = []
    truncated = False
    iterations = 0
    checked_f, collision_free = None, False
    for k in range(1, budget + 1):
        state = swarm.evaluate(state)
        iterations = k
        trace.append(state.tbest_f)
        window.append(state.tbest_f)
        if planner_config.use_at:
            # tbest_x only moves when tbest_f strictly improves
            if state.tbest_f != checked_f:
                checked_f = state.tbest_f
                collision_free = problem.collisions(state.tbest_x) == 0
            if should_truncate(window, collision_free, planner_config):
                truncated = True
                break
        if k < budget:
            state = swarm.advance(state, rng, k - 1, budget)

    best_x = state.tbest_x
    q = problem.collisions(best_x)
    if truncated:
        reason = "converged"
    elif planner_config.use_at:
        reason = "cap_reached"
    else:
        reason = "fixed_budget"

    record = PlanRecord(
        best_path=decode_path(best_x),
        best_fitness=float(state.tbest_f),
        path_length=float(path_length_batch(best_x, world)),
        q=q,
        iterations=iterations,
        truncated=truncated,
        reason=reason,
        trace=tuple(float(f) for f in trace),
        window=tuple(float(f) for f in window),
        wall_seconds=time.perf_counter() - started,
    )
    if q > 0:
        logging.warning(f"No collision-free path this frame: Q={q} after {iterations} iterations ({reason})")
    logging.debug(f"Planned frame in {record.wall_seconds * 1000:.1f} ms, {iterations} iterations, "
                  f"length {record.path_length:.1f}, Q={q}")
    return record
