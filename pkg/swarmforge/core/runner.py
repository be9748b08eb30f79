"""
Outer optimisation loop: evaluate, update bests, advance, record.

Three algorithms share one iteration protocol (initialize / evaluate /
advance) so that benchmark runs, the hyper-parameter evolution and the
per-frame planner can drive any of them:

- TensorSwarm:        grouped swarm advanced with batched tensor arithmetic
- ParticleLoopSwarm:  the same grouped update written particle by particle
- ClassicSwarm:       single-swarm PSO baseline, particle by particle
"""

import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from swarmforge.core.errors import NonFiniteFitnessError, ShapeMismatchError
from swarmforge.core.swarm import (
    HyperMatrix,
    RngStream,
    SearchBounds,
    SwarmState,
    inertia_at,
    init_swarm,
    step,
)


class FitnessProblem(ABC):
    """Minimisation problem over a box; evaluate is pure and batched"""

    name: str = "problem"

    @property
    @abstractmethod
    def dimension(self) -> int:
        ...

    @property
    @abstractmethod
    def bounds(self) -> SearchBounds:
        ...

    @abstractmethod
    def evaluate(self, positions: np.ndarray) -> np.ndarray:
        """Map a (..., D) position tensor to a (...) fitness tensor"""

    def evaluate_particle(self, position: np.ndarray) -> float:
        return float(self.evaluate(position[None, :])[0])


@dataclass(frozen=True)
class RunReport:
    """Outcome of one optimisation run; immutable once built"""

    algorithm: str
    problem: str
    seed: int
    iterations: int
    evaluations: int
    trace: Tuple[float, ...]
    best_x: Tuple[float, ...]
    best_f: float
    wall_seconds: float = 0.0

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        data = {
            "algorithm": self.algorithm,
            "problem": self.problem,
            "seed": self.seed,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "trace": list(self.trace),
            "final_point": list(self.best_x),
            "final_fitness": self.best_f,
        }
        if include_timing:
            data["wall_seconds"] = self.wall_seconds
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunReport":
        return cls(
            algorithm=data["algorithm"],
            problem=data["problem"],
            seed=int(data["seed"]),
            iterations=int(data["iterations"]),
            evaluations=int(data["evaluations"]),
            trace=tuple(float(v) for v in data["trace"]),
            best_x=tuple(float(v) for v in data["final_point"]),
            best_f=float(data["final_fitness"]),
            wall_seconds=float(data.get("wall_seconds", 0.0)),
        )


def check_fitness(fitness: np.ndarray, problem_name: Optional[str] = None):
    finite = np.isfinite(fitness)
    if not np.all(finite):
        index = tuple(np.argwhere(~finite)[0])
        raise NonFiniteFitnessError(index, float(fitness[index]), problem_name)


def update_bests(state: SwarmState, fitness: np.ndarray) -> SwarmState:
    """Install strictly better personal, group and population bests"""
    G, N, D = state.x.shape
    if fitness.shape != (G, N):
        raise ShapeMismatchError(f"Fitness must be ({G}, {N}), got {fitness.shape}")

    improved = fitness < state.pbest_f
    pbest_f = np.where(improved, fitness, state.pbest_f)
    pbest_x = np.where(improved[..., None], state.x, state.pbest_x)

    leader = np.argmin(pbest_f, axis=1)
    leader_f = pbest_f[np.arange(G), leader]
    group_better = leader_f < state.gbest_f
    gbest_f = np.where(group_better, leader_f, state.gbest_f)
    gbest_x = np.where(group_better[:, None], pbest_x[np.arange(G), leader], state.gbest_x)

    best_group = int(np.argmin(gbest_f))
    if gbest_f[best_group] < state.tbest_f:
        tbest_f = float(gbest_f[best_group])
        tbest_x = gbest_x[best_group].copy()
    else:
        tbest_f = state.tbest_f
        tbest_x = state.tbest_x.copy()

    return replace(state, pbest_x=pbest_x, pbest_f=pbest_f, gbest_x=gbest_x,
                   gbest_f=gbest_f, tbest_x=tbest_x, tbest_f=tbest_f)


class SwarmAlgorithm(ABC):
    """Iteration protocol shared by the runner and the planner"""

    name = "swarm"

    def __init__(self, problem: FitnessProblem, hypers: HyperMatrix, groups: int, particles: int,
                 dtype: Any = np.float64):
        if hypers.groups != groups:
            raise ShapeMismatchError(f"Hyper matrix has {hypers.groups} groups, expected {groups}")
        self.problem = problem
        self.hypers = hypers
        self.groups = groups
        self.particles = particles
        self.dtype = np.dtype(dtype)
        self.evaluations = 0

    @property
    def population(self) -> int:
        return self.groups * self.particles

    def initialize(self, rng: RngStream) -> SwarmState:
        return init_swarm(self.hypers, self.problem.bounds, self.groups, self.particles,
                          self.problem.dimension, rng, self.dtype)

    @abstractmethod
    def evaluate(self, state: SwarmState) -> SwarmState:
        """Score current positions and update every level of best memory"""

    @abstractmethod
    def advance(self, state: SwarmState, rng: RngStream, k: int, T: int) -> SwarmState:
        """Velocity and position update for iteration k of T"""


class TensorSwarm(SwarmAlgorithm):
    name = "dtpso"

    def evaluate(self, state: SwarmState) -> SwarmState:
        fitness = self.problem.evaluate(state.x)
        check_fitness(fitness, self.problem.name)
        self.evaluations += fitness.size
        return update_bests(state, fitness)

    def advance(self, state: SwarmState, rng: RngStream, k: int, T: int) -> SwarmState:
        new_state = step(state, self.hypers, self.problem.bounds, rng, k, T)
        new_state.k = k
        return new_state


class ParticleLoopSwarm(SwarmAlgorithm):
    """Grouped update one particle at a time; reference for TensorSwarm"""

    name = "dppso"
    coefficient_count = 3

    def evaluate(self, state: SwarmState) -> SwarmState:
        state = state.copy()
        G, N, _ = state.x.shape
        for g in range(G):
            for n in range(N):
                f = self.problem.evaluate_particle(state.x[g, n])
                self.evaluations += 1
                if not np.isfinite(f):
                    raise NonFiniteFitnessError((g, n), f, self.problem.name)
                if f < state.pbest_f[g, n]:
                    state.pbest_f[g, n] = f
                    state.pbest_x[g, n] = state.x[g, n]
                    if f < state.gbest_f[g]:
                        state.gbest_f[g] = f
                        state.gbest_x[g] = state.x[g, n]
        for g in range(G):
            if state.gbest_f[g] < state.tbest_f:
                state.tbest_f = float(state.gbest_f[g])
                state.tbest_x = state.gbest_x[g].copy()
        return state

    def _velocity(self, state: SwarmState, g: int, n: int, w: float,
                  coefficients: Tuple[np.ndarray, ...]) -> np.ndarray:
        r1, r2, r3 = coefficients
        c1, c2, c3 = self.hypers.c1[g], self.hypers.c2[g], self.hypers.c3[g]
        x = state.x[g, n]
        return (w * state.v[g, n]
                + (c1 * r1[g, n]) * (state.pbest_x[g, n] - x)
                + (c2 * r2[g, n]) * (state.gbest_x[g] - x)
                + (c3 * r3[g, n]) * (state.tbest_x - x))

    def advance(self, state: SwarmState, rng: RngStream, k: int, T: int) -> SwarmState:
        state = state.copy()
        G, N, _ = state.x.shape
        bounds = self.problem.bounds
        v_lo, v_hi = bounds.velocity_bounds(self.hypers)
        omega = inertia_at(self.hypers, k, T)
        coefficients = rng.coefficients(G, N, self.coefficient_count)
        for g in range(G):
            w = omega[g]
            for n in range(N):
                v = self._velocity(state, g, n, w, coefficients)
                v = np.minimum(np.maximum(v, v_lo[g]), v_hi[g])
                state.v[g, n] = v
                state.x[g, n] = np.minimum(np.maximum(state.x[g, n] + v, bounds.lo), bounds.hi)
        state.k = k
        return state


class ClassicSwarm(ParticleLoopSwarm):
    """Single-swarm PSO: one group, Gbest is the population best, no third term"""

    name = "pso"
    coefficient_count = 2

    def __init__(self, problem: FitnessProblem, particles: int, hypers: Optional[HyperMatrix] = None):
        super().__init__(problem, hypers or HyperMatrix.preset("pso"), 1, particles)

    def _velocity(self, state: SwarmState, g: int, n: int, w: float,
                  coefficients: Tuple[np.ndarray, ...]) -> np.ndarray:
        r1, r2 = coefficients
        c1, c2 = self.hypers.c1[g], self.hypers.c2[g]
        x = state.x[g, n]
        return (w * state.v[g, n]
                + (c1 * r1[g, n]) * (state.pbest_x[g, n] - x)
                + (c2 * r2[g, n]) * (state.gbest_x[g] - x))


def run_algorithm(algorithm: SwarmAlgorithm, T: int, seed: int,
                  initial_state: Optional[SwarmState] = None) -> RunReport:
    """T rounds of evaluate -> update bests, with an inertia -> velocity -> position move
    between consecutive rounds; the first move uses omega_init"""
    if T < 1:
        raise ValueError(f"Iteration count must be >= 1, got {T}")
    if algorithm.problem.bounds.dimension != algorithm.problem.dimension:
        raise ShapeMismatchError("Problem bounds do not match its dimension")

    rng = RngStream(seed)
    started = time.perf_counter()
    state = initial_state if initial_state is not None else algorithm.initialize(rng)
    trace = []
    for k in range(1, T + 1):
        state = algorithm.evaluate(state)
        trace.append(state.tbest_f)
        if k < T:
            state = algorithm.advance(state, rng, k - 1, T)
    elapsed = time.perf_counter() - started

    logging.debug(f"{algorithm.name} on {algorithm.problem.name}: best {state.tbest_f:.6g} "
                  f"after {T} iterations in {elapsed:.3f}s")
    return RunReport(
        algorithm=algorithm.name,
        problem=algorithm.problem.name,
        seed=int(seed),
        iterations=T,
        evaluations=algorithm.population * T,
        trace=tuple(float(f) for f in trace),
        best_x=tuple(float(v) for v in state.tbest_x),
        best_f=float(state.tbest_f),
        wall_seconds=elapsed,
    )


def run_dtpso(problem: FitnessProblem, hypers: HyperMatrix, G: int, N: int, T: int, seed: int) -> RunReport:
    return run_algorithm(TensorSwarm(problem, hypers, G, N), T, seed)


def run_dppso_reference(problem: FitnessProblem, hypers: HyperMatrix, G: int, N: int, T: int,
                        seed: int) -> RunReport:
    return run_algorithm(ParticleLoopSwarm(problem, hypers, G, N), T, seed)


def run_pso_reference(problem: FitnessProblem, T: int, M: int, seed: int,
                      hypers: Optional[HyperMatrix] = None) -> RunReport:
    return run_algorithm(ClassicSwarm(problem, M, hypers), T, seed)
