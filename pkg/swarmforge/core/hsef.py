"""
Hierarchical self-evolution of swarm hyper-parameters.

An outer grouped swarm searches the space of flattened (G, 6) hyper matrices.
Each outer particle is scored by running a complete inner swarm with the
decoded matrix and taking its lowest fitness value (LFV). The outer swarm
always runs with fixed hyper-parameters.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from swarmforge.core.config import config
from swarmforge.core.errors import (
    HyperEncodingError,
    InvalidHyperParametersError,
    MissingHypersError,
    NonFiniteFitnessError,
    ShapeMismatchError,
)
from swarmforge.core.runner import FitnessProblem, run_dtpso, update_bests
from swarmforge.core.swarm import (
    HYPER_FIELDS,
    HyperMatrix,
    RngStream,
    SearchBounds,
    derive_seed,
    init_swarm,
    step,
)

# Per-field outer search box, in HYPER_FIELDS order
OUTER_LOWER = np.array([0.5, 0.5, 0.5, 0.1, 0.05, 0.05])
OUTER_UPPER = np.array([2.5, 2.5, 2.5, 1.0, 0.8, 1.0])

EVOLVE_HINT = "python -m swarmforge evolve --problem <id|path> --out <dir>"


@dataclass(frozen=True)
class InnerBudget:
    groups: int
    particles: int
    iterations: int

    def __post_init__(self):
        if min(self.groups, self.particles, self.iterations) < 1:
            raise ValueError(f"Inner budget must be >= 1 everywhere, got {self}")

    @property
    def evaluations(self) -> int:
        return self.groups * self.particles * self.iterations

    @classmethod
    def from_settings(cls) -> "InnerBudget":
        hsef = config.get_hsef_config()
        return cls(hsef["inner_groups"], hsef["inner_particles"], hsef["inner_iterations"])


@dataclass(frozen=True)
class OuterBudget:
    groups: int
    particles: int
    evolutions: int

    def __post_init__(self):
        if min(self.groups, self.particles, self.evolutions) < 1:
            raise ValueError(f"Outer budget must be >= 1 everywhere, got {self}")

    @classmethod
    def from_settings(cls) -> "OuterBudget":
        hsef = config.get_hsef_config()
        return cls(hsef["outer_groups"], hsef["outer_particles"], hsef["evolutions"])


class HyperEncoding:
    """Flat 6*G particle <-> (G, 6) hyper matrix"""

    def __init__(self, groups: int):
        if groups < 1:
            raise ValueError(f"groups must be >= 1, got {groups}")
        self.groups = groups

    @property
    def dimension(self) -> int:
        return len(HYPER_FIELDS) * self.groups

    def bounds(self) -> SearchBounds:
        return SearchBounds(np.tile(OUTER_LOWER, self.groups), np.tile(OUTER_UPPER, self.groups))

    def flatten(self, hypers: HyperMatrix) -> np.ndarray:
        if hypers.groups != self.groups:
            raise ShapeMismatchError(f"Expected {self.groups} groups, got {hypers.groups}")
        return hypers.values.reshape(-1).copy()

    def unflatten(self, particle: Sequence[float]) -> HyperMatrix:
        """Decode a particle; omega_end > omega_init is repaired by swapping the pair"""
        values = np.array(particle, dtype=np.float64)
        if values.shape != (self.dimension,):
            raise HyperEncodingError(f"Particle must have {self.dimension} entries, got {values.shape}")
        rows = values.reshape(self.groups, len(HYPER_FIELDS))
        swap = rows[:, 4] > rows[:, 3]
        if np.any(swap):
            logging.debug(f"Swapping inertia endpoints for groups {np.flatnonzero(swap).tolist()}")
            rows[swap, 3], rows[swap, 4] = rows[swap, 4], rows[swap, 3]
        try:
            return HyperMatrix(rows)
        except InvalidHyperParametersError as e:
            raise HyperEncodingError(f"Particle does not decode to valid hyper-parameters: {e}") from e


def lfv_fitness(candidate: Sequence[float], problem: FitnessProblem, inner_budget: InnerBudget,
                seed: int) -> float:
    """Lowest fitness reached by one full inner run with the decoded hypers.

    Candidates that fail to decode or whose inner run produces a non-finite
    fitness score +inf instead of raising.
    """
    encoding = HyperEncoding(inner_budget.groups)
    try:
        hypers = encoding.unflatten(candidate)
    except HyperEncodingError as e:
        logging.warning(f"Discarding outer candidate: {e}")
        return float("inf")

    try:
        report = run_dtpso(problem, hypers, inner_budget.groups, inner_budget.particles,
                           inner_budget.iterations, seed)
    except NonFiniteFitnessError as e:
        logging.warning(f"Inner run failed, candidate scored +inf: {e}")
        return float("inf")
    return report.best_f


def _lfv_task(task: Tuple[np.ndarray, FitnessProblem, InnerBudget, int]) -> float:
    return lfv_fitness(*task)


@dataclass(frozen=True)
class EvolutionReport:
    """Outcome of an outer evolution run"""

    problem: str
    best_hypers: HyperMatrix
    best_lfv: float
    best_trace: Tuple[float, ...]          # best-so-far LFV after each evolution
    evolution_trace: Tuple[float, ...]     # best LFV found within each evolution
    outer_budget: OuterBudget
    inner_budget: InnerBudget
    root_seed: int
    inner_evaluations: int
    wall_seconds: float = 0.0

    @property
    def evolutions(self) -> int:
        return len(self.best_trace)

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        data = {
            "problem": self.problem,
            "evolutions": self.evolutions,
            "root_seed": self.root_seed,
            "outer_budget": vars(self.outer_budget).copy(),
            "inner_budget": vars(self.inner_budget).copy(),
            "inner_evaluations": self.inner_evaluations,
            "best_lfv": self.best_lfv,
            "best_trace": list(self.best_trace),
            "evolution_trace": list(self.evolution_trace),
            "best_hypers": self.best_hypers.to_rows(),
        }
        if include_timing:
            data["wall_seconds"] = self.wall_seconds
        return data


def _outer_default_hypers(groups: int) -> HyperMatrix:
    base = HyperMatrix.preset("table8").values
    return HyperMatrix(base[np.arange(groups) % base.shape[0]])


def evolve(problem: FitnessProblem, outer_hypers: Optional[HyperMatrix] = None,
           outer_budget: Optional[OuterBudget] = None, inner_budget: Optional[InnerBudget] = None,
           root_seed: int = 0, jobs: int = 1) -> EvolutionReport:
    """Run the outer swarm for ``outer_budget.evolutions`` iterations over hyper-space.

    Inner evaluation (e, g, n) uses ``derive_seed(root_seed, "inner", e, g, n)``,
    so results do not depend on ``jobs``.
    """
    outer_budget = outer_budget or OuterBudget.from_settings()
    inner_budget = inner_budget or InnerBudget.from_settings()
    if outer_hypers is None:
        outer_hypers = _outer_default_hypers(outer_budget.groups)
    if outer_hypers.groups != outer_budget.groups:
        raise ShapeMismatchError(
            f"Outer hyper matrix has {outer_hypers.groups} groups, outer budget asks for {outer_budget.groups}"
        )

    Gh, Nh, E = outer_budget.groups, outer_budget.particles, outer_budget.evolutions
    encoding = HyperEncoding(inner_budget.groups)
    bounds = encoding.bounds()
    rng = RngStream(derive_seed(root_seed, "outer"))
    state = init_swarm(outer_hypers, bounds, Gh, Nh, encoding.dimension, rng)

    logging.info(f"Evolving {inner_budget.groups}-group hypers on {problem.name}: "
                 f"{Gh}x{Nh} outer particles, {E} evolutions, inner {inner_budget.groups}x"
                 f"{inner_budget.particles}x{inner_budget.iterations}, jobs={jobs}")

    started = time.perf_counter()
    best_trace: List[float] = []
    evolution_trace: List[float] = []
    inner_evaluations = 0
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for e in range(1, E + 1):
            tasks = [
                (state.x[g, n].copy(), problem, inner_budget, derive_seed(root_seed, "inner", e, g, n))
                for g in range(Gh)
                for n in range(Nh)
            ]
            if pool is not None:
                scores = list(pool.map(_lfv_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
            else:
                scores = [_lfv_task(task) for task in tasks]
            fitness = np.array(scores, dtype=np.float64).reshape(Gh, Nh)
            inner_evaluations += int(np.isfinite(fitness).sum()) * inner_budget.evaluations

            state = update_bests(state, fitness)
            evolution_trace.append(float(fitness.min()))
            best_trace.append(float(state.tbest_f))
            logging.info(f"Evolution {e}/{E}: best LFV this evolution {evolution_trace[-1]:.6g}, "
                         f"best so far {best_trace[-1]:.6g}")
            if e < E:
                state = step(state, outer_hypers, bounds, rng, e - 1, E)
    finally:
        if pool is not None:
            pool.shutdown()

    if not np.isfinite(state.tbest_f):
        logging.warning("No outer candidate produced a finite LFV")

    return EvolutionReport(
        problem=problem.name,
        best_hypers=encoding.unflatten(state.tbest_x),
        best_lfv=float(state.tbest_f),
        best_trace=tuple(best_trace),
        evolution_trace=tuple(evolution_trace),
        outer_budget=outer_budget,
        inner_budget=inner_budget,
        root_seed=int(root_seed),
        inner_evaluations=inner_evaluations,
        wall_seconds=time.perf_counter() - started,
    )


class HyperRow(BaseModel):
    c1: float = Field(ge=0)
    c2: float = Field(ge=0)
    c3: float = Field(ge=0)
    omega_init: float = Field(ge=0, le=1)
    omega_end: float = Field(ge=0, le=1)
    v_limit: float = Field(gt=0, le=1)


class HypersProvenance(BaseModel):
    problem: str
    root_seed: int
    evolutions: int
    outer_budget: Dict[str, int]
    inner_budget: Dict[str, int]
    best_lfv: Optional[float] = None
    tool_version: str = ""
    created_at: Optional[str] = None


class HypersDocument(BaseModel):
    """Persisted hyper matrix: G named rows plus where they came from"""

    groups: List[HyperRow]
    provenance: Optional[HypersProvenance] = None

    def to_hypers(self) -> HyperMatrix:
        return HyperMatrix.from_rows([row.model_dump() for row in self.groups])

    @classmethod
    def from_report(cls, report: EvolutionReport, stamp: bool = False) -> "HypersDocument":
        from swarmforge import __version__

        provenance = HypersProvenance(
            problem=report.problem,
            root_seed=report.root_seed,
            evolutions=report.evolutions,
            outer_budget=vars(report.outer_budget).copy(),
            inner_budget=vars(report.inner_budget).copy(),
            best_lfv=report.best_lfv if np.isfinite(report.best_lfv) else None,
            tool_version=__version__,
            created_at=datetime.now(timezone.utc).isoformat() if stamp else None,
        )
        return cls(groups=[HyperRow(**row) for row in report.best_hypers.to_rows()], provenance=provenance)


def save_hypers(document: Union[HypersDocument, HyperMatrix], path: Union[str, Path]) -> Path:
    if isinstance(document, HyperMatrix):
        document = HypersDocument(groups=[HyperRow(**row) for row in document.to_rows()])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.model_dump_json(indent=2) + "\n")
    logging.info(f"Saved {len(document.groups)}-group hyper matrix to {path}")
    return path


def load_hypers(path: Union[str, Path]) -> HyperMatrix:
    path = Path(path)
    if not path.exists():
        raise MissingHypersError(f"Hyper-parameter file not found: {path}. Produce one with `{EVOLVE_HINT}`")
    try:
        document = HypersDocument.model_validate(json.loads(path.read_text()))
    except (json.JSONDecodeError, ValidationError) as e:
        raise InvalidHyperParametersError(f"Malformed hyper-parameter file {path}: {e}") from e
    return document.to_hypers()
