"""
Standard test functions as batch-evaluable fitness problems.

Every function maps a (..., D) array to a (...) array and is total; non-finite
inputs simply propagate.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Tuple

import numpy as np

from swarmforge.core.runner import FitnessProblem
from swarmforge.core.swarm import SearchBounds


def sphere(x: np.ndarray) -> np.ndarray:
    return np.sum(x ** 2, axis=-1)


def rosenbrock(x: np.ndarray) -> np.ndarray:
    head, tail = x[..., :-1], x[..., 1:]
    return np.sum(100.0 * (tail - head ** 2) ** 2 + (1.0 - head) ** 2, axis=-1)


def rastrigin(x: np.ndarray) -> np.ndarray:
    # A = 10
    return np.sum(x ** 2 + 10.0 * (1.0 - np.cos(2.0 * np.pi * x)), axis=-1)


def griewank(x: np.ndarray) -> np.ndarray:
    i = np.arange(1, x.shape[-1] + 1)
    return 1.0 + np.sum(x ** 2, axis=-1) / 4000.0 - np.prod(np.cos(x / np.sqrt(i)), axis=-1)


@dataclass(frozen=True)
class BenchmarkSpec:
    id: str
    name: str
    function: Callable[[np.ndarray], np.ndarray]
    modality: str
    minimizer: float        # every coordinate of the canonical argmin
    minimum: float = 0.0


BENCHMARK_SPECS: Dict[str, BenchmarkSpec] = {
    "BF1": BenchmarkSpec("BF1", "sphere", sphere, "unimodal", 0.0),
    "BF2": BenchmarkSpec("BF2", "rosenbrock", rosenbrock, "unimodal", 1.0),
    "BF3": BenchmarkSpec("BF3", "rastrigin", rastrigin, "multimodal", 0.0),
    "BF4": BenchmarkSpec("BF4", "griewank", griewank, "multimodal", 0.0),
}


@dataclass(frozen=True)
class BenchmarkProblem(FitnessProblem):
    spec: BenchmarkSpec
    dim: int = 30
    x_range: Tuple[float, float] = (-600.0, 600.0)

    @property
    def name(self) -> str:
        return self.spec.id

    @property
    def dimension(self) -> int:
        return self.dim

    @cached_property
    def bounds(self) -> SearchBounds:
        return SearchBounds.box(self.x_range[0], self.x_range[1], self.dim)

    def evaluate(self, positions: np.ndarray) -> np.ndarray:
        return self.spec.function(positions)

    def argmin(self) -> np.ndarray:
        return np.full(self.dim, self.spec.minimizer)


def get_benchmark(benchmark_id: str, dimension: int = 30) -> BenchmarkProblem:
    """Registry lookup by id ("BF1".."BF4") or by function name"""
    key = benchmark_id.upper()
    if key not in BENCHMARK_SPECS:
        by_name = {spec.name: spec for spec in BENCHMARK_SPECS.values()}
        if benchmark_id.lower() not in by_name:
            raise KeyError(f"Unknown benchmark '{benchmark_id}', known: {sorted(BENCHMARK_SPECS)}")
        key = by_name[benchmark_id.lower()].id
    return BenchmarkProblem(BENCHMARK_SPECS[key], dimension)
