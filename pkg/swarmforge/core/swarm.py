"""
Batched swarm kinematics in tensor operation form.

A population is G groups of N particles in D dimensions. Every group carries
its own row of behavioural hyper-parameters; one call to ``step`` advances the
whole population with broadcast arithmetic instead of a per-particle loop.
Nothing here knows what the fitness means.
"""

import logging
import zlib
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from swarmforge.core.config import PRESETS_PATH
from swarmforge.core.errors import InvalidHyperParametersError, ShapeMismatchError

HYPER_FIELDS = ("c1", "c2", "c3", "omega_init", "omega_end", "v_limit")


@dataclass(frozen=True)
class HyperMatrix:
    """Per-group hyper-parameters, one row of HYPER_FIELDS per group (shape (G, 6))"""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1 and values.size == len(HYPER_FIELDS):
            values = values.reshape(1, -1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        self.validate()

    def validate(self):
        v = self.values
        if v.ndim != 2 or v.shape[1] != len(HYPER_FIELDS) or v.shape[0] < 1:
            raise InvalidHyperParametersError(f"Hyper matrix must have shape (G, 6), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidHyperParametersError("Hyper matrix contains non-finite entries")
        if np.any(v[:, 0:3] < 0):
            raise InvalidHyperParametersError("Acceleration constants must be non-negative")
        if np.any(v[:, 4] < 0) or np.any(v[:, 4] > v[:, 3]) or np.any(v[:, 3] > 1):
            raise InvalidHyperParametersError("Inertia endpoints must satisfy 0 <= omega_end <= omega_init <= 1")
        if np.any(v[:, 5] <= 0) or np.any(v[:, 5] > 1):
            raise InvalidHyperParametersError("v_limit must lie in (0, 1]")

    @property
    def groups(self) -> int:
        return self.values.shape[0]

    @property
    def c1(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def c2(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def c3(self) -> np.ndarray:
        return self.values[:, 2]

    @property
    def omega_init(self) -> np.ndarray:
        return self.values[:, 3]

    @property
    def omega_end(self) -> np.ndarray:
        return self.values[:, 4]

    @property
    def v_limit(self) -> np.ndarray:
        return self.values[:, 5]

    def to_rows(self) -> List[Dict[str, float]]:
        return [dict(zip(HYPER_FIELDS, map(float, row))) for row in self.values]

    @classmethod
    def from_rows(cls, rows: Sequence[Dict[str, float]]) -> "HyperMatrix":
        try:
            return cls(np.array([[float(row[name]) for name in HYPER_FIELDS] for row in rows]))
        except KeyError as e:
            raise InvalidHyperParametersError(f"Hyper row is missing field {e}") from e

    @classmethod
    def uniform(cls, groups: int, **row: float) -> "HyperMatrix":
        """Same row repeated for every group"""
        return cls.from_rows([row] * groups)

    @classmethod
    def preset(cls, name: str) -> "HyperMatrix":
        presets = _load_presets()
        if name not in presets:
            raise InvalidHyperParametersError(f"Unknown hyper preset '{name}', known: {sorted(presets)}")
        return cls.from_rows(presets[name]["groups"])

    def __eq__(self, other) -> bool:
        return isinstance(other, HyperMatrix) and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())


@lru_cache(maxsize=1)
def _load_presets() -> Dict[str, dict]:
    with open(PRESETS_PATH, "r") as f:
        data = yaml.safe_load(f) or {}
    presets = data.get("presets", {})
    logging.debug(f"Loaded {len(presets)} hyper presets from {PRESETS_PATH}")
    return presets


@dataclass(frozen=True)
class SearchBounds:
    """Per-dimension position box [lo, hi]"""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=np.float64).reshape(-1)
        hi = np.array(self.hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ShapeMismatchError(f"Bound vectors differ in length: {lo.shape} vs {hi.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("Search bounds must be finite")
        if np.any(lo >= hi):
            raise ValueError("Every dimension needs x_lo < x_hi")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def box(cls, lo: float, hi: float, dimension: int) -> "SearchBounds":
        return cls(np.full(dimension, float(lo)), np.full(dimension, float(hi)))

    @property
    def dimension(self) -> int:
        return self.lo.shape[0]

    @property
    def span(self) -> np.ndarray:
        return self.hi - self.lo

    def velocity_bounds(self, hypers: HyperMatrix) -> Tuple[np.ndarray, np.ndarray]:
        """(G, D) arrays v_lo, v_hi = -/+ v_limit_g * span_d"""
        v_hi = hypers.v_limit[:, None] * self.span[None, :]
        return -v_hi, v_hi


@dataclass
class SwarmState:
    """Positions, velocities and the three levels of best-so-far memory"""

    x: np.ndarray          # (G, N, D)
    v: np.ndarray          # (G, N, D)
    pbest_x: np.ndarray    # (G, N, D)
    pbest_f: np.ndarray    # (G, N)
    gbest_x: np.ndarray    # (G, D)
    gbest_f: np.ndarray    # (G,)
    tbest_x: np.ndarray    # (D,)
    tbest_f: float
    k: int = 0

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.x.shape

    def copy(self) -> "SwarmState":
        return SwarmState(
            x=self.x.copy(),
            v=self.v.copy(),
            pbest_x=self.pbest_x.copy(),
            pbest_f=self.pbest_f.copy(),
            gbest_x=self.gbest_x.copy(),
            gbest_f=self.gbest_f.copy(),
            tbest_x=self.tbest_x.copy(),
            tbest_f=float(self.tbest_f),
            k=self.k,
        )

    @classmethod
    def from_positions(cls, x: np.ndarray, v: np.ndarray) -> "SwarmState":
        """Fresh state with empty best memory (+inf sentinels)"""
        G, N, D = x.shape
        return cls(
            x=x,
            v=v,
            pbest_x=x.copy(),
            pbest_f=np.full((G, N), np.inf),
            gbest_x=x[:, 0, :].copy(),
            gbest_f=np.full(G, np.inf),
            tbest_x=x[0, 0, :].copy(),
            tbest_f=float("inf"),
            k=0,
        )


def derive_seed(root: int, *keys: Union[int, str]) -> int:
    """Stable 64-bit seed for a named sub-stream of ``root``"""
    spawn_key = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys)
    sequence = np.random.SeedSequence(entropy=int(root), spawn_key=spawn_key)
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


class RngStream:
    """Deterministic uniform [0, 1) variates; one stream per run"""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, shape: Union[int, Tuple[int, ...]]) -> np.ndarray:
        return self._generator.random(shape)

    def coefficients(self, groups: int, particles: int, count: int = 3) -> Tuple[np.ndarray, ...]:
        """R1, R2, R3 as (G, N) arrays, drawn in that order, row-major over (g, n)"""
        return tuple(self._generator.random((groups, particles)) for _ in range(count))


def inertia_at(hypers: HyperMatrix, k: int, T: int) -> np.ndarray:
    """Linear inertia schedule per group: omega_init at k=0, omega_end at k=T"""
    if T < 1:
        raise ValueError(f"Total iterations must be >= 1, got {T}")
    if not 0 <= k <= T:
        raise ValueError(f"Iteration {k} outside [0, {T}]")
    if k == T:
        return hypers.omega_end.copy()
    return hypers.omega_init - (hypers.omega_init - hypers.omega_end) / T * k


def saturate(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Componentwise clip; idempotent"""
    return np.minimum(np.maximum(values, lo), hi)


def check_shapes(state: SwarmState, hypers: HyperMatrix, bounds: SearchBounds):
    if state.x.ndim != 3:
        raise ShapeMismatchError(f"Positions must be (G, N, D), got {state.x.shape}")
    G, N, D = state.x.shape
    if state.v.shape != state.x.shape or state.pbest_x.shape != state.x.shape:
        raise ShapeMismatchError("Velocity and pbest tensors must match the position tensor")
    if state.pbest_f.shape != (G, N) or state.gbest_x.shape != (G, D) or state.tbest_x.shape != (D,):
        raise ShapeMismatchError("Best-memory tensors disagree with the position tensor")
    if hypers.groups != G:
        raise ShapeMismatchError(f"Hyper matrix has {hypers.groups} groups, swarm has {G}")
    if bounds.dimension != D:
        raise ShapeMismatchError(f"Bounds have {bounds.dimension} dimensions, swarm has {D}")


def init_swarm(hypers: HyperMatrix, bounds: SearchBounds, G: int, N: int, D: int,
               rng: RngStream, dtype=np.float64) -> SwarmState:
    """Uniform positions in the box, uniform velocities in each group's velocity box"""
    if min(G, N, D) < 1:
        raise ValueError(f"G, N, D must be >= 1, got {(G, N, D)}")
    if hypers.groups != G:
        raise ShapeMismatchError(f"Hyper matrix has {hypers.groups} groups, expected {G}")
    if bounds.dimension != D:
        raise ShapeMismatchError(f"Bounds have {bounds.dimension} dimensions, expected {D}")

    x = bounds.lo + bounds.span * rng.uniform((G, N, D))
    x = saturate(x, bounds.lo, bounds.hi)
    v_lo, v_hi = bounds.velocity_bounds(hypers)
    v = v_lo[:, None, :] + (v_hi - v_lo)[:, None, :] * rng.uniform((G, N, D))
    v = saturate(v, v_lo[:, None, :], v_hi[:, None, :])
    return SwarmState.from_positions(x.astype(dtype, copy=False), v.astype(dtype, copy=False))


class TOFTensors(NamedTuple):
    I: np.ndarray   # (1, 4)
    H: np.ndarray   # (4, G)
    R: np.ndarray   # (4, G, N)
    K: np.ndarray   # (4, G, N, D)
    L: np.ndarray   # (4, G, N, D)


def build_tof_tensors(state: SwarmState, hypers: HyperMatrix, omega: np.ndarray,
                      coefficients: Sequence[np.ndarray]) -> TOFTensors:
    """Materialise the hyper, random, kinematics and location tensors.

    Memory is 2 * 4 * G * N * D scalars; meant for inspection and small swarms.
    """
    G, N, D = state.x.shape
    r1, r2, r3 = coefficients
    I = np.ones((1, 4))
    H = np.stack([omega, hypers.c1, hypers.c2, hypers.c3])
    R = np.stack([np.ones((G, N)), r1, r2, r3])
    K = np.stack([
        state.v,
        state.pbest_x,
        np.broadcast_to(state.gbest_x[:, None, :], (G, N, D)),
        np.broadcast_to(state.tbest_x[None, None, :], (G, N, D)),
    ])
    L = np.stack([np.zeros((G, N, D)), state.x, state.x, state.x])
    return TOFTensors(I, H, R, K, L)


def tof_velocity(tensors: TOFTensors) -> np.ndarray:
    """V = I x [H . R . (K - L)], before clipping"""
    HR = tensors.H[:, :, None] * tensors.R
    terms = HR[..., None] * (tensors.K - tensors.L)
    return np.tensordot(tensors.I, terms, axes=([1], [0]))[0]


def fused_velocity(state: SwarmState, hypers: HyperMatrix, omega: np.ndarray,
                   coefficients: Sequence[np.ndarray]) -> np.ndarray:
    """Same contraction as tof_velocity without building K and L"""
    r1, r2, r3 = coefficients
    x = state.x
    dtype = x.dtype
    w = omega[:, None, None].astype(dtype, copy=False)
    a1 = (hypers.c1[:, None, None] * r1[:, :, None]).astype(dtype, copy=False)
    a2 = (hypers.c2[:, None, None] * r2[:, :, None]).astype(dtype, copy=False)
    a3 = (hypers.c3[:, None, None] * r3[:, :, None]).astype(dtype, copy=False)
    return (w * state.v
            + a1 * (state.pbest_x - x)
            + a2 * (state.gbest_x[:, None, :] - x)
            + a3 * (state.tbest_x[None, None, :] - x))


def apply_velocity(state: SwarmState, velocity: np.ndarray, hypers: HyperMatrix,
                   bounds: SearchBounds) -> SwarmState:
    """Clip velocity to each group's box, move, clip position to the search box"""
    v_lo, v_hi = bounds.velocity_bounds(hypers)
    dtype = state.x.dtype
    v = saturate(velocity, v_lo[:, None, :].astype(dtype), v_hi[:, None, :].astype(dtype))
    x = saturate(state.x + v, bounds.lo.astype(dtype), bounds.hi.astype(dtype))
    return replace(state, x=x, v=v)


def step(state: SwarmState, hypers: HyperMatrix, bounds: SearchBounds, rng: RngStream,
         k: int, T: int, coefficients: Optional[Sequence[np.ndarray]] = None) -> SwarmState:
    """Advance every particle of every group by one iteration.

    ``coefficients`` lets a caller that pre-drew R1..R3 (parallel fan-out)
    pass them in; otherwise they are drawn here in the normative order.
    """
    check_shapes(state, hypers, bounds)
    G, N, _ = state.x.shape
    omega = inertia_at(hypers, k, T)
    if coefficients is None:
        coefficients = rng.coefficients(G, N)
    velocity = fused_velocity(state, hypers, omega, coefficients)
    return apply_velocity(state, velocity, hypers, bounds)
