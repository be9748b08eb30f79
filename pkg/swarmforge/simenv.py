"""
Seeded dynamic planning scenario.

Rectangular obstacles drift at constant velocity and bounce off the map
borders; start and target move too. Every frame freezes the world, plans on
it, then steps it forward. The world trajectory depends only on the scenario
config and seed, never on the planner.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path as FilePath
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from swarmforge.core.config import config
from swarmforge.core.errors import PlacementError
from swarmforge.core.planner import PlannerConfig, PlanRecord, get_variant, plan_frame
from swarmforge.core.swarm import HyperMatrix, RngStream, derive_seed
from swarmforge.geometry import Obstacle, Point2, PolygonWorld

MAX_PLACEMENT_ATTEMPTS = 1000


class ScenarioConfig(BaseModel):
    """Map, obstacle population and motion ranges for one scenario"""

    model_config = ConfigDict(frozen=True)

    width: float = Field(366.0, gt=0)
    height: float = Field(366.0, gt=0)
    dynamic_obstacles: int = Field(6, ge=0)
    static_obstacles: int = Field(2, ge=0)
    max_obstacle_speed: float = Field(5.0, gt=0)
    side_range: Tuple[float, float] = (30.0, 80.0)
    start: Tuple[float, float] = (20.0, 60.0)
    start_velocity: Tuple[float, float] = (0.0, 3.0)
    target: Tuple[float, float] = (346.0, 306.0)
    target_velocity: Tuple[float, float] = (0.0, -8.0)
    clearance: float = Field(15.0, ge=0)
    frames: int = Field(100, ge=1)
    dt: float = Field(1.0, gt=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_geometry(self) -> "ScenarioConfig":
        lo, hi = self.side_range
        if not 0 < lo <= hi:
            raise ValueError(f"side_range must satisfy 0 < min <= max, got {self.side_range}")
        if hi > min(self.width, self.height):
            raise ValueError(f"Obstacle sides up to {hi} do not fit a {self.width}x{self.height} map")
        for name in ("start", "target"):
            x, y = getattr(self, name)
            if not (0 <= x <= self.width and 0 <= y <= self.height):
                raise ValueError(f"{name} {(x, y)} lies outside the map")
        return self

    @classmethod
    def from_settings(cls, **overrides: Any) -> "ScenarioConfig":
        values = dict(config.get_scenario_config())
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def from_json(cls, path: Union[str, FilePath]) -> "ScenarioConfig":
        with open(path, "r") as f:
            return cls.model_validate(json.load(f))

    def to_json(self, path: Union[str, FilePath]) -> FilePath:
        path = FilePath(path)
        path.write_text(self.model_dump_json(indent=2) + "\n")
        return path


def _overlaps(a: Tuple[float, float, float, float], b: Tuple[float, float, float, float]) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _covers(box: Tuple[float, float, float, float], p: Tuple[float, float], margin: float) -> bool:
    return box[0] - margin <= p[0] <= box[2] + margin and box[1] - margin <= p[1] <= box[3] + margin


def generate_world(scenario: ScenarioConfig, seed: Optional[int] = None) -> PolygonWorld:
    """Seed-deterministic frame-0 world: dynamic obstacles first, then static ones"""
    seed = scenario.seed if seed is None else seed
    rng = RngStream(derive_seed(seed, "world"))
    side_lo, side_hi = scenario.side_range
    placed: List[Tuple[float, float, float, float]] = []
    obstacles: List[Obstacle] = []

    kinds = ["dynamic"] * scenario.dynamic_obstacles + ["static"] * scenario.static_obstacles
    for index, kind in enumerate(kinds):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            u = rng.uniform(4)
            w = side_lo + (side_hi - side_lo) * u[0]
            h = side_lo + (side_hi - side_lo) * u[1]
            x_min = (scenario.width - w) * u[2]
            y_min = (scenario.height - h) * u[3]
            box = (x_min, y_min, x_min + w, y_min + h)
            if _covers(box, scenario.start, scenario.clearance) or _covers(box, scenario.target, scenario.clearance):
                continue
            if any(_overlaps(box, other) for other in placed):
                continue
            break
        else:
            raise PlacementError(
                f"Could not place obstacle {index} ({kind}) after {MAX_PLACEMENT_ATTEMPTS} attempts; "
                f"reduce the obstacle count or side_range"
            )

        velocity = (0.0, 0.0)
        if kind == "dynamic":
            angle, u_speed = rng.uniform(2)
            speed = scenario.max_obstacle_speed * (1.0 - u_speed)   # (0, max]
            velocity = (speed * math.cos(2 * math.pi * angle), speed * math.sin(2 * math.pi * angle))
        placed.append(box)
        obstacles.append(Obstacle.rectangle(x_min, y_min, w, h, velocity, kind))

    world = PolygonWorld(
        width=scenario.width,
        height=scenario.height,
        start=Point2(*scenario.start),
        target=Point2(*scenario.target),
        obstacles=tuple(obstacles),
        start_velocity=Point2(*scenario.start_velocity),
        target_velocity=Point2(*scenario.target_velocity),
    )
    logging.debug(f"Generated world with {len(obstacles)} obstacles from seed {seed}")
    return world


def _reflect(lo: float, hi: float, v: float, limit: float) -> Tuple[float, float]:
    """Correction shift and new velocity for a body spanning [lo, hi] on [0, limit]"""
    if hi >= limit and v > 0:
        shift = -2.0 * (hi - limit)
        return max(shift, -lo), -v
    if lo <= 0 and v < 0:
        shift = -2.0 * lo
        return min(shift, limit - hi), -v
    return 0.0, v


def _move(lo_x: float, lo_y: float, hi_x: float, hi_y: float, velocity: Point2, dt: float,
          world: PolygonWorld) -> Tuple[float, float, Point2]:
    dx, dy = velocity.x * dt, velocity.y * dt
    sx, vx = _reflect(lo_x + dx, hi_x + dx, velocity.x, world.width)
    sy, vy = _reflect(lo_y + dy, hi_y + dy, velocity.y, world.height)
    return dx + sx, dy + sy, Point2(vx, vy)


def _clamp(p: Point2, world: PolygonWorld) -> Point2:
    # absorbs rounding of the reflected position
    return Point2(min(max(p.x, 0.0), world.width), min(max(p.y, 0.0), world.height))


def step_world(world: PolygonWorld, dt: float = 1.0) -> PolygonWorld:
    """Translate every moving body by velocity * dt, bouncing off the borders.

    A body whose extreme vertex reaches or passes a border has that velocity
    component negated and the overshoot reflected back inside.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")

    obstacles = []
    for obstacle in world.obstacles:
        if obstacle.velocity == (0.0, 0.0):
            obstacles.append(obstacle)
            continue
        dx, dy, velocity = _move(*obstacle.extent, obstacle.velocity, dt, world)
        moved = obstacle.translated(dx, dy)
        obstacles.append(Obstacle(tuple(_clamp(p, world) for p in moved.vertices), velocity, obstacle.kind))

    def move_point(p: Point2, v: Point2) -> Tuple[Point2, Point2]:
        dx, dy, new_v = _move(p.x, p.y, p.x, p.y, v, dt, world)
        return _clamp(Point2(p.x + dx, p.y + dy), world), new_v

    start, start_velocity = move_point(world.start, world.start_velocity)
    target, target_velocity = move_point(world.target, world.target_velocity)
    return PolygonWorld(world.width, world.height, start, target, tuple(obstacles),
                        start_velocity, target_velocity)


@dataclass
class SimMetrics:
    """Per-frame plan records plus the aggregates derived from them"""

    variant: str
    records: List[PlanRecord] = field(default_factory=list)

    @property
    def frames(self) -> int:
        return len(self.records)

    def frame_table(self, include_timing: bool = True) -> pd.DataFrame:
        rows = []
        for record in self.records:
            row = record.to_dict(include_timing)
            row.pop("best_path")
            rows.append(row)
        return pd.DataFrame(rows)

    @property
    def mean_path_length(self) -> float:
        return float(np.mean([r.path_length for r in self.records])) if self.records else float("nan")

    @property
    def mean_wall_seconds(self) -> float:
        return float(np.mean([r.wall_seconds for r in self.records])) if self.records else float("nan")

    @property
    def mean_iterations(self) -> float:
        return float(np.mean([r.iterations for r in self.records])) if self.records else float("nan")

    @property
    def collision_free_fraction(self) -> float:
        return float(np.mean([r.collision_free for r in self.records])) if self.records else float("nan")

    @property
    def truncated_fraction(self) -> float:
        return float(np.mean([r.truncated for r in self.records])) if self.records else float("nan")

    def summary(self, include_timing: bool = True) -> Dict[str, Any]:
        data = {
            "variant": self.variant,
            "frames": self.frames,
            "mean_path_length": self.mean_path_length,
            "mean_iterations": self.mean_iterations,
            "collision_free_fraction": self.collision_free_fraction,
            "truncated_fraction": self.truncated_fraction,
        }
        if include_timing:
            data["mean_wall_seconds"] = self.mean_wall_seconds
        return data

    def to_csv(self, path: Union[str, FilePath], include_timing: bool = False) -> FilePath:
        path = FilePath(path)
        pd.DataFrame([self.summary(include_timing)]).to_csv(path, index=False)
        return path


FrameCallback = Callable[[int, PolygonWorld, PlanRecord], None]


def resolve_variant_hypers(variant: str, hypers: Optional[HyperMatrix] = None) -> HyperMatrix:
    """Hyper matrix a variant runs with; only the SEPSO family accepts an evolved matrix"""
    spec = get_variant(variant)
    if hypers is None:
        return HyperMatrix.preset(spec.hypers_preset)
    if not spec.evolved:
        raise ValueError(f"Variant '{variant}' runs with the '{spec.hypers_preset}' preset "
                         f"and does not accept a hyper-parameter file")
    return hypers


def run_scenario(scenario: ScenarioConfig, variant: str, frames: Optional[int] = None,
                 seed: Optional[int] = None, hypers: Optional[HyperMatrix] = None,
                 planner_config: Optional[PlannerConfig] = None,
                 on_frame: Optional[FrameCallback] = None) -> SimMetrics:
    """Alternate plan_frame and step_world for ``frames`` frames"""
    frames = scenario.frames if frames is None else frames
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    seed = scenario.seed if seed is None else seed

    spec = get_variant(variant)
    hypers = resolve_variant_hypers(variant, hypers)
    planner_config = (planner_config or PlannerConfig.from_settings()).model_copy(
        update={"use_pi": spec.use_pi, "use_at": spec.use_at}
    )

    world = generate_world(scenario, seed)
    metrics = SimMetrics(variant=variant)
    prev_best = None
    carry: Tuple[float, ...] = ()
    for frame in range(frames):
        record = plan_frame(world, prev_best, hypers, planner_config, derive_seed(seed, "frame", frame),
                            algorithm=spec.algorithm, carry_window=carry)
        record = replace(record, frame=frame)
        metrics.records.append(record)
        if on_frame is not None:
            on_frame(frame, world, record)
        prev_best = record.best_path
        carry = record.window
        world = step_world(world, scenario.dt)

    logging.info(f"Scenario finished with {variant}: {frames} frames, "
                 f"mean length {metrics.mean_path_length:.1f}, mean iterations {metrics.mean_iterations:.1f}, "
                 f"collision-free {metrics.collision_free_fraction:.0%}")
    return metrics
