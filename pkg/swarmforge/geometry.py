"""
Polygonal map and the path-planning fitness.

A particle is the flat vector [x_1..x_W, y_1..y_W] of W waypoints. Start and
target belong to the world, so the path visited is
start -> w_1 -> ... -> w_W -> target. Collisions are counted as
(path segment, obstacle edge) pairs that share at least one point.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

# cross products within this band are treated as collinear
ORIENTATION_EPS = 1e-12
# below this many segment x edge pairs the bounding-box prefilter costs more than it saves
PREFILTER_MIN_PAIRS = 4096


class Point2(NamedTuple):
    x: float
    y: float


def _point(value: Sequence[float]) -> Point2:
    p = Point2(float(value[0]), float(value[1]))
    if not (np.isfinite(p.x) and np.isfinite(p.y)):
        raise ValueError(f"Point must be finite, got {p}")
    return p


@dataclass(frozen=True)
class Obstacle:
    """Closed polygon (vertex order = edge order) with a constant velocity in cm/s"""

    vertices: Tuple[Point2, ...]
    velocity: Point2 = Point2(0.0, 0.0)
    kind: str = "static"

    def __post_init__(self):
        vertices = tuple(_point(v) for v in self.vertices)
        if len(vertices) < 3:
            raise ValueError(f"Obstacle needs at least 3 vertices, got {len(vertices)}")
        if self.kind not in ("static", "dynamic"):
            raise ValueError(f"Obstacle kind must be 'static' or 'dynamic', got {self.kind!r}")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "velocity", _point(self.velocity))

    @classmethod
    def rectangle(cls, x_min: float, y_min: float, width: float, height: float,
                  velocity: Sequence[float] = (0.0, 0.0), kind: str = "static") -> "Obstacle":
        corners = (
            (x_min, y_min),
            (x_min + width, y_min),
            (x_min + width, y_min + height),
            (x_min, y_min + height),
        )
        return cls(tuple(Point2(*c) for c in corners), Point2(*velocity), kind)

    @property
    def edges(self) -> List[Tuple[Point2, Point2]]:
        n = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)]

    @property
    def extent(self) -> Tuple[float, float, float, float]:
        xs = [p.x for p in self.vertices]
        ys = [p.y for p in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def translated(self, dx: float, dy: float) -> "Obstacle":
        return Obstacle(tuple(Point2(p.x + dx, p.y + dy) for p in self.vertices), self.velocity, self.kind)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vertices": [[p.x, p.y] for p in self.vertices],
            "velocity": [self.velocity.x, self.velocity.y],
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Obstacle":
        return cls(tuple(Point2(*v) for v in data["vertices"]), Point2(*data.get("velocity", (0.0, 0.0))),
                   data.get("kind", "static"))


@dataclass(frozen=True)
class PolygonWorld:
    """Map snapshot: size in cm, moving start/target, polygonal obstacles"""

    width: float
    height: float
    start: Point2
    target: Point2
    obstacles: Tuple[Obstacle, ...] = ()
    start_velocity: Point2 = Point2(0.0, 0.0)
    target_velocity: Point2 = Point2(0.0, 0.0)

    def __post_init__(self):
        for name in ("start", "target", "start_velocity", "target_velocity"):
            object.__setattr__(self, name, _point(getattr(self, name)))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not (self.width > 0 and self.height > 0):
            raise ValueError("Map size must be positive")
        for name in ("start", "target"):
            if not self.contains(getattr(self, name)):
                raise ValueError(f"{name} {getattr(self, name)} lies outside the map")
        for i, obstacle in enumerate(self.obstacles):
            if not all(self.contains(p) for p in obstacle.vertices):
                raise ValueError(f"Obstacle {i} has vertices outside the map")

    def contains(self, p: Point2) -> bool:
        return 0.0 <= p.x <= self.width and 0.0 <= p.y <= self.height

    @cached_property
    def edge_array(self) -> np.ndarray:
        """(M, 4) rows [x1, y1, x2, y2] over every obstacle edge"""
        rows = [(a.x, a.y, b.x, b.y) for obstacle in self.obstacles for a, b in obstacle.edges]
        return np.array(rows, dtype=np.float64).reshape(-1, 4)

    @cached_property
    def edge_offsets(self) -> np.ndarray:
        """Index of each obstacle's first edge inside edge_array"""
        counts = [len(obstacle.vertices) for obstacle in self.obstacles]
        return np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.intp) if counts else np.zeros(0, np.intp)

    @cached_property
    def edge_directions(self) -> np.ndarray:
        """(M, 2) rows [x2 - x1, y2 - y1] matching edge_array"""
        edges = self.edge_array
        return edges[:, 2:4] - edges[:, 0:2]

    @cached_property
    def obstacle_boxes(self) -> np.ndarray:
        """(K, 4) rows [x_min, y_min, x_max, y_max], one per obstacle"""
        return np.array([o.extent for o in self.obstacles], dtype=np.float64).reshape(-1, 4)

    @cached_property
    def edge_spans(self) -> Tuple[slice, ...]:
        """Slice of edge_array holding each obstacle's edges"""
        return tuple(slice(int(start), int(start) + len(o.vertices))
                     for start, o in zip(self.edge_offsets, self.obstacles))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "width": self.width,
            "height": self.height,
            "start": list(self.start),
            "start_velocity": list(self.start_velocity),
            "target": list(self.target),
            "target_velocity": list(self.target_velocity),
            "obstacles": [o.to_dict() for o in self.obstacles],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PolygonWorld":
        return cls(
            width=float(data["width"]),
            height=float(data["height"]),
            start=Point2(*data["start"]),
            target=Point2(*data["target"]),
            obstacles=tuple(Obstacle.from_dict(o) for o in data.get("obstacles", [])),
            start_velocity=Point2(*data.get("start_velocity", (0.0, 0.0))),
            target_velocity=Point2(*data.get("target_velocity", (0.0, 0.0))),
        )


@dataclass(frozen=True)
class Path:
    waypoints: Tuple[Point2, ...]

    def __len__(self) -> int:
        return len(self.waypoints)

    def points(self, world: PolygonWorld) -> List[Point2]:
        return [world.start, *self.waypoints, world.target]

    def segments(self, world: PolygonWorld) -> List[Tuple[Point2, Point2]]:
        pts = self.points(world)
        return list(zip(pts[:-1], pts[1:]))

    def to_list(self) -> List[List[float]]:
        return [[p.x, p.y] for p in self.waypoints]


def decode_path(particle: Sequence[float]) -> Path:
    """[x_1..x_W, y_1..y_W] -> waypoints (x_i, y_i)"""
    values = np.asarray(particle, dtype=np.float64).reshape(-1)
    D = values.shape[0]
    if D == 0 or D % 2:
        raise ValueError(f"Particle length must be even and positive, got {D}")
    half = D // 2
    return Path(tuple(Point2(float(values[i]), float(values[half + i])) for i in range(half)))


def encode_path(path: Path) -> np.ndarray:
    xs = [p.x for p in path.waypoints]
    ys = [p.y for p in path.waypoints]
    return np.array(xs + ys, dtype=np.float64)


# -- scalar predicates ------------------------------------------------------

def orientation(a: Point2, b: Point2, c: Point2) -> int:
    """Sign of the turn a -> b -> c: 1 left, -1 right, 0 collinear"""
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if cross > ORIENTATION_EPS:
        return 1
    if cross < -ORIENTATION_EPS:
        return -1
    return 0


def _within_box(a: Point2, b: Point2, c: Point2) -> bool:
    return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))


def segments_intersect(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> bool:
    """True iff the closed segments a1a2 and b1b2 share a point"""
    d1 = orientation(b1, b2, a1)
    d2 = orientation(b1, b2, a2)
    d3 = orientation(a1, a2, b1)
    d4 = orientation(a1, a2, b2)

    if d1 * d2 < 0 and d3 * d4 < 0:
        return True

    # collinear touching, overlap and zero-length segments
    if d1 == 0 and _within_box(b1, b2, a1):
        return True
    if d2 == 0 and _within_box(b1, b2, a2):
        return True
    if d3 == 0 and _within_box(a1, a2, b1):
        return True
    if d4 == 0 and _within_box(a1, a2, b2):
        return True
    return False


def point_in_polygon(p: Point2, obstacle: Obstacle) -> bool:
    """Crossing-number test; boundary points may fall either way"""
    inside = False
    vertices = obstacle.vertices
    n = len(vertices)
    for i in range(n):
        xi, yi = vertices[i]
        xj, yj = vertices[i - 1]
        if (yi > p[1]) != (yj > p[1]):
            x_cross = (xj - xi) * (p[1] - yi) / (yj - yi) + xi
            if p[0] < x_cross:
                inside = not inside
    return inside


# -- batched predicates -----------------------------------------------------

def _orientation_split(cross: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return cross > ORIENTATION_EPS, cross < -ORIENTATION_EPS


def _orientation_signs(ax, ay, bx, by, cx, cy) -> Tuple[np.ndarray, np.ndarray]:
    return _orientation_split((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))


def _within_box_batch(ax, ay, bx, by, cx, cy) -> np.ndarray:
    return ((np.minimum(ax, bx) <= cx) & (cx <= np.maximum(ax, bx))
            & (np.minimum(ay, by) <= cy) & (cy <= np.maximum(ay, by)))


def segments_intersect_batch(a1: np.ndarray, a2: np.ndarray, b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
    """Broadcasting form of segments_intersect over (..., 2) point arrays"""
    a1x, a1y = a1[..., 0], a1[..., 1]
    a2x, a2y = a2[..., 0], a2[..., 1]
    b1x, b1y = b1[..., 0], b1[..., 1]
    b2x, b2y = b2[..., 0], b2[..., 1]

    p1, n1 = _orientation_signs(b1x, b1y, b2x, b2y, a1x, a1y)
    p2, n2 = _orientation_signs(b1x, b1y, b2x, b2y, a2x, a2y)
    p3, n3 = _orientation_signs(a1x, a1y, a2x, a2y, b1x, b1y)
    p4, n4 = _orientation_signs(a1x, a1y, a2x, a2y, b2x, b2y)

    proper = ((p1 & n2) | (n1 & p2)) & ((p3 & n4) | (n3 & p4))
    touch = ((~(p1 | n1) & _within_box_batch(b1x, b1y, b2x, b2y, a1x, a1y))
             | (~(p2 | n2) & _within_box_batch(b1x, b1y, b2x, b2y, a2x, a2y))
             | (~(p3 | n3) & _within_box_batch(a1x, a1y, a2x, a2y, b1x, b1y))
             | (~(p4 | n4) & _within_box_batch(a1x, a1y, a2x, a2y, b2x, b2y)))
    return proper | touch


def path_points_batch(particles: np.ndarray, world: PolygonWorld) -> np.ndarray:
    """(..., D) particles -> (..., D/2 + 2, 2) polyline including start and target"""
    D = particles.shape[-1]
    if D == 0 or D % 2:
        raise ValueError(f"Particle length must be even and positive, got {D}")
    half = D // 2
    waypoints = np.stack([particles[..., :half], particles[..., half:]], axis=-1)
    lead_shape = particles.shape[:-1]
    start = np.broadcast_to(np.asarray(world.start, dtype=np.float64), lead_shape + (1, 2))
    target = np.broadcast_to(np.asarray(world.target, dtype=np.float64), lead_shape + (1, 2))
    return np.concatenate([start, waypoints, target], axis=-2)


def containment_batch(points: np.ndarray, world: PolygonWorld) -> np.ndarray:
    """(..., 2) points -> (..., n_obstacles) inside flags"""
    edges = world.edge_array
    if edges.shape[0] == 0:
        return np.zeros(points.shape[:-1] + (0,), dtype=bool)
    px = points[..., 0][..., None]
    py = points[..., 1][..., None]
    # crossing-number edges run from vertex i-1 to vertex i, same as point_in_polygon
    xj, yj, xi, yi = edges[:, 0], edges[:, 1], edges[:, 2], edges[:, 3]
    straddles = (yi > py) != (yj > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = (xj - xi) * (py - yi) / (yj - yi) + xi
    crossings = (straddles & (px < x_cross)).astype(np.int64)
    per_obstacle = np.add.reduceat(crossings, world.edge_offsets, axis=-1)
    return per_obstacle % 2 == 1


def _edge_hits(a1: np.ndarray, a2: np.ndarray, edges: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """(C, 2) segments against (E, 4) edges -> (C, E) flags, same answer as segments_intersect_batch.

    Crossings are decided from the four orientation signs alone; only pairs
    with a sign inside the collinear band go through the full predicate.
    """
    ax, ay = a1[:, 0:1], a1[:, 1:2]
    bx, by = a2[:, 0:1], a2[:, 1:2]
    sx, sy = bx - ax, by - ay
    x1, y1, x2, y2 = edges[:, 0], edges[:, 1], edges[:, 2], edges[:, 3]
    ex, ey = directions[:, 0], directions[:, 1]

    p1, n1 = _orientation_split(ex * (ay - y1) - ey * (ax - x1))
    p2, n2 = _orientation_split(ex * (by - y1) - ey * (bx - x1))
    p3, n3 = _orientation_split(sx * (y1 - ay) - sy * (x1 - ax))
    p4, n4 = _orientation_split(sx * (y2 - ay) - sy * (x2 - ax))

    hits = ((p1 & n2) | (n1 & p2)) & ((p3 & n4) | (n3 & p4))
    banded = ~((p1 | n1) & (p2 | n2) & (p3 | n3) & (p4 | n4))
    if banded.any():
        rows, cols = np.nonzero(banded)
        hits[rows, cols] = segments_intersect_batch(a1[rows], a2[rows], edges[cols, 0:2], edges[cols, 2:4])
    return hits


def _segment_hit_counts(a1: np.ndarray, a2: np.ndarray, world: PolygonWorld) -> np.ndarray:
    """Obstacle-edge contacts per segment for flat (S, 2) endpoint arrays"""
    edges, directions = world.edge_array, world.edge_directions
    if a1.shape[0] * edges.shape[0] <= PREFILTER_MIN_PAIRS:
        return _edge_hits(a1, a2, edges, directions).sum(axis=-1)

    # a contact point lies in both the segment's box and the obstacle's box
    lo = np.minimum(a1, a2)
    hi = np.maximum(a1, a2)
    boxes = world.obstacle_boxes
    near = ((lo[:, 0:1] <= boxes[:, 2]) & (hi[:, 0:1] >= boxes[:, 0])
            & (lo[:, 1:2] <= boxes[:, 3]) & (hi[:, 1:2] >= boxes[:, 1]))
    counts = np.zeros(a1.shape[0], dtype=np.int64)
    for k, span in enumerate(world.edge_spans):
        rows = np.flatnonzero(near[:, k])
        if rows.size:
            counts[rows] += _edge_hits(a1[rows], a2[rows], edges[span], directions[span]).sum(axis=-1)
    return counts


def _count_from_points(pts: np.ndarray, world: PolygonWorld) -> np.ndarray:
    lead_shape = pts.shape[:-2]
    if world.edge_array.shape[0] == 0:
        return np.zeros(lead_shape, dtype=np.int64)
    n_segments = pts.shape[-2] - 1
    a1 = pts[..., :-1, :].reshape(-1, 2)
    a2 = pts[..., 1:, :].reshape(-1, 2)
    q = _segment_hit_counts(a1, a2, world).reshape(lead_shape + (n_segments,)).sum(axis=-1)
    q = q + containment_batch(pts[..., 1, :], world).sum(axis=-1)
    return q.astype(np.int64)


def count_intersections_batch(particles: np.ndarray, world: PolygonWorld) -> np.ndarray:
    """Q for every particle of a (..., D) tensor"""
    return _count_from_points(path_points_batch(particles, world), world)


def _length_from_points(pts: np.ndarray) -> np.ndarray:
    steps = np.diff(pts, axis=-2)
    return np.sum(np.sqrt(steps[..., 0] ** 2 + steps[..., 1] ** 2), axis=-1)


def path_length_batch(particles: np.ndarray, world: PolygonWorld) -> np.ndarray:
    return _length_from_points(path_points_batch(particles, world))


def penalty(q, alpha: float, beta: float):
    return alpha * np.asarray(q, dtype=np.float64) ** beta


def path_fitness_batch(particles: np.ndarray, world: PolygonWorld, alpha: float, beta: float) -> np.ndarray:
    pts = path_points_batch(particles, world)
    return _length_from_points(pts) + penalty(_count_from_points(pts, world), alpha, beta)


# -- per-path API -----------------------------------------------------------

def count_intersections(path: Path, world: PolygonWorld) -> int:
    if len(path) == 0:
        raise ValueError("Path needs at least one waypoint")
    return int(count_intersections_batch(encode_path(path), world))


def path_length(path: Path, world: PolygonWorld) -> float:
    if len(path) == 0:
        raise ValueError("Path needs at least one waypoint")
    return float(path_length_batch(encode_path(path), world))


def path_fitness(particle: Sequence[float], world: PolygonWorld, alpha: float, beta: float) -> float:
    if alpha < 0 or beta < 1:
        raise ValueError(f"Penalty needs alpha >= 0 and beta >= 1, got {alpha}, {beta}")
    values = np.asarray(particle, dtype=np.float64)
    return float(path_fitness_batch(values, world, alpha, beta))
