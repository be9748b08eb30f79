"""
Frame snapshots as standalone SVG: obstacles, start, target and planned path.

Map coordinates have y pointing up; the SVG is flipped so the picture reads
the same way. Output text depends only on its inputs.
"""

import logging
from pathlib import Path as FilePath
from typing import Dict, Iterable, List, Optional, Sequence, Union

from swarmforge.geometry import Path, Point2, PolygonWorld

ns_svg = "http://www.w3.org/2000/svg"

COLORS = {
    "dynamic": "#1f1f1f",
    "static": "#f28e2b",
    "path_ok": "#2b8cbe",
    "path_hit": "#d62728",
    "start": "#2ca02c",
    "target": "#9467bd",
}


def demangle(k: str) -> str:
    return k.replace("_", "-")


def rounder(x, prec: int = 3):
    if isinstance(x, float):
        xr = round(x, ndigits=prec)
        return int(xr) if xr % 1 == 0 else xr
    return x


def props_repr(d: Dict[str, object]) -> str:
    return " ".join(f'{demangle(k)}="{rounder(v)}"' for k, v in d.items())


def element(tag: str, inner: Optional[str] = None, **attr) -> str:
    props = props_repr(attr)
    pre = " " if props else ""
    if inner is None:
        return f"<{tag}{pre}{props} />"
    return f"<{tag}{pre}{props}>{inner}</{tag}>"


class FrameCanvas:
    """Maps world centimetres onto an SVG of ``scale`` pixels per cm"""

    def __init__(self, world: PolygonWorld, scale: float = 2.0, margin: float = 10.0):
        self.world = world
        self.scale = scale
        self.margin = margin

    @property
    def size(self):
        return (self.world.width * self.scale + 2 * self.margin,
                self.world.height * self.scale + 2 * self.margin)

    def xy(self, p: Point2):
        return (rounder(self.margin + p.x * self.scale),
                rounder(self.margin + (self.world.height - p.y) * self.scale))

    def points_attr(self, points: Iterable[Point2]) -> str:
        return " ".join(f"{x},{y}" for x, y in (self.xy(p) for p in points))

    def border(self) -> str:
        return element("rect", x=self.margin, y=self.margin, width=self.world.width * self.scale,
                       height=self.world.height * self.scale, fill="white", stroke="#999999")

    def obstacles(self) -> List[str]:
        return [
            element("polygon", points=self.points_attr(o.vertices), fill=COLORS[o.kind], fill_opacity=0.85)
            for o in self.world.obstacles
        ]

    def marker(self, p: Point2, color: str, r: float = 5.0) -> str:
        cx, cy = self.xy(p)
        return element("circle", cx=cx, cy=cy, r=r, fill=color)

    def path(self, path: Path, collision_free: bool) -> List[str]:
        color = COLORS["path_ok"] if collision_free else COLORS["path_hit"]
        parts = [element("polyline", points=self.points_attr(path.points(self.world)), fill="none",
                         stroke=color, stroke_width=2.0)]
        parts += [self.marker(p, color, r=2.5) for p in path.waypoints]
        return parts

    def caption(self, text: str) -> str:
        return element("text", text, x=self.margin + 4, y=self.margin + 14, font_family="monospace",
                       font_size=12, fill="#333333")


def render_frame(world: PolygonWorld, path: Optional[Path] = None, collision_free: bool = True,
                 caption: str = "", scale: float = 2.0) -> str:
    canvas = FrameCanvas(world, scale)
    body = [canvas.border(), *canvas.obstacles()]
    if path is not None:
        body += canvas.path(path, collision_free)
    body += [canvas.marker(world.start, COLORS["start"]), canvas.marker(world.target, COLORS["target"])]
    if caption:
        body.append(canvas.caption(caption))
    w, h = canvas.size
    return element("svg", "\n" + "\n".join(body) + "\n", width=rounder(w), height=rounder(h), xmlns=ns_svg)


def save_frame(path: Union[str, FilePath], world: PolygonWorld, plan_path: Optional[Path] = None,
               collision_free: bool = True, caption: str = "", scale: float = 2.0) -> FilePath:
    path = FilePath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(render_frame(world, plan_path, collision_free, caption, scale) + "\n")
    logging.debug(f"Wrote frame {path}")
    return path
