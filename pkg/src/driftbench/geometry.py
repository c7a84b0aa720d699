"""Planar obstacle shapes and the compiled form used for distance queries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

Point = tuple[float, float]


def _pt(p: Iterable[float]) -> Point:
    x, y = p
    return (float(x), float(y))


@dataclass(frozen=True)
class Polyline:
    """Open chain of wall segments."""

    vertices: tuple[Point, ...]
    style: int

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(_pt(v) for v in self.vertices))
        if len(self.vertices) < 2:
            raise ValueError("polyline needs at least 2 vertices")

    def edges(self) -> list[tuple[Point, Point]]:
        v = self.vertices
        return [(v[i], v[i + 1]) for i in range(len(v) - 1)]

    def mirrored(self) -> "Polyline":
        return Polyline(tuple((x, -y) for x, y in self.vertices), self.style)

    def params(self) -> dict:
        return {"vertices": [list(v) for v in self.vertices]}


@dataclass(frozen=True)
class Circle:
    center: Point
    radius: float
    style: int

    def __post_init__(self):
        object.__setattr__(self, "center", _pt(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")

    def edges(self) -> list[tuple[Point, Point]]:
        return []

    def mirrored(self) -> "Circle":
        return Circle((self.center[0], -self.center[1]), self.radius, self.style)

    def params(self) -> dict:
        return {"center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box:
    """Axis-aligned solid box."""

    lo: Point
    hi: Point
    style: int

    def __post_init__(self):
        object.__setattr__(self, "lo", _pt(self.lo))
        object.__setattr__(self, "hi", _pt(self.hi))
        if not (self.hi[0] > self.lo[0] and self.hi[1] > self.lo[1]):
            raise ValueError("box max corner must exceed min corner")

    def corners(self) -> list[Point]:
        (x0, y0), (x1, y1) = self.lo, self.hi
        return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]

    def edges(self) -> list[tuple[Point, Point]]:
        c = self.corners()
        return [(c[i], c[(i + 1) % 4]) for i in range(4)]

    def mirrored(self) -> "Box":
        return Box((self.lo[0], -self.hi[1]), (self.hi[0], -self.lo[1]), self.style)

    def params(self) -> dict:
        return {"min": list(self.lo), "max": list(self.hi)}


@dataclass(frozen=True)
class Polygon:
    """Solid convex polygon, vertices counterclockwise."""

    vertices: tuple[Point, ...]
    style: int

    def __post_init__(self):
        verts = tuple(_pt(v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        n = len(verts)
        for i in range(n):
            a, b, c = verts[i], verts[(i + 1) % n], verts[(i + 2) % n]
            if _cross(b[0] - a[0], b[1] - a[1], c[0] - b[0], c[1] - b[1]) <= 0:
                raise ValueError("polygon must be convex and counterclockwise")

    def edges(self) -> list[tuple[Point, Point]]:
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def mirrored(self) -> "Polygon":
        # Reflection flips orientation; reverse to stay counterclockwise.
        return Polygon(tuple((x, -y) for x, y in reversed(self.vertices)), self.style)

    def params(self) -> dict:
        return {"vertices": [list(v) for v in self.vertices]}


Shape = Union[Polyline, Circle, Box, Polygon]

SHAPE_TYPES = {"polyline": Polyline, "circle": Circle, "box": Box, "polygon": Polygon}
_TYPE_NAMES = {v: k for k, v in SHAPE_TYPES.items()}


def shape_to_dict(shape: Shape) -> dict:
    return {"type": _TYPE_NAMES[type(shape)], "params": shape.params(), "style_id": shape.style}


def shape_from_dict(d: dict) -> Shape:
    kind, p, style = d["type"], d["params"], int(d["style_id"])
    if kind == "polyline":
        return Polyline(tuple(p["vertices"]), style)
    if kind == "circle":
        return Circle(tuple(p["center"]), p["radius"], style)
    if kind == "box":
        return Box(tuple(p["min"]), tuple(p["max"]), style)
    if kind == "polygon":
        return Polygon(tuple(p["vertices"]), style)
    raise ValueError(f"unknown shape type {kind!r}")


def regular_polygon(center: Point, radius: float, n: int, rotation: float, style: int) -> Polygon:
    cx, cy = center
    verts = [
        (cx + radius * math.cos(rotation + 2 * math.pi * k / n), cy + radius * math.sin(rotation + 2 * math.pi * k / n))
        for k in range(n)
    ]
    return Polygon(tuple(verts), style)


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


class Scene:
    """Array form of a shape list for vectorized distance and ray queries.

    Texture coordinates along polylines are continuous across vertices so
    stripes line up at joints.
    """

    def __init__(self, shapes: Sequence[Shape]):
        a, b, style, s0 = [], [], [], []
        cc, cr, cs = [], [], []
        solids = []
        for shape in shapes:
            if isinstance(shape, Circle):
                cc.append(shape.center)
                cr.append(shape.radius)
                cs.append(shape.style)
                continue
            acc = 0.0
            for p, q in shape.edges():
                length = math.hypot(q[0] - p[0], q[1] - p[1])
                # Endpoint order is canonical under y -> -y, so a mirrored scene runs the same
                # arithmetic with negated y terms and ray hits mirror exactly.
                if (q[0], abs(q[1])) < (p[0], abs(p[1])):
                    a.append(q)
                    b.append(p)
                    s0.append(-(acc + length))
                else:
                    a.append(p)
                    b.append(q)
                    s0.append(acc)
                style.append(shape.style)
                acc += length
            if isinstance(shape, Box):
                solids.append(np.array(shape.corners(), dtype=np.float64))
            elif isinstance(shape, Polygon):
                solids.append(np.array(shape.vertices, dtype=np.float64))
        self.seg_a = np.array(a, dtype=np.float64).reshape(-1, 2)
        self.seg_b = np.array(b, dtype=np.float64).reshape(-1, 2)
        self.seg_style = np.array(style, dtype=np.int64)
        self.seg_s0 = np.array(s0, dtype=np.float64)
        self.circ_c = np.array(cc, dtype=np.float64).reshape(-1, 2)
        self.circ_r = np.array(cr, dtype=np.float64)
        self.circ_style = np.array(cs, dtype=np.int64)
        self.solids = solids

    def clearance(self, points: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Distance from each point to the nearest obstacle surface.

        Points inside a solid (box, polygon, circle) get a non-positive value.
        """
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        out = np.empty(len(pts))
        for i in range(0, len(pts), chunk):
            out[i : i + chunk] = self._clearance(pts[i : i + chunk])
        return out

    def _clearance(self, pts: np.ndarray) -> np.ndarray:
        best = np.full(len(pts), np.inf)
        if len(self.seg_a):
            a, e = self.seg_a, self.seg_b - self.seg_a
            wx = pts[:, None, 0] - a[None, :, 0]
            wy = pts[:, None, 1] - a[None, :, 1]
            ee = e[:, 0] ** 2 + e[:, 1] ** 2
            t = np.clip((wx * e[None, :, 0] + wy * e[None, :, 1]) / ee[None, :], 0.0, 1.0)
            dx = wx - t * e[None, :, 0]
            dy = wy - t * e[None, :, 1]
            best = np.minimum(best, np.sqrt(dx * dx + dy * dy).min(axis=1))
        if len(self.circ_r):
            d = np.hypot(pts[:, None, 0] - self.circ_c[None, :, 0], pts[:, None, 1] - self.circ_c[None, :, 1])
            best = np.minimum(best, (d - self.circ_r[None, :]).min(axis=1))
        for verts in self.solids:
            nxt = np.roll(verts, -1, axis=0)
            ex, ey = nxt[:, 0] - verts[:, 0], nxt[:, 1] - verts[:, 1]
            cr = ex[None, :] * (pts[:, None, 1] - verts[None, :, 1]) - ey[None, :] * (pts[:, None, 0] - verts[None, :, 0])
            inside = (cr >= 0).all(axis=1)
            best = np.where(inside, -np.abs(best), best)
        return best
