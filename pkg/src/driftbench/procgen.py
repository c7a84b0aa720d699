"""Seeded generators for the training worlds and the fixed validation corridor."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .errors import GenerationError, InvalidInputError
from .geometry import Box, Circle, Polygon, Polyline, regular_polygon
from .rng import STREAM_RETRY, SplitMix64, derive_seed
from .sim import DEFAULT_BODY_RADIUS, EnvKind, GoalSpec, Pose, World
from .style import HELDOUT_POOL, heldout_palette, training_palette

MAX_ATTEMPTS = 32
GRID_CELL = 0.25
CANYON_GOAL = 45.0
FOREST_GOAL = 45.0
SANDBOX_GOAL = 7.0
CORRIDOR_GOAL = 75.0


@dataclass(frozen=True)
class CanyonParams:
    width: float = 3.0
    segment_length: float = 4.0
    bend_range: float = 0.5
    total_length: float = 55.0

    def validate(self, body_radius: float = DEFAULT_BODY_RADIUS):
        if not self.width > 2 * (body_radius + 0.2):
            raise InvalidInputError("canyon width too narrow for the drone")
        if not self.total_length > CANYON_GOAL:
            raise InvalidInputError("canyon must be longer than the goal distance")
        if not (self.segment_length > 0 and 0 <= self.bend_range < math.pi / 2):
            raise InvalidInputError("bad canyon segment_length or bend_range")


@dataclass(frozen=True)
class ForestParams:
    strip_length: float = 55.0
    strip_width: float = 12.0
    trunk_radius_range: tuple = (0.2, 0.5)
    trunk_count: int = 60
    min_clearance: float = 1.2

    def validate(self, body_radius: float = DEFAULT_BODY_RADIUS):
        lo, hi = self.trunk_radius_range
        if not (0 < lo <= hi):
            raise InvalidInputError("bad trunk radius range")
        if self.trunk_count < 0 or self.min_clearance <= 2 * body_radius:
            raise InvalidInputError("forest needs min_clearance wider than the drone")
        if not self.strip_length > FOREST_GOAL:
            raise InvalidInputError("forest strip must be longer than the goal distance")


SANDBOX_TEMPLATES = (
    "cylinder", "wide-cylinder", "thin-pillar", "box", "long-box", "rotated-cube", "l-wall",
    "straight-wall", "triangle-prism", "pentagon-prism", "hexagon-prism", "arc-wall", "zigzag-wall",
)


@dataclass(frozen=True)
class SandboxParams:
    box_size: float = 20.0
    object_count: int = 13
    min_spawn_clearance: float = 2.0

    def validate(self, body_radius: float = DEFAULT_BODY_RADIUS):
        if self.box_size != 20.0:
            raise InvalidInputError("the sandbox is fixed at 20 x 20 m")
        if not 0 <= self.object_count <= 4 * len(SANDBOX_TEMPLATES):
            raise InvalidInputError("object_count out of range")
        if self.min_spawn_clearance < 2 * body_radius:
            raise InvalidInputError("min_spawn_clearance below spawn margin")


@dataclass(frozen=True)
class CorridorParams:
    """The corridor has no free parameters; kept for a uniform interface."""


PARAM_TYPES = {
    EnvKind.CANYON: CanyonParams,
    EnvKind.FOREST: ForestParams,
    EnvKind.SANDBOX: SandboxParams,
    EnvKind.CORRIDOR: CorridorParams,
}


def default_params(kind: EnvKind):
    return PARAM_TYPES[EnvKind(kind)]()


def params_to_dict(params) -> dict:
    return asdict(params)


def generate(kind, seed: int, params=None, body_radius: float = DEFAULT_BODY_RADIUS) -> World:
    """Build a world; deterministic in (kind, seed, params).

    Infeasible draws are retried with derived sub-seeds; the returned world
    still records the caller's ``seed``.
    """
    kind = EnvKind(kind)
    params = params if params is not None else default_params(kind)
    if not isinstance(params, PARAM_TYPES[kind]):
        raise InvalidInputError(f"{type(params).__name__} does not configure {kind.value}")
    if kind is EnvKind.CORRIDOR:
        return corridor(seed)
    params.validate(body_radius)
    build = {EnvKind.CANYON: _canyon, EnvKind.FOREST: _forest, EnvKind.SANDBOX: _sandbox}[kind]
    for attempt in range(MAX_ATTEMPTS):
        sub = seed if attempt == 0 else derive_seed(seed, STREAM_RETRY, attempt)
        world = build(SplitMix64(derive_seed(sub, kind.stream_id)), params, seed)
        if world is not None and spawn_clear(world, body_radius) and feasible(world, body_radius):
            return world
    raise GenerationError(f"no feasible {kind.value} world for seed {seed} after {MAX_ATTEMPTS} attempts")


def spawn_clear(world: World, body_radius: float = DEFAULT_BODY_RADIUS) -> bool:
    pts = [(p.x, p.y) for p in world.spawns]
    return bool((world.clearance(pts) >= 2 * body_radius).all())


# -- canyon ---------------------------------------------------------------

def _offset_polyline(points: list, offset: float) -> list:
    """Offset a polyline to the left by ``offset`` using miter joins."""
    out = []
    n = len(points)
    dirs = []
    for i in range(n - 1):
        (ax, ay), (bx, by) = points[i], points[i + 1]
        length = math.hypot(bx - ax, by - ay)
        dirs.append(((bx - ax) / length, (by - ay) / length))
    for i, (px, py) in enumerate(points):
        if i == 0:
            nx, ny = -dirs[0][1], dirs[0][0]
            out.append((px + offset * nx, py + offset * ny))
        elif i == n - 1:
            nx, ny = -dirs[-1][1], dirs[-1][0]
            out.append((px + offset * nx, py + offset * ny))
        else:
            n1 = (-dirs[i - 1][1], dirs[i - 1][0])
            n2 = (-dirs[i][1], dirs[i][0])
            denom = 1.0 + n1[0] * n2[0] + n1[1] * n2[1]
            out.append((px + offset * (n1[0] + n2[0]) / denom, py + offset * (n1[1] + n2[1]) / denom))
    return out


def canyon_centerline(rng: SplitMix64, params: CanyonParams) -> list:
    """Centerline starting 2 m behind spawn, straight through the origin.

    Each later segment's direction relative to +x is drawn i.i.d. from
    [-bend_range, bend_range], so the canyon meanders around the x-axis.
    """
    pts = [(-2.0, 0.0), (2.0, 0.0)]
    length = 2.0
    while length < params.total_length:
        phi = rng.uniform(-params.bend_range, params.bend_range)
        x, y = pts[-1]
        pts.append((x + params.segment_length * math.cos(phi), y + params.segment_length * math.sin(phi)))
        length += params.segment_length
    return pts


def _canyon(rng: SplitMix64, params: CanyonParams, seed: int) -> World:
    center = canyon_centerline(rng, params)
    hw = params.width / 2
    left = _offset_polyline(center, hw)
    right = _offset_polyline(center, -hw)
    palette, (s_left, s_right, s_cap) = training_palette(rng, 3)
    walls = (
        Polyline(tuple(left), s_left),
        Polyline(tuple(right), s_right),
        Polyline((right[0], left[0]), s_cap),
    )
    xs = [p[0] for p in left + right]
    ys = [p[1] for p in left + right]
    bounds = (min(xs) - 2.0, min(ys) - 2.0, max(xs) + 2.0, max(ys) + 2.0)
    goal = GoalSpec("axial-distance", CANYON_GOAL, ((0.0, 0.0), (1.0, 0.0)))
    return World(walls, bounds, goal, palette, EnvKind.CANYON, seed)


# -- forest ---------------------------------------------------------------

def _forest(rng: SplitMix64, params: ForestParams, seed: int) -> World | None:
    half = params.strip_width / 2
    x_end = params.strip_length + 4.0
    palette, styles = training_palette(rng, 4)
    trunk_styles = styles[:2]
    walls = [
        Polyline(((-2.0, half), (x_end, half)), styles[2]),
        Polyline(((-2.0, -half), (x_end, -half)), styles[2]),
        Polyline(((-2.0, -half), (-2.0, half)), styles[3]),
    ]
    lo, hi = params.trunk_radius_range
    trunks: list[Circle] = []
    tries = 0
    max_tries = 400 * max(1, params.trunk_count)
    while len(trunks) < params.trunk_count:
        tries += 1
        if tries > max_tries:
            return None
        r = rng.uniform(lo, hi)
        x = rng.uniform(1.0, params.strip_length)
        y = rng.uniform(-half, half)
        if abs(y) + r + params.min_clearance > half:
            continue
        if math.hypot(x, y) - r < 1.5:
            continue
        if any(math.hypot(x - c.center[0], y - c.center[1]) - r - c.radius < params.min_clearance for c in trunks):
            continue
        trunks.append(Circle((x, y), r, trunk_styles[rng.randint(2)]))
    bounds = (-3.0, -half - 1.0, x_end + 1.0, half + 1.0)
    goal = GoalSpec("axial-distance", FOREST_GOAL, ((0.0, 0.0), (1.0, 0.0)))
    return World(tuple(walls) + tuple(trunks), bounds, goal, palette, EnvKind.FOREST, seed)


# -- sandbox --------------------------------------------------------------

def _rotate(points, angle, cx, cy):
    c, s = math.cos(angle), math.sin(angle)
    return tuple((cx + c * x - s * y, cy + s * x + c * y) for x, y in points)


def sandbox_object(template: str, cx: float, cy: float, rot: float, scale: float, style: int):
    """One parametric object; returns (shape, bounding radius)."""
    if template == "cylinder":
        return Circle((cx, cy), 0.5 * scale, style), 0.5 * scale
    if template == "wide-cylinder":
        return Circle((cx, cy), 1.0 * scale, style), 1.0 * scale
    if template == "thin-pillar":
        return Circle((cx, cy), 0.15, style), 0.15
    if template == "box":
        h = 0.6 * scale
        return Box((cx - h, cy - h), (cx + h, cy + h), style), h * math.sqrt(2)
    if template == "long-box":
        pts = ((-1.2, -0.3), (1.2, -0.3), (1.2, 0.3), (-1.2, 0.3))
        pts = tuple((x * scale, y * scale) for x, y in pts)
        return Polygon(_rotate(pts, rot, cx, cy), style), 1.24 * scale
    if template == "rotated-cube":
        pts = tuple((x * 0.7 * scale, y * 0.7 * scale) for x, y in ((-1, -1), (1, -1), (1, 1), (-1, 1)))
        return Polygon(_rotate(pts, rot, cx, cy), style), 0.99 * scale
    if template == "l-wall":
        pts = ((1.5, 0.0), (0.0, 0.0), (0.0, 1.5))
        pts = tuple((x * scale - 0.5, y * scale - 0.5) for x, y in pts)
        return Polyline(_rotate(pts, rot, cx, cy), style), 1.6 * scale
    if template == "straight-wall":
        pts = ((-1.5 * scale, 0.0), (1.5 * scale, 0.0))
        return Polyline(_rotate(pts, rot, cx, cy), style), 1.5 * scale
    if template == "triangle-prism":
        return regular_polygon((cx, cy), 0.8 * scale, 3, rot, style), 0.8 * scale
    if template == "pentagon-prism":
        return regular_polygon((cx, cy), 0.7 * scale, 5, rot, style), 0.7 * scale
    if template == "hexagon-prism":
        return regular_polygon((cx, cy), 0.7 * scale, 6, rot, style), 0.7 * scale
    if template == "arc-wall":
        r = 1.2 * scale
        pts = tuple((r * math.cos(a), r * math.sin(a) - r * 0.5) for a in np.linspace(0.2, math.pi - 0.2, 7))
        return Polyline(_rotate(pts, rot, cx, cy), style), 1.3 * scale
    if template == "zigzag-wall":
        pts = tuple((x * scale, y * scale) for x, y in ((-1.5, 0), (-0.75, 0.5), (0, 0), (0.75, 0.5), (1.5, 0)))
        return Polyline(_rotate(pts, rot, cx, cy), style), 1.6 * scale
    raise InvalidInputError(f"unknown sandbox template {template!r}")


def _sandbox(rng: SplitMix64, params: SandboxParams, seed: int) -> World | None:
    half = params.box_size / 2
    palette, styles = training_palette(rng, 4 + params.object_count)
    corners = ((-half, -half), (half, -half), (half, half), (-half, half))
    walls = tuple(Polyline((corners[i], corners[(i + 1) % 4]), styles[i]) for i in range(4))
    objects = []
    placed: list[tuple[float, float, float]] = []
    for k in range(params.object_count):
        template = SANDBOX_TEMPLATES[k % len(SANDBOX_TEMPLATES)]
        for _ in range(200):
            scale = rng.uniform(0.8, 1.25)
            rot = rng.angle()
            cx = rng.uniform(-half + 0.5, half - 0.5)
            cy = rng.uniform(-half + 0.5, half - 0.5)
            shape, rad = sandbox_object(template, cx, cy, rot, scale, styles[4 + k])
            if abs(cx) + rad > half - 0.3 or abs(cy) + rad > half - 0.3:
                continue
            if math.hypot(cx, cy) - rad < params.min_spawn_clearance:
                continue
            if any(math.hypot(cx - px, cy - py) < rad + pr + 0.6 for px, py, pr in placed):
                continue
            # Exact spawn clearance (bounding circles are loose for walls).
            if World((shape,), (-half, -half, half, half), GoalSpec("radial-distance", 1.0), palette,
                     EnvKind.SANDBOX).scene.clearance([(0.0, 0.0)])[0] < params.min_spawn_clearance:
                continue
            objects.append(shape)
            placed.append((cx, cy, rad))
            break
        else:
            return None
    bounds = (-half - 0.5, -half - 0.5, half + 0.5, half + 0.5)
    goal = GoalSpec("radial-distance", SANDBOX_GOAL)
    return World(walls + tuple(objects), bounds, goal, palette, EnvKind.SANDBOX, seed)


# -- corridor -------------------------------------------------------------

CORRIDOR_WIDTH = 2.5
CORRIDOR_AXIS = ((0.0, 0.0), (30.0, 0.0), (30.0, 16.0), (62.0, 16.0))
CORRIDOR_FORWARD_SPAWN = Pose(0.0, 0.0, 0.0)
CORRIDOR_REVERSE_SPAWN = Pose(62.0, 16.0, math.pi)


def _recessed(start, end, recesses, depth_sign):
    """Straight axis-aligned wall from start to end with rectangular door recesses.

    ``recesses`` are (offset along wall, width, depth); depth is pushed along
    ``depth_sign`` times the wall's outward normal.
    """
    (x0, y0), (x1, y1) = start, end
    length = math.hypot(x1 - x0, y1 - y0)
    ux, uy = (x1 - x0) / length, (y1 - y0) / length
    nx, ny = depth_sign * -uy, depth_sign * ux
    pts = [start]
    for off, width, depth in recesses:
        a = (x0 + ux * off, y0 + uy * off)
        b = (x0 + ux * (off + width), y0 + uy * (off + width))
        pts += [a, (a[0] + nx * depth, a[1] + ny * depth), (b[0] + nx * depth, b[1] + ny * depth), b]
    pts.append(end)
    return tuple(pts)


def corridor(seed: int = 0) -> World:
    """Fixed office-style corridor: two 90-degree turns, door recesses, held-out styles.

    Axis (spawn to far end): (0,0) east to (30,0), north to (30,16), east to
    (62,16); 78 m long, 2.5 m wide, capped 2 m behind both spawns.
    """
    s = sorted(HELDOUT_POOL)
    h = CORRIDOR_WIDTH / 2
    # South/east wall of leg 1, east wall of leg 2, south wall of leg 3.
    walls = [
        Polyline(_recessed((-2.0, -h), (12.0, -h), [(5.0, 1.0, 0.45)], -1), s[0]),
        Polyline(_recessed((12.0, -h), (31.25, -h), [(6.0, 1.2, 0.45), (14.0, 1.0, 0.45)], -1), s[1]),
        Polyline(_recessed((31.25, -h), (31.25, 14.75), [(5.0, 1.0, 0.4)], -1), s[2]),
        Polyline(_recessed((31.25, 14.75), (64.0, 14.75), [(6.0, 1.0, 0.45), (18.0, 1.2, 0.45)], -1), s[3]),
        # North/west side.
        Polyline(_recessed((-2.0, h), (15.0, h), [(9.0, 1.0, 0.45)], 1), s[4]),
        Polyline(_recessed((15.0, h), (28.75, h), [(1.0, 1.2, 0.45)], 1), s[5]),
        Polyline(_recessed((28.75, h), (28.75, 17.25), [(7.0, 1.0, 0.4)], 1), s[6]),
        Polyline(_recessed((28.75, 17.25), (46.0, 17.25), [(8.0, 1.0, 0.45)], 1), s[7]),
        Polyline(_recessed((46.0, 17.25), (64.0, 17.25), [(5.0, 1.2, 0.45)], 1), s[8]),
        # End caps.
        Polyline(((-2.0, -h), (-2.0, h)), s[9]),
        Polyline(((64.0, 14.75), (64.0, 17.25)), s[10]),
        # Pillar-like door frames flush with the walls.
        Box((20.0, h - 0.2), (20.4, h), s[11]),
        Box((40.0, 14.75), (40.4, 14.95), s[12]),
        Box((31.05, 6.0), (31.25, 6.4), s[13]),
    ]
    palette = heldout_palette([w.style for w in walls])
    goal = GoalSpec("axial-distance", CORRIDOR_GOAL, CORRIDOR_AXIS)
    return World(tuple(walls), (-3.0, -3.0, 65.0, 19.0), goal, palette, EnvKind.CORRIDOR, seed,
                 (CORRIDOR_FORWARD_SPAWN, CORRIDOR_REVERSE_SPAWN))


def corridor_zero_action_clearance(direction: int = 0, body_radius: float = DEFAULT_BODY_RADIUS) -> float:
    """Analytic straight-line distance from a corridor spawn until the body touches the wall ahead."""
    if direction == 0:
        # Heading east along y=0: outer wall of the first turn at x = 30 + 1.25.
        return 30.0 + CORRIDOR_WIDTH / 2 - body_radius - CORRIDOR_FORWARD_SPAWN.x
    # Heading west along y=16: west wall of leg 2 at x = 30 - 1.25.
    return CORRIDOR_REVERSE_SPAWN.x - (30.0 - CORRIDOR_WIDTH / 2) - body_radius


# -- feasibility ----------------------------------------------------------

def occupancy_grid(world: World, body_radius: float = DEFAULT_BODY_RADIUS, cell: float = GRID_CELL):
    """Free-space mask on cell centers with obstacles inflated by the body radius."""
    xmin, ymin, xmax, ymax = world.bounds
    xs = xmin + cell * (np.arange(int(math.floor((xmax - xmin) / cell))) + 0.5)
    ys = ymin + cell * (np.arange(int(math.floor((ymax - ymin) / cell))) + 0.5)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    free = (world.clearance(pts) >= body_radius).reshape(gx.shape)
    return free, xs, ys


def goal_mask(world: World, xs: np.ndarray, ys: np.ndarray, spawn: Pose) -> np.ndarray:
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    goal = world.goal
    if goal.kind == "radial-distance":
        return np.hypot(gx - spawn.x, gy - spawn.y) >= goal.threshold
    s0, tangent = goal.axis_coordinate(spawn.x, spawn.y)
    sign = 1.0 if math.cos(spawn.heading - tangent) >= 0 else -1.0
    prog = goal.axis_coordinates(gx, gy)
    return sign * (prog - s0) >= goal.threshold


def feasible(world: World, body_radius: float = DEFAULT_BODY_RADIUS) -> bool:
    """Whether a 4-connected free path joins every spawn cell to the goal set."""
    free, xs, ys = occupancy_grid(world, body_radius)
    labels, _ = ndimage.label(free)
    for spawn in world.spawns:
        i = int(np.argmin(np.abs(xs - spawn.x)))
        j = int(np.argmin(np.abs(ys - spawn.y)))
        if not free[i, j]:
            return False
        reach = labels == labels[i, j]
        if not (reach & goal_mask(world, xs, ys, spawn)).any():
            return False
    return True


def feasible_bfs(world: World, body_radius: float = DEFAULT_BODY_RADIUS) -> bool:
    """Plain breadth-first search on the same grid; an independent check of :func:`feasible`."""
    free, xs, ys = occupancy_grid(world, body_radius)
    for spawn in world.spawns:
        target = goal_mask(world, xs, ys, spawn)
        start = (int(np.argmin(np.abs(xs - spawn.x))), int(np.argmin(np.abs(ys - spawn.y))))
        if not free[start]:
            return False
        seen = np.zeros_like(free)
        seen[start] = True
        queue = deque([start])
        found = False
        while queue:
            i, j = queue.popleft()
            if target[i, j]:
                found = True
                break
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if 0 <= a < free.shape[0] and 0 <= b < free.shape[1] and free[a, b] and not seen[a, b]:
                    seen[a, b] = True
                    queue.append((a, b))
        if not found:
            return False
    return True
