"""World and drone model, kinematic stepping, collisions, and the episode loop."""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from . import fmt
from .errors import InvalidInputError
from .geometry import Scene, Shape, shape_from_dict, shape_to_dict
from .style import StylePalette

TWO_PI = 2.0 * math.pi
DEFAULT_DT = 0.05
DEFAULT_MAX_STEPS = 1200
DEFAULT_SPEED = 1.3
DEFAULT_BODY_RADIUS = 0.25
MAX_YAW_RATE = 1.0


def normalize_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    r = math.remainder(a, TWO_PI)
    return math.pi if r == -math.pi else r


class EnvKind(str, enum.Enum):
    CANYON = "canyon"
    FOREST = "forest"
    SANDBOX = "sandbox"
    CORRIDOR = "corridor"

    @property
    def stream_id(self) -> int:
        return {"canyon": 1, "forest": 2, "sandbox": 3, "corridor": 4}[self.value]


TRAINING_KINDS = (EnvKind.CANYON, EnvKind.FOREST, EnvKind.SANDBOX)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise InvalidInputError(f"non-finite pose {self!r}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "heading", normalize_angle(float(self.heading)))

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.heading]


@dataclass(frozen=True)
class DroneState:
    pose: Pose
    forward_speed: float = DEFAULT_SPEED
    body_radius: float = DEFAULT_BODY_RADIUS

    def __post_init__(self):
        if not self.forward_speed > 0:
            raise InvalidInputError("forward_speed must be positive")
        if not self.body_radius > 0:
            raise InvalidInputError("body_radius must be positive")


@dataclass(frozen=True)
class Action:
    """Yaw-rate command in rad/s; positive turns left (counterclockwise)."""

    yaw_rate: float

    @property
    def clamped(self) -> float:
        return min(MAX_YAW_RATE, max(-MAX_YAW_RATE, self.yaw_rate))


@dataclass(frozen=True)
class GoalSpec:
    """Success rule.

    ``axial-distance`` measures progress along ``axis`` (a polyline, extended
    past both ends); ``radial-distance`` is straight-line distance from spawn.
    """

    kind: str
    threshold: float
    axis: tuple = ((0.0, 0.0), (1.0, 0.0))

    def __post_init__(self):
        if self.kind not in ("axial-distance", "radial-distance"):
            raise InvalidInputError(f"unknown goal kind {self.kind!r}")
        if not self.threshold > 0:
            raise InvalidInputError("goal threshold must be positive")
        object.__setattr__(self, "axis", tuple((float(x), float(y)) for x, y in self.axis))

    def axis_coordinate(self, x: float, y: float) -> tuple[float, float]:
        """Arc-length coordinate of the closest axis point, and the axis direction there."""
        pts = self.axis
        best = None
        acc = 0.0
        n = len(pts) - 1
        for i in range(n):
            (ax, ay), (bx, by) = pts[i], pts[i + 1]
            ex, ey = bx - ax, by - ay
            length = math.hypot(ex, ey)
            t = ((x - ax) * ex + (y - ay) * ey) / (length * length)
            lo = -math.inf if i == 0 else 0.0
            hi = math.inf if i == n - 1 else 1.0
            t = min(hi, max(lo, t))
            d = math.hypot(ax + t * ex - x, ay + t * ey - y)
            if best is None or d < best[0]:
                best = (d, acc + t * length, math.atan2(ey, ex))
            acc += length
        return best[1], best[2]

    def axis_coordinates(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Vectorized arc-length coordinate (same rule as :meth:`axis_coordinate`)."""
        pts = self.axis
        n = len(pts) - 1
        best_d = np.full(np.shape(x), np.inf)
        best_s = np.zeros(np.shape(x))
        acc = 0.0
        for i in range(n):
            (ax, ay), (bx, by) = pts[i], pts[i + 1]
            ex, ey = bx - ax, by - ay
            length = math.hypot(ex, ey)
            t = ((x - ax) * ex + (y - ay) * ey) / (length * length)
            t = np.clip(t, -np.inf if i == 0 else 0.0, np.inf if i == n - 1 else 1.0)
            d = np.hypot(ax + t * ex - x, ay + t * ey - y)
            closer = d < best_d
            best_d = np.where(closer, d, best_d)
            best_s = np.where(closer, acc + t * length, best_s)
            acc += length
        return best_s

    def to_dict(self) -> dict:
        return {"kind": self.kind, "threshold": self.threshold, "axis": [list(p) for p in self.axis]}


@dataclass(frozen=True)
class World:
    obstacles: tuple
    bounds: tuple  # (xmin, ymin, xmax, ymax)
    goal: GoalSpec
    style: StylePalette
    env_kind: EnvKind
    seed: int = 0
    spawns: tuple = (Pose(0.0, 0.0, 0.0),)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        object.__setattr__(self, "env_kind", EnvKind(self.env_kind))
        for s in self.obstacles:
            if s.style not in self.style:
                raise InvalidInputError(f"style id {s.style} missing from palette")

    @cached_property
    def scene(self) -> Scene:
        return Scene(self.obstacles)

    def clearance(self, points) -> np.ndarray:
        """Distance to the nearest obstacle or bounds edge (negative outside bounds)."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        xmin, ymin, xmax, ymax = self.bounds
        to_bounds = np.minimum.reduce([pts[:, 0] - xmin, xmax - pts[:, 0], pts[:, 1] - ymin, ymax - pts[:, 1]])
        return np.minimum(self.scene.clearance(pts), to_bounds)

    def mirrored(self) -> "World":
        """Reflection about the x-axis; spawn headings are negated."""
        xmin, ymin, xmax, ymax = self.bounds
        goal = GoalSpec(self.goal.kind, self.goal.threshold, tuple((x, -y) for x, y in self.goal.axis))
        spawns = tuple(Pose(p.x, -p.y, -p.heading) for p in self.spawns)
        return World(
            tuple(s.mirrored() for s in self.obstacles), (xmin, -ymax, xmax, -ymin), goal, self.style, self.env_kind, self.seed, spawns
        )

    def to_dict(self) -> dict:
        return {
            "env_kind": self.env_kind.value,
            "seed": self.seed,
            "bounds": list(self.bounds),
            "goal": self.goal.to_dict(),
            "style": self.style.to_dict(),
            "spawns": [p.to_list() for p in self.spawns],
            "obstacles": [shape_to_dict(s) for s in self.obstacles],
        }

    def to_json(self) -> str:
        return fmt.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "World":
        g = d["goal"]
        return cls(
            obstacles=tuple(shape_from_dict(s) for s in d["obstacles"]),
            bounds=tuple(d["bounds"]),
            goal=GoalSpec(g["kind"], float(g["threshold"]), tuple(tuple(p) for p in g["axis"])),
            style=StylePalette.from_dict(d["style"]),
            env_kind=EnvKind(d["env_kind"]),
            seed=int(d["seed"]),
            spawns=tuple(Pose(*p) for p in d.get("spawns", [[0.0, 0.0, 0.0]])),
        )


def save_world(world: World, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(world.to_json())


def load_world(path) -> World:
    import json

    with open(path, encoding="utf-8") as f:
        return World.from_dict(json.load(f))


def step(world: World, drone: DroneState, action: Action, dt: float) -> DroneState:
    """Advance one tick: turn first, then translate along the new heading."""
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"dt must be finite and positive, got {dt!r}")
    if not math.isfinite(action.yaw_rate):
        raise InvalidInputError(f"non-finite yaw rate {action.yaw_rate!r}")
    p = drone.pose
    heading = normalize_angle(p.heading + action.clamped * dt)
    dist = drone.forward_speed * dt
    pose = Pose(p.x + dist * math.cos(heading), p.y + dist * math.sin(heading), heading)
    return DroneState(pose, drone.forward_speed, drone.body_radius)


def check_collision(world: World, drone: DroneState) -> bool:
    p = drone.pose
    return bool(world.clearance([(p.x, p.y)])[0] < drone.body_radius)


def goal_progress(world: World, poses: Sequence[Pose]) -> float:
    start, final = poses[0], poses[-1]
    goal = world.goal
    if goal.kind == "radial-distance":
        return math.hypot(final.x - start.x, final.y - start.y)
    s0, tangent = goal.axis_coordinate(start.x, start.y)
    s1, _ = goal.axis_coordinate(final.x, final.y)
    sign = 1.0 if math.cos(start.heading - tangent) >= 0 else -1.0
    return sign * (s1 - s0)


def goal_reached(world: World, poses: Sequence[Pose]) -> bool:
    """Whether the last pose satisfies the world's goal rule, measured from the first."""
    if not poses:
        raise InvalidInputError("goal_reached needs a nonempty trace")
    return goal_progress(world, poses) >= world.goal.threshold


class Termination(str, enum.Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"
    ERROR = "error"


class Observation:
    """What a controller sees at one step; renders lazily and caches.

    ``frame`` is the camera image. ``scan`` is ground-truth depth and exists
    for the expert pilot only.
    """

    def __init__(self, world: World, pose: Pose, camera, step: int):
        self.world = world
        self.pose = pose
        self.camera = camera
        self.step = step

    @cached_property
    def frame(self) -> np.ndarray:
        from .render import render_frame

        return render_frame(self.world, self.pose, self.camera)

    @cached_property
    def scan(self):
        from .render import raycast

        return raycast(self.world, self.pose, self.camera)

    @cached_property
    def depth(self) -> np.ndarray:
        from .render import render_depth

        return render_depth(self.world, self.pose, self.camera)


Controller = Callable[[Observation], Action]


@dataclass
class EpisodeConfig:
    dt: float = DEFAULT_DT
    max_steps: int = DEFAULT_MAX_STEPS
    camera: object = None
    spawn: Optional[Pose] = None
    forward_speed: float = DEFAULT_SPEED
    body_radius: float = DEFAULT_BODY_RADIUS
    # Labeling controller evaluated alongside the acting one (dataset recording).
    expert: Optional[Controller] = None
    # Called as recorder(obs, action, expert_action) every step.
    recorder: Optional[Callable] = None


@dataclass(frozen=True)
class TraceStep:
    pose: Pose
    action: Action
    expert: Optional[Action] = None


@dataclass
class EpisodeResult:
    distance_traveled: float
    termination: Termination
    steps: int
    trace: list = field(default_factory=list)
    final_pose: Optional[Pose] = None
    error: str = ""

    @property
    def poses(self) -> list[Pose]:
        return [t.pose for t in self.trace] + ([self.final_pose] if self.final_pose is not None else [])

    def to_dict(self) -> dict:
        return {
            "distance_traveled": self.distance_traveled,
            "termination": self.termination.value,
            "steps": self.steps,
            "final_pose": self.final_pose.to_list() if self.final_pose else None,
            "error": self.error,
            "trace": [
                [t.pose.to_list(), t.action.yaw_rate, None if t.expert is None else t.expert.yaw_rate] for t in self.trace
            ],
        }

    def digest(self) -> str:
        return hashlib.sha256(fmt.dumps(self.to_dict(), indent=None).encode()).hexdigest()


def run_episode(world: World, controller: Controller, cfg: Optional[EpisodeConfig] = None) -> EpisodeResult:
    """Closed-loop rollout: observe, act, step, then test collision, goal, timeout."""
    from .render import CameraModel

    cfg = cfg or EpisodeConfig()
    camera = cfg.camera or CameraModel()
    spawn = cfg.spawn or world.spawns[0]
    drone = DroneState(spawn, cfg.forward_speed, cfg.body_radius)
    if check_collision(world, drone):
        raise InvalidInputError(f"spawn pose {spawn} is in collision")
    trace: list[TraceStep] = []
    distance = 0.0
    step_len = drone.forward_speed * cfg.dt
    for k in range(cfg.max_steps):
        obs = Observation(world, drone.pose, camera, k)
        action = controller(obs)
        if not math.isfinite(action.yaw_rate):
            return EpisodeResult(distance, Termination.ERROR, k, trace, drone.pose, f"non-finite action at step {k}")
        expert = cfg.expert(obs) if cfg.expert is not None else None
        if cfg.recorder is not None:
            cfg.recorder(obs, action, expert)
        trace.append(TraceStep(drone.pose, action, expert))
        drone = step(world, drone, action, cfg.dt)
        distance += step_len
        if check_collision(world, drone):
            return EpisodeResult(distance, Termination.COLLISION, k + 1, trace, drone.pose)
        if goal_reached(world, (spawn, drone.pose)):
            return EpisodeResult(distance, Termination.SUCCESS, k + 1, trace, drone.pose)
    return EpisodeResult(distance, Termination.TIMEOUT, cfg.max_steps, trace, drone.pose)
