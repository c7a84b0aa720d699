"""Demonstration datasets and the synthetic almost-collision set.

Episode directory layout::

    meta.json        manifest (env kind, seed, fps, frame count, camera, styles, outcome)
    frames.pgm.seq   concatenated binary P5 images, one per step
    depth.f32        little-endian float32 depth targets, (steps, 55, 74)
    actions.csv      step,expert_yaw,applied_yaw,x,y,heading (17 significant digits)
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import fmt
from .errors import FormatError, GenerationError, InvalidInputError
from .expert import VOTE_WINDOWS, ExpertController, ExpertParams, Label, discretize, label_avoidance, majority, pilot, time_to_collision
from .geometry import Box, Circle, Polygon, Polyline, regular_polygon
from .procgen import generate
from .render import DEPTH_COLS, DEPTH_ROWS, CameraModel, depth_bytes, pgm_bytes, raycast, read_pgm, render_frame
from .rng import STREAM_ACD, STREAM_TRAIN, SplitMix64, derive_seed
from .sim import (
    DEFAULT_BODY_RADIUS, DEFAULT_DT, DEFAULT_MAX_STEPS, DEFAULT_SPEED, Action, DroneState, EnvKind, EpisodeConfig,
    GoalSpec, Pose, Termination, TRAINING_KINDS, World, check_collision, run_episode, step,
)
from .style import heldout_palette

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
COLLISION_EXCLUDE_STEPS = 10
STREAM_NOISE = 0x6E6F_6973_6500_0005
ACTION_COLUMNS = ("step", "expert_yaw", "applied_yaw", "x", "y", "heading")


# -- episode records --------------------------------------------------------

@dataclass
class EpisodeRecord:
    manifest: dict
    frames: np.ndarray  # (T, H, W) uint8
    depth: np.ndarray  # (T, 55, 74) float32
    expert_yaw: np.ndarray  # (T,) float64
    applied_yaw: np.ndarray  # (T,) float64
    poses: np.ndarray  # (T, 3) float64: x, y, heading

    def __post_init__(self):
        n = len(self.frames)
        if not (len(self.depth) == len(self.expert_yaw) == len(self.applied_yaw) == len(self.poses) == n):
            raise InvalidInputError("episode sequences differ in length")

    def __len__(self):
        return len(self.frames)

    def training_mask(self) -> np.ndarray:
        """Steps usable as control targets: collision endings lose their last few."""
        valid = np.ones(len(self), bool)
        if self.manifest.get("termination") == Termination.COLLISION.value:
            valid[max(0, len(self) - COLLISION_EXCLUDE_STEPS) :] = False
        return valid


def persist_episode(record: EpisodeRecord, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "meta.json").write_text(fmt.dumps(record.manifest), encoding="utf-8")
    with open(out / "frames.pgm.seq", "wb") as f:
        for frame in record.frames:
            f.write(pgm_bytes(frame))
    with open(out / "depth.f32", "wb") as f:
        f.write(depth_bytes(record.depth))
    buf = io.StringIO()
    buf.write(",".join(ACTION_COLUMNS) + "\n")
    for k in range(len(record)):
        row = (record.expert_yaw[k], record.applied_yaw[k], *record.poses[k])
        buf.write(f"{k}," + ",".join(fmt.f17(float(v)) for v in row) + "\n")
    (out / "actions.csv").write_text(buf.getvalue(), encoding="utf-8")


def _read_frames(path: Path, count: int | None = None) -> np.ndarray:
    data = path.read_bytes()
    frames, pos = [], 0
    while pos < len(data):
        frame, pos = read_pgm(data, pos)
        frames.append(frame)
    if count is not None and len(frames) != count:
        raise FormatError(f"{path}: {len(frames)} frames, manifest says {count}")
    return np.stack(frames) if frames else np.zeros((0, 0, 0), np.uint8)


def load_episode(ep_dir, load_depth: bool = True) -> EpisodeRecord:
    d = Path(ep_dir)
    try:
        manifest = json.loads((d / "meta.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"{d}: unreadable meta.json ({e})") from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{d}: unsupported episode format {manifest.get('format_version')}")
    n = int(manifest["frame_count"])
    cam = manifest["camera"]
    frames = _read_frames(d / "frames.pgm.seq", n)
    if n == 0:
        frames = np.zeros((0, cam["image_height"], cam["image_width"]), np.uint8)
    if load_depth:
        raw = (d / "depth.f32").read_bytes()
        if len(raw) != n * DEPTH_ROWS * DEPTH_COLS * 4:
            raise FormatError(f"{d}: depth.f32 has {len(raw)} bytes, expected {n * DEPTH_ROWS * DEPTH_COLS * 4}")
        depth = np.frombuffer(raw, dtype="<f4").reshape(n, DEPTH_ROWS, DEPTH_COLS).astype(np.float32)
    else:
        depth = np.zeros((n, DEPTH_ROWS, DEPTH_COLS), np.float32)
    with open(d / "actions.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(rows[0]) != ACTION_COLUMNS or len(rows) - 1 != n:
        raise FormatError(f"{d}: malformed actions.csv")
    table = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64).reshape(n, 5)
    return EpisodeRecord(manifest, frames, depth, table[:, 0].copy(), table[:, 1].copy(), table[:, 2:].copy())


def stack_frames(record: EpisodeRecord, t: int):
    """Frames (t-2, t-1, t) with the control and depth targets at t."""
    if t < 2 or t >= len(record):
        raise InvalidInputError(f"step {t} out of range for stacking (need 2 <= t < {len(record)})")
    return record.frames[t - 2 : t + 1], float(record.expert_yaw[t]), record.depth[t]


# -- collection ------------------------------------------------------------

class NoisyExpert:
    """Expert whose applied command is perturbed by piecewise-constant uniform noise.

    The clean expert command is still the training label; the perturbation
    only widens the visited state distribution.
    """

    def __init__(self, params: ExpertParams, amplitude: float, hold: int, seed: int):
        self.params, self.amplitude, self.hold = params, amplitude, max(1, hold)
        self.rng = SplitMix64(derive_seed(seed, STREAM_NOISE))
        self.offset = 0.0

    def __call__(self, obs) -> Action:
        a = pilot(obs.scan, obs.camera, self.params)
        if self.amplitude <= 0:
            return a
        if obs.step % self.hold == 0:
            self.offset = self.rng.uniform(-self.amplitude, self.amplitude)
        return Action(min(1.0, max(-1.0, a.yaw_rate + self.offset)))


@dataclass
class CollectOptions:
    expert: ExpertParams = field(default_factory=ExpertParams)
    camera: CameraModel = field(default_factory=CameraModel)
    dt: float = DEFAULT_DT
    max_steps: int = DEFAULT_MAX_STEPS
    noise_amplitude: float = 0.0
    noise_hold: int = 10
    env_params: dict = field(default_factory=dict)  # kind value -> procgen params


def collection_seed(master_seed: int, kind: EnvKind, i: int) -> int:
    return derive_seed(master_seed, STREAM_TRAIN, EnvKind(kind).stream_id, i)


def plan_collection(flights_per_kind: int = 100, kinds=TRAINING_KINDS, master_seed: int = 0) -> list[tuple]:
    """(kind, index, world seed, relative directory) for every flight, in output order."""
    if flights_per_kind < 0:
        raise InvalidInputError("flights_per_kind must be >= 0")
    return [
        (EnvKind(k), i, collection_seed(master_seed, k, i), f"{EnvKind(k).value}/{i:04d}")
        for k in kinds
        for i in range(flights_per_kind)
    ]


def record_episode(world: World, opts: CollectOptions) -> EpisodeRecord:
    frames, depths, expert_yaw, applied = [], [], [], []

    def recorder(obs, action, expert):
        frames.append(obs.frame)
        depths.append(obs.depth)
        applied.append(action.yaw_rate)
        expert_yaw.append(expert.yaw_rate)

    controller = NoisyExpert(opts.expert, opts.noise_amplitude, opts.noise_hold, world.seed)
    cfg = EpisodeConfig(dt=opts.dt, max_steps=opts.max_steps, camera=opts.camera,
                        expert=ExpertController(opts.expert), recorder=recorder)
    result = run_episode(world, controller, cfg)
    cam = opts.camera
    n = len(frames)
    manifest = {
        "format_version": FORMAT_VERSION,
        "env_kind": world.env_kind.value,
        "seed": world.seed,
        "fps": 1.0 / opts.dt,
        "dt": opts.dt,
        "frame_count": n,
        "camera": cam.to_dict(),
        "style_pool": sorted(world.style.entries),
        "expert": asdict(opts.expert),
        "noise_amplitude": opts.noise_amplitude,
        "noise_hold": opts.noise_hold,
        "termination": result.termination.value,
        "distance_traveled": result.distance_traveled,
        "final_pose": result.final_pose.to_list(),
    }
    return EpisodeRecord(
        manifest,
        np.stack(frames) if n else np.zeros((0, cam.image_height, cam.image_width), np.uint8),
        np.stack(depths) if n else np.zeros((0, DEPTH_ROWS, DEPTH_COLS), np.float32),
        np.array(expert_yaw, dtype=np.float64),
        np.array(applied, dtype=np.float64),
        np.array([p.to_list() for p in result.poses[:n]], dtype=np.float64).reshape(n, 3),
    )


def _collect_one(args):
    kind, i, seed, rel, out_dir, opts = args
    world = generate(kind, seed, opts.env_params.get(kind.value))
    rec = record_episode(world, opts)
    persist_episode(rec, Path(out_dir) / rel)
    return kind.value, i, rel, rec.manifest["termination"], rec.manifest["distance_traveled"], len(rec)


@dataclass
class CollectionSummary:
    master_seed: int
    flights_per_kind: int
    episodes: list = field(default_factory=list)  # dicts: kind, index, dir, termination, distance, steps
    success: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def collect(flights_per_kind: int, kinds=TRAINING_KINDS, expert: ExpertParams | None = None, master_seed: int = 0,
            out_dir=None, opts: CollectOptions | None = None, jobs: int = 1) -> CollectionSummary:
    """Fly the expert once per (kind, index) and persist every episode, successful or not."""
    opts = opts or CollectOptions()
    if expert is not None:
        opts.expert = expert
    plan = plan_collection(flights_per_kind, kinds, master_seed)
    summary = CollectionSummary(master_seed, flights_per_kind)
    if not plan:
        return summary
    if out_dir is None:
        raise InvalidInputError("collect needs an output directory")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(k, i, s, rel, str(out), opts) for k, i, s, rel in plan]
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_collect_one, tasks))
        else:
            results = [_collect_one(t) for t in tasks]
    except OSError as e:
        done = sorted(str(p.parent.relative_to(out)) for p in out.glob("*/*/meta.json"))
        raise FormatError(f"collection aborted ({e}); {len(done)} episodes written under {out}") from None
    for kind, i, rel, term, dist, steps in results:
        summary.episodes.append({"kind": kind, "index": i, "dir": rel, "termination": term, "distance": dist, "steps": steps})
        summary.success[kind] = summary.success.get(kind, 0) + (term == Termination.SUCCESS.value)
    (out / "summary.json").write_text(fmt.dumps(summary.to_dict()), encoding="utf-8")
    return summary


def episode_dirs(root) -> list[Path]:
    root = Path(root)
    if not root.is_dir():
        raise FormatError(f"dataset directory {root} does not exist")
    return sorted(p.parent for p in root.glob("*/*/meta.json"))


# -- training sets ------------------------------------------------------------

@dataclass
class Minibatch:
    windows: np.ndarray  # (N, 3, H, W) uint8, oldest frame first
    targets: np.ndarray  # (N,) float32 expert yaw at the last frame
    depth: np.ndarray | None  # (N, 55, 74) float32 at the last frame


@dataclass
class Demonstrations:
    """In-memory training set: per episode frames, depth targets, control targets."""

    frames: list = field(default_factory=list)
    depth: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    valid: list = field(default_factory=list)
    world_seeds: list = field(default_factory=list)

    def add(self, frames, targets, depth=None, valid=None):
        frames = np.asarray(frames, dtype=np.uint8)
        targets = np.asarray(targets, dtype=np.float32)
        if len(frames) != len(targets):
            raise InvalidInputError("frames and targets differ in length")
        self.frames.append(frames)
        self.targets.append(targets)
        self.depth.append(None if depth is None else np.asarray(depth, dtype=np.float32))
        self.valid.append(np.ones(len(targets), bool) if valid is None else np.asarray(valid, bool))

    def add_record(self, rec: EpisodeRecord, with_depth: bool = True):
        self.world_seeds.append(int(rec.manifest["seed"]))
        self.add(rec.frames, rec.expert_yaw, rec.depth if with_depth else None, rec.training_mask())

    @property
    def has_depth(self) -> bool:
        return bool(self.depth) and all(d is not None for d in self.depth)

    def samples(self, stride: int = 1) -> np.ndarray:
        """(episode, t) pairs with t >= 2 and a valid target; every ``stride``-th per episode."""
        out = []
        for e, v in enumerate(self.valid):
            ts = [t for t in range(2, len(v)) if v[t]][::stride]
            out.extend((e, t) for t in ts)
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    def batch(self, idx: np.ndarray, with_depth: bool = False) -> Minibatch:
        windows = np.stack([self.frames[e][t - 2 : t + 1] for e, t in idx])
        targets = np.array([self.targets[e][t] for e, t in idx], dtype=np.float32)
        depth = np.stack([self.depth[e][t] for e, t in idx]) if with_depth else None
        return Minibatch(windows, targets, depth)


def iterate_minibatches(samples: np.ndarray, batch_size: int, seed: int, epoch: int):
    """Shuffled index batches; the order is a function of (seed, epoch) only."""
    order = np.random.default_rng([seed, epoch]).permutation(len(samples))
    for start in range(0, len(order), batch_size):
        yield samples[order[start : start + batch_size]]


def load_demonstrations(root, kinds=None, with_depth: bool = True, limit_per_kind: int | None = None) -> Demonstrations:
    demos = Demonstrations()
    wanted = None if kinds is None else {EnvKind(k).value for k in kinds}
    per_kind: dict = {}
    for d in episode_dirs(root):
        kind = d.parent.name
        if wanted is not None and kind not in wanted:
            continue
        if limit_per_kind is not None and per_kind.get(kind, 0) >= limit_per_kind:
            continue
        per_kind[kind] = per_kind.get(kind, 0) + 1
        demos.add_record(load_episode(d, load_depth=with_depth), with_depth)
    return demos


# -- almost-collision set --------------------------------------------------------

class Cue:
    PERSPECTIVE = "Perspective"
    VERTICAL = "Vertical"
    STRANGE = "Strange"


ACD_TTC = 1.5
ACD_MIN_FRAMES = 60
ACD_MAX_FRAMES = 68
ACD_ATTEMPTS = 40
# Extra frames the approach may continue, still blocked, waiting for the pilot to commit.
ACD_COMMIT_FRAMES = 15


@dataclass(frozen=True)
class Location:
    location_id: int
    name: str
    cue: str
    world: World
    approach: float  # distance from spawn to the obstacle face
    spawn_y: float  # nominal lateral spawn offset
    jitter_y: float
    face_x: float


def _acd_world(shapes, bounds, style_ids, night=False) -> World:
    return World(tuple(shapes), bounds, GoalSpec("radial-distance", 1000.0), heldout_palette(style_ids, night),
                 EnvKind.CORRIDOR, 0, (Pose(0.0, 0.0, 0.0),))


def _dead_end(width: float, length: float, styles, passage: float | None = None) -> World:
    """Straight corridor along +x ending in a wall, with a side passage opening to the left."""
    h = width / 2
    side = 6.0
    gap = DEAD_END_PASSAGE if passage is None else passage
    a, b, c = styles
    return _acd_world(
        [
            Polyline(((-2.0, -h), (length, -h)), a),
            Polyline(((length, -h), (length, h + side)), b),
            Polyline(((-2.0, h), (length - gap, h), (length - gap, h + side)), a),
            Polyline(((length - gap, h + side), (length, h + side)), c),
            Polyline(((-2.0, -h), (-2.0, h)), c),
        ],
        (-3.0, -h - 1.0, length + 1.0, h + side + 1.0),
        styles,
    )


LEAD_IN_WIDTH = 2.2
# Openings start inside the straight-flight 1.5 s reach (1.95 m plus body radius),
# so the expert cannot peel away before the almost-collision point.
LEAD_IN_EXIT = 1.6
DEAD_END_PASSAGE = 1.6
ROOM_HALF = 8.0


def _room(face: float, wall_style: int) -> list:
    """Narrow lead-in corridor along +x that opens just before ``face`` into a closed room."""
    h = LEAD_IN_WIDTH / 2
    x_exit, far = face - LEAD_IN_EXIT, face + 8.0
    return [
        Polyline(((-2.0, -h), (x_exit, -h), (x_exit, -ROOM_HALF), (far, -ROOM_HALF), (far, ROOM_HALF),
                  (x_exit, ROOM_HALF), (x_exit, h), (-2.0, h)), wall_style),
        Polyline(((-2.0, -h), (-2.0, h)), wall_style),
    ]


def _pillar_field(face: float, styles, night: bool) -> World:
    """Dense pillar screen ahead and to the right of the lead-in exit; the left is open."""
    a, b = styles
    shapes = _room(face, a)
    for row, x in enumerate((face, face + 0.9, face + 1.8)):
        y = -7.4 + 0.35 * row
        while y < 0.9:
            shapes.append(Circle((x + 0.3, y), 0.3, b))
            y += 0.75
    return _acd_world(shapes, (-3.0, -ROOM_HALF - 1.0, face + 9.0, ROOM_HALF + 1.0), styles, night)


def _odd_cluster(face: float, styles, seed: int) -> World:
    """Irregular polygons packed ahead and to the right of the lead-in exit; the left is open."""
    a, b, c = styles
    rng = SplitMix64(seed)
    # A solid strip just behind the front row keeps the screen closed between polygons.
    shapes = _room(face, a) + [Box((face + 0.3, -7.4), (face + 1.1, 1.2), c)]
    y, k = -7.2, 0
    while y < 0.8:
        r = rng.uniform(0.45, 0.75)
        n = 3 + rng.randint(5)
        shapes.append(regular_polygon((face + r, y + r), r, n, rng.angle(), b if k % 2 else c))
        if rng.random() < 0.5:
            shapes.append(Box((face + 1.4, y), (face + 2.2, y + 2 * r), b))
        y += 2 * r + 0.05
        k += 1
    return _acd_world(shapes, (-3.0, -ROOM_HALF - 1.0, face + 9.0, ROOM_HALF + 1.0), styles)


def acd_locations() -> list[Location]:
    """The seven fixed held-out mini-worlds, each built with its obstacle opening on the left."""
    return [
        Location(1, "atrium", Cue.PERSPECTIVE, _dead_end(2.8, 16.0, (100, 104, 108)), 4.0, 0.0, 0.3, 16.0),
        Location(2, "corridor-1", Cue.PERSPECTIVE, _dead_end(1.8, 16.0, (101, 105, 109)), 4.0, 0.0, 0.15, 16.0),
        Location(3, "corridor-2", Cue.PERSPECTIVE, _dead_end(2.4, 16.0, (102, 106, 110)), 4.0, 0.0, 0.25, 16.0),
        Location(4, "office", Cue.STRANGE, _odd_cluster(14.0, (103, 111, 113), 0x0FF1CE), 4.0, 0.0, 0.3, 14.0),
        Location(5, "cafeteria", Cue.STRANGE, _odd_cluster(14.0, (107, 112, 115), 0xCAFE), 4.0, 0.0, 0.3, 14.0),
        Location(6, "garage", Cue.VERTICAL, _pillar_field(14.0, (114, 103), False), 4.0, 0.0, 0.3, 14.0),
        Location(7, "night", Cue.VERTICAL, _pillar_field(14.0, (106, 110), True), 4.0, 0.0, 0.3, 14.0),
    ]


ACD_COUNTS = (4, 4, 4, 4, 3, 3, 3)
STRAIGHT_LOCATION = 2


def acd_plan(trajectories: int = 25) -> list[tuple[int, str]]:
    """(location id, target label) per trajectory: one Straight, the rest alternating Left/Right."""
    if trajectories < 1:
        raise InvalidInputError("need at least one trajectory")
    counts = list(ACD_COUNTS)
    scale = trajectories / sum(counts)
    counts = [max(0, int(math.floor(c * scale))) for c in counts]
    i = 0
    while sum(counts) < trajectories:
        counts[i % len(counts)] += 1
        i += 1
    plan, turn = [], 0
    for loc, n in zip(range(1, 8), counts):
        for j in range(n):
            if loc == STRAIGHT_LOCATION and j == 0:
                plan.append((loc, Label.STRAIGHT.value))
            else:
                plan.append((loc, (Label.LEFT if turn % 2 == 0 else Label.RIGHT).value))
                turn += 1
    if not any(lbl == Label.STRAIGHT.value for _, lbl in plan):
        plan[0] = (STRAIGHT_LOCATION, Label.STRAIGHT.value)
    return plan


@dataclass
class AcdTrajectory:
    index: int
    location_id: int
    location: str
    cue: str
    label: str
    mirrored: bool
    frames: np.ndarray
    poses: np.ndarray  # (T, 3)
    expert_yaw: np.ndarray  # (T,)
    final_ttc: float

    def meta(self) -> dict:
        return {
            "index": self.index, "location_id": self.location_id, "location": self.location, "cue": self.cue,
            "label": self.label, "mirrored": self.mirrored, "frame_count": len(self.frames),
            "final_ttc": self.final_ttc if math.isfinite(self.final_ttc) else None,
        }


@dataclass
class AlmostCollisionSet:
    trajectories: list
    locations: dict  # location_id -> Location

    def world_for(self, traj: AcdTrajectory) -> World:
        w = self.locations[traj.location_id].world
        return w.mirrored() if traj.mirrored else w

    @property
    def total_frames(self) -> int:
        return sum(len(t.frames) for t in self.trajectories)


def _fly_expert(world, spawn, steps, expert, dt, speed, radius):
    """Poses visited by the expert pilot; stops early on collision."""
    cam = CameraModel()
    drone = DroneState(spawn, speed, radius)
    poses, yaws = [], []
    for _ in range(steps):
        a = pilot(raycast(world, drone.pose, cam), cam, expert)
        poses.append(drone.pose)
        yaws.append(a.yaw_rate)
        drone = step(world, drone, a, dt)
        if check_collision(world, drone):
            break
    return poses, yaws


def _acd_trajectory(index, loc: Location, target: str, seed: int, expert: ExpertParams, cam: CameraModel,
                    dt=DEFAULT_DT, speed=DEFAULT_SPEED, radius=DEFAULT_BODY_RADIUS) -> AcdTrajectory:
    rng = SplitMix64(seed)
    length = ACD_MIN_FRAMES + rng.randint(ACD_MAX_FRAMES - ACD_MIN_FRAMES + 1)
    mirrored = target == Label.RIGHT.value
    world = loc.world.mirrored() if mirrored else loc.world
    sign = -1.0 if mirrored else 1.0
    run = length * speed * dt
    for attempt in range(ACD_ATTEMPTS):
        y0 = loc.spawn_y + rng.uniform(-loc.jitter_y, loc.jitter_y)
        h0 = rng.uniform(-0.12, 0.12)
        if target == Label.STRAIGHT.value:
            x0 = rng.uniform(0.0, 1.0)
        else:
            x0 = loc.face_x - loc.approach - run + rng.uniform(-0.5, 0.5)
        spawn = Pose(x0, sign * y0, sign * h0)
        if check_collision(world, DroneState(spawn, speed, radius)):
            continue
        budget = length + int(3 * (loc.approach + run) / (speed * dt))
        poses, yaws = _fly_expert(world, spawn, budget, expert, dt, speed, radius)

        def blocked(p):
            if target == Label.STRAIGHT.value:
                # Straight only stays a single suitable control where both hard turns are blocked.
                return (time_to_collision(world, p, 1.0, ACD_TTC, speed, radius) < ACD_TTC
                        and time_to_collision(world, p, -1.0, ACD_TTC, speed, radius) < ACD_TTC)
            return time_to_collision(world, p, 0.0, ACD_TTC, speed, radius) < ACD_TTC

        first = next((k for k in range(length - 1, len(poses)) if blocked(poses[k])), None)
        if first is None:
            continue
        # While still blocked, keep flying until the pilot's own final-second vote commits to the
        # label, so the trajectory has exactly one suitable control.
        stop = None
        for k in range(first, min(first + ACD_COMMIT_FRAMES + 1, len(poses))):
            if k > first and not blocked(poses[k]):
                break
            window = yaws[max(k - length + 3, k - VOTE_WINDOWS + 1) : k + 1]
            if (label_avoidance(world, poses[k], cam, expert).value == target
                    and majority([discretize(y) for y in window]).value == target):
                stop = k
                break
        if stop is None:
            continue
        final = poses[stop]
        kept = poses[stop - length + 1 : stop + 1]
        frames = np.stack([render_frame(world, p, cam) for p in kept])
        return AcdTrajectory(
            index, loc.location_id, loc.name, loc.cue, target, mirrored, frames,
            np.array([p.to_list() for p in kept]), np.array(yaws[stop - length + 1 : stop + 1]),
            time_to_collision(world, final, 0.0, ACD_TTC, speed, radius),
        )
    raise GenerationError(f"location {loc.name} could not produce a {target} trajectory in {ACD_ATTEMPTS} attempts")


def gen_almost_collision(master_seed: int = 0, trajectories: int = 25, out_dir=None,
                         expert: ExpertParams | None = None, camera: CameraModel | None = None) -> AlmostCollisionSet:
    expert = expert or ExpertParams()
    cam = camera or CameraModel()
    locs = {l.location_id: l for l in acd_locations()}
    trajs = []
    for j, (loc_id, target) in enumerate(acd_plan(trajectories)):
        seed = derive_seed(master_seed, STREAM_ACD, j)
        trajs.append(_acd_trajectory(j, locs[loc_id], target, seed, expert, cam))
    acd = AlmostCollisionSet(trajs, locs)
    if out_dir is not None:
        persist_acd(acd, out_dir)
    return acd


def persist_acd(acd: AlmostCollisionSet, out_dir) -> None:
    out = Path(out_dir)
    (out / "locations").mkdir(parents=True, exist_ok=True)
    for loc in acd.locations.values():
        (out / "locations" / f"{loc.location_id}.json").write_text(loc.world.to_json(), encoding="utf-8")
    index = {"format_version": FORMAT_VERSION, "trajectories": [], "locations": []}
    for loc in acd.locations.values():
        index["locations"].append({"location_id": loc.location_id, "name": loc.name, "cue": loc.cue,
                                   "approach": loc.approach, "spawn_y": loc.spawn_y, "jitter_y": loc.jitter_y,
                                   "face_x": loc.face_x})
    for t in acd.trajectories:
        rel = f"traj_{t.index:02d}"
        d = out / rel
        d.mkdir(exist_ok=True)
        with open(d / "frames.pgm.seq", "wb") as f:
            for frame in t.frames:
                f.write(pgm_bytes(frame))
        buf = io.StringIO()
        buf.write("step,x,y,heading,expert_yaw\n")
        for k, (p, y) in enumerate(zip(t.poses, t.expert_yaw)):
            buf.write(f"{k}," + ",".join(fmt.f17(float(v)) for v in (*p, y)) + "\n")
        (d / "poses.csv").write_text(buf.getvalue(), encoding="utf-8")
        index["trajectories"].append({**t.meta(), "dir": rel})
    (out / "index.json").write_text(fmt.dumps(index), encoding="utf-8")


def load_acd(root) -> AlmostCollisionSet:
    from .sim import load_world

    root = Path(root)
    try:
        index = json.loads((root / "index.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"{root}: unreadable almost-collision index ({e})") from None
    if index.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{root}: unsupported almost-collision format")
    locs = {}
    for l in index["locations"]:
        world = load_world(root / "locations" / f"{l['location_id']}.json")
        locs[l["location_id"]] = Location(l["location_id"], l["name"], l["cue"], world, l["approach"], l["spawn_y"],
                                          l["jitter_y"], l["face_x"])
    trajs = []
    for m in index["trajectories"]:
        d = root / m["dir"]
        frames = _read_frames(d / "frames.pgm.seq", m["frame_count"])
        with open(d / "poses.csv", newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))[1:]
        table = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64).reshape(-1, 4)
        trajs.append(AcdTrajectory(m["index"], m["location_id"], m["location"], m["cue"], m["label"], m["mirrored"],
                                   frames, table[:, :3].copy(), table[:, 3].copy(), math.inf if m["final_ttc"] is None else float(m["final_ttc"])))
    return AlmostCollisionSet(trajs, locs)
