"""Ground-truth-depth pilot used for demonstrations and avoidance labels.

The pilot steers toward the deepest (window-averaged) direction and is
pushed away from whatever is closer than ``d_safe``. Every sum is taken in
mirror-paired order so that a mirrored scan yields exactly the negated
command.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .render import CameraModel, DepthScan, raycast
from .sim import Action, Observation, Pose, World


@dataclass(frozen=True)
class ExpertParams:
    d_safe: float = 3.0
    k_attract: float = 0.6
    k_repulse: float = 4.0
    smoothing_window: float = 0.26

    def __post_init__(self):
        for name in ("d_safe", "k_attract", "k_repulse", "smoothing_window"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")


class Label(str, enum.Enum):
    LEFT = "left"
    STRAIGHT = "straight"
    RIGHT = "right"


LABEL_EPS = 0.05
BREAKPOINT = 0.3
VOTE_WINDOWS = 20  # final second at 20 fps


def smoothed_depth(depth: np.ndarray, half: int) -> np.ndarray:
    """Mean over columns j-half..j+half (truncated at the edges).

    Accumulates d[j-k] + d[j+k] for k = 1..half so mirrored inputs give
    mirrored outputs bit for bit.
    """
    n = len(depth)
    total = depth.copy()
    count = np.ones(n)
    for k in range(1, half + 1):
        left = np.full(n, np.nan)
        right = np.full(n, np.nan)
        left[k:] = depth[:-k]
        right[:-k] = depth[k:]
        lv, rv = ~np.isnan(left), ~np.isnan(right)
        pair = np.where(lv & rv, left + right, np.where(lv, left, np.where(rv, right, 0.0)))
        total = total + pair
        count = count + lv + rv
    return total / count


def best_direction(scan: DepthScan, cam: CameraModel, p: ExpertParams) -> float:
    """Relative angle of maximal smoothed depth; ties go to the angle nearest 0.

    When the nearest tied angles are +a and -a the result is exactly 0.
    """
    step = cam.horizontal_fov / len(scan.depth)
    half = int(round(0.5 * p.smoothing_window / step))
    sm = smoothed_depth(scan.depth, half)
    peak = sm.max()
    cand = scan.angles[sm == peak]
    nearest = np.abs(cand).min()
    tied = cand[np.abs(cand) == nearest]
    if len(tied) > 1 and tied.max() > 0 > tied.min():
        return 0.0
    return float(tied[0])


def repulsion(scan: DepthScan, p: ExpertParams) -> float:
    """(1/N) * sum sign(theta_c) * max(0, 1 - d_c / d_safe), summed in mirror pairs."""
    push = np.maximum(0.0, 1.0 - scan.depth / p.d_safe)
    sign = np.sign(scan.angles)
    n = len(push)
    h = n // 2
    # Column c and n-1-c have opposite angles.
    pair = sign[:h] * push[:h] + sign[n - 1 : n - 1 - h : -1] * push[n - 1 : n - 1 - h : -1]
    # Negating every element negates the sum exactly, so mirror symmetry holds.
    return float(pair.sum()) / n


def pilot(scan: DepthScan, cam: CameraModel, p: ExpertParams = ExpertParams()) -> Action:
    theta = best_direction(scan, cam, p)
    yaw = p.k_attract * theta - p.k_repulse * repulsion(scan, p)
    return Action(min(1.0, max(-1.0, yaw)))


def label_scan(scan: DepthScan, cam: CameraModel, p: ExpertParams = ExpertParams()) -> Label:
    center = np.abs(scan.angles) < cam.horizontal_fov / 6.0
    if scan.depth[center].min() > p.d_safe:
        return Label.STRAIGHT
    f_left = float(scan.depth[scan.angles > 0].sum())
    f_right = float(scan.depth[scan.angles < 0].sum())
    if f_left > f_right * (1 + LABEL_EPS):
        return Label.LEFT
    if f_right > f_left * (1 + LABEL_EPS):
        return Label.RIGHT
    theta = best_direction(scan, cam, p)
    if theta > 0:
        return Label.LEFT
    if theta < 0:
        return Label.RIGHT
    return Label.STRAIGHT


def discretize(yaw_rate: float) -> Label:
    """Left above +0.3, Right below -0.3, Straight otherwise (boundaries are Straight)."""
    if not math.isfinite(yaw_rate):
        raise InvalidInputError("cannot discretize a non-finite yaw rate")
    if yaw_rate > BREAKPOINT:
        return Label.LEFT
    if yaw_rate < -BREAKPOINT:
        return Label.RIGHT
    return Label.STRAIGHT


def majority(labels: list) -> Label:
    """Most frequent label; a tie goes to whichever tied label occurred last."""
    counts: dict = {}
    for lbl in labels:
        counts[lbl] = counts.get(lbl, 0) + 1
    best = max(counts.values())
    tied = {l for l, c in counts.items() if c == best}
    return next(l for l in reversed(labels) if l in tied)


def label_avoidance(world: World, pose: Pose, cam: CameraModel, p: ExpertParams = ExpertParams()) -> Label:
    """Which turn avoids the obstacle ahead, from ground-truth free space."""
    return label_scan(raycast(world, pose, cam), cam, p)


class ExpertController:
    """Controller wrapper: reads the privileged depth scan from the observation."""

    def __init__(self, params: ExpertParams = ExpertParams()):
        self.params = params

    def __call__(self, obs: Observation) -> Action:
        return pilot(obs.scan, obs.camera, self.params)


def time_to_collision(world: World, pose: Pose, yaw_rate: float = 0.0, horizon: float = 1.5,
                      speed: float = 1.3, body_radius: float = 0.25, resolution: float = 0.005) -> float:
    """Seconds until the body disc hits something flying a constant-yaw arc; inf past ``horizon``."""
    n = int(math.ceil(horizon / resolution))
    t = np.arange(1, n + 1) * resolution
    if yaw_rate == 0.0:
        xs = pose.x + speed * t * math.cos(pose.heading)
        ys = pose.y + speed * t * math.sin(pose.heading)
    else:
        h = pose.heading + yaw_rate * t
        rad = speed / yaw_rate
        xs = pose.x + rad * (np.sin(h) - math.sin(pose.heading))
        ys = pose.y - rad * (np.cos(h) - math.cos(pose.heading))
    clear = world.clearance(np.stack([xs, ys], axis=1))
    hits = np.nonzero(clear < body_radius)[0]
    return float(t[hits[0]]) if len(hits) else math.inf
