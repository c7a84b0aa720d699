"""Column raycaster: depth scans, grayscale frames, and depth targets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .sim import Pose, World

DEPTH_ROWS = 55
DEPTH_COLS = 74
K_PROJ = 1.0  # focal constant, meters
WALL_HEIGHT = 2.0  # nominal wall height used for checker textures
STRIPE_DARK = 0.6
MIN_ATTENUATION = 0.25


@dataclass(frozen=True)
class CameraModel:
    horizontal_fov: float = 1.57
    image_width: int = 148
    image_height: int = 110
    max_range: float = 25.0
    channels: int = 1

    def __post_init__(self):
        if not 0 < self.horizontal_fov < math.pi:
            raise InvalidInputError("horizontal_fov must lie in (0, pi)")
        if self.image_width <= 0 or self.image_height <= 0:
            raise InvalidInputError("image dimensions must be positive")
        if not self.max_range > 0:
            raise InvalidInputError("max_range must be positive")
        if self.channels not in (1, 3):
            raise InvalidInputError("channels must be 1 or 3")

    def relative_angles(self, width: int | None = None) -> np.ndarray:
        """Ray angle of each column relative to the heading, left (positive) first."""
        w = self.image_width if width is None else width
        # fov * (0.5 - (c + 0.5) / w), written so columns c and w-1-c are exact negatives.
        return self.horizontal_fov * ((w - 1 - 2 * np.arange(w)) / (2.0 * w))

    def to_dict(self) -> dict:
        return {
            "horizontal_fov": self.horizontal_fov,
            "image_width": self.image_width,
            "image_height": self.image_height,
            "max_range": self.max_range,
            "channels": self.channels,
        }


@dataclass(frozen=True)
class DepthScan:
    depth: np.ndarray  # planar distance per column, in (0, max_range]
    style: np.ndarray  # hit style id per column, -1 for a miss
    texcoord: np.ndarray  # distance along the hit surface, meters
    angles: np.ndarray  # ray angle relative to heading per column

    def __len__(self):
        return len(self.depth)

    def mirrored(self) -> "DepthScan":
        return DepthScan(self.depth[::-1].copy(), self.style[::-1].copy(), self.texcoord[::-1].copy(), -self.angles[::-1])


def _cast(world: World, pose: Pose, rel: np.ndarray, max_range: float):
    """Nearest hit of each ray: (euclidean t, style, texcoord)."""
    scene = world.scene
    ang = pose.heading + rel
    dx, dy = np.cos(ang), np.sin(ang)
    n = len(rel)
    best_t = np.full(n, np.inf)
    best_style = np.full(n, -1, dtype=np.int64)
    best_tex = np.zeros(n)
    px, py = pose.x, pose.y
    if len(scene.seg_a):
        ax, ay = scene.seg_a[:, 0], scene.seg_a[:, 1]
        ex, ey = scene.seg_b[:, 0] - ax, scene.seg_b[:, 1] - ay
        wx, wy = ax - px, ay - py
        den = dx[:, None] * ey[None, :] - dy[:, None] * ex[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (wx * ey - wy * ex)[None, :] / den
            u = (wx[None, :] * dy[:, None] - wy[None, :] * dx[:, None]) / den
        ok = (den != 0) & (t > 0) & (u >= 0) & (u <= 1)
        t = np.where(ok, t, np.inf)
        j = np.argmin(t, axis=1)
        rows = np.arange(n)
        tj = t[rows, j]
        hit = tj < best_t
        best_t = np.where(hit, tj, best_t)
        best_style = np.where(hit, scene.seg_style[j], best_style)
        seg_len = np.hypot(ex, ey)
        best_tex = np.where(hit, np.abs(scene.seg_s0[j] + u[rows, j] * seg_len[j]), best_tex)
    if len(scene.circ_r):
        cx, cy, r = scene.circ_c[:, 0], scene.circ_c[:, 1], scene.circ_r
        fx, fy = px - cx, py - cy
        b = dx[:, None] * fx[None, :] + dy[:, None] * fy[None, :]
        c = (fx * fx + fy * fy - r * r)[None, :]
        disc = b * b - c
        with np.errstate(invalid="ignore"):
            sq = np.sqrt(disc)
        t_near = -b - sq
        t_far = -b + sq
        t = np.where(t_near > 0, t_near, t_far)
        t = np.where((disc >= 0) & (t > 0), t, np.inf)
        j = np.argmin(t, axis=1)
        rows = np.arange(n)
        tj = t[rows, j]
        hit = tj < best_t
        tf = np.where(np.isfinite(tj), tj, 0.0)
        hx = px + tf * dx - cx[j]
        hy = py + tf * dy - cy[j]
        with np.errstate(invalid="ignore"):
            tex = r[j] * (np.arctan2(hy, hx) + math.pi)
        best_t = np.where(hit, tj, best_t)
        best_style = np.where(hit, scene.circ_style[j], best_style)
        best_tex = np.where(hit, tex, best_tex)
    return best_t, best_style, best_tex


def raycast(world: World, pose: Pose, cam: CameraModel, width: int | None = None) -> DepthScan:
    """Planar depth per column (euclidean hit distance times cos of the ray offset)."""
    rel = cam.relative_angles(width)
    t, style, tex = _cast(world, pose, rel, cam.max_range)
    depth = t * np.cos(rel)
    miss = ~(depth < cam.max_range)
    depth = np.where(miss, cam.max_range, depth)
    style = np.where(miss, -1, style)
    return DepthScan(depth, style, np.where(miss, 0.0, tex), rel)


def slice_rows(depth: np.ndarray, height: int) -> np.ndarray:
    """Boolean (height, columns) mask of rows covered by each column's wall slice."""
    h = np.clip(height * K_PROJ / depth, 0.0, float(height))
    top = (height - h) / 2.0
    centers = np.arange(height)[:, None] + 0.5
    return (centers >= top[None, :]) & (centers < (top + h)[None, :])


def _texture_factor(texture: str, period: float, s: np.ndarray, z: np.ndarray) -> np.ndarray:
    if texture == "flat":
        return np.ones(np.broadcast(s, z).shape)
    if texture == "vertical-stripe":
        odd = np.floor(s / period).astype(np.int64) % 2 == 1
        return np.broadcast_to(np.where(odd, STRIPE_DARK, 1.0), np.broadcast(s, z).shape)
    if texture == "checker":
        odd = (np.floor(s / period).astype(np.int64) + np.floor(z / period).astype(np.int64)) % 2 == 1
        return np.where(odd, STRIPE_DARK, 1.0)
    frac = s / period - np.floor(s / period)
    return np.broadcast_to(0.6 + 0.4 * frac, np.broadcast(s, z).shape)


def render_frame(world: World, pose: Pose, cam: CameraModel) -> np.ndarray:
    """Grayscale uint8 frame of shape (height, width), or (height, width, 3)."""
    scan = raycast(world, pose, cam)
    H, W = cam.image_height, cam.image_width
    d = scan.depth
    hit = scan.style >= 0
    mask = slice_rows(d, H) & hit[None, :]
    h = np.clip(H * K_PROJ / d, 0.0, float(H))
    top = (H - h) / 2.0
    rows = np.arange(H)[:, None] + 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(h[None, :] > 0, (rows - top[None, :]) / h[None, :] * WALL_HEIGHT, 0.0)
    atten = np.maximum(MIN_ATTENUATION, 1.0 - d / cam.max_range)
    wall = np.zeros((H, W))
    s = scan.texcoord[None, :]
    for sid in np.unique(scan.style[hit]):
        entry = world.style[int(sid)]
        cols = scan.style == sid
        factor = _texture_factor(entry.texture, entry.period, s, z)
        wall = np.where(cols[None, :], entry.shade * factor, wall)
    wall = wall * atten[None, :]
    upper = rows < H / 2.0
    bg = np.where(upper, float(world.style.ceiling_shade), float(world.style.floor_shade))
    img = np.where(mask, wall, np.broadcast_to(bg, (H, W)))
    frame = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    if cam.channels == 3:
        frame = np.repeat(frame[:, :, None], 3, axis=2)
    return frame


def render_depth(world: World, pose: Pose, cam: CameraModel) -> np.ndarray:
    """float32 (55, 74) depth target normalized by max_range; uncovered rows are 1."""
    scan = raycast(world, pose, cam, width=DEPTH_COLS)
    norm = np.clip(scan.depth / cam.max_range, 0.0, 1.0)
    mask = slice_rows(scan.depth, DEPTH_ROWS) & (scan.style >= 0)[None, :]
    return np.where(mask, norm[None, :], 1.0).astype(np.float32)


def pgm_bytes(frame: np.ndarray) -> bytes:
    """Binary P5 PGM encoding of a 2-D uint8 frame."""
    if frame.ndim != 2 or frame.dtype != np.uint8:
        raise InvalidInputError("PGM export needs a 2-D uint8 frame")
    h, w = frame.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + frame.tobytes()


def read_pgm(data: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one P5 image starting at ``offset``; returns (frame, next offset)."""
    from .errors import FormatError

    fields = []
    pos = offset
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    if fields[0] != b"P5" or fields[3] != b"255":
        raise FormatError("not an 8-bit P5 PGM")
    w, h = int(fields[1]), int(fields[2])
    end = pos + w * h
    if end > len(data):
        raise FormatError("truncated PGM pixel data")
    return np.frombuffer(data[pos:end], dtype=np.uint8).reshape(h, w), end


def depth_bytes(depth: np.ndarray) -> bytes:
    return np.asarray(depth, dtype="<f4").tobytes()
