"""Brute-force analytic ray intersection, written without reference to the renderer's vectorized code."""

import math

from driftbench.geometry import Box, Circle, Polygon, Polyline


def _segments(shape):
    if isinstance(shape, Polyline):
        v = shape.vertices
        return [(v[i], v[i + 1]) for i in range(len(v) - 1)]
    if isinstance(shape, Box):
        (x0, y0), (x1, y1) = shape.lo, shape.hi
        c = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        return [(c[i], c[(i + 1) % 4]) for i in range(4)]
    if isinstance(shape, Polygon):
        v = shape.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]
    return []


def ray_segment(ox, oy, dx, dy, a, b):
    """Distance along the unit ray to segment ab, or inf. Solves o + t*d = a + u*(b-a) by Cramer's rule."""
    ex, ey = b[0] - a[0], b[1] - a[1]
    det = -dx * ey + dy * ex
    if det == 0.0:
        return math.inf
    rx, ry = a[0] - ox, a[1] - oy
    t = (-rx * ey + ry * ex) / det
    u = (dx * ry - dy * rx) / det
    if t > 0.0 and 0.0 <= u <= 1.0:
        return t
    return math.inf


def ray_circle(ox, oy, dx, dy, c, r):
    """Smallest positive root of |o + t*d - c|^2 = r^2."""
    fx, fy = ox - c[0], oy - c[1]
    b = fx * dx + fy * dy
    disc = b * b - (fx * fx + fy * fy - r * r)
    if disc < 0:
        return math.inf
    s = math.sqrt(disc)
    for t in (-b - s, -b + s):
        if t > 0:
            return t
    return math.inf


def planar_depths(shapes, x, y, heading, fov, width, max_range):
    out = []
    for c in range(width):
        rel = fov * (0.5 - (c + 0.5) / width)
        dx, dy = math.cos(heading + rel), math.sin(heading + rel)
        best = math.inf
        for s in shapes:
            if isinstance(s, Circle):
                best = min(best, ray_circle(x, y, dx, dy, s.center, s.radius))
            for a, b in _segments(s):
                best = min(best, ray_segment(x, y, dx, dy, a, b))
        d = best * math.cos(rel)
        out.append(d if d < max_range else max_range)
    return out
