"""Randomized invariants checked with hypothesis."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_world
from driftbench.expert import BREAKPOINT, Label, discretize, majority, pilot
from driftbench.fmt import f17
from driftbench.geometry import Box, Circle, Polyline
from driftbench.render import CameraModel, raycast, render_depth
from driftbench.rng import SplitMix64
from driftbench.sim import Action, DroneState, Pose, normalize_angle, step

FAST = settings(max_examples=60, deadline=None)

finite = st.floats(-40, 40, allow_nan=False)
heading = st.floats(-math.pi, math.pi, allow_nan=False)
yaw = st.floats(-5, 5, allow_nan=False)


@st.composite
def scenes(draw):
    shapes = []
    for i in range(draw(st.integers(1, 5))):
        cx, cy = draw(st.floats(3, 15)), draw(st.floats(-8, 8))
        kind = draw(st.sampled_from(["box", "circle", "segment"]))
        if kind == "box":
            w, h = draw(st.floats(0.3, 3)), draw(st.floats(0.3, 3))
            shapes.append(Box((cx - w / 2, cy - h / 2), (cx + w / 2, cy + h / 2), i % 3))
        elif kind == "circle":
            shapes.append(Circle((cx, cy), draw(st.floats(0.2, 2)), i % 3))
        else:
            dx, dy = draw(st.floats(-3, 3)), draw(st.floats(0.5, 4))
            shapes.append(Polyline(((cx - dx, cy - dy), (cx + dx, cy + dy)), i % 3))
    return make_world(shapes)


@FAST
@given(finite, finite, heading, yaw)
def test_heading_stays_normalized(x, y, h, w):
    s = step(make_world([]), DroneState(Pose(x, y, h)), Action(w), 0.05)
    assert -math.pi < s.pose.heading <= math.pi


@FAST
@given(heading, st.floats(1, 50), st.sampled_from([-1.0, 1.0]))
def test_turn_rate_clamp(h, mag, sign):
    s = step(make_world([]), DroneState(Pose(0, 0, h)), Action(sign * mag), 0.05)
    assert s.pose.heading == normalize_angle(h + sign * 0.05)


@FAST
@given(st.lists(yaw, min_size=1, max_size=40))
def test_path_bound(actions):
    w = make_world([])
    s = DroneState(Pose(0, 0, 0))
    travelled = 0.0
    for a in actions:
        n = step(w, s, Action(a), 0.05)
        travelled += math.hypot(n.pose.x - s.pose.x, n.pose.y - s.pose.y)
        s = n
    assert travelled <= s.forward_speed * len(actions) * 0.05 + 1e-9


@FAST
@given(st.floats(3.0, 20.0), st.floats(0.0, 2.5), st.floats(-5, 5))
def test_monotone_approach(wall_x, delta, y0):
    w = make_world([Polyline(((wall_x, -60.0), (wall_x, 60.0)), 0)])
    cam = CameraModel(image_width=149)
    before = raycast(w, Pose(0.0, y0, 0.0), cam).depth[74]
    after = raycast(w, Pose(delta, y0, 0.0), cam).depth[74]
    assert abs((before - after) - delta) <= 1e-9


@FAST
@given(scenes(), st.floats(-2, 2), st.floats(-2, 2), heading)
def test_scan_range_and_depth_frame_range(world, x, y, h):
    cam = CameraModel()
    scan = raycast(world, Pose(x, y, h), cam)
    assert np.all(scan.depth > 0) and np.all(scan.depth <= cam.max_range)
    d = render_depth(world, Pose(x, y, h), cam)
    assert d.min() >= 0.0 and d.max() <= 1.0


@FAST
@given(scenes())
def test_mirror_symmetry(world):
    cam = CameraModel()
    a = raycast(world, Pose(0, 0, 0), cam)
    b = raycast(world.mirrored(), Pose(0, 0, 0), cam)
    assert np.array_equal(a.depth, b.depth[::-1])
    assert np.array_equal(a.style, b.style[::-1])


@FAST
@given(scenes(), st.floats(-2, 2), st.floats(-2, 2), heading)
def test_pilot_bounded_and_antisymmetric(world, x, y, h):
    cam = CameraModel()
    scan = raycast(world, Pose(x, y, h), cam)
    u = pilot(scan, cam).yaw_rate
    assert -1.0 <= u <= 1.0
    assert pilot(scan.mirrored(), cam).yaw_rate == -u


@FAST
@given(st.floats(-10, 10, allow_nan=False))
def test_discretize_piecewise(u):
    want = Label.LEFT if u > BREAKPOINT else Label.RIGHT if u < -BREAKPOINT else Label.STRAIGHT
    assert discretize(u) == want
    assert discretize(-u) == {Label.LEFT: Label.RIGHT, Label.RIGHT: Label.LEFT}.get(want, want)


@FAST
@given(st.lists(st.sampled_from(list(Label)), min_size=1, max_size=30))
def test_majority_returns_a_most_common_label(labels):
    top = max(labels.count(l) for l in Label)
    assert labels.count(majority(labels)) == top


@FAST
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_f17_round_trip(x):
    assert float(f17(x)) == x


@FAST
@given(st.integers(0, 2**64 - 1), st.integers(1, 10**6))
def test_randint_in_range(seed, n):
    r = SplitMix64(seed)
    assert all(0 <= r.randint(n) < n for _ in range(20))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_model_serialization_round_trip(tmp_path_factory, seed):
    from nn_models import TINY
    from driftbench.policy import PolicySpec, build, load_policy, save_policy

    model = build(PolicySpec.from_dict({**TINY, "arch": "auxd"}), seed)
    path = tmp_path_factory.mktemp("ser") / "m.dshc"
    save_policy(model, path)
    back = load_policy(path)
    for name, value in model.params.items():
        assert value.dtype == back.params[name].dtype and np.array_equal(value, back.params[name])
