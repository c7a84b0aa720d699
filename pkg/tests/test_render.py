import math

import numpy as np
import pytest

from conftest import box_room, make_world, straight_canyon
from driftbench.errors import InvalidInputError
from driftbench.geometry import Box, Circle, Polyline
from driftbench.procgen import generate
from driftbench.render import (CameraModel, DEPTH_COLS, DEPTH_ROWS, depth_bytes, pgm_bytes, raycast, read_pgm,
                               render_depth, render_frame)
from driftbench.sim import Pose
from oracle import planar_depths


def center_col_cam():
    # Odd width puts a column exactly on the heading.
    return CameraModel(image_width=149)


def test_center_column_box_half_width(room):
    scan = raycast(room, Pose(0, 0, 0), center_col_cam())
    assert scan.depth[74] == pytest.approx(10.0, abs=1e-12)


def test_planar_correction_at_45_degrees(room):
    # Three columns over 135 degrees put column 0 at fov/3 = 45 degrees.
    cam = CameraModel(horizontal_fov=0.75 * math.pi, image_width=3)
    scan = raycast(room, Pose(0, 0, 0), cam)
    assert scan.angles[0] == pytest.approx(math.pi / 4)
    assert scan.depth[0] == pytest.approx(10.0, abs=1e-12)


def test_oracle_match_in_room(room):
    cam = CameraModel()
    pose = Pose(2.0, 3.0, 0.4)
    got = raycast(room, pose, cam).depth
    want = planar_depths(room.obstacles, 2.0, 3.0, 0.4, cam.horizontal_fov, cam.image_width, cam.max_range)
    assert np.max(np.abs(got - np.array(want))) < 1e-9


def test_miss_saturates_and_style_minus_one():
    w = make_world([])
    scan = raycast(w, Pose(0, 0, 0), CameraModel())
    assert (scan.depth == 25.0).all() and (scan.style == -1).all()


def test_mirror_reverses_columns():
    w = make_world([Box((3, 0.5), (4, 2.0), 0), Circle((6, -1.5), 0.7, 1), Polyline(((8, -4), (9, 3)), 2)])
    a = raycast(w, Pose(0, 0, 0), CameraModel())
    b = raycast(w.mirrored(), Pose(0, 0, 0), CameraModel())
    assert np.array_equal(a.depth, b.depth[::-1])
    assert np.array_equal(a.style, b.style[::-1])


def test_frame_shape_and_determinism():
    w = generate("canyon", 7)
    cam = CameraModel()
    f1 = render_frame(w, Pose(0, 0, 0), cam)
    f2 = render_frame(w, Pose(0, 0, 0), cam)
    assert f1.shape == (110, 148) and f1.dtype == np.uint8
    assert np.array_equal(f1, f2)


def test_uniform_wall_identical_columns():
    # Planar depth to a wall square to the heading is the same in every column.
    w = make_world([Polyline(((3.0, -40.0), (3.0, 40.0)), 0)])
    f = render_frame(w, Pose(0, 0, 0), CameraModel())
    assert (f == f[:, :1]).all()


def test_perspective_slices_grow_outward():
    w = straight_canyon()
    cam = CameraModel()
    d = raycast(w, Pose(0, 0, 0), cam).depth
    half = cam.image_width // 2
    # Nearer walls toward the image edges: planar depth falls monotonically from the center out.
    left = d[:half][::-1]
    right = d[half:]
    assert np.all(np.diff(left) <= 1e-12) and np.all(np.diff(right) <= 1e-12)


def test_render_depth_empty_world_all_ones():
    d = render_depth(make_world([]), Pose(0, 0, 0), CameraModel())
    assert d.shape == (DEPTH_ROWS, DEPTH_COLS) and (d == 1.0).all()


def test_render_depth_wall_at_half_range():
    w = make_world([Polyline(((12.5, -40), (12.5, 40)), 0)])
    d = render_depth(w, Pose(0, 0, 0), CameraModel())
    col = d[:, DEPTH_COLS // 2]
    covered = col[col < 1.0]
    assert len(covered) > 0 and np.allclose(covered, 0.5, atol=1e-6)


def test_render_depth_matches_oracle_columns():
    w = generate("canyon", 7)
    cam = CameraModel()
    pose = Pose(10.0, 0.5, 0.1)
    d = render_depth(w, pose, cam)
    want = np.array(planar_depths(w.obstacles, pose.x, pose.y, pose.heading, cam.horizontal_fov, DEPTH_COLS,
                                  cam.max_range)) / cam.max_range
    mid = d[DEPTH_ROWS // 2]
    assert np.max(np.abs(mid - want)) < 1e-6


def test_pgm_round_trip():
    f = render_frame(generate("forest", 3), Pose(0, 0, 0), CameraModel())
    data = pgm_bytes(f)
    back, end = read_pgm(data)
    assert np.array_equal(back, f) and end == len(data)
    assert len(depth_bytes(np.zeros((DEPTH_ROWS, DEPTH_COLS), np.float32))) == DEPTH_ROWS * DEPTH_COLS * 4


@pytest.mark.parametrize("kw", [{"horizontal_fov": 0.0}, {"image_width": 0}, {"max_range": -1.0}, {"channels": 2}])
def test_camera_validation(kw):
    with pytest.raises(InvalidInputError):
        CameraModel(**kw)
