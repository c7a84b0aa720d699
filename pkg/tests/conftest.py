import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import pytest

from driftbench.geometry import Box, Circle, Polyline
from driftbench.sim import EnvKind, GoalSpec, World
from driftbench.style import StyleEntry, StylePalette

PALETTE = StylePalette({0: StyleEntry(128), 1: StyleEntry(200, "vertical-stripe", 0.5), 2: StyleEntry(60, "checker", 1.0)})

# Filled in by tests/test_acceptance.py; printed once at the end of the run.
ACCEPTANCE_LINES: dict = {}


def make_world(obstacles, bounds=(-50.0, -50.0, 50.0, 50.0), goal=None, kind=EnvKind.CANYON, spawns=None):
    goal = goal or GoalSpec("axial-distance", 45.0, ((0.0, 0.0), (1.0, 0.0)))
    kw = {} if spawns is None else {"spawns": tuple(spawns)}
    return World(tuple(obstacles), bounds, goal, PALETTE, kind, 0, **kw)


def box_room(half=10.0, style=0):
    """Closed square room of side 2*half centered on the origin, walls as one polyline."""
    h = half
    return make_world([Polyline(((-h, -h), (h, -h), (h, h), (-h, h), (-h, -h)), style)],
                      bounds=(-h - 1, -h - 1, h + 1, h + 1))


def straight_canyon(width=3.0, length=60.0):
    h = width / 2
    return make_world([Polyline(((-2.0, -h), (length, -h)), 0), Polyline(((-2.0, h), (length, h)), 1)],
                      bounds=(-3.0, -h - 1, length + 1, h + 1))


def tree_digest(root) -> dict:
    """Relative path -> sha256 for every file below ``root``."""
    import hashlib
    from pathlib import Path

    root = Path(root)
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def room():
    return box_room()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def acd_set():
    from driftbench.datakit import gen_almost_collision

    return gen_almost_collision(0)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Two short flights per training kind, persisted once per session."""
    from driftbench.datakit import CollectOptions, collect

    out = tmp_path_factory.mktemp("dataset")
    collect(2, master_seed=3, out_dir=out, opts=CollectOptions(max_steps=60))
    return out


__all__ = ["Box", "Circle", "Polyline", "make_world", "box_room", "straight_canyon", "tree_digest", "ACCEPTANCE_LINES"]
