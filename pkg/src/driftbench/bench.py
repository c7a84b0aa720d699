"""Evaluation protocol: online distance, seeded populations, top-k ranking, almost-collision scoring."""

from __future__ import annotations

import logging
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .datakit import AlmostCollisionSet, Cue, Demonstrations
from .errors import InvalidInputError, NumericError
from .expert import BREAKPOINT, VOTE_WINDOWS, ExpertController, ExpertParams, Label, discretize, majority, pilot
from .procgen import CORRIDOR_FORWARD_SPAWN, CORRIDOR_REVERSE_SPAWN, corridor, generate
from .render import CameraModel, raycast
from .rng import STREAM_EVAL, derive_seed
from .sim import DEFAULT_DT, DEFAULT_MAX_STEPS, EnvKind, EpisodeConfig, run_episode

log = logging.getLogger(__name__)

ALL_KINDS = (EnvKind.CANYON, EnvKind.FOREST, EnvKind.SANDBOX, EnvKind.CORRIDOR)
STREAM_POPULATION = 0x706F_7075_6C00_0006
TOPK = (5, 3, 1)
CUE_ORDER = (Cue.STRANGE, Cue.PERSPECTIVE, Cue.VERTICAL)


# -- online evaluation --------------------------------------------------------

@dataclass
class OnlineEvalConfig:
    env_kind: EnvKind = EnvKind.CORRIDOR
    runs: int = 10
    master_seed: int = 0
    max_steps: int = DEFAULT_MAX_STEPS
    dt: float = DEFAULT_DT
    env_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.env_kind = EnvKind(self.env_kind)
        if self.runs < 1:
            raise InvalidInputError("runs must be >= 1")

    def eval_seeds(self) -> list[int]:
        """World seeds for the procedural kinds; empty for the fixed corridor."""
        if self.env_kind == EnvKind.CORRIDOR:
            return []
        return [derive_seed(self.master_seed, STREAM_EVAL, self.env_kind.stream_id, i) for i in range(self.runs)]

    def directions(self) -> list[str]:
        """Corridor runs alternate forward/reverse so the two directions split evenly."""
        return ["forward" if i % 2 == 0 else "reverse" for i in range(self.runs)]


@dataclass
class RunResult:
    index: int
    seed: Optional[int]
    direction: str
    distance: float
    termination: str
    steps: int


@dataclass
class OnlineEvalResult:
    env_kind: str
    runs: list = field(default_factory=list)

    @property
    def mean_distance(self) -> float:
        return sum(r.distance for r in self.runs) / len(self.runs)


def assert_disjoint(train_seeds, eval_seeds) -> None:
    overlap = set(train_seeds) & set(eval_seeds)
    if overlap:
        raise InvalidInputError(f"evaluation seeds overlap training seeds: {sorted(overlap)[:5]}")


def controller_factory(policy) -> Callable:
    """Fresh per-episode controller for a Model, the string "expert", or a zero-argument factory."""
    from .nn import Model
    from .policy import PolicyController

    if isinstance(policy, Model):
        return lambda: PolicyController(policy)
    if policy == "expert":
        return lambda: ExpertController(ExpertParams())
    if callable(policy):
        return policy
    raise InvalidInputError(f"cannot evaluate {policy!r}")


def eval_online(policy, cfg: OnlineEvalConfig, train_seeds=()) -> OnlineEvalResult:
    """Mean collision-free distance over ``cfg.runs`` closed-loop episodes."""
    make = controller_factory(policy)
    seeds = cfg.eval_seeds()
    assert_disjoint(train_seeds, seeds)
    result = OnlineEvalResult(cfg.env_kind.value)
    base = corridor() if cfg.env_kind == EnvKind.CORRIDOR else None
    for i in range(cfg.runs):
        if base is not None:
            direction = cfg.directions()[i]
            world, seed = base, None
            spawn = CORRIDOR_FORWARD_SPAWN if direction == "forward" else CORRIDOR_REVERSE_SPAWN
        else:
            direction, seed = "forward", seeds[i]
            world = generate(cfg.env_kind, seed, cfg.env_params.get(cfg.env_kind.value))
            spawn = world.spawns[0]
        ep = run_episode(world, make(), EpisodeConfig(dt=cfg.dt, max_steps=cfg.max_steps, spawn=spawn))
        result.runs.append(RunResult(i, seed, direction, ep.distance_traveled, ep.termination.value, ep.steps))
    return result


# -- almost-collision classification ---------------------------------------------

def model_predictor(model):
    from .policy import predict_batch

    def predict(traj, acd):
        f = traj.frames
        windows = np.stack([f[t - 2 : t + 1] for t in range(2, len(f))])
        return predict_batch(model, windows).astype(np.float64)

    return predict


def expert_predictor(params: ExpertParams = ExpertParams(), camera: CameraModel | None = None):
    """Expert pilot on ground-truth depth re-cast from the stored poses."""
    from .sim import Pose

    cam = camera or CameraModel()

    def predict(traj, acd):
        world = acd.world_for(traj)
        return np.array([pilot(raycast(world, Pose(*traj.poses[t]), cam), cam, params).yaw_rate
                         for t in range(2, len(traj.poses))])

    return predict


def constant_predictor(value: float):
    return lambda traj, acd: np.full(max(0, len(traj.frames) - 2), float(value))


@dataclass
class ClassificationResult:
    per_location: dict  # location name -> accuracy %
    per_cue: dict  # cue -> accuracy %
    location_avg: float
    cue_avg: float
    per_frame_accuracy: float
    trajectories: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def classify_eval(predictor, acd: AlmostCollisionSet) -> ClassificationResult:
    """Per-trajectory majority vote over the final second of windows, grouped by location and cue."""
    rows = []
    frame_hits = frame_total = 0
    for traj in acd.trajectories:
        preds = [discretize(float(y)) for y in predictor(traj, acd)]
        if not preds:
            raise InvalidInputError(f"trajectory {traj.index} has fewer than 3 frames")
        vote = majority(preds[-VOTE_WINDOWS:])
        frame_hits += sum(p.value == traj.label for p in preds)
        frame_total += len(preds)
        rows.append({"index": traj.index, "location_id": traj.location_id, "location": traj.location, "cue": traj.cue,
                     "label": traj.label, "predicted": vote.value, "correct": vote.value == traj.label})

    def acc(sel):
        return 100.0 * sum(r["correct"] for r in sel) / len(sel)

    locs = sorted(acd.locations.values(), key=lambda l: l.location_id)
    per_location = {l.name: acc([r for r in rows if r["location_id"] == l.location_id])
                    for l in locs if any(r["location_id"] == l.location_id for r in rows)}
    per_cue = {c: acc([r for r in rows if r["cue"] == c]) for c in CUE_ORDER if any(r["cue"] == c for r in rows)}
    return ClassificationResult(
        per_location, per_cue,
        sum(per_location.values()) / len(per_location),
        sum(per_cue.values()) / len(per_cue),
        100.0 * frame_hits / frame_total,
        rows,
    )


# -- populations ----------------------------------------------------------

@dataclass
class PolicyScore:
    arch: str
    index: int
    train_seed: int
    status: str = "ok"
    distances: dict = field(default_factory=dict)  # kind -> mean distance
    acd: Optional[ClassificationResult] = None
    error: str = ""
    final_control_loss: float = float("nan")


@dataclass
class PopulationResult:
    arch: str
    policies: list = field(default_factory=list)

    @property
    def ok(self) -> list:
        return [p for p in self.policies if p.status == "ok"]

    @property
    def aborted(self) -> int:
        return sum(p.status != "ok" for p in self.policies)

    def ranking(self, kind=EnvKind.CORRIDOR) -> list:
        """Successful policies, best distance in ``kind`` first; ties keep index order."""
        key = EnvKind(kind).value
        if any(key not in p.distances for p in self.ok):
            raise InvalidInputError(f"population was not evaluated in {key}")
        return sorted(self.ok, key=lambda p: (-p.distances[key], p.index))

    def topk(self, k: int) -> dict:
        """Per-kind means over the k best policies by corridor distance (all of them if fewer than k)."""
        best = self.ranking()[:k]
        if not best:
            return {}
        return {kind.value: sum(p.distances[kind.value] for p in best) / len(best) for kind in ALL_KINDS}

    def percentile_curve(self) -> list[tuple[float, float]]:
        ranked = self.ranking()
        n = len(ranked)
        return [(100.0 * (i + 1) / n, p.distances[EnvKind.CORRIDOR.value]) for i, p in enumerate(ranked)]

    def median_corridor(self) -> float:
        vals = [p.distances[EnvKind.CORRIDOR.value] for p in self.ok]
        return float(np.median(vals)) if vals else float("nan")


def population_seeds(master_seed: int, n: int) -> list[int]:
    """Training seeds for a population; index i gets the same seed in every architecture."""
    return [derive_seed(master_seed, STREAM_POPULATION, i) & 0xFFFFFFFF for i in range(n)]


@dataclass
class PopulationConfig:
    n_policies: int = 10
    master_seed: int = 0
    runs: int = 10
    kinds: tuple = ALL_KINDS
    max_steps: int = DEFAULT_MAX_STEPS
    env_params: dict = field(default_factory=dict)

    def eval_config(self, kind) -> OnlineEvalConfig:
        return OnlineEvalConfig(kind, self.runs, self.master_seed, self.max_steps, env_params=self.env_params)


_SHARED: dict = {}


def _train_and_score(arch, index, seed, spec_dict, hyper, cfg: PopulationConfig, train_seeds, acd, model_dir):
    from .policy import PolicySpec, bc_train, build, save_policy

    data = _SHARED["data"]
    score = PolicyScore(arch, index, seed)
    try:
        spec = PolicySpec.from_dict({**spec_dict, "arch": arch})
        model = build(spec, seed)
        hyper = type(hyper)(**{**asdict(hyper), "seed": seed})
        model, report = bc_train(model, data, hyper)
        score.final_control_loss = report.final_control_loss
        if model_dir is not None:
            save_policy(model, Path(model_dir) / f"{arch}_{index:02d}.dshc")
        for kind in cfg.kinds:
            ev = eval_online(model, cfg.eval_config(kind), train_seeds)
            score.distances[EnvKind(kind).value] = ev.mean_distance
        if acd is not None:
            score.acd = classify_eval(model_predictor(model), acd)
    except NumericError as e:
        score.status, score.error = "aborted", str(e)
        log.warning("policy %s/%d aborted: %s", arch, index, e)
    return score


def run_population(arch: str, data: Demonstrations, hyper, cfg: PopulationConfig, spec_overrides: dict | None = None,
                   acd: AlmostCollisionSet | None = None, model_dir=None, jobs: int = 1) -> PopulationResult:
    """Train ``cfg.n_policies`` seeds of one architecture and score each online in every kind."""
    from .policy import PolicySpec

    if cfg.n_policies < 1:
        raise InvalidInputError("n_policies must be >= 1")
    spec_dict = {**PolicySpec(arch=arch).to_dict(), **(spec_overrides or {})}
    seeds = population_seeds(cfg.master_seed, cfg.n_policies)
    train_seeds = tuple(data.world_seeds)
    if model_dir is not None:
        Path(model_dir).mkdir(parents=True, exist_ok=True)
    _SHARED["data"] = data
    tasks = [(arch, i, s, spec_dict, hyper, cfg, train_seeds, acd, model_dir) for i, s in enumerate(seeds)]
    if jobs > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            scores = list(pool.map(_train_and_score, *zip(*tasks)))
    else:
        scores = [_train_and_score(*t) for t in tasks]
    _SHARED.clear()
    return PopulationResult(arch, scores)
