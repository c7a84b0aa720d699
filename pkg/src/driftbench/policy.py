"""NAUX / AUXD policies: graph builders, behavioral-cloning training, inference."""

from __future__ import annotations

import json
import logging
import time
from collections import deque
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import FormatError, InvalidInputError, NumericError
from .nn import Concat, Conv2d, Dense, Flatten, Model, Node, OptimHyper, OptimState, ReLU, Sequential
from .nn import init_params, load_model, optimize_step, save_model
from .datakit import Demonstrations, iterate_minibatches
from .sim import Action, Observation

log = logging.getLogger(__name__)

ARCHS = ("naux", "auxd")
FRAME_INPUTS = ("frame_t2", "frame_t1", "frame_t")


@dataclass(frozen=True)
class PolicySpec:
    arch: str = "naux"
    channels: tuple = (8, 16, 32, 64)
    kernel: int = 3
    stride: int = 2
    hidden: int = 50
    input_height: int = 110
    input_width: int = 148
    input_channels: int = 1
    depth_hidden: int = 512
    depth_rows: int = 55
    depth_cols: int = 74
    aux_weight: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "arch", self.arch.lower())
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.arch not in ARCHS:
            raise InvalidInputError(f"unknown architecture {self.arch!r}")
        if not self.channels or min(self.channels) <= 0:
            raise InvalidInputError("extractor needs positive channel counts")
        if min(self.kernel, self.stride, self.hidden, self.input_height, self.input_width) <= 0:
            raise InvalidInputError("spec sizes must be positive")
        if self.aux_weight < 0:
            raise InvalidInputError("aux_weight must be non-negative")

    @property
    def descriptor(self) -> str:
        return f"{self.arch}-v1"

    def feature_shape(self) -> tuple[int, int, int]:
        h, w = self.input_height, self.input_width
        pad = self.kernel // 2
        for _ in self.channels:
            h = (h + 2 * pad - self.kernel) // self.stride + 1
            w = (w + 2 * pad - self.kernel) // self.stride + 1
        return h, w, self.channels[-1]

    @property
    def feature_dim(self) -> int:
        h, w, c = self.feature_shape()
        return h * w * c

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicySpec":
        names = {f.name for f in fields(cls)}
        return cls(**{k: (tuple(v) if k == "channels" else v) for k, v in d.items() if k in names})


def build(spec: PolicySpec, init_seed: int) -> Model:
    """Three extractor branches sharing one module, a concat, a control head, and for AUXD a depth head."""
    layers = []
    c_in = spec.input_channels
    for i, c in enumerate(spec.channels, start=1):
        conv = Conv2d(c_in, c, spec.kernel, spec.stride, spec.kernel // 2)
        conv.input_grad = i > 1
        layers.append((f"conv{i}", conv))
        layers.append((f"relu{i}", ReLU()))
        c_in = c
    layers.append(("flatten", Flatten()))
    feat = spec.feature_dim
    modules = {
        "extractor": Sequential(layers),
        "concat": Concat(),
        "control": Sequential([("fc1", Dense(3 * feat, spec.hidden)), ("relu", ReLU()), ("fc2", Dense(spec.hidden, 1))]),
    }
    nodes = [
        Node("feat_t2", "extractor", ("frame_t2",)),
        Node("feat_t1", "extractor", ("frame_t1",)),
        Node("feat_t", "extractor", ("frame_t",)),
        Node("joined", "concat", ("feat_t2", "feat_t1", "feat_t")),
        Node("control", "control", ("joined",)),
    ]
    outputs = ["control"]
    if spec.arch == "auxd":
        depth_out = spec.depth_rows * spec.depth_cols
        modules["depth"] = Sequential(
            [("fc1", Dense(feat, spec.depth_hidden)), ("relu", ReLU()), ("fc2", Dense(spec.depth_hidden, depth_out))]
        )
        nodes.append(Node("depth", "depth", ("feat_t",)))
        outputs.append("depth")
    model = Model(modules, nodes, list(FRAME_INPUTS), outputs, spec.descriptor)
    model.spec = spec
    init_params(model, init_seed)
    return model


def save_policy(model: Model, path) -> None:
    descriptor = model.spec.descriptor + "\n" + json.dumps(model.spec.to_dict(), sort_keys=True)
    save_model(path, descriptor, model.params)


def load_policy(path) -> Model:
    descriptor, params = load_model(path)
    tag, _, spec_json = descriptor.partition("\n")
    if tag not in ("naux-v1", "auxd-v1"):
        raise FormatError(f"unknown model descriptor {tag!r}")
    spec = PolicySpec.from_dict(json.loads(spec_json)) if spec_json else PolicySpec(arch=tag.split("-")[0])
    if spec.descriptor != tag:
        raise FormatError(f"descriptor {tag!r} disagrees with stored spec {spec.arch!r}")
    model = build(spec, 0)
    if set(params) != set(model.params):
        raise FormatError(f"parameter set mismatch for {tag}")
    for name, value in params.items():
        model.set_param(name, value)
    return model


def to_input(frames: np.ndarray) -> np.ndarray:
    """uint8 frames (N,H,W) or (N,H,W,C) -> float32 NHWC in [0, 1]."""
    x = np.asarray(frames)
    if x.ndim == 3:
        x = x[..., None]
    return x.astype(np.float32) * np.float32(1.0 / 255.0)


def _check_frames(model: Model, *frames):
    spec = model.spec
    expected = (spec.input_height, spec.input_width)
    for f in frames:
        if tuple(np.shape(f)[:2]) != expected:
            raise InvalidInputError(f"frame shape {np.shape(f)} does not match model input {expected}")


def act(model: Model, frame_t, frame_t1, frame_t2) -> Action:
    """Yaw command for one 3-frame window (depth head, if any, is ignored)."""
    _check_frames(model, frame_t, frame_t1, frame_t2)
    out = model.forward({
        "frame_t2": to_input(np.asarray(frame_t2)[None]),
        "frame_t1": to_input(np.asarray(frame_t1)[None]),
        "frame_t": to_input(np.asarray(frame_t)[None]),
    })
    return Action(float(np.clip(out["control"][0, 0], -1.0, 1.0)))


def predict_batch(model: Model, windows: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Raw control outputs for (N, 3, H, W) uint8 windows ordered oldest to newest."""
    out = []
    for i in range(0, len(windows), batch_size):
        w = windows[i : i + batch_size]
        y = model.forward({name: to_input(w[:, k]) for k, name in enumerate(FRAME_INPUTS)})
        out.append(y["control"][:, 0])
    return np.concatenate(out) if out else np.zeros(0, dtype=np.float32)


class PolicyController:
    """Closed-loop controller for one episode.

    Extracted features of the last three frames are cached so each step runs
    the extractor once. Before three frames exist the first is repeated.
    """

    def __init__(self, model: Model):
        self.model = model
        self.features: deque = deque(maxlen=3)

    def __call__(self, obs: Observation) -> Action:
        frame = obs.frame
        _check_frames(self.model, frame)
        m = self.model.modules
        feat, _ = m["extractor"].forward(to_input(frame[None]))
        if not self.features:
            self.features.extend([feat, feat])
        self.features.append(feat)
        joined, _ = m["concat"].forward(list(self.features))
        y, _ = m["control"].forward(joined)
        return Action(float(np.clip(y[0, 0], -1.0, 1.0)))


# -- training -------------------------------------------------------------

@dataclass
class TrainHyper:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-4
    optimizer: str = "adam"
    seed: int = 0
    sample_stride: int = 1

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size <= 0 or self.sample_stride <= 0:
            raise InvalidInputError("epochs, batch_size and sample_stride must be positive")


@dataclass
class TrainReport:
    arch: str
    seed: int
    samples: int
    epochs: list = field(default_factory=list)
    final_control_loss: float = float("nan")
    final_depth_loss: float = float("nan")
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _diagnose(model: Model, batch: int) -> str:
    for name, p in model.params.items():
        if not np.isfinite(p).all():
            return f"batch {batch}: non-finite values in {name}"
    return f"batch {batch}: non-finite loss with finite parameters (layer output overflow)"


def bc_train(model: Model, data: Demonstrations, hyper: TrainHyper, aux_weight: float | None = None):
    """Minibatch behavioral cloning.

    Per-sample loss is (yhat - y)^2, plus for AUXD aux_weight times the mean
    squared depth error over the pixels. Sample order per epoch comes from
    ``hyper.seed`` only, and gradients reduce in a fixed order, so reruns
    are bit-identical.
    """
    spec: PolicySpec = model.spec
    beta = spec.aux_weight if aux_weight is None else aux_weight
    use_depth = spec.arch == "auxd"
    idx = data.samples(hyper.sample_stride)
    if len(idx) == 0:
        raise InvalidInputError("training set has no samples (episodes need at least 3 frames)")
    if use_depth and not data.has_depth:
        raise InvalidInputError("AUXD training needs depth targets")
    opt = OptimHyper(algorithm=hyper.optimizer, lr=hyper.lr)
    state = OptimState()
    report = TrainReport(spec.arch, hyper.seed, len(idx))
    t_start = time.perf_counter()
    n_pix = spec.depth_rows * spec.depth_cols
    batch_no = 0
    for epoch in range(hyper.epochs):
        t0 = time.perf_counter()
        c_sum = d_sum = 0.0
        for b in iterate_minibatches(idx, hyper.batch_size, hyper.seed, epoch):
            n = len(b)
            mb = data.batch(b, with_depth=use_depth)
            y = mb.targets[:, None]
            inputs = {name: to_input(mb.windows[:, k]) for k, name in enumerate(FRAME_INPUTS)}
            model.zero_grad()
            # Overflow shows up as a non-finite loss, which is checked just below.
            with np.errstate(over="ignore", invalid="ignore"):
                out = model.forward(inputs)
                err = out["control"] - y
                c_loss = float((err * err).mean())
                grads = {"control": (2.0 / n) * err}
                d_loss = 0.0
                if use_depth:
                    target = mb.depth.reshape(n, -1)
                    derr = out["depth"] - target
                    d_loss = float((derr * derr).mean())
                    grads["depth"] = np.float32(beta * 2.0 / (n * n_pix)) * derr
            if not (np.isfinite(c_loss) and np.isfinite(d_loss)):
                raise NumericError(_diagnose(model, batch_no))
            model.backward(grads)
            optimize_step(model.params, model.grads, state, opt)
            c_sum += c_loss * n
            d_sum += d_loss * n
            batch_no += 1
        entry = {"epoch": epoch + 1, "control_loss": c_sum / len(idx), "wall_time": time.perf_counter() - t0}
        if use_depth:
            entry["depth_loss"] = d_sum / len(idx)
        report.epochs.append(entry)
        log.info("epoch %d control %.5f depth %.5f", epoch + 1, entry["control_loss"], entry.get("depth_loss", 0.0))
    if report.epochs:
        report.final_control_loss = report.epochs[-1]["control_loss"]
        report.final_depth_loss = report.epochs[-1].get("depth_loss", float("nan"))
    report.wall_time = time.perf_counter() - t_start
    return model, report


def control_mse(model: Model, data: Demonstrations, stride: int = 1, batch_size: int = 64) -> float:
    """Mean squared control error over a dataset with frozen parameters."""
    idx = data.samples(stride)
    total = 0.0
    for i in range(0, len(idx), batch_size):
        b = idx[i : i + batch_size]
        mb = data.batch(b)
        pred = predict_batch(model, mb.windows, batch_size)
        y = mb.targets.astype(np.float64)
        total += float(((pred.astype(np.float64) - y) ** 2).sum())
    return total / max(1, len(idx))
