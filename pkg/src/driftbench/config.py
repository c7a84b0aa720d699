"""Run configuration: defaults, TOML files, ``section.key=value`` overrides, resolved echo."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

import tomli
import tomli_w

from .errors import FormatError, InvalidInputError
from .expert import ExpertParams
from .policy import PolicySpec, TrainHyper
from .procgen import CanyonParams, ForestParams, SandboxParams
from .render import CameraModel

DATA_ENV = "DRIFTBENCH_DATA"


@dataclass(frozen=True)
class RunSection:
    master_seed: int = 0
    jobs: int = 1


@dataclass(frozen=True)
class CollectSection:
    flights: int = 100
    kinds: str = "canyon,forest,sandbox"
    noise_amplitude: float = 0.0
    noise_hold: int = 10
    max_steps: int = 1200
    dt: float = 0.05


@dataclass(frozen=True)
class AcdSection:
    trajectories: int = 25


@dataclass(frozen=True)
class EvalSection:
    runs: int = 10
    max_steps: int = 1200


@dataclass(frozen=True)
class BenchSection:
    archs: str = "naux,auxd"
    population: int = 10
    # Episodes per kind loaded from the dataset (0 = all).
    flights_per_kind: int = 0


SECTIONS = {
    "run": RunSection,
    "camera": CameraModel,
    "expert": ExpertParams,
    "env.canyon": CanyonParams,
    "env.forest": ForestParams,
    "env.sandbox": SandboxParams,
    "collect": CollectSection,
    "acd": AcdSection,
    "policy": PolicySpec,
    "train": TrainHyper,
    "eval": EvalSection,
    "bench": BenchSection,
}


def _coerce(value, default, where: str):
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, tuple):
            return tuple(_coerce(v, default[0], where) for v in value) if default else tuple(value)
        if isinstance(default, str):
            return str(value)
    except (TypeError, ValueError):
        pass
    else:
        return value
    raise InvalidInputError(f"{where}: expected {type(default).__name__}, got {value!r}")


def parse_value(raw: str):
    """TOML scalar/array syntax if it parses, otherwise the bare string."""
    try:
        return tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        return raw


class RunConfig:
    """One frozen dataclass per section; every field has a default."""

    def __init__(self, sections: dict | None = None):
        self.sections = {name: cls() for name, cls in SECTIONS.items()}
        if sections:
            self.sections.update(sections)

    def __getitem__(self, name: str):
        return self.sections[name]

    def set(self, section: str, key: str, value) -> None:
        if section not in SECTIONS:
            raise InvalidInputError(f"unknown config section [{section}]")
        current = self.sections[section]
        names = {f.name for f in dataclasses.fields(current)}
        if key not in names:
            raise InvalidInputError(f"unknown config key {section}.{key}")
        value = _coerce(value, getattr(current, key), f"{section}.{key}")
        updated = dataclasses.replace(current, **{key: value})
        if hasattr(updated, "validate"):
            updated.validate()
        self.sections[section] = updated

    def apply_dict(self, data: dict, prefix: str = "") -> None:
        for key, value in data.items():
            name = f"{prefix}{key}"
            if isinstance(value, dict):
                self.apply_dict(value, f"{name}.")
            else:
                section, _, field = name.rpartition(".")
                self.set(section, field, value)

    def apply_override(self, text: str) -> None:
        if "=" not in text:
            raise InvalidInputError(f"override {text!r} must look like section.key=value")
        path, raw = text.split("=", 1)
        section, _, key = path.strip().rpartition(".")
        self.set(section, key, parse_value(raw.strip()))

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        cfg = cls()
        if path is not None:
            try:
                with open(path, "rb") as f:
                    cfg.apply_dict(tomli.load(f))
            except OSError as e:
                raise FormatError(f"cannot read config {path}: {e.strerror}") from None
            except tomli.TOMLDecodeError as e:
                raise InvalidInputError(f"config {path}: {e}") from None
        for o in overrides:
            cfg.apply_override(o)
        return cfg

    def to_dict(self) -> dict:
        out: dict = {}
        for name, obj in self.sections.items():
            target = out
            *parents, leaf = name.split(".")
            for p in parents:
                target = target.setdefault(p, {})
            target[leaf] = {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(obj).items()}
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def write_resolved(self, out_dir) -> Path:
        path = Path(out_dir) / "config.resolved"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_toml(), encoding="utf-8")
        return path

    def env_params(self) -> dict:
        return {k.split(".", 1)[1]: v for k, v in self.sections.items() if k.startswith("env.")}


def data_root(default: str = "data") -> Path:
    return Path(os.environ.get(DATA_ENV) or default)
