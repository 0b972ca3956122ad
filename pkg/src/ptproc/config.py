"""JSON experiment configuration and spec (de)serialization."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import bdm, interact, skellam, timechange
from .ratefn import RateFunction

SCHEMA_VERSION = 1
KINDS = ("simulate", "pmf", "moments", "validate", "timechange")


class ConfigError(ValueError):
    """The experiment configuration is malformed or violates a spec invariant."""


def rate_from_json(x) -> RateFunction:
    """A bare number is a constant rate; otherwise a ``{"kind": ...}`` mapping."""
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return RateFunction.from_dict({"kind": "constant", "c": x})
    if isinstance(x, dict):
        return RateFunction.from_dict(x)
    raise ConfigError(f"cannot read a rate function from {x!r}")


def process_from_dict(d: dict):
    kind = d.get("type")
    try:
        if kind == "skellam":
            return skellam.NhSkellamSpec(rate_from_json(d["rate_up"]), rate_from_json(d["rate_down"]),
                                         int(d.get("initial", 0)))
        if kind == "interacting_skellam":
            rates = {k: rate_from_json(d.get(k, 0.0)) for k in interact.InteractingSkellamSpec.RATE_NAMES}
            return interact.InteractingSkellamSpec(**rates, initial=tuple(int(x) for x in d.get("initial", (0, 0))))
        if kind == "bdm":
            names = ("lambda1", "lambda2", "mu1", "mu2", "eta1", "eta2")
            return bdm.BdmSpec(**{k: float(d.get(k, 0.0)) for k in names},
                               initial=tuple(d.get("initial", (0, 0))))
        if kind == "pure_migration":
            return bdm.PureMigrationSpec(float(d["eta1"]), float(d["eta2"]), int(d["n1"]), int(d["n2"]))
    except KeyError as exc:
        raise ConfigError(f"process {kind!r} is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind!r} process: {exc}") from None
    raise ConfigError(f"unknown process type {kind!r}")


def process_to_dict(spec) -> dict:
    if isinstance(spec, skellam.NhSkellamSpec):
        return {"type": "skellam", "rate_up": spec.rate_up.to_dict(), "rate_down": spec.rate_down.to_dict(),
                "initial": spec.initial}
    if isinstance(spec, interact.InteractingSkellamSpec):
        out = {"type": "interacting_skellam"}
        out.update({k: getattr(spec, k).to_dict() for k in spec.RATE_NAMES})
        out["initial"] = list(spec.initial)
        return out
    if isinstance(spec, bdm.BdmSpec):
        out = {"type": "bdm", **dataclasses.asdict(spec)}
        out["initial"] = list(spec.initial)
        return out
    if isinstance(spec, bdm.PureMigrationSpec):
        return {"type": "pure_migration", **dataclasses.asdict(spec)}
    raise TypeError(f"cannot serialize {type(spec).__name__}")


def clock_from_dict(d: dict) -> timechange.BernsteinSpec:
    try:
        d = dict(d)
        for key in ("tail_grid", "tail_values"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return timechange.BernsteinSpec(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid clock: {exc}") from None


def clock_to_dict(spec: timechange.BernsteinSpec) -> dict:
    return {k: v for k, v in dataclasses.asdict(spec).items() if v is not None}


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    replicates: int = 1
    process: Any = None
    clock: timechange.BernsteinSpec | None = None
    horizon: float | None = None
    times: list = field(default_factory=list)
    battery: str | None = None
    method: str = "direct"
    window: list | None = None
    output: str = "."
    tolerances: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def validate(self) -> "ExperimentConfig":
        from .batteries import BY_NAME

        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise ConfigError("replicates must be an integer >= 1")
        if self.method not in ("direct", "decomposition"):
            raise ConfigError("method must be 'direct' or 'decomposition'")
        if self.kind == "validate":
            if self.battery not in BY_NAME:
                raise ConfigError(f"unknown battery {self.battery!r}")
            return self
        if self.process is None:
            raise ConfigError(f"kind {self.kind!r} needs a process")
        if self.kind in ("simulate", "timechange"):
            if self.horizon is None or self.horizon <= 0:
                raise ConfigError("horizon must be positive")
        if self.kind in ("pmf", "moments") and not self.times:
            raise ConfigError(f"kind {self.kind!r} needs a non-empty times list")
        if any(t < 0 for t in self.times):
            raise ConfigError("times must be >= 0")
        if self.kind == "timechange" and self.clock is None:
            raise ConfigError("timechange needs a clock")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        if "schema_version" not in d:
            raise ConfigError("config needs a schema_version field")
        if "seed" not in d:
            raise ConfigError("config needs an explicit seed")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        d = dict(d)
        if d.get("process") is not None:
            d["process"] = process_from_dict(d["process"])
        if d.get("clock") is not None:
            d["clock"] = clock_from_dict(d["clock"])
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return cfg.validate()

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "process" and v is not None:
                v = process_to_dict(v)
            elif f.name == "clock" and v is not None:
                v = clock_to_dict(v)
            out[f.name] = v
        return out


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)
