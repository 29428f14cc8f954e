"""Experiment configuration: a flat ``key = value`` file that round-trips exactly."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields

from .presets import parse_preset

COMMANDS = ("solve", "theta", "holomorphy", "develop", "estimate", "bers", "fixtures", "probe-np")

# commands whose coefficients need more room than the default box
COMMAND_HALF_WIDTH = {"bers": 8.0, "estimate": 6.0}
DEFAULT_HALF_WIDTH = 4.0
PRESETS = ("zero", "gaussian", "bump", "radial", "remark")


class ConfigError(ValueError):
    def __init__(self, key: str, reason: str):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason


@dataclass
class ExperimentConfig:
    command: str = "solve"
    n: int = 256
    half_width: float | None = None
    tol: float = 1e-10
    max_iter: int = 500
    out: str = "out"
    seed: int = 0
    jobs: int = 1
    mu: str = "gaussian:center=-0.5+0i,amp=0.4,width=0.25"
    a: str = "gaussian:center=0+0.5i,amp=1,width=0.25"
    mu1: str = "bump:center=0+2i,amp=0.5,radius=1.6"
    mu2: str = "bump:center=0.3-2i,amp=0+0.5i,radius=1.6"
    k: int = 1
    p: float = 2.0
    s: float = 1e-3
    s_list: str = "0.1,0.03,0.01,0.003"
    cases: int = 20
    q_list: str = "4,8,100"
    p_list: str = "1.5,2,3,4"
    trials: int = 10

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError("command", f"unknown command {self.command!r}")
        if self.n < 16 or self.n & (self.n - 1):
            raise ConfigError("n", f"must be a power of two >= 16, got {self.n}")
        if self.half_width is not None and not self.half_width > 0:
            raise ConfigError("half_width", "must be positive")
        if not self.tol > 0:
            raise ConfigError("tol", "must be positive")
        for key in ("max_iter", "jobs", "cases", "trials"):
            if getattr(self, key) < 1:
                raise ConfigError(key, "must be at least 1")
        if self.k < 0 or self.k > 2:
            raise ConfigError("k", "must be 0, 1 or 2")
        if not self.p >= 1:
            raise ConfigError("p", "must be >= 1")
        for key in ("mu", "mu1", "mu2", "a"):
            try:
                name, params = parse_preset(getattr(self, key))
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from None
            if name not in PRESETS:
                raise ConfigError(key, f"unknown preset {name!r}")
            if key != "a" and abs(params.get("amp", 0)) >= 1:
                raise ConfigError(key, "coefficient amplitude must be < 1")
        for key in ("s_list", "q_list", "p_list"):
            try:
                self.floats(key)
            except ValueError:
                raise ConfigError(key, f"expected comma-separated numbers, got {getattr(self, key)!r}") from None

    def floats(self, key: str) -> list[float]:
        return [float(x) for x in getattr(self, key).split(",") if x.strip()]

    @property
    def grid_half_width(self) -> float:
        if self.half_width is not None:
            return self.half_width
        return COMMAND_HALF_WIDTH.get(self.command, DEFAULT_HALF_WIDTH)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def serialize(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {'auto' if value is None else _fmt(value)}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()

    @classmethod
    def parse(cls, text: str, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        return cls.from_mapping(parse_pairs(text), base)

    @classmethod
    def from_mapping(cls, values: dict[str, str], base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = dataclasses.asdict(base) if base is not None else {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(key, "unknown key")
            kwargs[key] = _coerce(key, types[key], raw)
        return cls(**kwargs)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(key: str, typ: str, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "float | None":
            return None if raw == "auto" else float(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {typ}") from None
    return raw


def parse_pairs(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(key or f"line {lineno}", "expected 'key = value'")
        out[key] = value.strip()
    return out
