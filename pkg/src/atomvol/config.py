"""Run configuration for the command-line front end.

A run is described by a single JSON-compatible document::

    {"command": "smile",
     "model": {"name": "merton", "params": {"sigma": 0.2, "p": 0.1}},
     "grid": {"lo": -30, "hi": -0.5, "n": 60, "spacing": "linear"},
     "out": "smile.csv", "format": "csv", "seed": 0,
     "mc": {"paths": 50000, "steps": 100, "workers": 1},
     "options": {}}

Unknown keys at any level are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from atomvol.errors import DomainError

COMMANDS = ("smile", "mass", "survival-table", "swap", "validate", "compare-expansions")
FORMATS = ("csv", "json")
SPACINGS = ("linear", "log")


class ConfigError(DomainError):
    """Malformed run configuration (maps to the usage exit code)."""


def _reject_unknown(doc: dict, allowed: set[str], where: str) -> None:
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    n: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("grid needs at least one point")
        if self.spacing not in SPACINGS:
            raise ConfigError(f"grid spacing must be one of {SPACINGS}")
        if self.n > 1 and not self.lo < self.hi:
            raise ConfigError("grid needs lo < hi")
        if self.spacing == "log" and not (self.lo * self.hi > 0.0):
            raise ConfigError("log spacing needs lo and hi of the same sign and nonzero")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """``lo:hi:n[:log]``."""
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"grid must look like lo:hi:n[:log], got {text!r}")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"grid must look like lo:hi:n[:log], got {text!r}") from None
        spacing = "linear"
        if len(parts) == 4:
            if parts[3] not in ("log", "linear"):
                raise ConfigError(f"grid spacing must be 'log' or 'linear', got {parts[3]!r}")
            spacing = parts[3]
        return cls(lo, hi, n, spacing)

    def values(self) -> np.ndarray:
        if self.n == 1:
            return np.array([self.lo])
        if self.spacing == "log":
            sign = 1.0 if self.lo > 0.0 else -1.0
            v = sign * np.geomspace(abs(self.lo), abs(self.hi), self.n)
            return np.sort(v)
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class McSpec:
    paths: int = 50_000
    steps: int = 100
    workers: int = 1

    @classmethod
    def parse(cls, text: str) -> "McSpec":
        """``paths=N,steps=M[,workers=W]``."""
        kw: dict[str, int] = {}
        for item in filter(None, text.split(",")):
            k, _, v = item.partition("=")
            k = k.strip()
            if k not in ("paths", "steps", "workers"):
                raise ConfigError(f"unknown mc setting {k!r}")
            try:
                kw[k] = int(v)
            except ValueError:
                raise ConfigError(f"mc setting {k} needs an integer, got {v!r}") from None
        return cls(**kw)


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: str | None = None
    params: dict = field(default_factory=dict)
    grid: GridSpec | None = None
    out: str | None = None
    format: str = "csv"
    seed: int = 0
    mc: McSpec | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {COMMANDS}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        for k, v in self.params.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ConfigError(f"parameter {k} must be a finite number")

    # --- JSON ------------------------------------------------------------
    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        _reject_unknown(doc, {"command", "model", "grid", "out", "format", "seed", "mc", "options"}, "config")
        if "command" not in doc:
            raise ConfigError("configuration needs a 'command'")
        model = None
        params: dict = {}
        if doc.get("model") is not None:
            m = doc["model"]
            if not isinstance(m, dict):
                raise ConfigError("'model' must be an object with 'name' and 'params'")
            _reject_unknown(m, {"name", "params"}, "model")
            model = m.get("name")
            params = dict(m.get("params", {}))
        grid = None
        if doc.get("grid") is not None:
            g = doc["grid"]
            _reject_unknown(g, {"lo", "hi", "n", "spacing"}, "grid")
            try:
                grid = GridSpec(float(g["lo"]), float(g["hi"]), int(g["n"]), g.get("spacing", "linear"))
            except KeyError as exc:
                raise ConfigError(f"grid is missing {exc}") from None
        mc = None
        if doc.get("mc") is not None:
            _reject_unknown(doc["mc"], {"paths", "steps", "workers"}, "mc")
            mc = McSpec(**{k: int(v) for k, v in doc["mc"].items()})
        return cls(
            command=doc["command"],
            model=model,
            params=params,
            grid=grid,
            out=doc.get("out"),
            format=doc.get("format", "csv"),
            seed=int(doc.get("seed", 0)),
            mc=mc,
            options=dict(doc.get("options", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "model": None if self.model is None else {"name": self.model, "params": self.params},
            "grid": None if self.grid is None else asdict(self.grid),
            "out": self.out,
            "format": self.format,
            "seed": self.seed,
            "mc": None if self.mc is None else asdict(self.mc),
            "options": self.options,
        }


def parse_param(text: str) -> tuple[str, float]:
    k, sep, v = text.partition("=")
    if not sep or not k:
        raise ConfigError(f"--param expects key=value, got {text!r}")
    try:
        return k.strip(), float(v)
    except ValueError:
        raise ConfigError(f"--param {k} needs a number, got {v!r}") from None
