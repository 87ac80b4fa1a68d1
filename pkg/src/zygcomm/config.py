"""Experiment configuration (JSON) and the report bundle written by the CLI."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

UNIT_CUBE = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: str = "nagel-wainger"
    theta: float = 1.0
    kernel_params: dict = field(default_factory=dict)
    symbol: str = "linear-x3"
    symbol_params: dict = field(default_factory=dict)
    domain: tuple = UNIT_CUBE
    depths: tuple = (0, 3)
    resolution: tuple = (8, 8, 8)
    amplitude: Any = "auto"
    alpha: float | None = None
    p: float | None = None
    q: float | None = None
    seed: int = 0
    samples: int = 10_000
    rectangles: int = 10
    threshold: float = 1e-3
    log_grid: tuple = (-20.0, 20.0, 81)
    out: str = "out"

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        if not isinstance(self.kernel, str) or not self.kernel:
            raise ConfigError("must be a non-empty string", "kernel")
        if not isinstance(self.symbol, str) or not self.symbol:
            raise ConfigError("must be a non-empty string", "symbol")
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError(f"must lie in (0, 1], got {self.theta}", "theta")
        for name in ("kernel_params", "symbol_params"):
            if not isinstance(getattr(self, name), dict):
                raise ConfigError("must be a JSON object", name)
        if len(self.domain) != 3 or any(len(p) != 2 or not p[1] > p[0] for p in self.domain):
            raise ConfigError("needs three [lo, hi] pairs with hi > lo", "domain")
        lo, hi = self.depths
        if not 0 <= lo <= hi:
            raise ConfigError(f"needs 0 <= min <= max, got {self.depths}", "depths")
        if len(self.resolution) != 3 or any(n < 1 for n in self.resolution):
            raise ConfigError(f"needs three positive integers, got {self.resolution}", "resolution")
        if self.amplitude != "auto" and not (isinstance(self.amplitude, (int, float)) and self.amplitude > 1):
            raise ConfigError(f'must be "auto" or a number above 1, got {self.amplitude!r}', "amplitude")
        for name in ("p", "q"):
            v = getattr(self, name)
            if v is not None and not v > 1:
                raise ConfigError(f"must exceed 1, got {v}", name)
        if self.p is not None and self.q is not None:
            if self.p > self.q:
                raise ConfigError(f"p = {self.p} exceeds q = {self.q}", "p")
            if self.alpha is not None and not math.isclose(self.alpha, 1 / self.p - 1 / self.q, rel_tol=1e-9, abs_tol=1e-12):
                raise ConfigError(f"alpha = {self.alpha} but 1/p - 1/q = {1 / self.p - 1 / self.q}", "alpha")
        if self.alpha is not None and self.alpha < 0:
            raise ConfigError("must be nonnegative", "alpha")
        if self.samples < 1 or self.rectangles < 1:
            raise ConfigError("must be positive", "samples" if self.samples < 1 else "rectangles")
        if not self.threshold > 0:
            raise ConfigError("must be positive", "threshold")
        if len(self.log_grid) != 3 or not self.log_grid[1] > self.log_grid[0] or self.log_grid[2] < 2:
            raise ConfigError("needs [lo, hi, n] with hi > lo and n >= 2", "log_grid")

    @property
    def effective_alpha(self) -> float:
        if self.alpha is not None:
            return self.alpha
        if self.p is not None and self.q is not None:
            return 1 / self.p - 1 / self.q
        return 0.0

    # -- serialization ------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("top level must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown key; known keys are {', '.join(sorted(known))}", key)
        kw = dict(data)
        try:
            if "domain" in kw:
                kw["domain"] = tuple((float(a), float(b)) for a, b in kw["domain"])
            if "depths" in kw:
                kw["depths"] = tuple(int(v) for v in kw["depths"])
            if "resolution" in kw:
                kw["resolution"] = tuple(int(v) for v in kw["resolution"])
            if "log_grid" in kw:
                lo, hi, n = kw["log_grid"]
                kw["log_grid"] = (float(lo), float(hi), int(n))
            for name in ("theta", "alpha", "p", "q", "threshold"):
                if kw.get(name) is not None:
                    kw[name] = float(kw[name])
            for name in ("seed", "samples", "rectangles"):
                if name in kw:
                    kw[name] = int(kw[name])
            if isinstance(kw.get("amplitude"), (int, float)):
                kw["amplitude"] = float(kw["amplitude"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed value: {exc}") from None
        return cls(**kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for name in ("domain", "depths", "resolution", "log_grid"):
            d[name] = json.loads(json.dumps(d[name]))
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", "config") from None
        return cls.from_json(text)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def experiment_dict(self) -> dict:
        """Everything except the output location, which does not affect results."""
        d = self.to_dict()
        del d["out"]
        return d

    def digest(self) -> str:
        canon = json.dumps(self.experiment_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class ReportBundle:
    """Records from one run; every record is stamped with the config digest.

    No wall-clock data is stored, so identical inputs give identical bytes.
    """

    subcommand: str
    config: ExperimentConfig
    records: list[dict] = field(default_factory=list)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    status: str = "ok"
    messages: list[str] = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return self.config.digest()

    def add(self, kind: str, **payload) -> dict:
        rec = {"kind": kind, "config_hash": self.config_hash, **payload}
        self.records.append(rec)
        return rec

    def add_row(self, table: str, row: dict) -> None:
        self.tables.setdefault(table, []).append({"config_hash": self.config_hash, **row})

    def fail(self, message: str) -> None:
        self.status = "invariant failure"
        self.messages.append(message)

    def to_json(self) -> str:
        body = {
            "subcommand": self.subcommand,
            "config_hash": self.config_hash,
            "config": self.config.experiment_dict(),
            "status": self.status,
            "messages": self.messages,
            "records": self.records,
        }
        return json.dumps(_plain(body), sort_keys=True, indent=2) + "\n"


def _plain(obj):
    """Convert numpy scalars and tuples to JSON-native values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item) and getattr(obj, "ndim", 1) == 0:
        obj = obj.item()
    if hasattr(obj, "tolist"):
        return _plain(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj
