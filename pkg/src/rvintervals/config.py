"""Run configuration: flat ``key = value`` files, CLI overrides and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError
from .intervals import DEFAULT_BINS_PER_DECADE

OUTPUT_ENV = "RVINTERVALS_OUTPUT"


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, str):
        parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    else:
        parts = list(text)
    return tuple(float(p) for p in parts)


def _paths(text) -> tuple[str, ...]:
    if isinstance(text, str):
        return tuple(p.strip() for p in text.split(",") if p.strip())
    return tuple(str(p) for p in text)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    inputs: tuple[str, ...] = ()
    volatility: str = "R2"
    q: tuple[float, ...] = (2.0, 3.0, 4.0, 5.0)
    alpha: float = 0.05
    bins_per_decade: int = DEFAULT_BINS_PER_DECADE
    replicas: int = 1000
    seed: int = 0
    output: str = "rvintervals-out"
    sessions: str = "09:30-11:30,13:00-15:00"
    scaling_pair: tuple[float, ...] = (2.0, 5.0)
    gof_q: tuple[float, ...] = (2.0, 5.0)
    cross_stock_q: float = 2.0
    drop_out_of_session: bool = True
    shuffled_control: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.volatility not in ("R1", "R2"):
            raise ConfigurationError("volatility must be R1 or R2")
        if not self.q or any(v <= 0 for v in self.q):
            raise ConfigurationError("q values must be positive")
        if self.replicas < 1:
            raise ConfigurationError("replicas must be >= 1")
        if self.bins_per_decade < 1:
            raise ConfigurationError("bins_per_decade must be >= 1")
        if len(self.scaling_pair) != 2:
            raise ConfigurationError("scaling_pair needs exactly two thresholds")

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def digest(self) -> str:
        """SHA-256 over the analysis settings (the output location is excluded)."""
        d = self.as_dict()
        d.pop("output")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_CONVERTERS = {
    "inputs": _paths,
    "volatility": lambda s: str(s).strip().upper(),
    "q": _floats,
    "alpha": float,
    "bins_per_decade": int,
    "replicas": int,
    "seed": int,
    "output": str,
    "sessions": lambda s: str(s).strip(),
    "scaling_pair": _floats,
    "gof_q": _floats,
    "cross_stock_q": float,
    "drop_out_of_session": _bool,
    "shuffled_control": _bool,
    "workers": int,
}


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_config(path: str | os.PathLike | None = None, **overrides) -> RunConfig:
    """File values, then non-None ``overrides``, then the output env variable."""
    raw: dict = {}
    if path is not None:
        raw.update(parse_config_text(Path(path).read_text()))
    raw.update({k: v for k, v in overrides.items() if v is not None})
    env = os.environ.get(OUTPUT_ENV)
    if env:
        raw["output"] = env
    try:
        kwargs = {k: _CONVERTERS[k](v) for k, v in raw.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc
    return RunConfig(**kwargs)
