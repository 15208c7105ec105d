"""Run configuration: tolerances, window schedules and caps.

Precedence is flags > ``DSEQ_CONFIG`` (path to a JSON file) > defaults.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import SpecError

DEFAULT_CELL_CAP = 2**26


def _default_schedule() -> tuple[int, ...]:
    return tuple(2**t for t in range(3, 11))


def _default_row_schedule() -> tuple[int, ...]:
    # the tails of the last two windows (rows > 23 and > 47) clear the default
    # entrywise prefix P = 16 plus a band of width one
    return (12, 24, 48, 96)


@dataclass(frozen=True)
class RunConfig:
    tol: float = 1e-8
    growth_factor: float = 2.0
    fringe: int = 4
    # window sides; side s means the index rectangle [0..s-1]x[0..s-1]
    schedule: tuple[int, ...] = field(default_factory=_default_schedule)
    # row windows for four-dimensional matrix batteries
    row_schedule: tuple[int, ...] = field(default_factory=_default_row_schedule)
    prefix_P: int = 16
    cell_cap: int = DEFAULT_CELL_CAP

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(int(s) for s in self.schedule))
        object.__setattr__(self, "row_schedule", tuple(int(s) for s in self.row_schedule))
        if not (self.tol > 0 and self.growth_factor > 1):
            raise SpecError("tol must be > 0 and growth_factor > 1")
        if self.fringe < 1 or self.prefix_P < 0 or self.cell_cap < 1:
            raise SpecError("fringe, prefix_P and cell_cap must be positive")
        for name in ("schedule", "row_schedule"):
            sides = getattr(self, name)
            if len(sides) < 3 or any(s < 1 for s in sides):
                raise SpecError(f"{name} needs at least 3 positive sides")
            if any(b <= a for a, b in zip(sides, sides[1:])):
                raise SpecError(f"{name} must be strictly increasing")

    def with_overrides(self, **kw) -> RunConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def as_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}


def load_config(path: str | os.PathLike | None = None) -> RunConfig:
    """Defaults, overlaid with the JSON file at *path* or ``$DSEQ_CONFIG``."""
    path = path or os.environ.get("DSEQ_CONFIG")
    if not path:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read config {path}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise SpecError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**data)
