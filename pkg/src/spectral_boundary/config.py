"""Run configuration shared by every CLI subcommand."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .spectral import DEFAULT_TRUST_RTOL


@dataclass
class RunConfig:
    command: str = ""
    model: str = "example1d"
    grid: int | None = None  # None: the model's default
    modes: int = 64
    backend: str = "fd"
    trust_rtol: float = DEFAULT_TRUST_RTOL
    tolerance: float = 1e-10
    windows: list | None = None
    seed: int = 0
    strict: bool = False
    params: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        data = json.loads(Path(path).read_text())
        # accept either a bare config or an emitted result document
        return cls.from_dict(data.get("config", data))

    def validate(self) -> None:
        if self.model not in ("example1d", "halftorus"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.backend not in ("fd", "basis"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.model == "halftorus" and self.backend != "fd":
            raise ValueError("the half-torus model only has the fd backend")
        if self.grid is not None and self.grid < 8:
            raise ValueError("grid must be at least 8")
        if self.windows is not None and len(self.windows) < 3:
            raise ValueError("at least three fit windows are required")
