"""Run configuration and its JSON representation."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .augment import KINDS, AugOp, canonical_kind, default_ops, ops_from_names
from .errors import InvalidConfig, InvalidParams
from .mock import MockDetectorConfig
from .selection import GridLayout

SEED_ENV = "DACA_SEED"


@dataclass(frozen=True)
class Config:
    image_size: tuple[int, int] = (600, 600)
    grid: GridLayout = GridLayout(2, 2)
    conf_threshold: float = 0.25
    min_visibility: float = 0.0
    regions: Optional[int] = None  # None: every cell is augmented
    augment: tuple[AugOp, ...] = field(default_factory=lambda: tuple(default_ops()))
    seed: int = 0
    mock: MockDetectorConfig = MockDetectorConfig()
    n_iterations: int = 50

    def __post_init__(self):
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))
        # execution order is fixed, so store ops in that order too
        object.__setattr__(self, "augment", tuple(sorted(self.augment, key=lambda op: KINDS.index(op.kind))))
        w, h = self.image_size
        if w < 1 or h < 1:
            raise InvalidConfig(f"image_size must be positive, got {self.image_size}")
        if w % self.grid.cols or h % self.grid.rows:
            raise InvalidConfig(f"image_size {w}x{h} is not divisible by grid {self.grid}")
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise InvalidConfig(f"conf_threshold {self.conf_threshold} outside [0, 1]")
        if not 0.0 <= self.min_visibility <= 1.0:
            raise InvalidConfig(f"min_visibility {self.min_visibility} outside [0, 1]")
        if self.regions is not None and not 1 <= self.regions <= self.grid.n_cells:
            raise InvalidConfig(f"regions must lie in [1, {self.grid.n_cells}], got {self.regions}")
        if self.n_iterations < 0:
            raise InvalidConfig("n_iterations must be >= 0")
        if not -(1 << 63) <= self.seed < (1 << 64):
            raise InvalidConfig(f"seed {self.seed} does not fit in 64 bits")
        kinds = [op.kind for op in self.augment]
        if len(set(kinds)) != len(kinds):
            raise InvalidConfig(f"duplicate augmentation kinds {kinds}")

    @property
    def n_regions(self) -> int:
        return self.grid.n_cells if self.regions is None else self.regions

    def replace(self, **changes) -> Config:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        enabled = {op.kind: op for op in self.augment}
        augment = {}
        for kind in KINDS:
            op = enabled.get(kind, AugOp(kind))
            augment[kind] = {"enabled": kind in enabled, **op.to_dict()}
            del augment[kind]["kind"]
        return {
            "image_size": list(self.image_size),
            "grid": str(self.grid),
            "conf_threshold": self.conf_threshold,
            "min_visibility": self.min_visibility,
            "regions": self.n_regions,
            "augment": augment,
            "seed": self.seed,
            "mock": self.mock.to_dict(),
            "n_iterations": self.n_iterations,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Config:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config fields {sorted(unknown)}")
        kw: dict[str, Any] = {}
        try:
            if "image_size" in data:
                kw["image_size"] = parse_size(data["image_size"])
            if "grid" in data:
                g = data["grid"]
                kw["grid"] = GridLayout.parse(g) if isinstance(g, str) else GridLayout(*g)
            for name in ("conf_threshold", "min_visibility"):
                if name in data:
                    kw[name] = float(data[name])
            if data.get("regions") is not None:
                kw["regions"] = int(data["regions"])
            if "seed" in data:
                kw["seed"] = int(data["seed"])
            if "n_iterations" in data:
                kw["n_iterations"] = int(data["n_iterations"])
            if "augment" in data:
                kw["augment"] = parse_augment(data["augment"])
            if "mock" in data:
                kw["mock"] = MockDetectorConfig.from_dict(data["mock"])
        except InvalidParams as exc:
            raise InvalidConfig(str(exc)) from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidConfig):
                raise
            raise InvalidConfig(f"malformed config: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> Config:
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise InvalidConfig(f"{path}: top level must be a JSON object")
        return cls.from_dict(data)


def parse_size(value) -> tuple[int, int]:
    if isinstance(value, str):
        parts = value.lower().replace("×", "x").split("x")
        if len(parts) != 2:
            raise InvalidConfig(f"size must look like 600x600, got {value!r}")
        return int(parts[0]), int(parts[1])
    w, h = value
    return int(w), int(h)


def parse_augment(value) -> tuple[AugOp, ...]:
    """Accept ``"All"``/``"HF+D"`` strings, a list of names, or a per-op object."""
    if isinstance(value, str) or isinstance(value, list):
        return tuple(ops_from_names(value))
    if not isinstance(value, dict):
        raise InvalidConfig(f"augment must be a string, list or object, got {type(value).__name__}")
    blocks = {canonical_kind(k): v for k, v in value.items()}
    ops = []
    for kind in KINDS:
        block = blocks.get(kind, {})
        if isinstance(block, bool):
            block = {"enabled": block}
        extra = set(block) - {"enabled", "probability", "params"}
        if extra:
            raise InvalidConfig(f"{kind}: unknown keys {sorted(extra)}")
        if not block.get("enabled", True):
            continue
        ops.append(AugOp(kind, float(block.get("probability", -1.0)), block.get("params", {})))
    return tuple(ops)


def resolve_seed(explicit: Optional[int], config_seed: Optional[int]) -> int:
    """Seed priority: command-line flag, then config file, then ``DACA_SEED``, then 0."""
    if explicit is not None:
        return explicit
    if config_seed is not None:
        return config_seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError as exc:
            raise InvalidConfig(f"{SEED_ENV}={env!r} is not an integer") from exc
    return 0
