"""Run configuration: one JSON-loadable object carrying every pipeline knob.

Parsing is fail-fast: unknown keys are rejected so a typo cannot silently
fall back to a default."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .flow import FlowParams
from .routing import DEFAULT_COST_WEIGHTS


@dataclass
class RunConfig:
    gamma_routing: float = 1.0
    gamma_pdp: float = 0.2
    patch_size: int = 64
    stride: int = 56
    scale: int = 4
    flow: FlowParams = field(default_factory=FlowParams)
    cost_weights: dict = field(default_factory=lambda: dict(DEFAULT_COST_WEIGHTS))
    backend: str | None = None
    backend_kind: str = "bicubic"
    hidden_channels: int = 4
    refiner_alpha: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.scale not in (2, 4):
            raise ValueError(f"scale must be 2 or 4, got {self.scale}")
        if self.stride > self.patch_size:
            raise ValueError(
                f"stride {self.stride} must not exceed patch_size {self.patch_size}"
            )
        if self.gamma_routing <= 0 or self.gamma_pdp <= 0:
            raise ValueError("gamma thresholds must be positive")
        if set(self.cost_weights) != {"L1", "L3", "L5"}:
            raise ValueError(
                f"cost_weights must have exactly the keys L1, L3, L5, got {sorted(self.cost_weights)}"
            )
        if self.hidden_channels < 1:
            raise ValueError("hidden_channels must be positive")
        if not 0.0 <= self.refiner_alpha <= 1.0:
            raise ValueError("refiner_alpha must lie in [0, 1]")
        if self.backend is not None:
            host, _, port = self.backend.partition(":")
            if not host or not port.isdigit():
                raise ValueError(f"backend must be host:port, got {self.backend!r}")

    @property
    def backend_host_port(self) -> tuple[str, int] | None:
        if self.backend is None:
            return None
        host, _, port = self.backend.partition(":")
        return host, int(port)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values = dict(raw)
        if "flow" in values:
            flow_raw = values["flow"]
            flow_known = {f.name for f in dataclasses.fields(FlowParams)}
            flow_unknown = set(flow_raw) - flow_known
            if flow_unknown:
                raise ValueError(f"unknown flow config keys: {sorted(flow_unknown)}")
            values["flow"] = FlowParams(**flow_raw)
        return cls(**values)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["flow"] = dataclasses.asdict(self.flow)
        return out
