"""Adaptive super-resolution routing: partition labeled patch sequences into
per-label batches, dispatch each batch to a backend of matching cost, account
the compute saved, and run the full detect-route-execute-recombine pipeline
for one five-frame window."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detect import DetectionConfig, MovementLabel, detect_patch_sequence
from .flow import FlowParams
from .imaging import (
    Frame,
    Patch,
    PatchGrid,
    bicubic_float,
    decompose,
    nearest_float,
    recombine,
    resample_kernel_float,
    round_u8,
    _lanczos_kernel,
)

BUILTIN_KINDS = ("builtin-bicubic", "builtin-lanczos", "builtin-nearest")
DEFAULT_COST_WEIGHTS = {"L1": 0.2, "L3": 0.6, "L5": 1.0}

LABEL_ORDER = (MovementLabel.L1, MovementLabel.L3, MovementLabel.L5)


class BackendError(RuntimeError):
    """A backend failed while processing a batch; carries the batch identity
    so the caller can retry it."""

    def __init__(self, label: MovementLabel, grid_indices: tuple[int, ...], cause: str):
        self.label = label
        self.grid_indices = grid_indices
        super().__init__(f"backend failed on {label.value} batch {grid_indices}: {cause}")


@dataclass(frozen=True)
class BackendDescriptor:
    backend_id: str
    handles_label: MovementLabel
    frames_consumed: int
    cost_weight: float
    kind: str

    def __post_init__(self):
        if self.frames_consumed != self.handles_label.frames_consumed:
            raise ValueError(
                f"{self.handles_label.value} backend must consume "
                f"{self.handles_label.frames_consumed} frames, got {self.frames_consumed}"
            )
        if self.cost_weight <= 0:
            raise ValueError("cost_weight must be positive")
        if self.kind not in BUILTIN_KINDS + ("remote",):
            raise ValueError(f"unknown backend kind {self.kind!r}")


class BuiltinBackend:
    """Single-image resampler applied to the center patch of each sequence.

    Multi-frame slices are accepted but only the center patch is used, which
    is exactly the redundancy argument for routing stationary patches to a
    cheap single-frame upscaler.
    """

    def __init__(self, descriptor: BackendDescriptor, resampler: str):
        if resampler not in ("bicubic", "lanczos", "nearest"):
            raise ValueError(f"unknown builtin resampler {resampler!r}")
        self.descriptor = descriptor
        self.resampler = resampler

    def _upscale(self, data: np.ndarray, scale: int) -> np.ndarray:
        if self.resampler == "bicubic":
            return round_u8(bicubic_float(data, float(scale)))
        if self.resampler == "lanczos":
            vals = resample_kernel_float(
                data, float(scale), lambda x: _lanczos_kernel(x, 3), 3.0
            )
            return round_u8(vals)
        return nearest_float(data, float(scale)).copy()

    def upscale_batch(self, sequences, scale: int) -> list[np.ndarray]:
        return [self._upscale(seq[len(seq) // 2].data, scale) for seq in sequences]


@dataclass
class BackendRegistry:
    """Immutable-during-a-run mapping from movement label to backend."""

    _backends: dict = field(default_factory=dict)

    def register(self, backend) -> "BackendRegistry":
        self._backends[backend.descriptor.handles_label] = backend
        return self

    def backend_for(self, label: MovementLabel):
        backend = self._backends.get(label)
        if backend is None:
            raise KeyError(f"no backend registered for label {label.value}")
        return backend

    def cost_weight(self, label: MovementLabel) -> float:
        return self.backend_for(label).descriptor.cost_weight

    @property
    def labels(self):
        return tuple(self._backends)


def builtin_registry(
    resampler: str = "bicubic", cost_weights: dict | None = None
) -> BackendRegistry:
    """Registry with the same builtin resampler covering all three labels."""
    weights = dict(DEFAULT_COST_WEIGHTS)
    weights.update(cost_weights or {})
    registry = BackendRegistry()
    for label in LABEL_ORDER:
        descriptor = BackendDescriptor(
            backend_id=f"{resampler}-{label.value.lower()}",
            handles_label=label,
            frames_consumed=label.frames_consumed,
            cost_weight=weights[label.value],
            kind=f"builtin-{resampler}",
        )
        registry.register(BuiltinBackend(descriptor, resampler))
    return registry


def slice_for_label(seq, label: MovementLabel):
    """Truncate a five-patch sequence to the frames its label's backend consumes."""
    if len(seq) != 5:
        raise ValueError(f"expected a 5-patch sequence, got {len(seq)}")
    if label is MovementLabel.L1:
        return (seq[2],)
    if label is MovementLabel.L3:
        return tuple(seq[1:4])
    return tuple(seq)


@dataclass(frozen=True)
class RoutingPlan:
    """Per-label batches of (grid_index, truncated patch sequence)."""

    batches: dict
    scale: int
    positions: int

    def batch(self, label: MovementLabel):
        return self.batches.get(label, ())

    def label_counts(self) -> dict[str, int]:
        return {label.value: len(self.batches.get(label, ())) for label in LABEL_ORDER}


def route(labels, sequences, scale: int = 4) -> RoutingPlan:
    """Partition grid positions by label, slicing each sequence to its
    label's window.  Entries are ordered by grid index; every position lands
    in exactly one batch."""
    if len(labels) != len(sequences):
        raise ValueError(
            f"{len(labels)} labels for {len(sequences)} sequences: every position needs a label"
        )
    batches: dict[MovementLabel, list] = {}
    for index, (label, seq) in enumerate(zip(labels, sequences)):
        if label is None:
            raise ValueError(f"missing label for grid position {index}")
        batches.setdefault(label, []).append((index, slice_for_label(seq, label)))
    return RoutingPlan(
        batches={label: tuple(entries) for label, entries in batches.items()},
        scale=scale,
        positions=len(labels),
    )


def execute(plan: RoutingPlan, registry: BackendRegistry) -> list[Patch]:
    """Run every batch through its backend; returns SR patches at scaled
    origins, ordered by grid index and ready to recombine."""
    for label in plan.batches:
        registry.backend_for(label)  # fail fast before any backend runs
    results: dict[int, Patch] = {}
    for label in LABEL_ORDER:
        entries = plan.batch(label)
        if not entries:
            continue
        backend = registry.backend_for(label)
        try:
            outputs = backend.upscale_batch([seq for _, seq in entries], plan.scale)
        except Exception as exc:
            raise BackendError(label, tuple(i for i, _ in entries), str(exc)) from exc
        if len(outputs) != len(entries):
            raise BackendError(
                label,
                tuple(i for i, _ in entries),
                f"returned {len(outputs)} patches for {len(entries)} inputs",
            )
        for (index, seq), data in zip(entries, outputs):
            center = seq[len(seq) // 2]
            origin = (center.origin[0] * plan.scale, center.origin[1] * plan.scale)
            results[index] = Patch(origin, data, index)
    return [results[i] for i in sorted(results)]


def cost_report(plan: RoutingPlan, registry: BackendRegistry) -> dict:
    """Relative compute of the plan against billing every position at the
    full five-frame weight."""
    counts = plan.label_counts()
    total = sum(
        counts[label.value] * registry.cost_weight(label) for label in LABEL_ORDER
    )
    baseline = plan.positions * registry.cost_weight(MovementLabel.L5)
    return {
        "total_cost": total,
        "baseline_cost": baseline,
        "ratio": total / baseline if baseline else 0.0,
        "per_label_counts": counts,
    }


def window5(video: list[Frame], t: int) -> list[Frame]:
    """Five-frame window centered on t, replicate-padded at the sequence ends."""
    last = len(video) - 1
    return [video[min(max(t + offset, 0), last)] for offset in (-2, -1, 0, 1, 2)]


def boosted_frame_pipeline(
    frames: list[Frame],
    grid: PatchGrid,
    cfg: DetectionConfig | None = None,
    registry: BackendRegistry | None = None,
    flow_params: FlowParams | None = None,
    scale: int = 4,
) -> tuple[Frame, RoutingPlan, dict]:
    """Detect, route, execute, and recombine one five-frame window into the
    SR center frame, with the cost report attached."""
    cfg = cfg or DetectionConfig()
    registry = registry or builtin_registry()
    if len(frames) != 5:
        raise ValueError(f"pipeline takes 5 frames, got {len(frames)}")
    per_frame = [decompose(frame, grid) for frame in frames]
    labels = []
    sequences = []
    for pos in range(grid.positions):
        seq = tuple(per_frame[t][pos] for t in range(5))
        label, _ = detect_patch_sequence(seq, cfg, flow_params)
        labels.append(label)
        sequences.append(seq)
    plan = route(labels, sequences, scale)
    sr_patches = execute(plan, registry)
    out = recombine(
        sr_patches,
        grid,
        grid.frame_width * scale,
        grid.frame_height * scale,
        frame_index=frames[2].frame_index,
    )
    return out, plan, cost_report(plan, registry)
