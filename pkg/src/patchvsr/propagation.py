"""Patch-wise dynamic propagation: per-position patch and hidden-state pools
that only absorb a frame's content where motion exceeds the threshold, so
long-term information rides over runs of redundant frames untouched.

Each pass (forward or backward) owns a pool holding exactly one (rgb, hidden)
pair per grid position.  Per frame the pool is aligned to the current frame
(flow + warp), blended into new hidden features, and then selectively
replaced: position i takes the current frame's content only when its motion
m_i is strictly greater than gamma."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import FlowField, FlowParams, estimate_flow, mean_abs_flow, warp
from .imaging import (
    Frame,
    HiddenPatch,
    Patch,
    PatchGrid,
    bicubic_float,
    decompose,
    nearest_float,
    recombine,
    round_u8,
)

DEFAULT_HIDDEN_CHANNELS = 4


@dataclass(frozen=True)
class Refiner:
    """Stand-in for the learned refinement: an exponential blend of the warped
    pooled features with the lifted current patch.  The blend makes the
    propagation influence analytically traceable in tests."""

    kind: str = "toy-linear"
    alpha: float = 0.5

    def __post_init__(self):
        if self.kind != "toy-linear":
            raise ValueError(
                f"unsupported refiner kind {self.kind!r}: the wire protocol carries "
                "pixel patches, not feature tensors, so refinement is always local"
            )
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def lift(patch_data: np.ndarray, hidden_channels: int = DEFAULT_HIDDEN_CHANNELS) -> np.ndarray:
    """Map an 8-bit patch into hidden space: channels replicated cyclically,
    values scaled to [0, 1]."""
    channels = patch_data.shape[2]
    idx = np.arange(hidden_channels) % channels
    return patch_data[:, :, idx].astype(np.float64) / 255.0


@dataclass(frozen=True)
class PoolEntry:
    rgb: Patch
    hidden: HiddenPatch
    source_frame: int


@dataclass(frozen=True)
class PatchPool:
    """One (rgb, hidden) pair per grid position for one propagation direction."""

    direction: str
    grid: PatchGrid
    entries: tuple[PoolEntry, ...]
    hidden_channels: int

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"direction must be forward or backward, got {self.direction!r}")
        if len(self.entries) != self.grid.positions:
            raise ValueError(
                f"pool has {len(self.entries)} entries for {self.grid.positions} positions"
            )
        for entry in self.entries:
            if entry.rgb.origin != entry.hidden.origin:
                raise ValueError("rgb and hidden entries must share their origin")
            if entry.hidden.channels != self.hidden_channels:
                raise ValueError(
                    f"hidden entry has {entry.hidden.channels} channels, "
                    f"pool is configured for {self.hidden_channels}"
                )


def init_pool(
    frame: Frame,
    grid: PatchGrid,
    direction: str = "forward",
    hidden_channels: int = DEFAULT_HIDDEN_CHANNELS,
) -> PatchPool:
    """Seed a pool from the pass's first frame: rgb is the frame's patches,
    hidden is their lift."""
    entries = tuple(
        PoolEntry(
            rgb=patch,
            hidden=HiddenPatch(patch.origin, lift(patch.data, hidden_channels)),
            source_frame=frame.frame_index,
        )
        for patch in decompose(frame, grid)
    )
    return PatchPool(direction, grid, entries, hidden_channels)


def _aggregate(
    patches: list[Patch],
    pool: PatchPool,
    refiner: Refiner,
    flow_params: FlowParams | None,
) -> tuple[list[HiddenPatch], list[FlowField], list[float]]:
    alpha = refiner.alpha
    phis: list[HiddenPatch] = []
    flows: list[FlowField] = []
    motions: list[float] = []
    for patch, entry in zip(patches, pool.entries):
        flow = estimate_flow(patch, entry.rgb, flow_params)
        warped = warp(entry.hidden, flow)
        phi = alpha * warped.data + (1.0 - alpha) * lift(patch.data, pool.hidden_channels)
        phis.append(HiddenPatch(patch.origin, phi))
        flows.append(flow)
        motions.append(mean_abs_flow(flow))
    return phis, flows, motions


def aggregate_features(
    frame: Frame,
    pool: PatchPool,
    refiner: Refiner | None = None,
    flow_params: FlowParams | None = None,
):
    """Align the pool to the current frame and blend, per position.

    Flow is estimated in the current frame's coordinates pointing into the
    pooled patch, so warping the pooled hidden state brings it into register
    with the frame.  Returns (hidden features, flow fields, motions)."""
    refiner = refiner or Refiner()
    if (frame.width, frame.height) != (pool.grid.frame_width, pool.grid.frame_height):
        raise ValueError(
            f"frame {frame.width}x{frame.height} does not match pool grid "
            f"{pool.grid.frame_width}x{pool.grid.frame_height}"
        )
    return _aggregate(decompose(frame, pool.grid), pool, refiner, flow_params)


def update_pool(
    pool: PatchPool,
    frame_patches: list[Patch],
    phi_patches: list[HiddenPatch],
    motions: list[float],
    gamma: float,
    frame_index: int,
) -> PatchPool:
    """Replace position i with the current frame's (patch, features) iff its
    motion is strictly greater than gamma; redundant positions keep their
    stored content untouched."""
    if not len(frame_patches) == len(phi_patches) == len(motions) == len(pool.entries):
        raise ValueError("per-position inputs must align with the pool")
    entries = tuple(
        PoolEntry(patch, phi, frame_index) if motion > gamma else entry
        for entry, patch, phi, motion in zip(pool.entries, frame_patches, phi_patches, motions)
    )
    return PatchPool(pool.direction, pool.grid, entries, pool.hidden_channels)


def propagate(
    video: list[Frame],
    grid: PatchGrid,
    gamma: float = 0.2,
    refiner: Refiner | None = None,
    direction: str = "forward",
    flow_params: FlowParams | None = None,
    hidden_channels: int = DEFAULT_HIDDEN_CHANNELS,
    update_mode: str = "motion",
    trace: list | None = None,
) -> list[list[HiddenPatch]]:
    """One propagation pass over the video; returns per-frame hidden features
    indexed by original frame position for both directions.

    update_mode "motion" is the dynamic pool (replace only above gamma);
    "always" is the naive sequential baseline that absorbs every frame.
    Passing a list as `trace` collects per-position update records."""
    refiner = refiner or Refiner()
    if not video:
        raise ValueError("cannot propagate an empty video")
    if update_mode not in ("motion", "always"):
        raise ValueError(f"unknown update_mode {update_mode!r}")
    order = range(len(video)) if direction == "forward" else range(len(video) - 1, -1, -1)
    order = list(order)
    pool = init_pool(video[order[0]], grid, direction, hidden_channels)
    features: list = [None] * len(video)
    for t in order:
        frame = video[t]
        patches = decompose(frame, grid)
        phis, _flows, motions = _aggregate(patches, pool, refiner, flow_params)
        features[t] = phis
        if update_mode == "always":
            effective = [gamma + 1.0] * len(motions)
        else:
            effective = motions
        if trace is not None:
            for pos, motion in enumerate(motions):
                trace.append(
                    {
                        "frame_index": frame.frame_index,
                        "direction": direction,
                        "position": pos,
                        "m": motion,
                        "replaced": bool(effective[pos] > gamma),
                    }
                )
        pool = update_pool(pool, patches, phis, effective, gamma, frame.frame_index)
    return features


class ToyUpsampler:
    """Bicubic base plus a nearest-upscaled hidden residual.

    Per position: base = bicubic x scale of the rgb patch (kept in float);
    residual = nearest x scale of (mean(h_f, h_b) - lift(rgb)) averaged over
    hidden channels and mapped back to sample range."""

    def __init__(self, scale: int = 4):
        self.scale = scale

    def upscale(self, patch: Patch) -> np.ndarray:
        return bicubic_float(patch.data, float(self.scale))


def reconstruct(
    h_forward: list[HiddenPatch],
    h_backward: list[HiddenPatch],
    frame: Frame,
    grid: PatchGrid,
    upsampler=None,
) -> Frame:
    """Fuse both directions' features with the frame into the SR output."""
    if h_forward is None or h_backward is None:
        raise ValueError("reconstruct needs features from both directions")
    upsampler = upsampler or ToyUpsampler()
    scale = upsampler.scale
    patches = decompose(frame, grid)
    if not len(h_forward) == len(h_backward) == len(patches):
        raise ValueError("direction features must cover every grid position")
    sr_patches = []
    for patch, hf, hb in zip(patches, h_forward, h_backward):
        base = upsampler.upscale(patch)
        hidden_channels = hf.data.shape[2]
        residual = 0.5 * (hf.data + hb.data) - lift(patch.data, hidden_channels)
        residual = residual.mean(axis=2) * 255.0
        vals = base + nearest_float(residual, float(scale))[:, :, None]
        sr_patches.append(
            Patch(
                (patch.origin[0] * scale, patch.origin[1] * scale),
                round_u8(vals),
                patch.grid_index,
            )
        )
    return recombine(
        sr_patches,
        grid,
        grid.frame_width * scale,
        grid.frame_height * scale,
        frame_index=frame.frame_index,
    )


def boosted_video_pipeline(
    video: list[Frame],
    grid: PatchGrid,
    gamma: float = 0.2,
    refiner: Refiner | None = None,
    upsampler=None,
    flow_params: FlowParams | None = None,
    hidden_channels: int = DEFAULT_HIDDEN_CHANNELS,
    update_mode: str = "motion",
    trace: list | None = None,
) -> list[Frame]:
    """Bidirectional propagation plus per-frame reconstruction."""
    h_fwd = propagate(
        video, grid, gamma, refiner, "forward", flow_params, hidden_channels, update_mode, trace
    )
    h_bwd = propagate(
        video, grid, gamma, refiner, "backward", flow_params, hidden_channels, update_mode, trace
    )
    return [
        reconstruct(h_fwd[t], h_bwd[t], video[t], grid, upsampler)
        for t in range(len(video))
    ]
