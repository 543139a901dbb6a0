"""Temporal redundancy detection: motion profiles over five-patch windows,
movement labels, and stationary-sequence statistics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .flow import FlowParams, estimate_flow, mean_abs_flow
from .imaging import Frame, PatchGrid, decompose, psnr


class MovementLabel(enum.Enum):
    """How many frames of the five-frame window carry useful dynamics."""

    L1 = "L1"
    L3 = "L3"
    L5 = "L5"

    @property
    def frames_consumed(self) -> int:
        return {"L1": 1, "L3": 3, "L5": 5}[self.value]


@dataclass(frozen=True)
class MotionProfile:
    """The four inter-patch motion scalars of a five-patch window.

    Named by window offset: m_minus1/m_plus1 are measured against the center
    patch, m_minus2/m_plus2 between the adjacent border pairs.
    """

    m_minus2: float
    m_minus1: float
    m_plus1: float
    m_plus2: float

    def __post_init__(self):
        for name in ("m_minus2", "m_minus1", "m_plus1", "m_plus2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")


@dataclass(frozen=True)
class DetectionConfig:
    gamma: float = 1.0
    sequence_length: int = 5
    psnr_threshold: float = 35.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.sequence_length % 2 == 0:
            raise ValueError("sequence_length must be odd")


def classify_label(profile: MotionProfile, gamma: float) -> MovementLabel:
    """Movement label from the motion profile.

    Comparisons are strict: values equal to gamma count as non-stationary.
    """
    if profile.m_minus1 < gamma and profile.m_plus1 < gamma:
        return MovementLabel.L1
    if profile.m_minus2 < gamma and profile.m_plus2 < gamma:
        return MovementLabel.L3
    return MovementLabel.L5


def detect_patch_sequence(
    seq,
    cfg: DetectionConfig | None = None,
    flow_params: FlowParams | None = None,
) -> tuple[MovementLabel, MotionProfile]:
    """Label one aligned five-patch sequence [t-2 .. t+2].

    The inner motions are measured against the center patch, the outer
    motions between the adjacent border pairs; each pair's flow is estimated
    independently.
    """
    cfg = cfg or DetectionConfig()
    if len(seq) != 5:
        raise ValueError(f"patch sequence must have 5 entries, got {len(seq)}")
    first = seq[0]
    for patch in seq[1:]:
        if patch.data.shape != first.data.shape or patch.origin != first.origin:
            raise ValueError("sequence patches must share size and grid position")
    pairs = ((0, 1), (1, 2), (3, 2), (4, 3))
    motions = [
        mean_abs_flow(estimate_flow(seq[a], seq[b], flow_params)) for a, b in pairs
    ]
    profile = MotionProfile(motions[0], motions[1], motions[2], motions[3])
    return classify_label(profile, cfg.gamma), profile


def stationary_statistics(
    video: list[Frame],
    grid: PatchGrid,
    window: int = 5,
    psnr_threshold: float = 35.0,
    reference: str = "center",
) -> dict:
    """Fraction of (position, center-frame) windows that are stationary.

    A window is stationary when every neighboring patch scores above the PSNR
    threshold against the reference.  `reference` picks what each patch is
    compared with: the window's center patch ("center", default) or its
    consecutive successor ("pairs").
    """
    if window % 2 == 0 or window < 3:
        raise ValueError("window must be odd and at least 3")
    if len(video) < window:
        raise ValueError(f"video length {len(video)} shorter than window {window}")
    if reference not in ("center", "pairs"):
        raise ValueError(f"unknown reference mode {reference!r}")

    patches = [decompose(frame, grid) for frame in video]
    half = window // 2
    positions = grid.positions
    stationary = [0] * positions
    totals = [0] * positions
    for center in range(half, len(video) - half):
        for pos in range(positions):
            if reference == "center":
                ok = all(
                    psnr(patches[t][pos], patches[center][pos]) > psnr_threshold
                    for t in range(center - half, center + half + 1)
                    if t != center
                )
            else:
                ok = all(
                    psnr(patches[t][pos], patches[t + 1][pos]) > psnr_threshold
                    for t in range(center - half, center + half)
                )
            totals[pos] += 1
            stationary[pos] += int(ok)

    total_windows = sum(totals)
    return {
        "window": window,
        "threshold": psnr_threshold,
        "reference": reference,
        "windows": total_windows,
        "stationary_windows": sum(stationary),
        "ratio": (sum(stationary) / total_windows) if total_windows else 0.0,
        "positions": [
            {
                "index": pos,
                "x": grid.origin(pos)[0],
                "y": grid.origin(pos)[1],
                "stationary": stationary[pos],
                "windows": totals[pos],
            }
            for pos in range(positions)
        ],
    }
