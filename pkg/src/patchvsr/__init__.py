"""patchvsr: patch-based video super-resolution boosting.

Detects temporal redundancy in overlapping patch sequences, routes each patch
to an upscaler backend of matching cost, and propagates long-term information
through per-position patch pools that skip redundant frames.
"""

from .config import RunConfig
from .detect import (
    DetectionConfig,
    MotionProfile,
    MovementLabel,
    classify_label,
    detect_patch_sequence,
    stationary_statistics,
)
from .flow import FlowField, FlowParams, estimate_flow, mean_abs_flow, warp
from .harness import InjectionSpec, compare_injection, evaluate_pipeline, inject_redundancy
from .imaging import (
    Frame,
    HiddenPatch,
    Patch,
    PatchGrid,
    build_grid,
    decompose,
    psnr,
    recombine,
    resample_bicubic,
    resample_lanczos,
    resample_nearest,
    ssim,
)
from .propagation import (
    PatchPool,
    Refiner,
    ToyUpsampler,
    aggregate_features,
    boosted_video_pipeline,
    init_pool,
    propagate,
    reconstruct,
    update_pool,
)
from .remote import RemoteBackend, RemoteClient, mock_server, remote_registry
from .routing import (
    BackendDescriptor,
    BackendRegistry,
    RoutingPlan,
    boosted_frame_pipeline,
    builtin_registry,
    cost_report,
    execute,
    route,
)
from .videoio import load_sequence, prepare_lr, save_sequence

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "DetectionConfig",
    "MotionProfile",
    "MovementLabel",
    "classify_label",
    "detect_patch_sequence",
    "stationary_statistics",
    "FlowField",
    "FlowParams",
    "estimate_flow",
    "mean_abs_flow",
    "warp",
    "InjectionSpec",
    "compare_injection",
    "evaluate_pipeline",
    "inject_redundancy",
    "Frame",
    "HiddenPatch",
    "Patch",
    "PatchGrid",
    "build_grid",
    "decompose",
    "psnr",
    "recombine",
    "resample_bicubic",
    "resample_lanczos",
    "resample_nearest",
    "ssim",
    "PatchPool",
    "Refiner",
    "ToyUpsampler",
    "aggregate_features",
    "boosted_video_pipeline",
    "init_pool",
    "propagate",
    "reconstruct",
    "update_pool",
    "RemoteBackend",
    "RemoteClient",
    "mock_server",
    "remote_registry",
    "BackendDescriptor",
    "BackendRegistry",
    "RoutingPlan",
    "boosted_frame_pipeline",
    "builtin_registry",
    "cost_report",
    "execute",
    "route",
    "load_sequence",
    "prepare_lr",
    "save_sequence",
    "__version__",
]
