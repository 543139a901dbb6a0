"""Frames, overlapping patch geometry, separable resampling, and quality metrics.

Everything here stores pixels as 8-bit unsigned samples and does intermediate
math in float64.  Rounding back to 8 bits is always half-away-from-zero so
results are bit-exact across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BT601_LUMA = np.array([0.299, 0.587, 0.114])

PSNR_CAP_DB = 99.0


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def round_u8(values: np.ndarray) -> np.ndarray:
    """Clip to [0, 255] and round half away from zero to uint8."""
    return np.floor(np.clip(values, 0.0, 255.0) + 0.5).astype(np.uint8)


@dataclass(frozen=True)
class Frame:
    """One 8-bit image, shape (height, width, channels), channels 1 or 3."""

    data: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValueError(f"frame data must have shape (h, w, 1|3), got {data.shape}")
        if data.dtype != np.uint8:
            raise ValueError(f"frame samples must be uint8, got {data.dtype}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("frame dimensions must be at least 1x1")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Patch:
    """A square tile copied out of a frame.  origin is (x, y) in frame pixels."""

    origin: tuple[int, int]
    data: np.ndarray
    grid_index: int = 0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or data.dtype != np.uint8:
            raise ValueError("patch data must be uint8 with shape (size, size, channels)")
        if data.shape[0] != data.shape[1]:
            raise ValueError(f"patches are square, got {data.shape}")
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))
        object.__setattr__(self, "data", _freeze(data))

    @property
    def size(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class HiddenPatch:
    """Float-valued feature tile aligned with a Patch; channel count is the
    pipeline's hidden dimension."""

    origin: tuple[int, int]
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[0] != data.shape[1]:
            raise ValueError("hidden patch data must have shape (size, size, hidden_channels)")
        if not np.isfinite(data).all():
            raise ValueError("hidden patch samples must be finite")
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))
        object.__setattr__(self, "data", _freeze(data))

    @property
    def size(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PatchGrid:
    """Overlapping square tiling of a frame.

    Origins step by `stride`; the last origin per axis is clamped to
    dim - patch_size so every pixel is covered.
    """

    frame_width: int
    frame_height: int
    patch_size: int
    stride: int
    origins_x: tuple[int, ...]
    origins_y: tuple[int, ...]

    @property
    def positions(self) -> int:
        return len(self.origins_x) * len(self.origins_y)

    def origin(self, grid_index: int) -> tuple[int, int]:
        """(x, y) origin of the linear position index, ordered by (y, x)."""
        nx = len(self.origins_x)
        return self.origins_x[grid_index % nx], self.origins_y[grid_index // nx]


def axis_origins(dim: int, patch_size: int, stride: int) -> tuple[int, ...]:
    """Regular origins {0, stride, ...} with a final clamp to dim - patch_size."""
    origins = list(range(0, dim - patch_size + 1, stride))
    if origins[-1] != dim - patch_size:
        origins.append(dim - patch_size)
    return tuple(origins)


def build_grid(width: int, height: int, patch_size: int, stride: int) -> PatchGrid:
    if patch_size < 1 or stride < 1:
        raise ValueError("patch_size and stride must be positive")
    if stride > patch_size:
        raise ValueError(f"stride {stride} must not exceed patch_size {patch_size}")
    if width < patch_size or height < patch_size:
        raise ValueError(
            f"frame too small: {width}x{height} cannot hold a {patch_size}px patch"
        )
    return PatchGrid(
        frame_width=width,
        frame_height=height,
        patch_size=patch_size,
        stride=stride,
        origins_x=axis_origins(width, patch_size, stride),
        origins_y=axis_origins(height, patch_size, stride),
    )


def decompose(frame: Frame, grid: PatchGrid) -> list[Patch]:
    """Cut the frame into grid patches, ordered by (origin_y, origin_x).

    Patch data is copied, never aliased into the frame.
    """
    if (frame.width, frame.height) != (grid.frame_width, grid.frame_height):
        raise ValueError(
            f"grid built for {grid.frame_width}x{grid.frame_height}, "
            f"frame is {frame.width}x{frame.height}"
        )
    size = grid.patch_size
    patches = []
    index = 0
    for oy in grid.origins_y:
        for ox in grid.origins_x:
            patches.append(Patch((ox, oy), frame.data[oy:oy + size, ox:ox + size].copy(), index))
            index += 1
    return patches


def recombine(
    patches: list[Patch],
    grid: PatchGrid,
    out_width: int,
    out_height: int,
    frame_index: int = 0,
) -> Frame:
    """Blend patches back into a frame, averaging overlapping areas.

    Patch positions may be the grid's, uniformly pre-scaled by an integer
    factor (origins and patch size multiplied alike), which is how upscaled
    patches come home.
    """
    if not patches:
        raise ValueError("no patches to recombine")
    size = patches[0].size
    channels = patches[0].channels
    if size % grid.patch_size != 0:
        raise ValueError(
            f"patch size {size} is not an integer multiple of grid patch size {grid.patch_size}"
        )
    scale = size // grid.patch_size
    if out_width != grid.frame_width * scale or out_height != grid.frame_height * scale:
        raise ValueError(
            f"output {out_width}x{out_height} inconsistent with grid "
            f"{grid.frame_width}x{grid.frame_height} at scale {scale}"
        )
    valid_x = {o * scale for o in grid.origins_x}
    valid_y = {o * scale for o in grid.origins_y}
    acc = np.zeros((out_height, out_width, channels), np.float64)
    cover = np.zeros((out_height, out_width), np.int32)
    for patch in patches:
        if patch.size != size or patch.channels != channels:
            raise ValueError(
                f"inconsistent patch shapes: {patch.data.shape} vs {(size, size, channels)}"
            )
        x, y = patch.origin
        if x not in valid_x or y not in valid_y:
            raise ValueError(f"patch origin {patch.origin} not on the grid at scale {scale}")
        acc[y:y + size, x:x + size] += patch.data
        cover[y:y + size, x:x + size] += 1
    if (cover == 0).any():
        holes = int((cover == 0).sum())
        raise ValueError(f"coverage hole: {holes} output pixels not covered by any patch")
    return Frame(round_u8(acc / cover[:, :, None]), frame_index)


# --- separable resampling ---------------------------------------------------

def _cubic_kernel(x: np.ndarray, a: float) -> np.ndarray:
    x = np.abs(x)
    x2 = x * x
    x3 = x2 * x
    near = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    far = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def _lanczos_kernel(x: np.ndarray, lobes: int) -> np.ndarray:
    return np.where(np.abs(x) < lobes, np.sinc(x) * np.sinc(x / lobes), 0.0)


def _axis_weights(in_len: int, out_len: int, scale: float, kernel, support: float):
    """Tap indices and normalized weights for one resampling axis.

    Output sample centers map to source coordinates via (o + 0.5)/scale - 0.5.
    This is plain kernel interpolation at every scale (no low-pass stretching
    on decimation), so an upscale/downscale round trip at reciprocal factors
    nearly inverts.  Out-of-range taps clamp to the edge.
    """
    coords = (np.arange(out_len) + 0.5) / scale - 0.5
    left = np.ceil(coords - support).astype(np.int64)
    taps = int(np.floor(2.0 * support)) + 2
    idx = left[:, None] + np.arange(taps)[None, :]
    weights = kernel(coords[:, None] - idx)
    weights = weights / weights.sum(axis=1, keepdims=True)
    return np.clip(idx, 0, in_len - 1), weights


def _resample_axis(arr: np.ndarray, axis: int, idx: np.ndarray, weights: np.ndarray) -> np.ndarray:
    moved = np.moveaxis(arr, axis, 0)
    out = np.zeros((idx.shape[0],) + moved.shape[1:], np.float64)
    shape = (-1,) + (1,) * (moved.ndim - 1)
    for tap in range(idx.shape[1]):
        out += weights[:, tap].reshape(shape) * moved[idx[:, tap]]
    return np.moveaxis(out, 0, axis)


def _out_dim(dim: int, scale: float) -> int:
    out = int(np.floor(dim * scale + 0.5))
    if out < 1:
        raise ValueError(f"scale {scale} collapses dimension {dim} to nothing")
    return out


def resample_kernel_float(arr: np.ndarray, scale: float, kernel, support: float) -> np.ndarray:
    """Separable resampling of a float (h, w, c) array; returns unrounded float64."""
    out_h = _out_dim(arr.shape[0], scale)
    out_w = _out_dim(arr.shape[1], scale)
    idx_y, w_y = _axis_weights(arr.shape[0], out_h, scale, kernel, support)
    idx_x, w_x = _axis_weights(arr.shape[1], out_w, scale, kernel, support)
    vals = _resample_axis(np.asarray(arr, np.float64), 0, idx_y, w_y)
    return _resample_axis(vals, 1, idx_x, w_x)


def bicubic_float(arr: np.ndarray, scale: float, kernel_a: float = -0.5) -> np.ndarray:
    return resample_kernel_float(arr, scale, lambda x: _cubic_kernel(x, kernel_a), 2.0)


def resample_bicubic(frame: Frame, scale: float, kernel_a: float = -0.5) -> Frame:
    """Cubic-convolution resampling (Catmull-Rom at the default a = -0.5)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return Frame(round_u8(bicubic_float(frame.data, float(scale), kernel_a)), frame.frame_index)


def resample_lanczos(frame: Frame, scale: float, lobes: int = 3) -> Frame:
    """Lanczos windowed-sinc resampling."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    vals = resample_kernel_float(
        frame.data, float(scale), lambda x: _lanczos_kernel(x, lobes), float(lobes)
    )
    return Frame(round_u8(vals), frame.frame_index)


def nearest_indices(in_len: int, out_len: int, scale: float) -> np.ndarray:
    coords = (np.arange(out_len) + 0.5) / scale - 0.5
    return np.clip(np.floor(coords + 0.5).astype(np.int64), 0, in_len - 1)


def nearest_float(arr: np.ndarray, scale: float) -> np.ndarray:
    """Nearest-neighbor resampling of a float or integer array, any channels."""
    iy = nearest_indices(arr.shape[0], _out_dim(arr.shape[0], scale), scale)
    ix = nearest_indices(arr.shape[1], _out_dim(arr.shape[1], scale), scale)
    return arr[iy][:, ix]


def resample_nearest(frame: Frame, scale: float) -> Frame:
    if scale <= 0:
        raise ValueError("scale must be positive")
    return Frame(nearest_float(frame.data, float(scale)).copy(), frame.frame_index)


# --- quality metrics --------------------------------------------------------

def _require_same_shape(a, b):
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio over all samples, MAX = 255, capped at 99 dB.

    Accepts any pair of objects carrying equal-shaped uint8 `.data`.
    """
    _require_same_shape(a, b)
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(255.0 * 255.0 / mse), PSNR_CAP_DB)


def luma(data: np.ndarray) -> np.ndarray:
    """BT.601 luma as float64; single-channel input passes through."""
    vals = data.astype(np.float64)
    if data.shape[2] == 1:
        return vals[:, :, 0]
    return vals @ BT601_LUMA


def _window_sums(img: np.ndarray, win: int) -> np.ndarray:
    c = img.cumsum(axis=0).cumsum(axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    return c[win:, win:] - c[:-win, win:] - c[win:, :-win] + c[:-win, :-win]


def ssim(a, b, window: int = 8, k1: float = 0.01, k2: float = 0.03) -> float:
    """Single-scale SSIM, uniform 8x8 sliding windows, computed on luma.

    The mean over windows is clipped into [0, 1]; anti-correlated content
    (which would go negative in the raw formula) reports as 0."""
    _require_same_shape(a, b)
    h, w = a.data.shape[:2]
    if h < window or w < window:
        raise ValueError(f"frame {w}x{h} smaller than the {window}px SSIM window")
    x = luma(a.data)
    y = luma(b.data)
    n = float(window * window)
    mx = _window_sums(x, window) / n
    my = _window_sums(y, window) / n
    mxx = _window_sums(x * x, window) / n
    myy = _window_sums(y * y, window) / n
    mxy = _window_sums(x * y, window) / n
    var_x = mxx - mx * mx
    var_y = myy - my * my
    cov = mxy - mx * my
    c1 = (k1 * 255.0) ** 2
    c2 = (k2 * 255.0) ** 2
    ssim_map = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / (
        (mx * mx + my * my + c1) * (var_x + var_y + c2)
    )
    return float(min(max(ssim_map.mean(), 0.0), 1.0))
