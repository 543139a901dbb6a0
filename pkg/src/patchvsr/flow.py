"""Dense optical flow by pyramidal block search with inverse-search refinement,
plus the mean-magnitude motion scalar and backward warping.

The estimator is fully deterministic: identical inputs give bitwise-equal
fields, and bitwise-identical image pairs short-circuit to the exact zero
field (the property the propagation stage's redundancy skipping relies on).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import BT601_LUMA, Frame, HiddenPatch, Patch, axis_origins, round_u8


@dataclass(frozen=True)
class FlowParams:
    """Estimator operating point.

    pyramid_levels is an upper bound; the pyramid stops early when the next
    level would be smaller than the matching block.
    """

    pyramid_levels: int = 4
    block_size: int = 8
    iterations_per_level: int = 8
    search_radius_coarsest: int = 4

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be at least 1")
        if self.block_size < 4:
            raise ValueError("block_size must be at least 4")
        if self.iterations_per_level < 0:
            raise ValueError("iterations_per_level must be non-negative")
        if self.search_radius_coarsest < 0:
            raise ValueError("search_radius_coarsest must be non-negative")


@dataclass(frozen=True)
class FlowField:
    """Per-pixel (u, v) displacement in pixels; data shape (h, w, 2) float64."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 2:
            raise ValueError(f"flow data must have shape (h, w, 2), got {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("flow vectors must be finite")
        data = np.ascontiguousarray(data)
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def zero_flow(width: int, height: int) -> FlowField:
    return FlowField(np.zeros((height, width, 2), np.float64))


def mean_abs_flow(flow: FlowField) -> float:
    """Mean Euclidean magnitude of the flow vectors (the motion state)."""
    return float(np.mean(np.hypot(flow.data[:, :, 0], flow.data[:, :, 1])))


def _to_gray(image) -> np.ndarray:
    data = image.data
    if data.shape[2] == 1:
        return data[:, :, 0].astype(np.float64)
    return data.astype(np.float64) @ BT601_LUMA


def _half(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    if h % 2:
        img = np.concatenate([img, img[-1:]], axis=0)
    if w % 2:
        img = np.concatenate([img, img[:, -1:]], axis=1)
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def _bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample img at float coordinates, clamping to the border."""
    h, w = img.shape
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.minimum(y0, h - 2) if h > 1 else y0 * 0
    x0 = np.minimum(x0, w - 2) if w > 1 else x0 * 0
    fy = ys - y0
    fx = xs - x0
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    v00 = img[y0, x0]
    v01 = img[y0, x1]
    v10 = img[y1, x0]
    v11 = img[y1, x1]
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11)


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    ys = np.clip((np.arange(out_h) + 0.5) * img.shape[0] / out_h - 0.5, 0, img.shape[0] - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * img.shape[1] / out_w - 0.5, 0, img.shape[1] - 1)
    return _bilinear_sample(img, ys[:, None], xs[None, :])


def _search_offsets(radius: int) -> list[tuple[int, int]]:
    offsets = [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    offsets.sort(key=lambda o: (o[0] * o[0] + o[1] * o[1], o[0], o[1]))
    return offsets


def _locate(centers: np.ndarray, queries: np.ndarray):
    """Lower cell index and fraction for 1-D interpolation on a rectilinear
    grid, with flat extrapolation beyond the ends."""
    if len(centers) == 1:
        return np.zeros(len(queries), np.int64), np.zeros(len(queries))
    idx = np.clip(np.searchsorted(centers, queries, side="right") - 1, 0, len(centers) - 2)
    span = centers[idx + 1] - centers[idx]
    frac = np.clip((queries - centers[idx]) / span, 0.0, 1.0)
    return idx, frac


def _median3(block_flow: np.ndarray) -> np.ndarray:
    """3x3 median of the per-block vectors, edge-replicated.

    Border blocks lose their true correspondence under translation and match
    garbage; the median pulls them back to the neighborhood consensus before
    densification spreads them."""
    by, bx = block_flow.shape[:2]
    if by * bx < 2:
        return block_flow
    padded = np.pad(block_flow, ((1, 1), (1, 1), (0, 0)), mode="edge")
    stacked = np.stack(
        [padded[dy:dy + by, dx:dx + bx] for dy in range(3) for dx in range(3)], axis=0
    )
    return np.median(stacked, axis=0)


def _densify(centers_y, centers_x, block_flow, h, w):
    """Bilinear interpolation of per-block flow samples to a dense field."""
    if len(centers_y) == 1 and len(centers_x) == 1:
        return np.broadcast_to(block_flow[0, 0], (h, w, 2)).copy()
    iy, fy = _locate(centers_y, np.arange(h, dtype=np.float64))
    ix, fx = _locate(centers_x, np.arange(w, dtype=np.float64))
    iy1 = np.minimum(iy + 1, len(centers_y) - 1)
    ix1 = np.minimum(ix + 1, len(centers_x) - 1)
    v00 = block_flow[iy][:, ix]
    v01 = block_flow[iy][:, ix1]
    v10 = block_flow[iy1][:, ix]
    v11 = block_flow[iy1][:, ix1]
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11)


def _solve_level(ref, tgt, init_flow, params: FlowParams, radius: int) -> np.ndarray:
    """Block displacements minimizing SSD around init, refined by inverse
    search on the template gradients, then densified back to a full field."""
    h, w = ref.shape
    bs = params.block_size
    ox = np.array(axis_origins(w, bs, max(1, bs // 2)))
    oy = np.array(axis_origins(h, bs, max(1, bs // 2)))
    centers_x = ox + (bs - 1) / 2.0
    centers_y = oy + (bs - 1) / 2.0
    by, bx = len(oy), len(ox)
    n_blocks = by * bx

    rows = np.arange(bs)
    base_y = (oy[:, None, None, None] + rows[None, None, :, None])
    base_x = (ox[None, :, None, None] + rows[None, None, None, :])
    base_y = np.broadcast_to(base_y, (by, bx, bs, bs)).reshape(n_blocks, bs, bs)
    base_x = np.broadcast_to(base_x, (by, bx, bs, bs)).reshape(n_blocks, bs, bs)
    templates = ref[base_y, base_x]

    init = _bilinear_sample(
        init_flow[:, :, 0], centers_y[:, None], centers_x[None, :]
    ), _bilinear_sample(init_flow[:, :, 1], centers_y[:, None], centers_x[None, :])
    dx = init[0].reshape(n_blocks)
    dy = init[1].reshape(n_blocks)

    # integer search around two candidate centers: the (rounded) upsampled
    # initialization and zero.  The zero candidates let a level recover when
    # coarse levels had too little signal to initialize well; evaluation
    # order starts at the unmoved initialization, so featureless blocks
    # (where every SSD ties) preserve it.
    int_dx = np.floor(dx + 0.5)
    int_dy = np.floor(dy + 0.5)
    zeros = np.zeros(n_blocks)
    best_ssd = np.full(n_blocks, np.inf)
    best_dx = int_dx.copy()
    best_dy = int_dy.copy()
    offsets = _search_offsets(radius)
    centers = [(int_dy, int_dx)]
    if np.any(int_dx) or np.any(int_dy):
        centers.append((zeros, zeros))
    for center_y, center_x in centers:
        for ody, odx in offsets:
            cand_y = center_y + ody
            cand_x = center_x + odx
            cy = np.clip(base_y + cand_y[:, None, None], 0, h - 1).astype(np.int64)
            cx = np.clip(base_x + cand_x[:, None, None], 0, w - 1).astype(np.int64)
            diff = tgt[cy, cx] - templates
            ssd = np.einsum("bij,bij->b", diff, diff)
            better = ssd < best_ssd
            best_ssd = np.where(better, ssd, best_ssd)
            best_dx = np.where(better, cand_x, best_dx)
            best_dy = np.where(better, cand_y, best_dy)
    dx, dy = best_dx, best_dy
    anchor_dx, anchor_dy = dx.copy(), dy.copy()

    # inverse-search refinement: fixed template gradients, 2x2 normal equations
    gy, gx = np.gradient(templates, axis=(1, 2))
    hxx = np.einsum("bij,bij->b", gx, gx)
    hxy = np.einsum("bij,bij->b", gx, gy)
    hyy = np.einsum("bij,bij->b", gy, gy)
    det = hxx * hyy - hxy * hxy
    solvable = det > 1e-9
    inv_det = np.where(solvable, 1.0 / np.where(solvable, det, 1.0), 0.0)
    for _ in range(params.iterations_per_level):
        sampled = _bilinear_sample(tgt, base_y + dy[:, None, None], base_x + dx[:, None, None])
        err = sampled - templates
        bx_ = np.einsum("bij,bij->b", gx, err)
        by_ = np.einsum("bij,bij->b", gy, err)
        step_x = np.where(solvable, inv_det * (hyy * bx_ - hxy * by_), 0.0)
        step_y = np.where(solvable, inv_det * (hxx * by_ - hxy * bx_), 0.0)
        # refinement only polishes the fractional part left by the integer
        # search; letting it wander further means it has diverged
        dx = np.clip(dx - step_x, anchor_dx - 1.5, anchor_dx + 1.5)
        dy = np.clip(dy - step_y, anchor_dy - 1.5, anchor_dy + 1.5)
        if max(np.abs(step_x).max(), np.abs(step_y).max()) < 1e-3:
            break

    block_flow = _median3(np.stack([dx, dy], axis=-1).reshape(by, bx, 2))
    return _densify(centers_y, centers_x, block_flow, h, w)


def estimate_flow(reference, target, params: FlowParams | None = None) -> FlowField:
    """Dense flow mapping reference coordinates into the target.

    The returned field f satisfies reference(p) ~ target(p + f(p)); backward
    warping the target by f reconstructs the reference.  Bitwise-identical
    inputs return the exact zero field without any estimation.
    """
    params = params or FlowParams()
    if reference.data.shape != target.data.shape:
        raise ValueError(
            f"shape mismatch: {reference.data.shape} vs {target.data.shape}"
        )
    h, w = reference.data.shape[:2]
    if np.array_equal(reference.data, target.data):
        return zero_flow(w, h)
    ref = _to_gray(reference)
    tgt = _to_gray(target)

    ref_pyr = [ref]
    tgt_pyr = [tgt]
    while (
        len(ref_pyr) < params.pyramid_levels
        and min(ref_pyr[-1].shape) >= 2 * params.block_size
    ):
        ref_pyr.append(_half(ref_pyr[-1]))
        tgt_pyr.append(_half(tgt_pyr[-1]))

    flow = np.zeros(ref_pyr[-1].shape + (2,), np.float64)
    for level in range(len(ref_pyr) - 1, -1, -1):
        lh, lw = ref_pyr[level].shape
        if flow.shape[:2] != (lh, lw):
            upsampled = np.empty((lh, lw, 2), np.float64)
            upsampled[:, :, 0] = _bilinear_resize(flow[:, :, 0], lh, lw) * (lw / flow.shape[1])
            upsampled[:, :, 1] = _bilinear_resize(flow[:, :, 1], lh, lw) * (lh / flow.shape[0])
            flow = upsampled
        # a parent-level error doubles when the flow upsamples, so finer
        # levels need at least +-2 around their initialization to recover
        radius = params.search_radius_coarsest if level == len(ref_pyr) - 1 else 2
        flow = _solve_level(ref_pyr[level], tgt_pyr[level], flow, params, radius)
    return FlowField(flow)


def warp(image, flow: FlowField):
    """Backward-warp by the flow: out(p) = image(p + flow(p)), bilinear,
    clamped at the borders.  Returns the same type as the input; zero flow is
    a bitwise identity."""
    h, w = image.data.shape[:2]
    if (flow.height, flow.width) != (h, w):
        raise ValueError(f"flow {flow.width}x{flow.height} does not match image {w}x{h}")
    if not flow.data.any():
        warped = image.data.copy()
    else:
        ys = np.arange(h, dtype=np.float64)[:, None] + flow.data[:, :, 1]
        xs = np.arange(w, dtype=np.float64)[None, :] + flow.data[:, :, 0]
        vals = np.stack(
            [
                _bilinear_sample(image.data[:, :, c].astype(np.float64), ys, xs)
                for c in range(image.data.shape[2])
            ],
            axis=-1,
        )
        warped = round_u8(vals) if image.data.dtype == np.uint8 else vals
    if isinstance(image, Frame):
        return Frame(warped, image.frame_index)
    if isinstance(image, Patch):
        return Patch(image.origin, warped, image.grid_index)
    if isinstance(image, HiddenPatch):
        return HiddenPatch(image.origin, warped)
    raise TypeError(f"cannot warp {type(image).__name__}")
