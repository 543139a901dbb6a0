"""Independent oracles for the derived expectations.

These stay deliberately naive: exhaustive integer block matching for flow,
and direct enumeration for tiling geometry.  They share no code with the
implementations they check."""

import numpy as np


def gray(frame):
    data = frame.data.astype(np.float64)
    if data.shape[2] == 1:
        return data[:, :, 0]
    return 0.299 * data[:, :, 0] + 0.587 * data[:, :, 1] + 0.114 * data[:, :, 2]


def block_match(reference, target, radius=6, block=8):
    """Exhaustive integer-displacement search per interior block.

    Returns an (n_blocks, 2) array of (dx, dy) minimizing the SSD of
    reference blocks against displaced target windows; blocks are laid out so
    every candidate window stays in bounds."""
    ref = gray(reference)
    tgt = gray(target)
    h, w = ref.shape
    displacements = []
    for y0 in range(radius, h - radius - block + 1, block):
        for x0 in range(radius, w - radius - block + 1, block):
            patch = ref[y0:y0 + block, x0:x0 + block]
            best = None
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    cand = tgt[y0 + dy:y0 + dy + block, x0 + dx:x0 + dx + block]
                    ssd = float(((cand - patch) ** 2).sum())
                    if best is None or ssd < best[0]:
                        best = (ssd, dx, dy)
            displacements.append((best[1], best[2]))
    return np.array(displacements, dtype=np.float64)


def tiling_origins(dim, patch, stride):
    """Enumerate k*stride while the patch fits, then clamp the last origin."""
    origins = []
    k = 0
    while k * stride + patch <= dim:
        origins.append(k * stride)
        k += 1
    if origins[-1] != dim - patch:
        origins.append(dim - patch)
    return origins
