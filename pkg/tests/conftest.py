"""Shared fixture builders: textured frames, shifted pairs, synthetic videos."""

import numpy as np
import pytest

from patchvsr import Frame


def texture(width, height, seed=0, channels=3):
    rng = np.random.default_rng(seed)
    return Frame(rng.integers(0, 256, (height, width, channels), dtype=np.uint8))


def crop_shift_pair(width, height, dx, dy, seed=0, margin=16, channels=3):
    """Two views of one larger texture, the second shifted by (dx, dy).

    Every pixel of the first view has a true correspondence in the second,
    so there is no wrap seam to excuse."""
    rng = np.random.default_rng(seed)
    big = rng.integers(
        0, 256, (height + 2 * margin, width + 2 * margin, channels), dtype=np.uint8
    )
    a = Frame(big[margin:margin + height, margin:margin + width].copy())
    b = Frame(
        big[margin - dy:margin - dy + height, margin - dx:margin - dx + width].copy()
    )
    return a, b


def sliding_video(width, height, n_frames, seed=0, step=1, channels=3):
    """Fully dynamic video: a crop window sliding over one big texture."""
    rng = np.random.default_rng(seed)
    big = rng.integers(
        0, 256, (height + 16, width + 16 + n_frames * step, channels), dtype=np.uint8
    )
    return [
        Frame(big[8:8 + height, 8 + t * step:8 + t * step + width].copy(), frame_index=t)
        for t in range(n_frames)
    ]


def static_video(width, height, n_frames, seed=0, channels=3):
    base = texture(width, height, seed, channels)
    return [Frame(base.data, frame_index=t) for t in range(n_frames)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
