import numpy as np
import pytest

from patchvsr import Frame, FlowField, FlowParams, estimate_flow, mean_abs_flow, warp
from patchvsr.imaging import HiddenPatch

from conftest import crop_shift_pair, texture
from oracles import block_match


def uniform_flow(width, height, dx, dy):
    data = np.empty((height, width, 2))
    data[:, :, 0] = dx
    data[:, :, 1] = dy
    return FlowField(data)


class TestEstimate:
    def test_identical_frames_exact_zero(self):
        frame = texture(64, 64, seed=1)
        same = Frame(frame.data.copy())
        field = estimate_flow(frame, same)
        assert not field.data.any()

    def test_circular_shift_recovery(self):
        rng = np.random.default_rng(21)
        data = rng.integers(0, 256, (128, 128, 3), dtype=np.uint8)
        ref = Frame(data)
        tgt = Frame(np.roll(data, shift=(1, 3), axis=(0, 1)))  # ref(p)=tgt(p+(3,1))
        oracle = block_match(ref, tgt, radius=6, block=8)
        assert np.array_equal(np.median(oracle, axis=0), [3.0, 1.0])
        field = estimate_flow(ref, tgt)
        inner = field.data[16:-16, 16:-16]
        epe = np.mean(np.hypot(inner[..., 0] - 3, inner[..., 1] - 1))
        assert epe < 0.5

    def test_constant_frames_keep_zero_initialization(self):
        a = Frame(np.full((64, 64, 1), 10, np.uint8))
        b = Frame(np.full((64, 64, 1), 200, np.uint8))
        assert not estimate_flow(a, b).data.any()

    def test_random_translations_against_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            dx, dy = 0, 0
            while dx == 0 and dy == 0:
                dx, dy = int(rng.integers(-4, 5)), int(rng.integers(-4, 5))
            a, b = crop_shift_pair(128, 128, dx, dy, seed=int(rng.integers(1 << 30)))
            oracle = np.median(block_match(a, b, radius=6, block=8), axis=0)
            assert np.array_equal(oracle, [dx, dy])
            field = estimate_flow(a, b)
            inner = field.data[16:-16, 16:-16]
            assert np.mean(np.hypot(inner[..., 0] - dx, inner[..., 1] - dy)) < 0.5

    def test_deterministic(self):
        a, b = crop_shift_pair(96, 96, 2, -1, seed=3)
        first = estimate_flow(a, b)
        second = estimate_flow(a, b)
        assert np.array_equal(first.data, second.data)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            estimate_flow(texture(64, 64), texture(64, 65))

    def test_params_validation(self):
        with pytest.raises(ValueError):
            FlowParams(pyramid_levels=0)
        with pytest.raises(ValueError):
            FlowParams(block_size=2)


class TestMeanAbsFlow:
    def test_zero_field(self):
        assert mean_abs_flow(uniform_flow(8, 8, 0, 0)) == 0.0

    def test_three_four_five(self):
        assert mean_abs_flow(uniform_flow(8, 8, 3, 4)) == 5.0

    def test_half_and_half(self):
        data = np.zeros((4, 8, 2))
        data[:, :4, 0] = 2.0
        assert mean_abs_flow(FlowField(data)) == 1.0

    def test_permutation_invariant(self, rng):
        data = rng.normal(size=(8, 8, 2))
        field = FlowField(data)
        flat = data.reshape(-1, 2)
        shuffled = flat[rng.permutation(len(flat))].reshape(8, 8, 2)
        assert mean_abs_flow(FlowField(shuffled)) == pytest.approx(
            mean_abs_flow(field), rel=1e-12
        )


class TestWarp:
    def test_zero_flow_identity_uint8(self):
        frame = texture(32, 24, seed=4)
        out = warp(frame, uniform_flow(32, 24, 0, 0))
        assert np.array_equal(out.data, frame.data)

    def test_zero_flow_identity_float(self):
        hidden = HiddenPatch((0, 0), np.linspace(0, 1, 16 * 16 * 4).reshape(16, 16, 4))
        out = warp(hidden, uniform_flow(16, 16, 0, 0))
        assert np.array_equal(out.data, hidden.data)

    def test_integer_shift_is_lookup(self):
        ramp = Frame(np.tile(np.arange(0, 128, 2, dtype=np.uint8), (16, 1))[:, :, None])
        out = warp(ramp, uniform_flow(64, 16, 1, 0))
        assert np.array_equal(out.data[:, :-1], ramp.data[:, 1:])
        assert np.array_equal(out.data[:, -1], ramp.data[:, -1])  # border clamp

    def test_half_pixel_shift_on_slope_two_ramp(self):
        ramp = Frame(np.tile(np.arange(0, 128, 2, dtype=np.uint8), (16, 1))[:, :, None])
        out = warp(ramp, uniform_flow(64, 16, 0.5, 0))
        assert np.array_equal(
            out.data[:, :-1, 0], ramp.data[:, :-1, 0] + 1
        )

    def test_forward_backward_on_smooth_ramp(self):
        ramp = Frame(np.tile(np.arange(0, 128, 2, dtype=np.uint8), (64, 1))[:, :, None])
        forward = warp(ramp, uniform_flow(64, 64, 2, 0))
        back = warp(forward, uniform_flow(64, 64, -2, 0))
        interior = slice(4, -4)
        assert np.array_equal(back.data[:, interior], ramp.data[:, interior])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="does not match"):
            warp(texture(16, 16), uniform_flow(8, 8, 0, 0))
