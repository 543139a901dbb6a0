import numpy as np
import pytest

from patchvsr import (
    Frame,
    Patch,
    build_grid,
    decompose,
    psnr,
    recombine,
    resample_bicubic,
    resample_lanczos,
    resample_nearest,
    ssim,
)
from patchvsr.imaging import bicubic_float, nearest_float, round_u8

from conftest import texture
from oracles import tiling_origins


class TestGrid:
    def test_single_tile(self):
        grid = build_grid(64, 64, 64, 56)
        assert grid.origins_x == (0,)
        assert grid.origins_y == (0,)
        assert grid.positions == 1

    def test_clamped_final_origin(self):
        grid = build_grid(184, 184, 64, 56)
        expected = tuple(tiling_origins(184, 64, 56))
        assert grid.origins_x == expected == (0, 56, 112, 120)
        assert grid.positions == 16

    def test_exact_fit(self):
        grid = build_grid(120, 120, 64, 56)
        assert grid.origins_x == tuple(tiling_origins(120, 64, 56)) == (0, 56)
        assert grid.positions == 4

    def test_frame_too_small(self):
        with pytest.raises(ValueError, match="too small"):
            build_grid(63, 64, 64, 56)

    def test_stride_exceeds_patch(self):
        with pytest.raises(ValueError, match="stride"):
            build_grid(128, 128, 64, 65)

    def test_full_coverage_random_sizes(self, rng):
        for _ in range(20):
            w = int(rng.integers(64, 300))
            h = int(rng.integers(64, 300))
            grid = build_grid(w, h, 64, 56)
            covered = np.zeros((h, w), bool)
            for oy in grid.origins_y:
                for ox in grid.origins_x:
                    covered[oy:oy + 64, ox:ox + 64] = True
            assert covered.all()
            assert all(b > a for a, b in zip(grid.origins_x, grid.origins_x[1:]))


class TestDecompose:
    def test_single_patch_equals_frame(self):
        frame = texture(64, 64, seed=3)
        [patch] = decompose(frame, build_grid(64, 64, 64, 56))
        assert np.array_equal(patch.data, frame.data)
        assert patch.origin == (0, 0)

    def test_constant_frame(self):
        frame = Frame(np.full((120, 120, 3), 7, np.uint8))
        patches = decompose(frame, build_grid(120, 120, 64, 56))
        assert len(patches) == 4
        assert all((p.data == 7).all() for p in patches)

    def test_ramp_slicing(self):
        ramp = np.add.outer(np.arange(184), np.arange(184)) % 256
        frame = Frame(ramp.astype(np.uint8)[:, :, None])
        grid = build_grid(184, 184, 64, 56)
        patches = decompose(frame, grid)
        last = patches[-1]
        assert last.origin == (120, 120)
        assert np.array_equal(last.data, frame.data[120:184, 120:184])

    def test_ordering_and_copies(self):
        frame = texture(120, 120, seed=5)
        grid = build_grid(120, 120, 64, 56)
        patches = decompose(frame, grid)
        origins = [p.origin for p in patches]
        assert origins == [(0, 0), (56, 0), (0, 56), (56, 56)]
        assert all(p.grid_index == i for i, p in enumerate(patches))
        assert not np.shares_memory(patches[0].data, frame.data)

    def test_dimension_mismatch(self):
        frame = texture(64, 64)
        with pytest.raises(ValueError, match="grid built for"):
            decompose(frame, build_grid(120, 120, 64, 56))


class TestRecombine:
    def test_identity_round_trip(self, rng):
        for _ in range(25):
            w = int(rng.integers(64, 260))
            h = int(rng.integers(64, 260))
            frame = Frame(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))
            grid = build_grid(w, h, 64, 56)
            assert np.array_equal(
                recombine(decompose(frame, grid), grid, w, h).data, frame.data
            )

    def test_overlap_mean(self):
        grid = build_grid(120, 64, 64, 56)
        left = Patch((0, 0), np.zeros((64, 64, 1), np.uint8), 0)
        right = Patch((56, 0), np.full((64, 64, 1), 2, np.uint8), 1)
        out = recombine([left, right], grid, 120, 64)
        assert (out.data[:, 56:64] == 1).all()
        assert (out.data[:, :56] == 0).all()
        assert (out.data[:, 64:] == 2).all()

    def test_scaled_nearest_round_trip_matches_whole_frame(self):
        frame = texture(184, 184, seed=9)
        grid = build_grid(184, 184, 64, 56)
        upscaled = [
            Patch(
                (p.origin[0] * 4, p.origin[1] * 4),
                nearest_float(p.data, 4.0).copy(),
                p.grid_index,
            )
            for p in decompose(frame, grid)
        ]
        out = recombine(upscaled, grid, 736, 736)
        assert np.array_equal(out.data, resample_nearest(frame, 4.0).data)

    def test_coverage_hole(self):
        grid = build_grid(120, 64, 64, 56)
        only_left = [Patch((0, 0), np.zeros((64, 64, 1), np.uint8), 0)]
        with pytest.raises(ValueError, match="coverage hole"):
            recombine(only_left, grid, 120, 64)

    def test_inconsistent_patch_sizes(self):
        grid = build_grid(120, 64, 64, 56)
        patches = [
            Patch((0, 0), np.zeros((64, 64, 1), np.uint8), 0),
            Patch((56, 0), np.zeros((128, 128, 1), np.uint8), 1),
        ]
        with pytest.raises(ValueError):
            recombine(patches, grid, 120, 64)


class TestResampling:
    def test_constant_preserved_all_kernels(self):
        frame = Frame(np.full((20, 24, 3), 77, np.uint8))
        for scale in (4.0, 0.25, 2.0, 0.5):
            assert (resample_bicubic(frame, scale).data == 77).all()
        assert (resample_lanczos(frame, 4.0).data == 77).all()
        assert (resample_nearest(frame, 4.0).data == 77).all()

    def test_scale_one_identity(self):
        frame = texture(31, 17, seed=2)
        assert np.array_equal(resample_bicubic(frame, 1.0).data, frame.data)

    def test_round_trip_regression(self):
        frame = texture(4, 4, seed=5)
        down = resample_bicubic(resample_bicubic(frame, 4.0), 0.25)
        value = psnr(frame, down)
        assert value >= 40.0
        assert value == pytest.approx(46.8814162425961, abs=1e-6)

    def test_linear_ramp_interior_preserved(self):
        # cubic convolution has linear precision: a ramp stays a ramp away
        # from the clamped edges
        ramp = np.tile(np.arange(0, 128, 2, dtype=np.uint8), (64, 1))[:, :, None]
        up = resample_bicubic(Frame(ramp), 2.0)
        cols = up.data[32, 8:-8, 0].astype(float)
        steps = np.diff(cols)
        assert np.abs(steps - 1.0).max() <= 1.0  # 8-bit rounding of slope 1

    def test_output_dims(self):
        frame = texture(184, 122)
        up = resample_bicubic(frame, 4.0)
        assert (up.width, up.height) == (736, 488)
        down = resample_bicubic(frame, 0.25)
        assert (down.width, down.height) == (46, 31)

    def test_nonpositive_scale(self):
        with pytest.raises(ValueError):
            resample_bicubic(texture(8, 8), 0.0)

    def test_bicubic_float_matches_frame_path(self):
        frame = texture(32, 32, seed=7)
        assert np.array_equal(
            round_u8(bicubic_float(frame.data, 4.0)), resample_bicubic(frame, 4.0).data
        )


class TestPsnr:
    def test_identical_cap(self):
        frame = texture(32, 32)
        assert psnr(frame, frame) == 99.0

    def test_black_vs_white(self):
        a = Frame(np.zeros((16, 16, 3), np.uint8))
        b = Frame(np.full((16, 16, 3), 255, np.uint8))
        assert psnr(a, b) == 0.0

    def test_uniform_difference_of_one(self):
        a = Frame(np.full((16, 16, 3), 100, np.uint8))
        b = Frame(np.full((16, 16, 3), 101, np.uint8))
        assert psnr(a, b) == pytest.approx(20 * np.log10(255), abs=1e-9)
        assert psnr(a, b) == pytest.approx(48.1308, abs=0.001)

    def test_symmetry_and_monotonicity(self, rng):
        base = texture(48, 48, seed=11)
        previous = None
        for amplitude in (2, 8, 32, 96):
            noise = rng.integers(-amplitude, amplitude + 1, base.data.shape)
            noisy = Frame(np.clip(base.data.astype(int) + noise, 0, 255).astype(np.uint8))
            value = psnr(base, noisy)
            assert value == psnr(noisy, base)
            if previous is not None:
                assert value < previous
            previous = value

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            psnr(texture(16, 16), texture(17, 16))


class TestSsim:
    def test_identical_is_one(self):
        frame = texture(32, 32, seed=13)
        assert ssim(frame, frame) == 1.0

    def test_constant_pair_is_one(self):
        a = Frame(np.full((16, 16, 1), 50, np.uint8))
        assert ssim(a, a) == 1.0

    def test_inverted_high_variance(self):
        frame = texture(64, 64, seed=5)
        inverted = Frame((255 - frame.data.astype(int)).astype(np.uint8))
        value = ssim(frame, inverted)
        assert value < 0.2
        assert value == 0.0  # anti-correlation clips to the range floor

    def test_frame_smaller_than_window(self):
        with pytest.raises(ValueError, match="window"):
            ssim(texture(7, 7), texture(7, 7))

    def test_degrades_with_noise(self, rng):
        base = texture(48, 48, seed=17)
        noise = rng.integers(-40, 41, base.data.shape)
        noisy = Frame(np.clip(base.data.astype(int) + noise, 0, 255).astype(np.uint8))
        assert 0.0 < ssim(base, noisy) < 1.0
