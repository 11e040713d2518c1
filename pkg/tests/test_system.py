import math

import numpy as np
import pytest

from shearblob.image_io import Image
from shearblob.system import (
    angular_bump,
    build_system,
    cached_system,
    default_num_scales,
    dump_filters,
    max_num_scales,
    mexican_hat_spectrum,
    num_shears,
    orientation_angle,
    shear_layout,
    transform,
)


class TestRadialWindow:
    def test_zero_at_dc(self):
        assert mexican_hat_spectrum(0.0) == 0.0

    def test_even(self):
        w = np.linspace(0.01, 2.0, 50)
        assert np.array_equal(mexican_hat_spectrum(-w), mexican_hat_spectrum(w))

    def test_argmax_matches_grid_search(self):
        # Independent 1D scan; the peak sits at 1/(pi sqrt 2) with height
        # exp(-1) / (2 pi**2).
        grid = np.linspace(1e-5, 1.0, 400_001)
        vals = mexican_hat_spectrum(grid)
        i = int(np.argmax(vals))
        assert abs(grid[i] - 1.0 / (math.pi * math.sqrt(2.0))) < 1e-5
        assert abs(vals[i] - math.exp(-1.0) / (2.0 * math.pi ** 2)) < 1e-9
        assert abs(vals[i] - 0.018638) < 2e-6


class TestAngularWindow:
    def test_unit_at_center(self):
        assert angular_bump(0.0) == 1.0

    def test_compact_support(self):
        assert angular_bump(1.0) == 0.0
        assert angular_bump(-1.3) == 0.0
        assert angular_bump(25.0) == 0.0

    def test_half_height_point(self):
        # 35/16 - 84/32 + 70/64 - 20/128 = 1/2, so the window passes through
        # sqrt(1/2) half-way out.
        assert abs(angular_bump(-0.5) - math.sqrt(0.5)) < 1e-15
        assert abs(angular_bump(0.5) - math.sqrt(0.5)) < 1e-15

    def test_unit_shifted_squares_tile(self):
        x = np.linspace(0.0, 1.0, 101)
        total = angular_bump(x) ** 2 + angular_bump(x - 1.0) ** 2
        assert np.allclose(total, 1.0, atol=1e-12)


class TestShearLayout:
    @pytest.mark.parametrize("j,count", [(0, 4), (2, 8), (4, 16)])
    def test_band_counts(self, j, count):
        assert num_shears(j) == count
        assert len(shear_layout(j)) == count

    def test_scale_two_walk(self):
        layout = shear_layout(2)
        assert layout[0] == ("h", 0)
        assert layout[2] == ("h", -2)
        assert layout[4] == ("v", 0)
        assert layout[7] == ("h", 1)

    def test_scale_zero_walk(self):
        assert shear_layout(0) == [("h", 0), ("h", -1), ("v", 0), ("v", 1)]

    @pytest.mark.parametrize("j", range(6))
    def test_bijective_per_scale(self, j):
        layout = shear_layout(j)
        assert len(set(layout)) == len(layout) == num_shears(j)

    def test_negative_scale_rejected(self):
        with pytest.raises(ValueError):
            num_shears(-1)


class TestOrientations:
    def test_band_zero_points_left(self):
        for j in (0, 2, 5):
            assert orientation_angle(j, 0) == math.pi

    def test_pinned_values(self):
        assert abs(orientation_angle(2, 2) - 3 * math.pi / 4) < 1e-15
        assert abs(orientation_angle(2, 6) - math.pi / 4) < 1e-15

    def test_range_half_open(self):
        for j in range(5):
            K = num_shears(j)
            theta = orientation_angle(j, np.arange(K))
            assert theta.max() == math.pi
            assert theta.min() > 0.0


class TestBuildSystem:
    def test_scale_count_bounds(self):
        assert max_num_scales(256, 256) == 6
        assert default_num_scales(256, 256) == 5
        assert build_system(256, 256).num_scales == 5
        assert build_system(16, 16).num_scales == 2

    @pytest.mark.parametrize("bad", [1, 7])
    def test_out_of_range_scale_count(self, bad):
        with pytest.raises(ValueError):
            build_system(256, 256, bad)

    def test_tiny_raster_rejected(self):
        with pytest.raises(ValueError):
            build_system(1, 64)

    def test_per_scale_filter_counts(self):
        sys5 = cached_system(64, 64, 4)
        for j in range(4):
            assert sys5.filters[j].shape == (num_shears(j), 64, 64)
            assert len(sys5.cones[j]) == len(sys5.shears[j]) == num_shears(j)

    def test_filters_vanish_at_dc(self):
        sys_ = cached_system(64, 64, 4)
        for bank in sys_.filters:
            assert not bank[:, 0, 0].any()

    def test_filters_even_on_lattice(self):
        sys_ = cached_system(64, 64, 4)
        for bank in sys_.filters:
            for band in bank:
                mirrored = np.roll(band[::-1, ::-1], (1, 1), axis=(0, 1))
                assert np.allclose(band, mirrored, rtol=0.0, atol=1e-15)

    def test_rectangular_raster(self):
        sys_ = build_system(128, 64)
        assert sys_.num_scales == 3
        assert sys_.filters[0].shape == (4, 64, 128)

    def test_band_metadata_matches_layout(self):
        sys_ = cached_system(64, 64, 4)
        for j in range(4):
            expected = shear_layout(j)
            got = list(zip(sys_.cones[j], sys_.shears[j]))
            assert got == expected
            assert np.array_equal(
                sys_.angles[j], orientation_angle(j, np.arange(num_shears(j)))
            )

    def test_cached_system_is_memoized(self):
        assert cached_system(64, 64, 4) is cached_system(64, 64, 4)


class TestTransform:
    def test_constant_image_gives_zero(self):
        sys_ = cached_system(64, 64, 4)
        coeffs = transform(Image(np.full((64, 64), 0.7)), sys_)
        for band in coeffs.bands:
            assert np.abs(band).max() < 1e-10

    def test_dimension_mismatch_rejected(self):
        sys_ = cached_system(64, 64, 4)
        with pytest.raises(ValueError):
            transform(np.zeros((32, 32)), sys_)

    def test_circular_shift_covariance(self):
        rng = np.random.default_rng(4)
        f = rng.random((64, 64))
        sys_ = cached_system(64, 64, 4)
        base = transform(f, sys_)
        moved = transform(np.roll(f, (5, 11), axis=(0, 1)), sys_)
        for j in range(sys_.num_scales):
            rolled = np.roll(base.bands[j], (5, 11), axis=(1, 2))
            assert np.abs(moved.bands[j] - rolled).max() < 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(5)
        f, g = rng.random((64, 64)), rng.random((64, 64))
        sys_ = cached_system(64, 64, 4)
        mix = transform(0.6 * f + 0.25 * g, sys_)
        tf, tg = transform(f, sys_), transform(g, sys_)
        for j in range(sys_.num_scales):
            combo = 0.6 * tf.bands[j] + 0.25 * tg.bands[j]
            scale = np.abs(combo).max()
            assert np.abs(mix.bands[j] - combo).max() < 1e-10 * max(scale, 1.0)

    def test_constant_offset_invariance(self):
        rng = np.random.default_rng(6)
        f = rng.random((64, 64))
        sys_ = cached_system(64, 64, 4)
        a, b = transform(f, sys_), transform(f + 0.3, sys_)
        for j in range(sys_.num_scales):
            scale = np.abs(a.bands[j]).max()
            assert np.abs(a.bands[j] - b.bands[j]).max() < 1e-10 * max(scale, 1.0)

    def test_real_output_with_small_residue(self):
        rng = np.random.default_rng(7)
        coeffs = transform(rng.random((64, 64)), cached_system(64, 64, 4))
        assert coeffs.imag_residue < 1e-8
        for band in coeffs.bands:
            assert band.dtype == np.float64

    def test_horizontal_sinusoid_peaks_at_zero_shear(self):
        # Brute force over every (j, k): a wave varying along x only should
        # put its largest coefficient in an unsheared horizontal band.
        x = np.arange(64)[None, :].repeat(64, axis=0)
        f = 0.5 + 0.5 * np.cos(2.0 * np.pi * 6.0 * x / 64.0)
        sys_ = cached_system(64, 64, 4)
        coeffs = transform(f, sys_)
        best = max(
            ((j, k) for j in range(4) for k in range(num_shears(j))),
            key=lambda jk: np.abs(coeffs.band(*jk)).max(),
        )
        j, k = best
        assert sys_.cones[j][k] == "h"
        assert sys_.shears[j][k] == 0
        assert sys_.angles[j][k] == math.pi

    def test_band_accessor(self):
        sys_ = cached_system(64, 64, 4)
        coeffs = transform(np.zeros((64, 64)), sys_)
        assert coeffs.band(2, 3).shape == (64, 64)
        assert np.shares_memory(coeffs.band(2, 3), coeffs.bands[2])


class TestFilterDump:
    def test_header_and_payload(self, tmp_path):
        sys_ = build_system(32, 16, 2)
        path = tmp_path / "bank.bin"
        dump_filters(sys_, path)
        raw = path.read_bytes()
        header = np.frombuffer(raw[:12], dtype="<i4")
        assert list(header) == [32, 16, 2]
        body = np.frombuffer(raw[12:], dtype="<f4")
        expected = np.concatenate(
            [bank.astype("<f4").ravel() for bank in sys_.filters]
        )
        assert np.array_equal(body, expected)
