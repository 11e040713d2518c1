import numpy as np
import pytest

from shearblob.image_io import (
    Image,
    dft2,
    fft_frequencies,
    idft2,
    load_homography,
    load_image,
    save_homography,
    save_image,
)


class TestImageType:
    def test_valid_raster(self):
        img = Image(np.full((16, 20), 0.5))
        assert img.height == 16 and img.width == 20

    def test_pixels_are_immutable(self):
        img = Image(np.zeros((16, 16)))
        with pytest.raises((ValueError, RuntimeError)):
            img.pixels[0, 0] = 1.0

    @pytest.mark.parametrize(
        "bad",
        [np.full((4, 4), 1.5), np.full((4, 4), -0.1), np.full((4, 4), np.nan)],
    )
    def test_rejects_out_of_range_or_nonfinite(self, bad):
        with pytest.raises(ValueError):
            Image(bad)

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            Image(np.zeros(16))


class TestPnmIO:
    def test_p5_bytes_divide_by_255(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
        img = load_image(path)
        expected = np.array([[0, 255], [128, 64]]) / 255.0
        assert np.array_equal(img.pixels, expected)
        assert np.allclose(img.pixels, [[0, 1], [0.50196, 0.25098]], atol=1e-5)

    def test_all_zero_pgm(self, tmp_path):
        path = tmp_path / "z.pgm"
        path.write_bytes(b"P5\n3 2\n255\n" + bytes(6))
        assert not load_image(path).pixels.any()

    def test_p2_ascii_with_comments(self, tmp_path):
        path = tmp_path / "a.pgm"
        path.write_text("P2\n# a comment\n2 2\n255\n0 255\n128 64\n")
        img = load_image(path)
        assert np.array_equal(img.pixels * 255, [[0, 255], [128, 64]])

    def test_p6_rgb_collapses_by_luma(self, tmp_path):
        path = tmp_path / "c.ppm"
        path.write_bytes(b"P6\n1 1\n255\n" + bytes([255, 0, 0]))
        assert np.allclose(load_image(path).pixels, 0.299)

    def test_pgm_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        img = Image(rng.integers(0, 256, (17, 23)) / 255.0)
        path = tmp_path / "r.pgm"
        save_image(img, path)
        again = load_image(path)
        assert np.array_equal(again.pixels, img.pixels)
        save_image(again, tmp_path / "r2.pgm")
        assert (tmp_path / "r2.pgm").read_bytes() == path.read_bytes()

    def test_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        img = Image(rng.integers(0, 256, (8, 8)) / 255.0)
        path = tmp_path / "r.png"
        save_image(img, path)
        assert np.array_equal(load_image(path).pixels, img.pixels)

    def test_truncated_raster_rejected(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
        with pytest.raises(ValueError):
            load_image(path)

    def test_unknown_format_rejected(self, tmp_path):
        path = tmp_path / "bad.img"
        path.write_bytes(b"GIF89a" + bytes(32))
        with pytest.raises(ValueError):
            load_image(path)

    def test_zero_sized_rejected(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P5\n0 4\n255\n")
        with pytest.raises(ValueError):
            load_image(path)


class TestFourier:
    def test_impulse_has_flat_spectrum(self):
        f = np.zeros((8, 8))
        f[0, 0] = 1.0
        assert np.allclose(dft2(f), np.ones((8, 8)))

    def test_constant_image_is_pure_dc(self):
        c = 0.37
        spec = dft2(np.full((6, 10), c))
        assert abs(spec[0, 0] - c * 60) < 1e-12
        spec[0, 0] = 0.0
        assert np.abs(spec).max() < 1e-12

    def test_plancherel_identity(self):
        rng = np.random.default_rng(2)
        f = rng.standard_normal((16, 16))
        lhs = (f * f).sum()
        rhs = (np.abs(dft2(f)) ** 2).sum() / f.size
        assert abs(lhs - rhs) / abs(lhs) < 1e-10

    def test_round_trip_up_to_256(self):
        rng = np.random.default_rng(3)
        for size in (16, 64, 256):
            f = rng.standard_normal((size, size))
            back = idft2(dft2(f)).real
            assert np.abs(back - f).max() / np.abs(f).max() < 1e-10

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            dft2(np.zeros(8))
        with pytest.raises(ValueError):
            idft2(np.zeros((2, 2, 2)))

    def test_frequency_lattice_centered_range(self):
        for n in (8, 9):
            freqs = fft_frequencies(n)
            assert freqs.min() == -(n // 2)
            assert freqs.max() == (n + 1) // 2 - 1
            assert np.count_nonzero(freqs == 0) == 1
            assert len(set(freqs.tolist())) == n


class TestHomographyIO:
    def test_load_normalizes_bottom_right(self, tmp_path):
        path = tmp_path / "H"
        path.write_text("2 0 4\n0 2 6\n0 0 2\n")
        H = load_homography(path)
        assert H[2, 2] == 1.0
        assert np.allclose(H, [[1, 0, 2], [0, 1, 3], [0, 0, 1]])

    def test_round_trip(self, tmp_path):
        H = np.array([[1.5, 0.1, -3.0], [-0.2, 0.9, 7.0], [1e-4, 2e-4, 1.0]])
        path = tmp_path / "H"
        save_homography(H, path)
        assert np.allclose(load_homography(path), H, atol=1e-10)

    def test_rejects_singular(self, tmp_path):
        path = tmp_path / "H"
        path.write_text("1 0 0\n2 0 0\n0 0 1\n")
        with pytest.raises(ValueError):
            load_homography(path)

    def test_rejects_wrong_count(self, tmp_path):
        path = tmp_path / "H"
        path.write_text("1 2 3 4\n")
        with pytest.raises(ValueError):
            load_homography(path)
