"""Grayscale image I/O, Fourier conventions, and homography parsing.

Images are stored as float64 rasters with intensities in [0, 1], indexed
``pixels[y, x]`` (row-major). The Fourier pair is the plain unnormalized
forward / 1/(M*N) inverse DFT, so Plancherel reads
``<f, g> = <fhat, ghat> / (M*N)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Image",
    "load_image",
    "save_image",
    "dft2",
    "idft2",
    "fft_frequencies",
    "load_homography",
    "save_homography",
]

# BT.601 luma weights used when collapsing RGB input to grayscale.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable grayscale raster with intensities in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("image must be a non-empty 2D raster")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image intensities must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _read_pgm_tokens(data: bytes, count: int, start: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated ASCII integers, skipping # comments."""
    tokens: list[int] = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise ValueError("truncated PGM header")
        try:
            tokens.append(int(data[i:j]))
        except ValueError as exc:
            raise ValueError(f"bad PGM header token {data[i:j]!r}") from exc
        i = j
    return tokens, i


def _load_pnm(data: bytes) -> Image:
    magic = data[:2]
    if magic not in (b"P2", b"P5", b"P3", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    (width, height, maxval), pos = _read_pgm_tokens(data, 3, 2)
    if width <= 0 or height <= 0:
        raise ValueError("PNM has zero-sized dimensions")
    if not 0 < maxval <= 255:
        raise ValueError(f"only 8-bit PNM supported, got maxval={maxval}")
    count = width * height * channels
    if magic in (b"P5", b"P6"):
        # Exactly one whitespace byte separates the header from the raster.
        raster = data[pos + 1 : pos + 1 + count]
        if len(raster) < count:
            raise ValueError("truncated PNM raster")
        values = np.frombuffer(raster, dtype=np.uint8, count=count)
    else:
        try:
            flat, _ = _read_pgm_tokens(data, count, pos)
        except ValueError as exc:
            raise ValueError("truncated PNM raster") from exc
        values = np.asarray(flat, dtype=np.int64)
        if values.min() < 0 or values.max() > maxval:
            raise ValueError("PNM sample outside [0, maxval]")
    pixels = values.astype(np.float64) / float(maxval)
    if channels == 3:
        rgb = pixels.reshape(height, width, 3)
        r, g, b = LUMA_WEIGHTS
        pixels = r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]
    else:
        pixels = pixels.reshape(height, width)
    return Image(pixels)


def _load_png(path: Path) -> Image:
    from PIL import Image as PILImage

    with PILImage.open(path) as img:
        if img.mode in ("L", "I;16", "I"):
            arr = np.asarray(img.convert("L"), dtype=np.float64)
        else:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
            r, g, b = LUMA_WEIGHTS
            arr = r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]
    return Image(arr / 255.0)


def load_image(path: str | Path) -> Image:
    """Load an 8-bit PNM (P2/P3/P5/P6) or a grayscale/RGB PNG.

    Color input collapses to grayscale with BT.601 luma weights.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:2] in (b"P2", b"P3", b"P5", b"P6"):
        return _load_pnm(path.read_bytes())
    if head == b"\x89PNG\r\n\x1a\n":
        return _load_png(path)
    raise ValueError(f"unrecognized image format in {path}")


def save_image(image: Image, path: str | Path) -> None:
    """Write an image as binary PGM (.pgm) or PNG (.png), 8-bit rounding."""
    path = Path(path)
    quantized = np.rint(np.clip(image.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
        path.write_bytes(header + quantized.tobytes())
    elif suffix == ".png":
        from PIL import Image as PILImage

        PILImage.fromarray(quantized, mode="L").save(path)
    else:
        raise ValueError(f"unsupported output format {suffix!r}")


def dft2(raster: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2D DFT of a 2D raster."""
    arr = np.asarray(raster)
    if arr.ndim != 2:
        raise ValueError("dft2 expects a 2D raster")
    return np.fft.fft2(arr)


def idft2(spectrum: np.ndarray) -> np.ndarray:
    """Inverse 2D DFT carrying the 1/(M*N) factor; idft2(dft2(f)) == f."""
    arr = np.asarray(spectrum)
    if arr.ndim != 2:
        raise ValueError("idft2 expects a 2D raster")
    return np.fft.ifft2(arr)


def fft_frequencies(n: int) -> np.ndarray:
    """Integer frequencies [-floor(n/2), ceil(n/2)-1] in FFT storage order."""
    if n <= 0:
        raise ValueError("axis length must be positive")
    return np.rint(np.fft.fftfreq(n) * n).astype(np.int64)


def load_homography(path: str | Path) -> np.ndarray:
    """Read a 3x3 homography stored as 9 whitespace-separated reals.

    The matrix is normalized so the bottom-right entry equals 1.
    """
    values = np.loadtxt(path, dtype=np.float64).reshape(-1)
    if values.size != 9:
        raise ValueError(f"homography file must hold 9 numbers, got {values.size}")
    H = values.reshape(3, 3)
    if abs(H[2, 2]) < 1e-300 or abs(np.linalg.det(H)) < 1e-300:
        raise ValueError("homography is singular or not normalizable")
    return H / H[2, 2]


def save_homography(H: np.ndarray, path: str | Path) -> None:
    """Write a 3x3 homography as three rows of three reals."""
    H = np.asarray(H, dtype=np.float64)
    if H.shape != (3, 3):
        raise ValueError("homography must be 3x3")
    lines = ["  ".join(f"{v:.12g}" for v in row) for row in H]
    Path(path).write_text("\n".join(lines) + "\n")
