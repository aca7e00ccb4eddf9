"""Source images: loading, synthetic generation, cropping and first encode."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from ..jpeg.tables import quality_tables
from .encoder import JFIF_APP0, encode_jpeg

SOURCE_SUFFIXES = (".png", ".ppm", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg")


def _camera_exif() -> bytes:
    # minimal big-endian TIFF header with an empty IFD0
    tiff = b"MM" + struct.pack(">HI", 42, 8) + struct.pack(">HI", 0, 0)
    payload = b"Exif\x00\x00" + tiff
    return b"\xff\xe1" + struct.pack(">H", len(payload) + 2) + payload


CAMERA_HEADER = (JFIF_APP0, _camera_exif())


def rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    """JFIF full-range RGB to YCbCr, rounded and clipped to uint8."""
    x = np.asarray(rgb, dtype=np.float64)
    r, g, b = x[..., 0], x[..., 1], x[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128 + 0.5 * r - 0.418688 * g - 0.081312 * b
    out = np.stack([y, cb, cr], axis=-1)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def list_sources(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"sources directory not found: {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in SOURCE_SUFFIXES and p.is_file())
    if not files:
        raise FileNotFoundError(f"no source images in {directory}")
    return files


def load_rgb(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def crop_top_left(rgb: np.ndarray, width: int, height: int) -> np.ndarray:
    h, w = rgb.shape[:2]
    if w < width or h < height:
        raise ValueError(f"source of size {w}x{h} is smaller than the {width}x{height} crop")
    return rgb[:height, :width]


def initial_encode(rgb: np.ndarray, quality: int) -> bytes:
    """Camera-style first compression: 4:2:0 baseline with JFIF and EXIF headers."""
    return encode_jpeg(rgb_to_ycbcr(rgb), quality_tables(quality), header_segments=CAMERA_HEADER)


def synthetic_image(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    """Natural-looking RGB test image: smooth colour fields, edges and sensor-like noise."""
    shape = (height, width)
    img = np.zeros(shape + (3,))
    for sigma, amp in ((max(width, height) / 6, 70.0), (max(width, height) / 24, 35.0), (1.5, 12.0)):
        field = gaussian_filter(rng.standard_normal(shape + (3,)), sigma=(sigma, sigma, 0))
        field /= field.std() + 1e-12
        mix = rng.uniform(0.6, 1.0, 3)
        img += amp * (field * mix + field.mean(axis=2, keepdims=True) * (1 - mix))
    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(rng.integers(3, 8)):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        r = rng.uniform(0.05, 0.3) * min(width, height)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
        img[mask] += rng.uniform(-60, 60, 3)
    img += 128 + rng.uniform(-30, 30, 3)
    img += rng.normal(0, 2.0, img.shape)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def write_synthetic_sources(out_dir: str | Path, n: int, width: int, height: int, seed: int = 0) -> list[Path]:
    """Write ``n`` lossless PNG sources named ``src_000.png`` ..."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        path = out_dir / f"src_{i:03d}.png"
        Image.fromarray(synthetic_image(rng, width, height), "RGB").save(path, optimize=False)
        paths.append(path)
    return paths
