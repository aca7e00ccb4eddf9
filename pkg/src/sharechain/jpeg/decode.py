"""Pixel-domain access via libjpeg (through Pillow).

Only the decoding itself is delegated; the container checks that decide
what is supported go through :func:`parse_container` first.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ._errors import JpegDecodeError, JpegError
from .container import parse_container


@dataclass(frozen=True)
class LumaPlane:
    samples: np.ndarray  # (height, width) uint8

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]


def _open(data: bytes) -> Image.Image:
    im = Image.open(io.BytesIO(data))
    if im.format != "JPEG":
        raise JpegDecodeError(f"not a JPEG stream ({im.format})")
    return im


def decode_ycbcr(data: bytes) -> np.ndarray:
    """Decode to an (H, W, C) uint8 array of the file's own components.

    Colour files come back as YCbCr with chroma upsampled to full size and
    no colour conversion; grayscale files have a single channel.
    """
    parse_container(data)
    try:
        im = _open(data)
        if im.mode in ("RGB", "YCbCr"):
            im.draft("YCbCr", im.size)
        im.load()
    except JpegError:
        raise
    except (OSError, SyntaxError, ValueError) as exc:
        raise JpegDecodeError(f"corrupt JPEG data: {exc}") from exc
    arr = np.asarray(im)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    elif im.mode != "YCbCr":
        raise JpegDecodeError(f"unsupported colour mode {im.mode}")
    return np.ascontiguousarray(arr)


def decode_luma(data: bytes) -> LumaPlane:
    """Full-resolution luminance plane of a SOF0/SOF2 Huffman JPEG."""
    return LumaPlane(np.ascontiguousarray(decode_ycbcr(data)[:, :, 0]))
