"""Synthetic sharing platforms.

A platform decodes the upload, optionally downscales it, re-encodes it with
its own settings and rewrites the metadata: APP/COM segments are stripped
(or carried over) and a fixed set of marker segments is injected.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ..jpeg import decode_ycbcr, scan_segments
from ..jpeg.tables import quality_tables
from .encoder import JFIF_APP0, encode_jpeg

INJECTABLE = ("APP2", "APP13", "COM", "DRI")
DEFAULT_RESTART_INTERVAL = 8


def _segment(marker: int, payload: bytes) -> bytes:
    return bytes((0xFF, marker)) + struct.pack(">H", len(payload) + 2) + payload


def _icc_payload() -> bytes:
    body = bytearray(128)
    body[0:4] = struct.pack(">I", 128)
    body[4:8] = b"none"
    body[12:16] = b"mntr"
    body[16:20] = b"RGB "
    body[20:24] = b"XYZ "
    body[36:40] = b"acsp"
    return b"ICC_PROFILE\x00\x01\x01" + bytes(body)


def _photoshop_payload() -> bytes:
    # one empty IPTC-NAA resource block
    return b"Photoshop 3.0\x00" + b"8BIM" + struct.pack(">HHI", 0x0404, 0, 0)


@dataclass(frozen=True)
class PlatformProfile:
    """Processing applied by one synthetic platform.

    ``inject_segments`` holds names from ``APP2``, ``APP13``, ``COM`` and
    ``DRI``; DRI injection re-encodes with restart markers every
    ``restart_interval`` MCUs.
    """

    name: str
    quality: int | None = 75
    qtables: tuple[tuple[int, ...], ...] | None = None
    max_dimension: int | None = None
    progressive: bool = False
    strip_app_segments: bool = True
    inject_segments: tuple[str, ...] = ()
    restart_interval: int = DEFAULT_RESTART_INTERVAL
    chroma_subsampling: str = "4:2:0"
    comment: str = field(default="")

    def __post_init__(self):
        if self.qtables is None:
            if self.quality is None or not 1 <= int(self.quality) <= 100:
                raise ValueError(f"profile {self.name}: quality must be in 1..100")
        else:
            if len(self.qtables) < 1 or any(len(t) != 64 for t in self.qtables):
                raise ValueError(f"profile {self.name}: explicit tables need 64 entries each")
        if self.max_dimension is not None and self.max_dimension < 16:
            raise ValueError(f"profile {self.name}: max_dimension must be >= 16")
        bad = [s for s in self.inject_segments if s not in INJECTABLE]
        if bad:
            raise ValueError(f"profile {self.name}: cannot inject {bad}; choose from {INJECTABLE}")
        if self.chroma_subsampling not in ("4:2:0", "4:4:4"):
            raise ValueError(f"profile {self.name}: unsupported chroma subsampling {self.chroma_subsampling!r}")
        if not 1 <= self.restart_interval <= 65535:
            raise ValueError(f"profile {self.name}: restart interval out of range")
        object.__setattr__(self, "inject_segments", tuple(sorted(set(self.inject_segments), key=INJECTABLE.index)))

    def tables(self) -> tuple[tuple[int, ...], ...]:
        if self.qtables is not None:
            luma = tuple(int(v) for v in self.qtables[0])
            chroma = tuple(int(v) for v in self.qtables[1]) if len(self.qtables) > 1 else luma
            return luma, chroma
        return quality_tables(int(self.quality))

    def injected(self) -> list[bytes]:
        out = []
        if "APP2" in self.inject_segments:
            out.append(_segment(0xE2, _icc_payload()))
        if "APP13" in self.inject_segments:
            out.append(_segment(0xED, _photoshop_payload()))
        if "COM" in self.inject_segments:
            out.append(_segment(0xFE, (self.comment or self.name).encode("ascii", "replace")))
        return out

    @classmethod
    def from_dict(cls, name: str, obj: Mapping) -> "PlatformProfile":
        obj = dict(obj)
        inject = []
        restart = obj.pop("restart_interval", DEFAULT_RESTART_INTERVAL)
        for item in obj.pop("inject", obj.pop("inject_segments", [])):
            item = str(item).strip()
            if item.upper().startswith("DRI(") and item.endswith(")"):
                restart = int(item[4:-1])
                item = "DRI"
            inject.append(item.upper())
        if "qtables" in obj and obj["qtables"] is not None:
            obj["qtables"] = tuple(tuple(int(v) for v in t) for t in obj["qtables"])
        return cls(name=obj.pop("name", name), inject_segments=tuple(inject), restart_interval=int(restart), **obj)

    def to_dict(self) -> dict:
        return {
            "quality": self.quality,
            "qtables": [list(t) for t in self.qtables] if self.qtables else None,
            "max_dimension": self.max_dimension,
            "progressive": self.progressive,
            "strip_app_segments": self.strip_app_segments,
            "inject": list(self.inject_segments),
            "restart_interval": self.restart_interval,
            "chroma_subsampling": self.chroma_subsampling,
            "comment": self.comment,
        }


def default_profiles() -> dict[str, PlatformProfile]:
    """Three distinguishable but overlapping platforms keyed FB, FL, TW."""
    return {
        "FB": PlatformProfile("fb-like", quality=71, max_dimension=2048, inject_segments=("APP2",)),
        "FL": PlatformProfile("fl-like", quality=87, inject_segments=("APP13", "DRI"), restart_interval=8),
        "TW": PlatformProfile("tw-like", quality=85, max_dimension=1200, inject_segments=("COM",),
                              progressive=True),
    }


def target_size(width: int, height: int, max_dimension: int | None) -> tuple[int, int]:
    """Aspect-preserving downscale so the longest side is ``max_dimension`` (half-up rounding)."""
    if max_dimension is None or max(width, height) <= max_dimension:
        return width, height
    scale = max_dimension / max(width, height)

    def rnd(v):
        return max(1, int(np.floor(v * scale + 0.5)))

    return (max_dimension, rnd(height)) if width >= height else (rnd(width), max_dimension)


def resize_bilinear(samples: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize with half-pixel centres and edge clamping, per channel."""
    src = samples.astype(np.float64)
    h, w = src.shape[:2]
    if (w, h) == (width, height):
        return samples.copy()

    def axis(n_out, n_in):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0, n_in - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    ylo, yhi, fy = axis(height, h)
    xlo, xhi, fx = axis(width, w)
    fy = fy[:, None, None] if src.ndim == 3 else fy[:, None]
    fx = fx[None, :, None] if src.ndim == 3 else fx[None, :]
    rows = src[ylo] * (1 - fy) + src[yhi] * fy
    out = rows[:, xlo] * (1 - fx) + rows[:, xhi] * fx
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def apply_platform(data: bytes, profile: PlatformProfile, seed: int = 0) -> bytes:
    """Share ``data`` through ``profile``; returns the downloaded JPEG bytes.

    Every step is deterministic; ``seed`` is accepted so callers can thread
    one root seed through custom profiles, and does not affect the output.
    """
    scan = scan_segments(data)
    carried = [] if profile.strip_app_segments else [
        data[s.offset:s.end] for s in scan.segments
        if (s.kind.startswith("APP") and s.kind != "APP0") or s.kind == "COM"
    ]
    ycc = decode_ycbcr(data)
    h, w = ycc.shape[:2]
    tw, th = target_size(w, h, profile.max_dimension)
    if (tw, th) != (w, h):
        ycc = resize_bilinear(ycc, tw, th)
    header = ([] if profile.strip_app_segments else [JFIF_APP0]) + carried + profile.injected()
    planes = ycc[:, :, 0] if ycc.shape[2] == 1 else ycc
    return encode_jpeg(
        planes, profile.tables(),
        subsampling=profile.chroma_subsampling,
        progressive=profile.progressive,
        restart_interval=profile.restart_interval if "DRI" in profile.inject_segments else None,
        header_segments=header,
    )


def share_chain(data: bytes, steps: Sequence[str], profiles: Mapping[str, PlatformProfile], seed: int = 0) -> bytes:
    """Apply the platforms of a chain, oldest first."""
    for name in steps:
        data = apply_platform(data, profiles[name], seed)
    return data


def with_quality(profile: PlatformProfile, quality: int) -> PlatformProfile:
    return replace(profile, quality=quality, qtables=None)
