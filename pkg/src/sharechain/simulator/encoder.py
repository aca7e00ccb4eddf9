"""Minimal first-party JPEG encoder.

Huffman coding always uses the Annex K typical tables. Progressive output
uses spectral selection only (no successive approximation): one interleaved
DC scan followed by per-component AC band scans, each scan preceded by DHT
segments for the tables it uses.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..jpeg.tables import (
    AC_CHROMA_BITS, AC_CHROMA_VALS, AC_LUMA_BITS, AC_LUMA_VALS, DC_CHROMA_BITS,
    DC_CHROMA_VALS, DC_LUMA_BITS, DC_LUMA_VALS, ZIGZAG,
)

PROGRESSIVE_BANDS = ((1, 5), (6, 63))
_HUFFMAN_SPECS = {
    (0, 0): (DC_LUMA_BITS, DC_LUMA_VALS),
    (0, 1): (DC_CHROMA_BITS, DC_CHROMA_VALS),
    (1, 0): (AC_LUMA_BITS, AC_LUMA_VALS),
    (1, 1): (AC_CHROMA_BITS, AC_CHROMA_VALS),
}


def _dct_matrix() -> np.ndarray:
    k = np.arange(8)[:, None]
    n = np.arange(8)[None, :]
    m = np.cos((2 * n + 1) * k * np.pi / 16) * np.sqrt(2 / 8)
    m[0] /= np.sqrt(2)
    return m


DCT8 = _dct_matrix()


def _huffman_codes(bits: Sequence[int], vals: Sequence[int]) -> tuple[list[int], list[int]]:
    codes, lengths = [0] * 256, [0] * 256
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            codes[vals[k]] = code
            lengths[vals[k]] = length
            code += 1
            k += 1
        code <<= 1
    return codes, lengths


_CODES = {key: _huffman_codes(*spec) for key, spec in _HUFFMAN_SPECS.items()}


@dataclass
class _Component:
    cid: int
    h: int
    v: int
    tq: int
    table: int  # Huffman table id for both DC and AC
    blocks: np.ndarray  # (rows, cols, 64) quantized, zigzag order
    rows: int  # blocks actually covering the component (non-interleaved scans)
    cols: int


def _pack_bits(values: list[int], lengths: list[int]) -> bytes:
    """Pack MSB-first bit fields, pad with 1-bits and stuff 0xFF bytes."""
    if len(values) == 0:
        return b""
    vals = np.asarray(values, dtype=np.int64)
    lens = np.asarray(lengths, dtype=np.int64)
    total = int(lens.sum())
    starts = np.cumsum(lens) - lens
    owner_len = np.repeat(lens, lens)
    pos = np.arange(total, dtype=np.int64) - np.repeat(starts, lens)
    bits = (np.repeat(vals, lens) >> (owner_len - 1 - pos)) & 1
    pad = (-total) % 8
    if pad:
        bits = np.concatenate([bits, np.ones(pad, dtype=np.int64)])
    return np.packbits(bits.astype(np.uint8)).tobytes().replace(b"\xff", b"\xff\x00")


_CATEGORY = np.array([v.bit_length() for v in range(2048)], dtype=np.int64)
_CODE_ARRAYS = {key: (np.array(c, dtype=np.int64), np.array(n, dtype=np.int64)) for key, (c, n) in _CODES.items()}
# sort key slots inside one block: DC, then up to 3 ZRLs and the symbol per coefficient, then EOB
_SLOTS = 4 * 64 + 1


def _symbols(v: np.ndarray, codes: np.ndarray, lens: np.ndarray, sym_base: np.ndarray):
    """Huffman-prefixed magnitude codes for coefficients ``v`` (symbol = base | category)."""
    s = _CATEGORY[np.abs(v)]
    extra = np.where(v >= 0, v, v + (1 << s) - 1)
    sym = sym_base | s
    return (codes[sym] << s) | extra, lens[sym] + s


def _quantize_plane(plane: np.ndarray, rows: int, cols: int, qtable_zz: Sequence[int]) -> np.ndarray:
    h, w = plane.shape
    padded = np.pad(plane.astype(np.float64), ((0, rows * 8 - h), (0, cols * 8 - w)), mode="edge") - 128.0
    blocks = padded.reshape(rows, 8, cols, 8).transpose(0, 2, 1, 3)
    coefs = DCT8 @ blocks @ DCT8.T
    q = np.empty(64)
    q[ZIGZAG] = np.asarray(qtable_zz, dtype=np.float64)
    scaled = coefs.reshape(rows, cols, 64) / q
    quant = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    quant = quant[:, :, ZIGZAG].astype(np.int64)
    quant[:, :, 0] = np.clip(quant[:, :, 0], -1024, 1023)
    quant[:, :, 1:] = np.clip(quant[:, :, 1:], -1023, 1023)
    return quant


def _downsample(plane: np.ndarray, fy: int, fx: int) -> np.ndarray:
    if fy == 1 and fx == 1:
        return plane
    h, w = plane.shape
    ph, pw = -h % fy, -w % fx
    p = np.pad(plane.astype(np.float64), ((0, ph), (0, pw)), mode="edge")
    p = p.reshape(p.shape[0] // fy, fy, p.shape[1] // fx, fx).mean(axis=(1, 3))
    return np.floor(p + 0.5).astype(np.uint8)


def _segment(marker: int, payload: bytes) -> bytes:
    return bytes((0xFF, marker)) + struct.pack(">H", len(payload) + 2) + payload


def _dht(table_class: int, table_id: int) -> bytes:
    bits, vals = _HUFFMAN_SPECS[(table_class, table_id)]
    return _segment(0xC4, bytes([(table_class << 4) | table_id, *bits, *vals]))


JFIF_APP0 = _segment(0xE0, b"JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00")


def encode_jpeg(
    planes: np.ndarray,
    qtables: Sequence[Sequence[int]],
    *,
    subsampling: str = "4:2:0",
    progressive: bool = False,
    restart_interval: int | None = None,
    header_segments: Sequence[bytes] = (JFIF_APP0,),
) -> bytes:
    """Encode an (H, W) grayscale or (H, W, 3) YCbCr uint8 array.

    Parameters
    ----------
    planes : ndarray
        Full-resolution samples; colour input is already in YCbCr.
    qtables : sequence
        Luma table, and chroma table for colour input, in zigzag order.
    subsampling : {"4:2:0", "4:4:4"}
        Chroma sampling for colour input.
    progressive : bool
        Emit SOF2 with spectral-selection scans instead of SOF0.
    restart_interval : int, optional
        Emit a DRI segment and RSTn markers every that many MCUs.
    header_segments : sequence of bytes
        Complete marker segments written right after SOI.
    """
    planes = np.asarray(planes)
    if planes.ndim == 2:
        planes = planes[:, :, None]
    if planes.dtype != np.uint8 or planes.shape[2] not in (1, 3):
        raise ValueError("expected (H, W) or (H, W, 3) uint8 samples")
    height, width, nc = planes.shape
    if height < 1 or width < 1 or height > 65535 or width > 65535:
        raise ValueError(f"unsupported image size {width}x{height}")
    if subsampling not in ("4:2:0", "4:4:4"):
        raise ValueError(f"unsupported subsampling {subsampling!r}")
    if nc == 3 and len(qtables) < 2:
        raise ValueError("colour encoding needs luma and chroma tables")
    for t in qtables[:2 if nc == 3 else 1]:
        if len(t) != 64 or min(t) < 1 or max(t) > 255:
            raise ValueError("quantization tables must hold 64 entries in 1..255")

    hmax = vmax = 2 if (nc == 3 and subsampling == "4:2:0") else 1
    mcux = math.ceil(width / (8 * hmax))
    mcuy = math.ceil(height / (8 * vmax))
    comps: list[_Component] = []
    for i in range(nc):
        h = v = hmax if i == 0 else 1
        plane = planes[:, :, i] if i == 0 else _downsample(planes[:, :, i], vmax // v, hmax // h)
        cw, ch = math.ceil(width * h / hmax), math.ceil(height * v / vmax)
        tq = 0 if i == 0 else 1
        blocks = _quantize_plane(plane[:ch, :cw], mcuy * v, mcux * h, qtables[tq])
        comps.append(_Component(i + 1, h, v, tq, tq, blocks, math.ceil(ch / 8), math.ceil(cw / 8)))

    out = bytearray(b"\xff\xd8")
    for seg in header_segments:
        out += seg
    for tq in sorted({c.tq for c in comps}):
        out += _segment(0xDB, bytes([tq]) + bytes(int(x) for x in qtables[tq]))
    sof = struct.pack(">BHHB", 8, height, width, nc)
    for c in comps:
        sof += bytes((c.cid, (c.h << 4) | c.v, c.tq))
    out += _segment(0xC2 if progressive else 0xC0, sof)
    if restart_interval:
        out += _segment(0xDD, struct.pack(">H", restart_interval))

    if not progressive:
        for tc in (0, 1):
            for tid in sorted({c.table for c in comps}):
                out += _dht(tc, tid)
        out += _sos(comps, 0, 63)
        out += _encode_scan(comps, 0, 63, restart_interval)
    else:
        for tid in sorted({c.table for c in comps}):
            out += _dht(0, tid)
        out += _sos(comps, 0, 0)
        out += _encode_scan(comps, 0, 0, restart_interval)
        for c in comps:
            for ss, se in PROGRESSIVE_BANDS:
                out += _dht(1, c.table)
                out += _sos([c], ss, se)
                out += _encode_scan([c], ss, se, restart_interval)
    out += b"\xff\xd9"
    return bytes(out)


def _sos(comps: Sequence[_Component], ss: int, se: int) -> bytes:
    payload = bytes([len(comps)])
    for c in comps:
        payload += bytes((c.cid, (c.table << 4) | c.table))
    return _segment(0xDA, payload + bytes((ss, se, 0)))


def _block_order(comps: Sequence[_Component]):
    """Per component: block coordinates, scan sequence number and unit (MCU) index, in scan order."""
    out = []
    if len(comps) == 1:
        c = comps[0]
        r, q = np.mgrid[0:c.rows, 0:c.cols]
        seq = np.arange(c.rows * c.cols)
        out.append((r.ravel(), q.ravel(), seq, seq))
        return out
    mcu_rows = comps[0].blocks.shape[0] // comps[0].v
    mcu_cols = comps[0].blocks.shape[1] // comps[0].h
    per_mcu = sum(c.v * c.h for c in comps)
    offset = 0
    for c in comps:
        my, mx, dy, dx = np.meshgrid(np.arange(mcu_rows), np.arange(mcu_cols), np.arange(c.v), np.arange(c.h),
                                     indexing="ij")
        unit = (my * mcu_cols + mx).ravel()
        seq = unit * per_mcu + offset + (dy * c.h + dx).ravel()
        out.append(((my * c.v + dy).ravel(), (mx * c.h + dx).ravel(), seq, unit))
        offset += c.v * c.h
    return out


def _encode_scan(comps: Sequence[_Component], ss: int, se: int, restart_interval: int | None) -> bytes:
    restart = restart_interval or 0
    keys, values, lengths, units = [], [], [], []
    ac_lo = max(ss, 1)
    for c, (r, q, seq, unit) in zip(comps, _block_order(comps)):
        blocks = c.blocks[r, q]
        if ss == 0:
            codes, lens = _CODE_ARRAYS[(0, c.table)]
            dc = blocks[:, 0]
            prev = np.concatenate([[0], dc[:-1]])
            if restart:
                first = np.concatenate([[True], unit[1:] // restart != unit[:-1] // restart])
                prev[first] = 0
            val, ln = _symbols(dc - prev, codes, lens, np.zeros(len(dc), dtype=np.int64))
            keys.append(seq * _SLOTS)
            values.append(val)
            lengths.append(ln)
            units.append(unit)
        if se >= ac_lo:
            codes, lens = _CODE_ARRAYS[(1, c.table)]
            band = blocks[:, ac_lo:se + 1]
            rows, cols = np.nonzero(band)
            v = band[rows, cols]
            pos = cols + ac_lo
            same = np.concatenate([[False], rows[1:] == rows[:-1]])
            last = np.where(same, np.concatenate([[0], pos[:-1]]), ac_lo - 1)
            run = pos - last - 1
            val, ln = _symbols(v, codes, lens, (run % 16) << 4)
            keys.append(seq[rows] * _SLOTS + 4 * pos + 3)
            values.append(val)
            lengths.append(ln)
            units.append(unit[rows])
            n_zrl = run // 16
            for j in range(3):
                m = n_zrl > j
                if m.any():
                    keys.append(seq[rows[m]] * _SLOTS + 4 * pos[m] + j)
                    values.append(np.full(m.sum(), codes[0xF0]))
                    lengths.append(np.full(m.sum(), lens[0xF0]))
                    units.append(unit[rows[m]])
            final = np.full(len(seq), ac_lo - 1)
            final[rows] = pos  # rows ascend, so the last write per block wins
            m = final < se
            keys.append(seq[m] * _SLOTS + _SLOTS - 1)
            values.append(np.full(m.sum(), codes[0x00]))
            lengths.append(np.full(m.sum(), lens[0x00]))
            units.append(unit[m])
    keys = np.concatenate(keys)
    order = np.argsort(keys, kind="stable")
    values = np.concatenate(values)[order]
    lengths = np.concatenate(lengths)[order]
    if not restart:
        return _pack_bits(values, lengths)
    chunk = np.concatenate(units)[order] // restart
    bounds = np.flatnonzero(np.diff(chunk)) + 1
    out = bytearray()
    for i, (a, b) in enumerate(zip(np.concatenate([[0], bounds]), np.concatenate([bounds, [len(values)]]))):
        if i:
            out += bytes((0xFF, 0xD0 + ((i - 1) % 8)))
        out += _pack_bits(values[a:b], lengths[a:b])
    return bytes(out)
