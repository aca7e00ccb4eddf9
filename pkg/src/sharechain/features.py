"""DCT, META and HEADER descriptors of JPEG files."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .chains import SharingChain, format_chain_label, parse_chain_label
from .jpeg import JpegContainer, LumaPlane, decode_luma, parse_container, scan_segments
from .jpeg.markers import SegmentScan
from .jpeg.tables import ZIGZAG

FEATURE_NAMES = ("dct", "meta", "header")
DCT_FREQUENCIES = 9
DCT_BIN_RANGE = 20
DCT_BINS = 2 * DCT_BIN_RANGE + 1
DCT_DIM = DCT_FREQUENCIES * DCT_BINS
META_DIM = 152
HEADER_MARKERS = ("DHT", "unused", "APP13", "APP2", "SOF0", "SOF2", "COM", "DRI")
HEADER_DIM = len(HEADER_MARKERS)
FEATURE_DIMS = {"dct": DCT_DIM, "meta": META_DIM, "header": HEADER_DIM}


class FeatureError(ValueError):
    """Feature extraction failed; ``descriptor`` names the failing one."""

    def __init__(self, descriptor: str, cause: Exception):
        self.descriptor = descriptor
        self.cause = cause
        super().__init__(f"{descriptor}: {cause}")


def _dct_matrix() -> np.ndarray:
    k = np.arange(8)[:, None]
    n = np.arange(8)[None, :]
    m = np.cos((2 * n + 1) * k * np.pi / 16) * np.sqrt(2 / 8)
    m[0] /= np.sqrt(2)
    return m


_DCT = _dct_matrix()
# natural-order (row, col) of zigzag AC positions 1..9
_AC_POSITIONS = np.array(ZIGZAG[1:DCT_FREQUENCIES + 1])


def block_dct(samples: np.ndarray) -> np.ndarray:
    """Orthonormal 8x8 DCT-II of every full block, level-shifted by -128.

    Returns an array of shape (n_blocks, 64) in natural order; partial edge
    blocks are dropped.
    """
    samples = np.asarray(samples, dtype=np.float64)
    rows, cols = samples.shape[0] // 8, samples.shape[1] // 8
    if rows == 0 or cols == 0:
        raise ValueError(f"plane of {samples.shape[1]}x{samples.shape[0]} holds no full 8x8 block")
    blocks = (samples[:rows * 8, :cols * 8] - 128.0).reshape(rows, 8, cols, 8).transpose(0, 2, 1, 3)
    return (_DCT @ blocks @ _DCT.T).reshape(-1, 64)


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def extract_dct(plane: LumaPlane | np.ndarray) -> np.ndarray:
    """369-d histogram of rounded block-DCT coefficients.

    For each of the first 9 zigzag AC frequencies, the share of blocks whose
    rounded coefficient equals each integer in -20..20. Out-of-range
    coefficients are not counted, so a group may sum to less than one.
    """
    samples = plane.samples if isinstance(plane, LumaPlane) else np.asarray(plane)
    coefs = round_half_away(block_dct(samples)[:, _AC_POSITIONS]).astype(np.int64)
    n_blocks = coefs.shape[0]
    out = np.zeros((DCT_FREQUENCIES, DCT_BINS))
    for f in range(DCT_FREQUENCIES):
        col = coefs[:, f]
        col = col[np.abs(col) <= DCT_BIN_RANGE] + DCT_BIN_RANGE
        out[f] = np.bincount(col, minlength=DCT_BINS) / n_blocks
    return out.ravel()


def extract_meta(container: JpegContainer) -> np.ndarray:
    """152-d compression-settings vector.

    Layout: quantization tables 0 and 1 (zigzag, zero if absent) [0:128],
    DC and AC Huffman table counts [128:130], three component records
    ``(id, h, v, qtable, dc_table, ac_table)`` in frame order [130:148],
    optimized-coding and progressive flags [148:150], width and height
    [150:152].
    """
    out = np.zeros(META_DIM)
    for slot in (0, 1):
        table = container.quant_tables.get(slot)
        if table is not None:
            out[slot * 64:(slot + 1) * 64] = table
    out[128] = container.huffman_table_count_dc
    out[129] = container.huffman_table_count_ac
    for i, c in enumerate(container.components[:3]):
        out[130 + 6 * i:136 + 6 * i] = (
            c.id, c.h_sampling, c.v_sampling, c.quant_table_index, c.dc_table_index, c.ac_table_index)
    out[148] = float(container.optimized_coding)
    out[149] = float(container.progressive)
    out[150] = container.width
    out[151] = container.height
    return out


def extract_header(scan: SegmentScan | Sequence, unused_regions: Sequence | None = None) -> np.ndarray:
    """Marker frequencies ``[DHT, unused, APP13, APP2, SOF0, SOF2, COM, DRI]``.

    ``unused`` is the number of unused regions, not their byte length.
    """
    if isinstance(scan, SegmentScan):
        segments, unused_regions = scan.segments, scan.unused
    else:
        segments = scan
    kinds = [s.kind for s in segments]
    counts = {k: kinds.count(k) for k in HEADER_MARKERS if k != "unused"}
    counts["unused"] = len(unused_regions or ())
    return np.array([counts[k] for k in HEADER_MARKERS], dtype=np.int64)


@dataclass
class FeatureRecord:
    id: str
    label: SharingChain | None = None
    dct: np.ndarray | None = None
    meta: np.ndarray | None = None
    header: np.ndarray | None = None

    def get(self, name: str) -> np.ndarray:
        value = getattr(self, name) if name in FEATURE_NAMES else None
        if value is None:
            raise KeyError(f"record {self.id!r} has no {name!r} descriptor")
        return value

    def available(self) -> tuple[str, ...]:
        return tuple(n for n in FEATURE_NAMES if getattr(self, n) is not None)

    def to_json(self) -> dict:
        obj = {"id": self.id, "label": None if self.label is None else format_chain_label(self.label)}
        for name in FEATURE_NAMES:
            value = getattr(self, name)
            if value is not None:
                obj[name] = [int(v) for v in value] if name == "header" else [float(v) for v in value]
        return obj

    @classmethod
    def from_json(cls, obj: dict, platforms=None, max_len=None) -> "FeatureRecord":
        label = obj.get("label")
        rec = cls(str(obj["id"]), None if label is None else parse_chain_label(label, platforms, max_len))
        for name in FEATURE_NAMES:
            if obj.get(name) is not None:
                value = np.asarray(obj[name], dtype=np.int64 if name == "header" else np.float64)
                if value.shape != (FEATURE_DIMS[name],):
                    raise ValueError(f"record {rec.id!r}: {name} has shape {value.shape}")
                setattr(rec, name, value)
        return rec


def normalize_subset(subset: Iterable[str] | str) -> tuple[str, ...]:
    if isinstance(subset, str):
        subset = [s for s in subset.split(",") if s.strip()]
    names = [s.strip().lower() for s in subset]
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if unknown:
        raise ValueError(f"unknown feature name(s) {unknown}; expected a subset of {FEATURE_NAMES}")
    if not names:
        raise ValueError("feature subset is empty")
    return tuple(n for n in FEATURE_NAMES if n in names)


def extract_all(data: bytes, subset: Iterable[str] = FEATURE_NAMES, *, id: str = "",
                label: SharingChain | None = None) -> FeatureRecord:
    """Compute the requested descriptors of one file.

    The entropy-coded data is decoded only when ``dct`` is requested.
    """
    subset = normalize_subset(subset)
    record = FeatureRecord(id, label)
    scan = None
    if "header" in subset or "meta" in subset:
        try:
            scan = scan_segments(data)
        except ValueError as exc:
            raise FeatureError("header" if "header" in subset else "meta", exc) from exc
    if "header" in subset:
        record.header = extract_header(scan)
    if "meta" in subset:
        try:
            record.meta = extract_meta(parse_container(scan))
        except Exception as exc:
            raise FeatureError("meta", exc) from exc
    if "dct" in subset:
        try:
            record.dct = extract_dct(decode_luma(data))
        except Exception as exc:
            raise FeatureError("dct", exc) from exc
    return record


def extract_batch(items: Sequence[tuple[str, bytes | Path, SharingChain | None]],
                  subset: Iterable[str] = FEATURE_NAMES, threads: int = 1) -> list[FeatureRecord]:
    """Extract ``(id, bytes-or-path, label)`` items; output order equals input order."""
    subset = normalize_subset(subset)

    def one(item):
        rid, src, label = item
        data = Path(src).read_bytes() if isinstance(src, (str, Path)) else src
        return extract_all(data, subset, id=rid, label=label)

    if threads <= 1:
        return [one(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, items))


def write_jsonl(records: Iterable[FeatureRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), separators=(",", ":")) + "\n")


def read_jsonl(path: str | Path, platforms=None, max_len=None) -> list[FeatureRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(FeatureRecord.from_json(json.loads(line), platforms, max_len))
    return records


def feature_matrix(records: Sequence[FeatureRecord], name: str) -> np.ndarray:
    if not records:
        return np.zeros((0, FEATURE_DIMS[name]))
    return np.vstack([np.asarray(r.get(name), dtype=np.float64) for r in records])


class JpegFeatureExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer from JPEG bytes (or paths) to stacked descriptors.

    Parameters
    ----------
    features : tuple of str
        Descriptors to compute, concatenated in ``dct, meta, header`` order.
    """

    def __init__(self, features=FEATURE_NAMES):
        self.features = features

    def fit(self, X, y=None):
        self.features_ = normalize_subset(self.features)
        self.n_features_out_ = sum(FEATURE_DIMS[f] for f in self.features_)
        return self

    def transform(self, X) -> np.ndarray:
        subset = normalize_subset(self.features)
        rows = []
        for item in X:
            data = Path(item).read_bytes() if isinstance(item, (str, Path)) else item
            rec = extract_all(data, subset)
            rows.append(np.concatenate([np.asarray(rec.get(f), dtype=np.float64) for f in subset]))
        width = sum(FEATURE_DIMS[f] for f in subset)
        return np.vstack(rows) if rows else np.zeros((0, width))

