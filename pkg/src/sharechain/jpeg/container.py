"""Container-level parsing: quantization/Huffman tables, frame and scan headers."""

from __future__ import annotations

from dataclasses import dataclass, field

from ._errors import JpegParseError, UnsupportedCodingError
from .markers import SegmentScan, scan_segments
from .tables import is_standard_huffman

SUPPORTED_FRAMES = {"SOF0": False, "SOF2": True}
UNSUPPORTED_FRAMES = {f"SOF{i}" for i in (1, 3, 5, 6, 7, 9, 10, 11, 13, 14, 15)}


@dataclass(frozen=True)
class Component:
    id: int
    h_sampling: int
    v_sampling: int
    quant_table_index: int
    dc_table_index: int = 0
    ac_table_index: int = 0


@dataclass(frozen=True)
class HuffmanTable:
    table_class: int  # 0 = DC, 1 = AC
    table_id: int
    bits: tuple[int, ...]
    values: tuple[int, ...]


@dataclass(frozen=True)
class ScanHeader:
    component_ids: tuple[int, ...]
    table_selectors: tuple[tuple[int, int], ...]
    ss: int
    se: int
    ah: int
    al: int


@dataclass(frozen=True)
class JpegContainer:
    """Everything the META and HEADER descriptors read from a file."""

    scan: SegmentScan = field(repr=False)
    quant_tables: dict[int, tuple[int, ...]]
    huffman_tables: tuple[HuffmanTable, ...]
    components: tuple[Component, ...]
    scans: tuple[ScanHeader, ...]
    frame: str
    width: int
    height: int
    restart_interval: int | None
    precision: int = 8

    @property
    def segments(self):
        return self.scan.segments

    @property
    def progressive(self) -> bool:
        return self.frame == "SOF2"

    @property
    def huffman_table_count_dc(self) -> int:
        return sum(1 for t in self.huffman_tables if t.table_class == 0)

    @property
    def huffman_table_count_ac(self) -> int:
        return sum(1 for t in self.huffman_tables if t.table_class == 1)

    @property
    def optimized_coding(self) -> bool:
        """True when any declared Huffman table differs from the Annex K ones."""
        return any(not is_standard_huffman(t.table_class, t.bits, t.values) for t in self.huffman_tables)


def _parse_dqt(payload: bytes, offset: int, tables: dict[int, tuple[int, ...]]) -> None:
    i = 0
    while i < len(payload):
        pq, tq = payload[i] >> 4, payload[i] & 0x0F
        i += 1
        size = 128 if pq else 64
        if pq > 1 or tq > 3:
            raise JpegParseError(f"invalid DQT table spec Pq={pq} Tq={tq}", offset)
        if i + size > len(payload):
            raise JpegParseError("DQT payload too short", offset)
        if pq:
            values = tuple((payload[i + 2 * k] << 8) | payload[i + 2 * k + 1] for k in range(64))
        else:
            values = tuple(payload[i:i + 64])
        if min(values) < 1:
            raise JpegParseError(f"zero entry in quantization table {tq}", offset)
        tables[tq] = values
        i += size


def _parse_dht(payload: bytes, offset: int, out: list[HuffmanTable]) -> None:
    i = 0
    while i < len(payload):
        if i + 17 > len(payload):
            raise JpegParseError("DHT payload too short", offset)
        tc, th = payload[i] >> 4, payload[i] & 0x0F
        if tc > 1 or th > 3:
            raise JpegParseError(f"invalid DHT table spec Tc={tc} Th={th}", offset)
        bits = tuple(payload[i + 1:i + 17])
        total = sum(bits)
        i += 17
        if i + total > len(payload):
            raise JpegParseError("DHT values truncated", offset)
        out.append(HuffmanTable(tc, th, bits, tuple(payload[i:i + total])))
        i += total


def _parse_sof(payload: bytes, offset: int):
    if len(payload) < 6:
        raise JpegParseError("SOF payload too short", offset)
    precision = payload[0]
    height = (payload[1] << 8) | payload[2]
    width = (payload[3] << 8) | payload[4]
    nc = payload[5]
    if not 1 <= nc <= 4:
        raise JpegParseError(f"invalid component count {nc}", offset)
    if len(payload) < 6 + 3 * nc:
        raise JpegParseError("SOF component list truncated", offset)
    comps = []
    for k in range(nc):
        cid, hv, tq = payload[6 + 3 * k:9 + 3 * k]
        h, v = hv >> 4, hv & 0x0F
        if not (1 <= h <= 4 and 1 <= v <= 4):
            raise JpegParseError(f"invalid sampling factors {h}x{v} for component {cid}", offset)
        if tq > 3:
            raise JpegParseError(f"invalid quantization table index {tq}", offset)
        comps.append([cid, h, v, tq, None, None])
    if width == 0 or height == 0:
        raise JpegParseError(f"unsupported frame size {width}x{height}", offset)
    return precision, width, height, comps


def _parse_sos(payload: bytes, offset: int) -> ScanHeader:
    if not payload:
        raise JpegParseError("empty SOS header", offset)
    ns = payload[0]
    if not 1 <= ns <= 4 or len(payload) < 1 + 2 * ns + 3:
        raise JpegParseError("malformed SOS header", offset)
    ids, sel = [], []
    for k in range(ns):
        cid, t = payload[1 + 2 * k], payload[2 + 2 * k]
        ids.append(cid)
        sel.append((t >> 4, t & 0x0F))
    ss, se, a = payload[1 + 2 * ns:4 + 2 * ns]
    return ScanHeader(tuple(ids), tuple(sel), ss, se, a >> 4, a & 0x0F)


def parse_container(data: bytes | SegmentScan) -> JpegContainer:
    """Parse the container of a baseline or progressive Huffman-coded JPEG.

    Huffman tables accumulate over every DHT segment in the file, including
    those between progressive scans. Table selectors per component are taken
    from the first scan that codes the component's DC (resp. AC) band.
    """
    scan = data if isinstance(data, SegmentScan) else scan_segments(data)
    quant: dict[int, tuple[int, ...]] = {}
    huff: list[HuffmanTable] = []
    scans: list[ScanHeader] = []
    frame = None
    restart = None
    comps = None
    width = height = precision = 0
    for seg in scan.segments:
        kind = seg.kind
        if kind == "DQT":
            _parse_dqt(seg.payload, seg.offset, quant)
        elif kind == "DHT":
            _parse_dht(seg.payload, seg.offset, huff)
        elif kind == "DRI":
            if seg.length < 2:
                raise JpegParseError("DRI payload too short", seg.offset)
            restart = (seg.payload[0] << 8) | seg.payload[1]
        elif kind in UNSUPPORTED_FRAMES:
            raise UnsupportedCodingError(f"{kind} frames are not supported (Huffman SOF0/SOF2 only)")
        elif kind == "DAC":
            raise UnsupportedCodingError("arithmetic coding is not supported")
        elif kind in SUPPORTED_FRAMES:
            if frame is not None:
                raise JpegParseError("multiple frame headers", seg.offset)
            frame = kind
            precision, width, height, comps = _parse_sof(seg.payload, seg.offset)
        elif kind == "SOS":
            if comps is None:
                raise JpegParseError("SOS before frame header", seg.offset)
            hdr = _parse_sos(seg.payload, seg.offset)
            scans.append(hdr)
            for cid, (td, ta) in zip(hdr.component_ids, hdr.table_selectors):
                for c in comps:
                    if c[0] == cid:
                        if hdr.ss == 0 and c[4] is None:
                            c[4] = td
                        if hdr.se > 0 and c[5] is None:
                            c[5] = ta
    if frame is None:
        raise JpegParseError("missing SOF0/SOF2 frame header", None)
    components = tuple(Component(c[0], c[1], c[2], c[3], c[4] or 0, c[5] or 0) for c in comps)
    return JpegContainer(
        scan=scan,
        quant_tables=dict(sorted(quant.items())),
        huffman_tables=tuple(huff),
        components=components,
        scans=tuple(scans),
        frame=frame,
        width=width,
        height=height,
        restart_interval=restart,
        precision=precision,
    )
