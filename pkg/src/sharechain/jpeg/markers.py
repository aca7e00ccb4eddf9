"""Marker-level scanning of JPEG files.

The scanner walks the marker structure only. Entropy-coded data after each
SOS is skipped (stuffed ``FF00`` bytes and ``RSTn`` markers belong to it),
and byte runs that sit between a segment's declared end and the next valid
marker are reported as *unused* regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ._errors import JpegParseError

SOI, EOI, SOS, DQT, DHT, DRI, COM, DNL = 0xD8, 0xD9, 0xDA, 0xDB, 0xC4, 0xDD, 0xFE, 0xDC
RST_MARKERS = frozenset(range(0xD0, 0xD8))
STANDALONE = frozenset({SOI, EOI, 0x01}) | RST_MARKERS


def marker_kind(code: int) -> str:
    """Short tag for a marker id byte (the byte after ``0xFF``)."""
    if code == SOI:
        return "SOI"
    if code == EOI:
        return "EOI"
    if code == SOS:
        return "SOS"
    if code == DQT:
        return "DQT"
    if code == DHT:
        return "DHT"
    if code == DRI:
        return "DRI"
    if code == COM:
        return "COM"
    if code == DNL:
        return "DNL"
    if code == 0xCC:
        return "DAC"
    if 0xC0 <= code <= 0xCF:
        return f"SOF{code - 0xC0}"
    if 0xE0 <= code <= 0xEF:
        return f"APP{code - 0xE0}"
    if code in RST_MARKERS:
        return f"RST{code - 0xD0}"
    return "unknown"


def _is_marker_code(code: int) -> bool:
    # 0x00 is a stuffed byte and 0xFF a fill byte; neither starts a segment
    return code == 0x01 or (0xC0 <= code <= 0xFE)


@dataclass(frozen=True)
class JpegSegment:
    """One marker segment.

    ``length`` is the payload size, i.e. the declared 2-byte length minus
    the two length bytes; it is 0 for standalone markers such as SOI/EOI.
    """

    marker: int
    offset: int
    length: int
    kind: str
    payload: bytes = field(default=b"", repr=False, compare=False)

    @property
    def marker_code(self) -> tuple[int, int]:
        return (0xFF, self.marker)

    @property
    def declared_length(self) -> int | None:
        return None if self.marker in STANDALONE else self.length + 2

    @property
    def end(self) -> int:
        """Offset one past the segment."""
        return self.offset + 2 + (0 if self.marker in STANDALONE else self.length + 2)


@dataclass(frozen=True)
class ByteRegion:
    offset: int
    length: int


@dataclass(frozen=True)
class SegmentScan:
    segments: tuple[JpegSegment, ...]
    unused: tuple[ByteRegion, ...]
    entropy: tuple[ByteRegion, ...]
    size: int

    def kinds(self) -> list[str]:
        return [s.kind for s in self.segments]

    def count(self, kind: str) -> int:
        return sum(1 for s in self.segments if s.kind == kind)


def _skip_entropy(data: bytes, pos: int) -> int:
    """Return the offset of the first real marker at or after ``pos``."""
    n = len(data)
    while True:
        pos = data.find(b"\xff", pos)
        if pos < 0 or pos + 1 >= n:
            return n
        code = data[pos + 1]
        if code == 0x00 or code in RST_MARKERS:
            pos += 2
            continue
        if code == 0xFF:
            # fill bytes preceding a marker
            pos += 1
            continue
        return pos


def _next_marker(data: bytes, pos: int) -> int:
    n = len(data)
    while True:
        pos = data.find(b"\xff", pos)
        if pos < 0 or pos + 1 >= n:
            return n
        if _is_marker_code(data[pos + 1]) and data[pos + 1] not in RST_MARKERS:
            return pos
        pos += 1


def scan_segments(data: bytes) -> SegmentScan:
    """Walk the marker structure of ``data``.

    Raises
    ------
    JpegParseError
        On a missing SOI, a truncated length field or a payload running
        past the end of the file. The error carries the byte offset.
    """
    data = bytes(data)
    n = len(data)
    if n < 2 or data[0] != 0xFF or data[1] != SOI:
        raise JpegParseError("missing SOI", 0)
    segments = [JpegSegment(SOI, 0, 0, "SOI")]
    unused: list[ByteRegion] = []
    entropy: list[ByteRegion] = []
    pos = 2
    while pos < n:
        if data[pos] != 0xFF or pos + 1 >= n or not _is_marker_code(data[pos + 1]) and data[pos + 1] != 0xFF:
            nxt = _next_marker(data, pos)
            unused.append(ByteRegion(pos, nxt - pos))
            pos = nxt
            continue
        if data[pos + 1] == 0xFF:
            pos += 1
            continue
        code = data[pos + 1]
        kind = marker_kind(code)
        if code in STANDALONE:
            segments.append(JpegSegment(code, pos, 0, kind))
            pos += 2
            if code == EOI:
                break
            continue
        if pos + 4 > n:
            raise JpegParseError(f"truncated length field of {kind} segment", pos)
        declared = (data[pos + 2] << 8) | data[pos + 3]
        if declared < 2:
            raise JpegParseError(f"invalid length {declared} in {kind} segment", pos)
        end = pos + 2 + declared
        if end > n:
            raise JpegParseError(f"end of file inside {kind} payload (declared {declared} bytes)", pos)
        segments.append(JpegSegment(code, pos, declared - 2, kind, data[pos + 4:end]))
        pos = end
        if code == SOS:
            stop = _skip_entropy(data, pos)
            if stop > pos:
                entropy.append(ByteRegion(pos, stop - pos))
            pos = stop
    return SegmentScan(tuple(segments), tuple(unused), tuple(entropy), n)
