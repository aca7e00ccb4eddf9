"""JPEG container parsing and luminance decoding."""

from ._errors import JpegDecodeError, JpegError, JpegParseError, UnsupportedCodingError
from .container import Component, HuffmanTable, JpegContainer, ScanHeader, parse_container
from .decode import LumaPlane, decode_luma, decode_ycbcr
from .markers import ByteRegion, JpegSegment, SegmentScan, marker_kind, scan_segments

__all__ = [
    "ByteRegion", "Component", "HuffmanTable", "JpegContainer", "JpegDecodeError", "JpegError",
    "JpegParseError", "JpegSegment", "LumaPlane", "ScanHeader", "SegmentScan",
    "UnsupportedCodingError", "decode_luma", "decode_ycbcr", "marker_kind", "parse_container",
    "scan_segments",
]
