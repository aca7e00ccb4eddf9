class JpegError(Exception):
    """Base class for JPEG container and decoding failures."""


class JpegParseError(JpegError, ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        super().__init__(message if offset is None else f"{message} (at byte {offset})")


class UnsupportedCodingError(JpegError):
    """Arithmetic, lossless or hierarchical coding."""


class JpegDecodeError(JpegError):
    pass
