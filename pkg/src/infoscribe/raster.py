"""Binary PGM/PPM reading and writing.

Only 8-bit binary netpbm is accepted (``P5`` gray, ``P6`` color). Color input
collapses to gray on load with BT.601 luma weights; everything downstream
works on a single 8-bit channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Raster",
    "RasterError",
    "MalformedHeader",
    "TruncatedPayload",
    "load_image",
    "save_image",
    "read_image",
    "write_image",
    "luminance",
]

_WHITESPACE = b" \t\n\r\v\f"


class RasterError(ValueError):
    """Base class for image decoding failures."""


class MalformedHeader(RasterError):
    pass


class TruncatedPayload(RasterError):
    pass


@dataclass(frozen=True, eq=False)
class Raster:
    """Immutable 8-bit grayscale image.

    ``data`` is a read-only ``uint8`` array of shape ``(height, width)``.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"raster must be a non-empty 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("pixel intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_pixels(cls, width: int, height: int, pixels) -> "Raster":
        arr = np.asarray(pixels)
        if arr.size != width * height:
            raise ValueError(f"expected {width * height} pixels, got {arr.size}")
        return cls(arr.reshape(height, width))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def pixels(self) -> np.ndarray:
        """Row-major flat view of the intensities."""
        return self.data.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.data.shape, self.data.tobytes()))

    def __repr__(self):
        return f"Raster({self.width}x{self.height})"


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Per-pixel BT.601 luma, rounded half up, for an ``(..., 3)`` uint8 array."""
    rgb = np.asarray(rgb, dtype=np.int64)
    # integer weights keep the rounding exact: round(x) == (1000x + 500) // 1000
    y = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return np.clip(y, 0, 255).astype(np.uint8)


def _header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last token.
    """
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos] in _WHITESPACE:
            pos += 1
        if pos >= n:
            raise MalformedHeader("header ended early")
        if buf[pos] == ord("#"):
            while pos < n and buf[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and buf[pos] not in _WHITESPACE and buf[pos] != ord("#"):
            pos += 1
        tokens.append(buf[start:pos])
    if pos >= n or buf[pos] not in _WHITESPACE:
        raise MalformedHeader("header must end with a single whitespace byte")
    return tokens, pos + 1


def _positive_int(token: bytes, what: str) -> int:
    if not token.isdigit():
        raise MalformedHeader(f"{what} is not a decimal integer: {token!r}")
    value = int(token)
    if value < 1:
        raise MalformedHeader(f"{what} must be positive, got {value}")
    return value


def load_image(buf: bytes) -> Raster:
    """Decode a binary PGM (P5) or PPM (P6) byte string with maxval 255."""
    buf = bytes(buf)
    if buf[:2] not in (b"P5", b"P6"):
        raise MalformedHeader(f"unsupported magic {buf[:2]!r}; expected P5 or P6")
    if len(buf) < 3 or buf[2] not in _WHITESPACE + b"#":
        raise MalformedHeader("magic must be followed by whitespace")
    channels = 1 if buf[:2] == b"P5" else 3
    tokens, offset = _header_tokens(buf[2:], 3)
    offset += 2
    width = _positive_int(tokens[0], "width")
    height = _positive_int(tokens[1], "height")
    maxval = _positive_int(tokens[2], "maxval")
    if maxval != 255:
        raise MalformedHeader(f"only maxval 255 is supported, got {maxval}")

    need = width * height * channels
    payload = buf[offset:offset + need]
    if len(payload) < need:
        raise TruncatedPayload(f"expected {need} payload bytes, found {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 3:
        arr = luminance(arr.reshape(height, width, 3))
    return Raster(arr.reshape(height, width))


def save_image(r: Raster) -> bytes:
    """Encode as binary PGM, maxval 255."""
    return b"P5\n%d %d\n255\n" % (r.width, r.height) + r.data.tobytes()


def read_image(path) -> Raster:
    with open(path, "rb") as fh:
        return load_image(fh.read())


def write_image(path, r: Raster) -> None:
    with open(path, "wb") as fh:
        fh.write(save_image(r))
