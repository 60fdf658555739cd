"""Minimal PNG codec for the toolkit's own exports.

Pillow cannot write 16-bit RGB PNGs, and we need deterministic bytes plus a
tEXt provenance chunk on every export, so encoding is done here directly
(grayscale / RGB, 8 or 16 bit, no interlace, filter 0 on every scanline,
fixed zlib level). The reader handles exactly what the writer produces and is
used to re-import results; arbitrary foreign images are read with Pillow in
cube.py instead.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6


@dataclass
class PngImage:
    samples: np.ndarray  # (H, W) grayscale or (H, W, 3) RGB, uint8/uint16
    bit_depth: int
    text: dict[str, str] = field(default_factory=dict)


def _chunk(tag: bytes, data: bytes) -> bytes:
    return (
        struct.pack(">I", len(data))
        + tag
        + data
        + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
    )


def encode_png(samples: np.ndarray, bit_depth: int, text: dict[str, str] | None = None) -> bytes:
    """Encode an integer sample array as PNG bytes.

    ``samples`` must already be quantized: uint8 for bit_depth 8, uint16 for
    bit_depth 16, shaped (H, W) for grayscale or (H, W, 3) for RGB. ``text``
    entries become tEXt chunks (latin-1 keys/values).
    """
    arr = np.asarray(samples)
    if bit_depth not in (8, 16):
        raise DataError(f"unsupported PNG bit depth {bit_depth}")
    if arr.ndim == 2:
        color_type = 0
    elif arr.ndim == 3 and arr.shape[2] == 3:
        color_type = 2
    else:
        raise DataError(f"cannot encode array of shape {arr.shape} as PNG")
    want_dtype = np.uint8 if bit_depth == 8 else np.uint16
    if arr.dtype != want_dtype:
        raise DataError(f"bit depth {bit_depth} requires dtype {want_dtype}, got {arr.dtype}")

    height, width = arr.shape[:2]
    ihdr = struct.pack(">IIBBBBB", width, height, bit_depth, color_type, 0, 0, 0)
    out = [_SIGNATURE, _chunk(b"IHDR", ihdr)]
    for key, value in (text or {}).items():
        out.append(_chunk(b"tEXt", key.encode("latin-1") + b"\x00" + value.encode("latin-1")))

    # filter byte 0 before each scanline, samples big-endian
    big = arr.astype(">u2") if bit_depth == 16 else arr
    rows = big.reshape(height, -1).view(np.uint8).reshape(height, -1)
    raw = np.concatenate([np.zeros((height, 1), np.uint8), rows], axis=1).tobytes()
    out.append(_chunk(b"IDAT", zlib.compress(raw, _ZLIB_LEVEL)))
    out.append(_chunk(b"IEND", b""))
    return b"".join(out)


def write_png(path, samples: np.ndarray, bit_depth: int, text: dict[str, str] | None = None) -> None:
    data = encode_png(samples, bit_depth, text)
    with open(path, "wb") as fh:
        fh.write(data)


def decode_png(data: bytes) -> PngImage:
    """Decode PNG bytes produced by :func:`encode_png`.

    Supports grayscale/RGB at 8/16 bit, non-interlaced, any mix of filter
    types 0-4 (our writer emits only 0, but unfiltering is cheap to do
    properly).
    """
    if data[:8] != _SIGNATURE:
        raise DataError("not a PNG file")
    pos = 8
    ihdr = None
    idat = []
    text: dict[str, str] = {}
    while pos < len(data):
        if pos + 8 > len(data):
            raise DataError("truncated PNG chunk header")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        body = data[pos + 8 : pos + 8 + length]
        if len(body) != length:
            raise DataError("truncated PNG chunk body")
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", body)
        elif tag == b"IDAT":
            idat.append(body)
        elif tag == b"tEXt":
            key, _, value = body.partition(b"\x00")
            text[key.decode("latin-1")] = value.decode("latin-1")
        elif tag == b"IEND":
            break
    if ihdr is None:
        raise DataError("PNG missing IHDR")
    width, height, bit_depth, color_type, compression, filt, interlace = ihdr
    if bit_depth not in (8, 16) or color_type not in (0, 2):
        raise DataError(f"unsupported PNG layout (depth {bit_depth}, color type {color_type})")
    if compression != 0 or filt != 0 or interlace != 0:
        raise DataError("unsupported PNG compression/interlace options")

    channels = 1 if color_type == 0 else 3
    bpp = channels * bit_depth // 8
    stride = width * bpp
    raw = zlib.decompress(b"".join(idat))
    if len(raw) != height * (stride + 1):
        raise DataError("PNG payload size mismatch")
    raw = np.frombuffer(raw, np.uint8).reshape(height, stride + 1)
    filters = raw[:, 0]
    scan = raw[:, 1:]

    if np.any(filters):
        scan = _unfilter(scan.copy(), filters, bpp)

    if bit_depth == 16:
        arr = scan.reshape(height, width, channels, 2).astype(np.uint16)
        samples = (arr[..., 0] << 8) | arr[..., 1]
    else:
        samples = scan.reshape(height, width, channels).copy()
    if channels == 1:
        samples = samples[:, :, 0]
    return PngImage(samples=samples, bit_depth=bit_depth, text=text)


def read_png(path) -> PngImage:
    with open(path, "rb") as fh:
        return decode_png(fh.read())


def _unfilter(scan: np.ndarray, filters: np.ndarray, bpp: int) -> np.ndarray:
    height, stride = scan.shape
    prev = np.zeros(stride, np.int32)
    for y in range(height):
        row = scan[y].astype(np.int32)
        ftype = filters[y]
        if ftype == 0:
            pass
        elif ftype == 2:  # Up
            row = (row + prev) & 0xFF
        elif ftype in (1, 3, 4):  # Sub / Average / Paeth need a left-to-right pass
            for i in range(stride):
                left = row[i - bpp] if i >= bpp else 0
                up = prev[i]
                ul = prev[i - bpp] if i >= bpp else 0
                if ftype == 1:
                    row[i] = (row[i] + left) & 0xFF
                elif ftype == 3:
                    row[i] = (row[i] + (left + up) // 2) & 0xFF
                else:
                    p = left + up - ul
                    pa, pb, pc = abs(p - left), abs(p - up), abs(p - ul)
                    if pa <= pb and pa <= pc:
                        pred = left
                    elif pb <= pc:
                        pred = up
                    else:
                        pred = ul
                    row[i] = (row[i] + pred) & 0xFF
        else:
            raise DataError(f"unknown PNG filter type {ftype}")
        scan[y] = row.astype(np.uint8)
        prev = row
    return scan
