"""Binary PPM (P6, color) and PGM (P5, grayscale/mask) readers and writers.

8-bit only, maxval 255. Pixels map to [-1, 1] reals on read via 2v/255 - 1
and are clamped and inverse-mapped on write, so a write -> read round trip
of already-quantized values is byte-exact. Mask reads threshold at >= 128.
"""

from __future__ import annotations

import numpy as np

from .errors import FormatError


def _read_header(data: bytes, magic: bytes) -> tuple[int, int, int, int]:
    """Parse 'magic w h maxval' allowing comments; returns (w, h, maxval, offset)."""
    if not data.startswith(magic):
        raise FormatError(f"expected {magic.decode()} header, got {data[:2]!r}")
    pos = len(magic)
    fields: list[int] = []
    while len(fields) < 3:
        if pos >= len(data):
            raise FormatError("truncated header")
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise FormatError("unterminated comment")
            pos = nl + 1
        elif c.isspace():
            pos += 1
        elif c.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            fields.append(int(data[pos:end]))
            pos = end
        else:
            raise FormatError(f"unexpected byte {c!r} in header")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after maxval")
    pos += 1
    w, h, maxval = fields
    if w < 1 or h < 1:
        raise FormatError(f"bad dimensions {w}x{h}")
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    return w, h, maxval, pos


def _payload(data: bytes, offset: int, count: int) -> np.ndarray:
    body = data[offset : offset + count]
    if len(body) != count:
        raise FormatError(f"payload has {len(body)} bytes, expected {count}")
    return np.frombuffer(body, dtype=np.uint8)


def decode_ppm(data: bytes) -> np.ndarray:
    """P6 bytes -> (3, H, W) float32 in [-1, 1]."""
    w, h, _, off = _read_header(data, b"P6")
    pix = _payload(data, off, 3 * w * h).reshape(h, w, 3)
    return (pix.astype(np.float32) * np.float32(2.0 / 255.0) - np.float32(1.0)).transpose(2, 0, 1)


def encode_ppm(img: np.ndarray) -> bytes:
    if img.ndim != 3 or img.shape[0] != 3:
        raise FormatError(f"PPM needs a (3, H, W) image, got {img.shape}")
    _, h, w = img.shape
    v = np.clip((img.astype(np.float32) + 1.0) * np.float32(255.0 / 2.0), 0.0, 255.0)
    pix = np.rint(v).astype(np.uint8).transpose(1, 2, 0)
    return b"P6\n%d %d\n255\n" % (w, h) + pix.tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    """P5 bytes -> (H, W) float32 in [-1, 1]."""
    w, h, _, off = _read_header(data, b"P5")
    pix = _payload(data, off, w * h).reshape(h, w)
    return pix.astype(np.float32) * np.float32(2.0 / 255.0) - np.float32(1.0)


def decode_pgm_mask(data: bytes) -> np.ndarray:
    """P5 bytes -> (H, W) binary float32 mask; 1 where value >= 128."""
    w, h, _, off = _read_header(data, b"P5")
    pix = _payload(data, off, w * h).reshape(h, w)
    return (pix >= 128).astype(np.float32)


def encode_pgm(img: np.ndarray) -> bytes:
    if img.ndim != 2:
        raise FormatError(f"PGM needs a (H, W) image, got {img.shape}")
    h, w = img.shape
    v = np.clip((img.astype(np.float32) + 1.0) * np.float32(255.0 / 2.0), 0.0, 255.0)
    return b"P5\n%d %d\n255\n" % (w, h) + np.rint(v).astype(np.uint8).tobytes()


def read_image(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_ppm(f.read())


def write_image(path, img: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(encode_ppm(img))


def read_mask(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_pgm_mask(f.read())


def write_mask(path, mask: np.ndarray) -> None:
    """Binary (H, W) mask -> P5 file with 255 inside, 0 outside."""
    h, w = mask.shape
    payload = ((np.asarray(mask) != 0).astype(np.uint8) * 255).tobytes()
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h) + payload)
