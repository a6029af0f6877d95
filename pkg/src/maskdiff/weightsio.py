"""Flat binary weights file.

Layout (all integers little-endian):

    magic   4 bytes  "PFBW"
    version u32      1
    count   u32      number of tensors
    per tensor:
        name_len u16, name UTF-8,
        rank     u8,  dims u32 each,
        data     float32 little-endian, row-major

Tensors are written in sorted-name order so identical weight sets produce
identical files. Wrong magic or version is refused, never guessed around.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError
from .unet import UNetConfig, Weights

MAGIC = b"PFBW"
VERSION = 1


def encode_weights(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name in sorted(tensors):
        t = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw_name = name.encode("utf-8")
        if len(raw_name) > 0xFFFF:
            raise FormatError(f"tensor name too long: {name[:40]}...")
        if t.ndim > 0xFF:
            raise FormatError(f"tensor rank {t.ndim} does not fit in u8")
        parts.append(struct.pack("<H", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<B", t.ndim))
        parts.append(struct.pack(f"<{t.ndim}I", *t.shape))
        parts.append(t.tobytes())
    return b"".join(parts)


def decode_weights(data: bytes) -> dict[str, np.ndarray]:
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 12:
        raise FormatError("truncated header")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported weights version {version}")
    pos = 12
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            n = int(np.prod(dims)) if rank else 1
            blob = data[pos : pos + 4 * n]
            if len(blob) != 4 * n:
                raise FormatError(f"tensor {name!r} payload truncated")
            pos += 4 * n
        except struct.error as exc:
            raise FormatError(f"truncated tensor table: {exc}") from exc
        tensors[name] = np.frombuffer(blob, dtype="<f4").reshape(dims).copy()
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after last tensor")
    return tensors


def save_weights(path, weights: Weights) -> None:
    with open(path, "wb") as f:
        f.write(encode_weights(weights.as_dict()))


def load_weights(path, cfg: UNetConfig) -> Weights:
    with open(path, "rb") as f:
        return Weights(cfg, decode_weights(f.read()))
