"""Dense float32 kernels: matmul, 3x3 convolution, nearest resize, masked
softmax, layer norm, and the activations the denoiser is built from.

All operations are pure functions of float32 arrays and are deterministic:
the same inputs give bit-identical outputs on repeated calls. The masked
softmax implements true exclusion - disallowed entries are removed from the
log-sum and come back with weight exactly 0.0, not an approximation via a
large negative constant.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateMaskError, DimensionError

Array = np.ndarray


def as_f32(x) -> Array:
    a = np.asarray(x, dtype=np.float32)
    return a


def matmul(a: Array, b: Array) -> Array:
    """Matrix product of an (M, K) by a (K, N) array, float32 accumulation."""
    a = as_f32(a)
    b = as_f32(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} x {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions disagree: {a.shape} x {b.shape}")
    return np.matmul(a, b)


def conv2d(x: Array, kernel: Array, bias: Array | None = None, stride: int = 1) -> Array:
    """2-D cross-correlation with 3x3 kernels, zero padding of 1.

    x: (C, H, W); kernel: (O, C, 3, 3); output: (O, ceil(H/s), ceil(W/s)).
    Implemented as im2col + one matrix product so the summation order is
    fixed and runs do not differ bit-for-bit.
    """
    x = as_f32(x)
    kernel = as_f32(kernel)
    if x.ndim != 3 or kernel.ndim != 4:
        raise DimensionError(f"conv2d expects (C,H,W) x (O,C,3,3), got {x.shape} x {kernel.shape}")
    if kernel.shape[2:] != (3, 3):
        raise DimensionError(f"only 3x3 kernels are supported, got {kernel.shape[2:]}")
    if stride not in (1, 2):
        raise DimensionError(f"stride must be 1 or 2, got {stride}")
    c, h, w = x.shape
    out_c = kernel.shape[0]
    if kernel.shape[1] != c:
        raise DimensionError(f"kernel expects {kernel.shape[1]} channels, input has {c}")
    out_h = -(-h // stride)
    out_w = -(-w // stride)

    padded = np.zeros((c, h + 2, w + 2), dtype=np.float32)
    padded[:, 1 : h + 1, 1 : w + 1] = x
    # Column matrix: rows are output positions, columns are (c, ky, kx).
    cols = np.empty((out_h * out_w, c * 9), dtype=np.float32)
    idx = 0
    for ky in range(3):
        for kx in range(3):
            patch = padded[:, ky : ky + h : 1, kx : kx + w : 1][:, ::stride, ::stride]
            cols[:, idx * c : (idx + 1) * c] = patch.reshape(c, -1).T
            idx += 1
    # Kernel flattened to match the (ky, kx, c) column order above.
    kmat = kernel.transpose(2, 3, 1, 0).reshape(9 * c, out_c)
    out = np.matmul(cols, kmat)  # (out_h*out_w, O)
    if bias is not None:
        bias = as_f32(bias)
        if bias.shape != (out_c,):
            raise DimensionError(f"bias shape {bias.shape} does not match {out_c} outputs")
        out = out + bias
    return out.T.reshape(out_c, out_h, out_w)


def resize_nearest(x: Array, out_h: int, out_w: int) -> Array:
    """Nearest-neighbour resize sampling source index floor(i*H/outH)."""
    x = as_f32(x)
    if x.ndim == 2:
        x = x[None]
        squeeze = True
    elif x.ndim == 3:
        squeeze = False
    else:
        raise DimensionError(f"resize expects (C,H,W) or (H,W), got {x.shape}")
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"target size must be positive, got {out_h}x{out_w}")
    _, h, w = x.shape
    rows = (np.arange(out_h) * h) // out_h
    cols = (np.arange(out_w) * w) // out_w
    out = x[:, rows[:, None], cols[None, :]]
    return out[0] if squeeze else out


def softmax_lastdim(scores: Array, allowed: Array | None = None) -> Array:
    """Softmax over the last axis restricted to allowed entries.

    `allowed` is a binary array broadcastable to `scores`; entries where it
    is 0 are excluded from the normalisation and receive weight exactly 0.0.
    A slice with no allowed entry raises DegenerateMaskError.
    """
    scores = as_f32(scores)
    if allowed is None:
        masked = scores
    else:
        allowed = np.broadcast_to(np.asarray(allowed), scores.shape)
        if ((allowed != 0) & (allowed != 1)).any():
            raise DimensionError("allowed mask must be binary")
        masked = np.where(allowed != 0, scores, np.float32(-np.inf))
    mx = masked.max(axis=-1, keepdims=True)
    if not np.isfinite(mx).all():
        raise DegenerateMaskError("a softmax slice has no allowed entries")
    e = np.exp(masked - mx)
    return e / e.sum(axis=-1, keepdims=True)


def layer_norm(x: Array, gain: Array, shift: Array, eps: float = 1e-5) -> Array:
    """Normalise the last axis to zero mean / unit variance, then affine."""
    x = as_f32(x)
    gain = as_f32(gain)
    shift = as_f32(shift)
    if eps <= 0:
        raise DimensionError("eps must be positive")
    mean = x.mean(axis=-1, keepdims=True, dtype=np.float32)
    var = np.square(x - mean).mean(axis=-1, keepdims=True, dtype=np.float32)
    return (x - mean) / np.sqrt(var + np.float32(eps)) * gain + shift


def silu(x: Array) -> Array:
    x = as_f32(x)
    return x / (np.float32(1.0) + np.exp(-x))


def gelu(x: Array) -> Array:
    # tanh approximation, good to ~1e-3 and cheap in float32
    x = as_f32(x)
    c = np.float32(0.7978845608028654)  # sqrt(2/pi)
    return np.float32(0.5) * x * (np.float32(1.0) + np.tanh(c * (x + np.float32(0.044715) * x * x * x)))
