"""Binary mask pyramids and the two blending primitives.

blend keeps the first argument where the mask is 0 and the second where it
is 1, elementwise:  out = a * (1 - m) + b * m.  The same formula serves
feature maps inside the denoiser and latents between sampler steps. Masks
are resized with nearest-neighbour sampling only, which keeps every level
strictly binary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError
from .tensor import as_f32, resize_nearest


def _check_binary(mask: np.ndarray) -> np.ndarray:
    mask = as_f32(mask)
    if ((mask != 0.0) & (mask != 1.0)).any():
        raise InputError("mask must be strictly binary (0/1)")
    return mask


@dataclass(frozen=True)
class MaskPyramid:
    """Base mask plus nearest-resized copies at requested resolutions."""

    base: np.ndarray                                  # (H, W) binary float32
    levels: dict[tuple[int, int], np.ndarray]

    def at(self, h: int, w: int) -> np.ndarray:
        level = self.levels.get((h, w))
        if level is None:
            raise DimensionError(f"no pyramid level for {h}x{w}")
        return level


def build_mask_pyramid(mask: np.ndarray, resolutions) -> MaskPyramid:
    mask = _check_binary(mask)
    if mask.ndim != 2:
        raise DimensionError(f"mask must be 2-D, got shape {mask.shape}")
    levels = {}
    for h, w in resolutions:
        if (h, w) == mask.shape:
            levels[(h, w)] = mask.copy()
        else:
            levels[(h, w)] = resize_nearest(mask, h, w)
    return MaskPyramid(base=mask, levels=levels)


def blend_features(phi_y: np.ndarray, phi_x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """phi_y outside the mask, phi_x inside; m broadcasts over channels.

    Output dtype is float32 unless either operand is float64 (the sampler
    carries float64 loop state); blending never narrows its inputs.
    """
    wide = np.float64 if (np.asarray(phi_y).dtype == np.float64
                          or np.asarray(phi_x).dtype == np.float64) else np.float32
    phi_y = np.asarray(phi_y, dtype=wide)
    phi_x = np.asarray(phi_x, dtype=wide)
    if phi_y.shape != phi_x.shape:
        raise DimensionError(f"feature shapes differ: {phi_y.shape} vs {phi_x.shape}")
    m = _check_binary(m).astype(wide)
    if m.shape != phi_y.shape[-2:]:
        raise DimensionError(f"mask {m.shape} does not match spatial dims of {phi_y.shape}")
    return phi_y * (wide(1.0) - m) + phi_x * m


def blend_pixels(y_t: np.ndarray, x_t: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Latent-level blending; identical formula to blend_features."""
    return blend_features(y_t, x_t, m)
