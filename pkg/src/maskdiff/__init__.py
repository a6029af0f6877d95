"""Mask-guided text-driven image editing on a deterministic diffusion stack.

The public surface mirrors the layers of the system: dense kernels
(`tensor`), schedules and DDIM stepping (`schedule`), analytic verification
denoisers (`oracle`), the toy text conditioner (`textcond`), mask pyramids
and blending (`blend`), the editable U-shaped denoiser (`unet`), the full
edit procedure (`pipeline`), and the I/O / CLI / service shell.
"""

from .blend import MaskPyramid, blend_features, blend_pixels, build_mask_pyramid
from .oracle import GaussianMixture, OracleDenoiser, gmm_eps, gmm_marginal
from .pipeline import (
    EditConfig,
    EditRequest,
    ValidationFailure,
    edit,
    edit_traced,
    reconstruct,
    validate_config,
    validate_request,
)
from .rng import Rng, derive_seed
from .schedule import (
    NoiseSchedule,
    RescaledState,
    TimestepPlan,
    ddim_encode_loop,
    ddim_encode_step,
    ddim_sample_loop,
    ddim_step,
    decode_plan,
    encode_plan,
    eps_to_mu,
    from_rescaled,
    make_schedule,
    q_sample,
    to_rescaled,
)
from .textcond import PromptEmbedding, encode_prompt, tokenize, word_token_indices
from .unet import AttentionMaskSpec, UNet, UNetConfig, Weights, init_weights

__version__ = "0.1.0"

__all__ = [
    "AttentionMaskSpec",
    "EditConfig",
    "EditRequest",
    "GaussianMixture",
    "MaskPyramid",
    "NoiseSchedule",
    "OracleDenoiser",
    "PromptEmbedding",
    "RescaledState",
    "Rng",
    "TimestepPlan",
    "UNet",
    "UNetConfig",
    "ValidationFailure",
    "Weights",
    "blend_features",
    "blend_pixels",
    "build_mask_pyramid",
    "ddim_encode_loop",
    "ddim_encode_step",
    "ddim_sample_loop",
    "ddim_step",
    "decode_plan",
    "derive_seed",
    "edit",
    "edit_traced",
    "encode_plan",
    "encode_prompt",
    "eps_to_mu",
    "from_rescaled",
    "gmm_eps",
    "gmm_marginal",
    "init_weights",
    "make_schedule",
    "q_sample",
    "reconstruct",
    "to_rescaled",
    "tokenize",
    "validate_config",
    "validate_request",
    "word_token_indices",
]
