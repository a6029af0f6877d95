"""The full mask-guided editing procedure.

Given an input image, a source prompt, a target prompt, and a binary mask,
the pipeline (1) encodes the image deterministically through all timestep
levels under the source prompt, (2) samples backwards from Gaussian noise
under the target prompt, and at every step runs two passes of the denoiser:
a source pass on the encoded level (collecting feature taps) and an edited
pass whose block outputs are blended with those taps through the resized
mask. Prompt words can additionally be confined to the mask region in
cross-attention, and during the early steps the latent itself is blended
with the encoded level outside the mask. Background mode drops the feature
blending and attention masking for a final fraction of the steps so rough
masks do not imprint themselves on the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .blend import blend_pixels, build_mask_pyramid
from .errors import MaskdiffError, WordNotFoundError
from .rng import Rng, derive_seed
from .schedule import (
    NoiseSchedule,
    TimestepPlan,
    ddim_encode_loop,
    ddim_sample_loop,
    ddim_step,
    make_schedule,
    timestep_grid,
)
from .textcond import PromptEmbedding, encode_prompt, normalize_words, word_token_indices
from .unet import AttentionMaskSpec, UNet

MODES = ("object", "background")
BLOCK_MIN, BLOCK_MAX = 1, 13


@dataclass(frozen=True)
class EditConfig:
    mode: str = "object"
    steps: int = 50
    encode_ratio: float = 1.0
    pfb_blocks: tuple[int, int] = (8, 13)
    am_blocks: tuple[int, int] = (4, 13)
    pixel_blend_fraction: float = 0.5
    tail_drop_fraction: float = 0.0
    am_words: tuple[str, ...] = ()
    seed: int = 0
    timesteps_total: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    @classmethod
    def defaults(cls, mode: str = "object") -> "EditConfig":
        if mode == "background":
            return cls(mode="background", pixel_blend_fraction=0.2, tail_drop_fraction=0.2)
        return cls(mode="object")

    @classmethod
    def from_dict(cls, data: dict) -> "EditConfig":
        base = cls.defaults(str(data.get("mode", "object")))
        kwargs = {}
        for name in ("steps", "seed", "timesteps_total"):
            if name in data:
                kwargs[name] = int(data[name])
        for name in ("encode_ratio", "pixel_blend_fraction", "tail_drop_fraction",
                     "beta_start", "beta_end"):
            if name in data:
                kwargs[name] = float(data[name])
        for name in ("pfb_blocks", "am_blocks"):
            if name in data:
                lo, hi = data[name]
                kwargs[name] = (int(lo), int(hi))
        if "am_words" in data:
            kwargs["am_words"] = tuple(str(w) for w in data["am_words"])
        return replace(base, **kwargs)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "steps": self.steps,
            "encode_ratio": self.encode_ratio,
            "pfb_blocks": list(self.pfb_blocks),
            "am_blocks": list(self.am_blocks),
            "pixel_blend_fraction": self.pixel_blend_fraction,
            "tail_drop_fraction": self.tail_drop_fraction,
            "am_words": list(self.am_words),
            "seed": self.seed,
            "timesteps_total": self.timesteps_total,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
        }


@dataclass(frozen=True)
class EditRequest:
    image: np.ndarray        # (C, H, W) float32 in [-1, 1]
    mask: np.ndarray         # (H, W) binary
    source_prompt: str
    target_prompt: str
    config: EditConfig


@dataclass(frozen=True)
class ValidationIssue:
    field: str
    code: str
    message: str

    def to_dict(self) -> dict:
        return {"field": self.field, "code": self.code, "message": self.message}


class ValidationFailure(MaskdiffError):
    """Raised when a request fails validation; carries the full report."""

    def __init__(self, issues: list[ValidationIssue]):
        super().__init__("; ".join(i.message for i in issues))
        self.issues = issues

    def report(self) -> dict:
        return {"error": "validation", "issues": [i.to_dict() for i in self.issues]}


def validate_config(cfg: EditConfig, target_prompt: str | None = None) -> list[ValidationIssue]:
    """Every violated invariant of an edit configuration, empty when ok."""
    issues: list[ValidationIssue] = []

    def bad(fld, code, msg):
        issues.append(ValidationIssue(fld, code, msg))

    if cfg.mode not in MODES:
        bad("mode", "mode", f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.steps < 2:
        bad("steps", "range", f"steps must be >= 2, got {cfg.steps}")
    if not (0.0 < cfg.encode_ratio <= 1.0):
        bad("encode_ratio", "range", f"encode_ratio must be in (0, 1], got {cfg.encode_ratio}")
    elif cfg.steps >= 2 and int(np.floor(cfg.encode_ratio * cfg.steps)) < 1:
        bad("encode_ratio", "range", "encode_ratio leaves no encode step")
    for name, frac in (("pixel_blend_fraction", cfg.pixel_blend_fraction),
                       ("tail_drop_fraction", cfg.tail_drop_fraction)):
        if not (0.0 <= frac <= 1.0):
            bad(name, "range", f"{name} must be in [0, 1], got {frac}")
    for name, rng in (("pfb_blocks", cfg.pfb_blocks), ("am_blocks", cfg.am_blocks)):
        lo, hi = rng
        if not (BLOCK_MIN <= lo <= hi <= BLOCK_MAX):
            bad(name, "range", f"{name} must satisfy {BLOCK_MIN} <= lo <= hi <= {BLOCK_MAX}, got {rng}")
    if cfg.timesteps_total < 2:
        bad("timesteps_total", "range", f"timesteps_total must be >= 2, got {cfg.timesteps_total}")
    elif cfg.steps > cfg.timesteps_total:
        bad("steps", "range", f"steps {cfg.steps} exceed timesteps_total {cfg.timesteps_total}")
    if not (0.0 < cfg.beta_start <= cfg.beta_end < 1.0):
        bad("beta_start", "range",
            f"need 0 < beta_start <= beta_end < 1, got {cfg.beta_start}, {cfg.beta_end}")
    if target_prompt is not None:
        try:
            prompt_words = set(normalize_words(target_prompt))
        except Exception:
            prompt_words = set()
        for word in cfg.am_words:
            norm = normalize_words(word)
            if len(norm) != 1 or norm[0] not in prompt_words:
                bad("am_words", "lookup",
                    f"attention-mask word {word!r} does not occur in the target prompt")
    return issues


def validate_request(req: EditRequest) -> list[ValidationIssue]:
    issues: list[ValidationIssue] = []
    if req.image.ndim != 3:
        issues.append(ValidationIssue("image", "image_shape",
                                      f"image must be (C, H, W), got {req.image.shape}"))
    if req.mask.ndim != 2:
        issues.append(ValidationIssue("mask", "mask_shape",
                                      f"mask must be (H, W), got {req.mask.shape}"))
    if req.image.ndim == 3 and req.mask.ndim == 2 and req.mask.shape != req.image.shape[1:]:
        issues.append(ValidationIssue("mask", "mask_shape",
                                      f"mask {req.mask.shape} does not match image {req.image.shape[1:]}"))
    if req.mask.ndim == 2 and ((req.mask != 0.0) & (req.mask != 1.0)).any():
        issues.append(ValidationIssue("mask", "mask_binary", "mask must be strictly binary"))
    for fld, prompt in (("source_prompt", req.source_prompt), ("target_prompt", req.target_prompt)):
        if not normalize_words(prompt):
            issues.append(ValidationIssue(fld, "empty_prompt", f"{fld} contains no words"))
    issues.extend(validate_config(req.config, req.target_prompt))
    return issues


@dataclass
class StepTrace:
    t: int
    t_prev: int
    forwards: int
    pfb_active: bool
    am_active: bool
    pixel_blended: bool


@dataclass
class EditTrace:
    encode_forwards: int = 0
    steps: list[StepTrace] = field(default_factory=list)


def text_stream_seed(seed: int) -> int:
    return derive_seed(seed, "text")


def noise_stream_seed(seed: int) -> int:
    return derive_seed(seed, "noise")


def prompt_for(cfg: EditConfig, prompt: str, d_text: int) -> PromptEmbedding:
    return encode_prompt(prompt, text_stream_seed(cfg.seed), d_text=d_text)


def _attention_spec(req: EditRequest) -> AttentionMaskSpec | None:
    cfg = req.config
    if not cfg.am_words:
        return None
    tokens: set[int] = set()
    for word in cfg.am_words:
        try:
            tokens.update(word_token_indices(req.target_prompt, word))
        except WordNotFoundError:
            raise ValidationFailure([ValidationIssue(
                "am_words", "lookup",
                f"attention-mask word {word!r} does not occur in the target prompt")])
    lo, hi = cfg.am_blocks
    return AttentionMaskSpec(masks={k: req.mask for k in sorted(tokens)},
                             blocks=frozenset(range(lo, hi + 1)))


def edit_traced(req: EditRequest, model: UNet) -> tuple[np.ndarray, EditTrace]:
    """Run the edit and report per-step instrumentation."""
    issues = validate_request(req)
    if issues:
        raise ValidationFailure(issues)
    cfg = req.config
    s = make_schedule(cfg.timesteps_total, cfg.beta_start, cfg.beta_end)
    grid = timestep_grid(s.T, cfg.steps)
    image = req.image.astype(np.float32)
    mask = req.mask.astype(np.float32)

    cond_src = prompt_for(cfg, req.source_prompt, model.cfg.d_text)
    cond_tgt = prompt_for(cfg, req.target_prompt, model.cfg.d_text)
    am_spec = _attention_spec(req)

    depth = int(np.floor(cfg.encode_ratio * cfg.steps))
    enc_plan = TimestepPlan(timesteps=grid[: depth + 1], direction="encode",
                            encode_ratio=cfg.encode_ratio)
    levels = dict(ddim_encode_loop(model, image, cond_src, enc_plan, s))
    trace = EditTrace(encode_forwards=depth)

    _, img_h, img_w = image.shape
    sizes = model.cfg.resolutions(img_h, img_w)
    pyramid = build_mask_pyramid(mask, set(sizes.values()))

    lo, hi = cfg.pfb_blocks
    pfb_set = frozenset(range(lo, hi + 1))
    tail_steps = int(np.floor(cfg.tail_drop_fraction * cfg.steps))
    blend_limit = cfg.pixel_blend_fraction * cfg.steps

    # float64 loop state, like ddim_sample_loop; levels and output are float32
    if cfg.encode_ratio == 1.0:
        x = Rng(noise_stream_seed(cfg.seed)).fill_gaussian(image.shape).astype(np.float64)
    else:
        x = levels[grid[depth]].astype(np.float64)

    for j in range(depth, 0, -1):
        t, t_prev = grid[j], grid[j - 1]
        step_index = cfg.steps - j  # 0 at the top of the full plan
        in_tail = j <= tail_steps
        if in_tail:
            eps, _ = model.forward(x, t, cond_tgt)
            forwards = 1
        else:
            _, taps = model.forward(levels[t], t, cond_src, taps_wanted=pfb_set)
            eps, _ = model.forward(x, t, cond_tgt, am=am_spec,
                                   inject=taps, inject_masks=pyramid)
            forwards = 2
        x = ddim_step(x, eps, t, t_prev, s)
        blended = step_index < blend_limit
        if blended:
            x = blend_pixels(levels[t_prev], x, mask)
        trace.steps.append(StepTrace(
            t=t, t_prev=t_prev, forwards=forwards,
            pfb_active=not in_tail, am_active=(am_spec is not None and not in_tail),
            pixel_blended=blended,
        ))
    return x.astype(np.float32), trace


def edit(req: EditRequest, model: UNet) -> np.ndarray:
    return edit_traced(req, model)[0]


def reconstruct(image: np.ndarray, prompt: str, steps: int, model: UNet,
                seed: int = 0, timesteps_total: int = 1000,
                beta_start: float = 1e-4, beta_end: float = 0.02) -> np.ndarray:
    """Encode to the top of the plan, then decode back down."""
    s = make_schedule(timesteps_total, beta_start, beta_end)
    grid = timestep_grid(s.T, steps)
    cond = encode_prompt(prompt, text_stream_seed(seed), d_text=model.cfg.d_text)
    enc = TimestepPlan(timesteps=grid, direction="encode")
    levels = ddim_encode_loop(model, image.astype(np.float32), cond, enc, s)
    top = levels[-1][1]
    dec = TimestepPlan(timesteps=tuple(reversed(grid)), direction="decode")
    return ddim_sample_loop(model, top, cond, dec, s)
