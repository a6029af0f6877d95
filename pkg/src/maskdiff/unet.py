"""Toy noise-prediction network.

A 13-block U-shaped network, each block a residual block followed by a
transformer block with cross-attention over the prompt embedding. Blocks
are indexed 1..13 in forward order: encoder 1-5 (resolution halves at the
entry of blocks 3 and 5), bottleneck 6-7, decoder 8-13 (resolution doubles
at the entry of blocks 9 and 11) with skip connections mirroring the
encoder.

Three hooks make the network editable:
  * feature taps - the output of any transformer block can be recorded;
  * feature injection - a recorded map from another pass can be blended
    into the same block's output through a binary mask before the next
    block runs;
  * attention masking - designated prompt tokens can be restricted to a
    spatial region; outside it their attention weight is exactly zero.

Weights are plain float32 arrays filled from per-tensor seeded streams, so
the network is frozen and bit-reproducible by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blend import MaskPyramid, blend_features
from .errors import ConfigError, DimensionError, InjectionError
from .rng import Rng, derive_seed
from .tensor import as_f32, conv2d, gelu, layer_norm, matmul, resize_nearest, silu, softmax_lastdim
from .textcond import PromptEmbedding

BLOCK_COUNT = 13


@dataclass(frozen=True)
class BlockSpec:
    index: int
    div: int                 # resolution divisor at which the block runs
    resample: str            # "none" | "down" | "up"
    c_resample_in: int       # channels entering the resample conv (if any)
    c_main: int              # channels after resample, before skip concat
    skip_src: int | None     # block index supplying the skip (0 = stem)
    c_out: int


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 3
    base_channels: int = 32
    heads: int = 2
    d_text: int = 64
    time_dim: int = 128

    def block_specs(self) -> tuple[BlockSpec, ...]:
        b = self.base_channels
        rows = [
            # index, div, resample, c_resample_in, c_main, skip_src, c_out
            (1, 1, "none", 0, b, None, b),
            (2, 1, "none", 0, b, None, b),
            (3, 2, "down", b, 2 * b, None, 2 * b),
            (4, 2, "none", 0, 2 * b, None, 2 * b),
            (5, 4, "down", 2 * b, 2 * b, None, 2 * b),
            (6, 4, "none", 0, 2 * b, None, 2 * b),
            (7, 4, "none", 0, 2 * b, None, 2 * b),
            (8, 4, "none", 0, 2 * b, 5, 2 * b),
            (9, 2, "up", 2 * b, 2 * b, 4, 2 * b),
            (10, 2, "none", 0, 2 * b, 3, 2 * b),
            (11, 1, "up", 2 * b, b, 2, b),
            (12, 1, "none", 0, b, 1, b),
            (13, 1, "none", 0, b, 0, b),
        ]
        return tuple(BlockSpec(*row) for row in rows)

    def skip_channels(self, src: int) -> int:
        b = self.base_channels
        return b if src in (0, 1, 2) else 2 * b

    def resolutions(self, h: int, w: int) -> dict[int, tuple[int, int]]:
        """Spatial size per divisor, following the ceil rule of stride-2 convs."""
        h2, w2 = -(-h // 2), -(-w // 2)
        return {1: (h, w), 2: (h2, w2), 4: (-(-h2 // 2), -(-w2 // 2))}

    def manifest(self) -> dict[str, tuple[tuple[int, ...], str]]:
        """Every weight tensor: name -> (shape, init mode)."""
        names: dict[str, tuple[tuple[int, ...], str]] = {}

        def lin(prefix: str, out_dim: int, in_dim: int):
            names[f"{prefix}.w"] = ((out_dim, in_dim), "stream")
            names[f"{prefix}.b"] = ((out_dim,), "zeros")

        def conv(prefix: str, out_c: int, in_c: int):
            names[f"{prefix}.w"] = ((out_c, in_c, 3, 3), "stream")
            names[f"{prefix}.b"] = ((out_c,), "zeros")

        def norm(prefix: str, dim: int):
            names[f"{prefix}.g"] = ((dim,), "ones")
            names[f"{prefix}.s"] = ((dim,), "zeros")

        lin("time.fc1", self.time_dim, self.time_dim)
        lin("time.fc2", self.time_dim, self.time_dim)
        conv("stem", self.base_channels, self.in_channels)
        for spec in self.block_specs():
            p = f"b{spec.index}"
            if spec.resample == "down":
                conv(f"{p}.down", spec.c_main, spec.c_resample_in)
            elif spec.resample == "up":
                conv(f"{p}.up", spec.c_main, spec.c_resample_in)
            res_in = spec.c_main + (self.skip_channels(spec.skip_src) if spec.skip_src is not None else 0)
            norm(f"{p}.res.norm1", res_in)
            conv(f"{p}.res.conv1", spec.c_out, res_in)
            lin(f"{p}.res.temb", spec.c_out, self.time_dim)
            norm(f"{p}.res.norm2", spec.c_out)
            conv(f"{p}.res.conv2", spec.c_out, spec.c_out)
            if res_in != spec.c_out:
                conv(f"{p}.res.skip", spec.c_out, res_in)
            c = spec.c_out
            norm(f"{p}.attn.norm", c)
            lin(f"{p}.attn.q", c, c)
            lin(f"{p}.attn.k", c, self.d_text)
            lin(f"{p}.attn.v", c, self.d_text)
            lin(f"{p}.attn.o", c, c)
            norm(f"{p}.mlp.norm", c)
            lin(f"{p}.mlp.fc1", 4 * c, c)
            lin(f"{p}.mlp.fc2", c, 4 * c)
        norm("head.norm", self.base_channels)
        conv("head", self.in_channels, self.base_channels)
        return names


class Weights:
    """Immutable named tensor map checked against a config's manifest."""

    def __init__(self, cfg: UNetConfig, tensors: dict[str, np.ndarray]):
        manifest = cfg.manifest()
        missing = sorted(set(manifest) - set(tensors))
        extra = sorted(set(tensors) - set(manifest))
        if missing or extra:
            raise ConfigError(f"weights do not match manifest: missing={missing[:5]} extra={extra[:5]}")
        for name, (shape, _) in manifest.items():
            t = tensors[name]
            if tuple(t.shape) != shape:
                raise ConfigError(f"tensor {name} has shape {t.shape}, manifest says {shape}")
        self.cfg = cfg
        self._tensors = {k: as_f32(v) for k, v in tensors.items()}
        for t in self._tensors.values():
            t.setflags(write=False)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def names(self) -> list[str]:
        return sorted(self._tensors)

    def as_dict(self) -> dict[str, np.ndarray]:
        return dict(self._tensors)


def _fan_in(shape: tuple[int, ...]) -> int:
    if len(shape) == 4:  # conv (O, C, kH, kW)
        return shape[1] * shape[2] * shape[3]
    if len(shape) == 2:  # linear (out, in)
        return shape[1]
    return shape[0]


def init_weights(cfg: UNetConfig, seed: int) -> Weights:
    """Fill every manifest tensor from its own (seed, name)-keyed stream."""
    tensors: dict[str, np.ndarray] = {}
    for name, (shape, mode) in cfg.manifest().items():
        if mode == "stream":
            rng = Rng(derive_seed(seed, name))
            tensors[name] = rng.fill_gaussian(shape, scale=1.0 / np.sqrt(_fan_in(shape)))
        elif mode == "zeros":
            tensors[name] = np.zeros(shape, dtype=np.float32)
        elif mode == "ones":
            tensors[name] = np.ones(shape, dtype=np.float32)
        else:  # pragma: no cover
            raise ConfigError(f"unknown init mode {mode}")
    return Weights(cfg, tensors)


@dataclass(frozen=True)
class AttentionMaskSpec:
    """Region restriction per prompt token: token index -> binary base mask.

    Tokens without an entry are unrestricted. `blocks` lists the block
    indices whose cross-attention applies the restriction.
    """

    masks: dict[int, np.ndarray]
    blocks: frozenset[int]

    def __post_init__(self):
        checked = {}
        for k, m in self.masks.items():
            m = as_f32(m)
            if m.ndim != 2:
                raise DimensionError(f"mask for token {k} must be 2-D, got {m.shape}")
            if ((m != 0.0) & (m != 1.0)).any():
                raise DimensionError(f"mask for token {k} is not binary")
            checked[int(k)] = m
        object.__setattr__(self, "masks", checked)
        object.__setattr__(self, "blocks", frozenset(int(b) for b in self.blocks))


def time_features(t: int, dim: int) -> np.ndarray:
    """Sinusoidal features at geometric wavelengths from 1 to 10000."""
    if dim < 2 or dim % 2:
        raise ConfigError(f"time feature dim must be even and >= 2, got {dim}")
    half = dim // 2
    exponents = np.arange(half, dtype=np.float64) / max(half - 1, 1)
    freqs = 10000.0 ** (-exponents)
    angles = float(t) * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)]).astype(np.float32)


def attention_core(q: np.ndarray, k: np.ndarray, v: np.ndarray, heads: int,
                   allowed: np.ndarray | None = None) -> np.ndarray:
    """Multi-head scaled dot-product attention, before output projection.

    q: (P, C); k, v: (L, C); allowed: optional binary (P, L) shared by all
    heads. Heads are concatenated back to (P, C).
    """
    p, c = q.shape
    if c % heads:
        raise DimensionError(f"{c} channels do not split into {heads} heads")
    n = c // heads
    scale = np.float32(1.0 / np.sqrt(n))
    out = np.empty((p, c), dtype=np.float32)
    for h in range(heads):
        sl = slice(h * n, (h + 1) * n)
        scores = matmul(q[:, sl], k[:, sl].T) * scale
        probs = softmax_lastdim(scores, allowed)
        out[:, sl] = matmul(probs, v[:, sl])
    return out


class UNet:
    """Frozen-weight denoiser exposing taps, injection, and masking hooks."""

    def __init__(self, cfg: UNetConfig, weights: Weights):
        if weights.cfg != cfg:
            raise ConfigError("weights were built for a different config")
        self.cfg = cfg
        self.w = weights
        self.forward_count = 0

    # --- small layer helpers -------------------------------------------

    def _linear(self, name: str, x: np.ndarray) -> np.ndarray:
        return matmul(x, self.w[f"{name}.w"].T) + self.w[f"{name}.b"]

    def _norm_channels(self, name: str, x: np.ndarray) -> np.ndarray:
        """Layer norm over the channel axis of a (C, H, W) map."""
        c, h, wd = x.shape
        flat = x.transpose(1, 2, 0).reshape(h * wd, c)
        out = layer_norm(flat, self.w[f"{name}.g"], self.w[f"{name}.s"])
        return out.reshape(h, wd, c).transpose(2, 0, 1)

    def _time_mlp(self, t: int) -> np.ndarray:
        f = time_features(t, self.cfg.time_dim)
        h = silu(self._linear("time.fc1", f[None, :]))
        return self._linear("time.fc2", h)[0]

    def _res_block(self, prefix: str, x: np.ndarray, temb: np.ndarray, c_out: int) -> np.ndarray:
        h = conv2d(silu(self._norm_channels(f"{prefix}.norm1", x)),
                   self.w[f"{prefix}.conv1.w"], self.w[f"{prefix}.conv1.b"])
        shift = self._linear(f"{prefix}.temb", silu(temb)[None, :])[0]
        h = h + shift[:, None, None]
        h = conv2d(silu(self._norm_channels(f"{prefix}.norm2", h)),
                   self.w[f"{prefix}.conv2.w"], self.w[f"{prefix}.conv2.b"])
        if x.shape[0] != c_out:
            x = conv2d(x, self.w[f"{prefix}.skip.w"], self.w[f"{prefix}.skip.b"])
        return h + x

    def masked_cross_attention(self, x_feat: np.ndarray, cond: PromptEmbedding,
                               spec: AttentionMaskSpec | None, block: int,
                               hw: tuple[int, int]) -> np.ndarray:
        """Cross-attention of flattened features (HW, C) over the prompt."""
        p = f"b{block}.attn"
        xa = layer_norm(x_feat, self.w[f"{p}.norm.g"], self.w[f"{p}.norm.s"])
        q = self._linear(f"{p}.q", xa)
        k = self._linear(f"{p}.k", cond.embeddings)
        v = self._linear(f"{p}.v", cond.embeddings)
        allowed = None
        if spec is not None and spec.masks:
            h, wd = hw
            allowed = np.ones((h * wd, cond.embeddings.shape[0]), dtype=np.float32)
            for token, base in spec.masks.items():
                if token >= cond.embeddings.shape[0]:
                    raise DimensionError(f"token index {token} outside embedding length")
                region = base if base.shape == (h, wd) else resize_nearest(base, h, wd)
                allowed[:, token] = region.reshape(-1)
        att = attention_core(q, k, v, self.cfg.heads, allowed)
        return self._linear(f"{p}.o", att)

    def _transformer_block(self, block: int, x: np.ndarray, cond: PromptEmbedding,
                           spec: AttentionMaskSpec | None) -> np.ndarray:
        c, h, wd = x.shape
        flat = x.transpose(1, 2, 0).reshape(h * wd, c)
        flat = flat + self.masked_cross_attention(flat, cond, spec, block, (h, wd))
        p = f"b{block}.mlp"
        normed = layer_norm(flat, self.w[f"{p}.norm.g"], self.w[f"{p}.norm.s"])
        flat = flat + self._linear(f"{p}.fc2", gelu(self._linear(f"{p}.fc1", normed)))
        return flat.reshape(h, wd, c).transpose(2, 0, 1)

    # --- full pass ------------------------------------------------------

    def forward(self, x_t: np.ndarray, t: int, cond: PromptEmbedding,
                am: AttentionMaskSpec | None = None,
                inject: dict[int, np.ndarray] | None = None,
                inject_masks: MaskPyramid | None = None,
                taps_wanted=frozenset()) -> tuple[np.ndarray, dict[int, np.ndarray]]:
        x_t = as_f32(x_t)
        if x_t.ndim != 3 or x_t.shape[0] != self.cfg.in_channels:
            raise DimensionError(f"expected ({self.cfg.in_channels}, H, W) latent, got {x_t.shape}")
        if inject and inject_masks is None:
            raise InjectionError("feature injection requires the mask pyramid")
        self.forward_count += 1
        taps: dict[int, np.ndarray] = {}
        temb = self._time_mlp(t)
        _, img_h, img_w = x_t.shape
        sizes = self.cfg.resolutions(img_h, img_w)

        h = conv2d(x_t, self.w["stem.w"], self.w["stem.b"])
        saved = {0: h}
        for spec in self.cfg.block_specs():
            p = f"b{spec.index}"
            if spec.resample == "down":
                h = conv2d(h, self.w[f"{p}.down.w"], self.w[f"{p}.down.b"], stride=2)
            elif spec.resample == "up":
                th, tw = sizes[spec.div]
                h = conv2d(resize_nearest(h, th, tw), self.w[f"{p}.up.w"], self.w[f"{p}.up.b"])
            if spec.skip_src is not None:
                h = np.concatenate([h, saved[spec.skip_src]], axis=0)
            h = self._res_block(f"{p}.res", h, temb, spec.c_out)
            block_am = am if (am is not None and spec.index in am.blocks) else None
            h = self._transformer_block(spec.index, h, cond, block_am)
            if spec.index in taps_wanted:
                taps[spec.index] = h
            if inject and spec.index in inject:
                src = inject[spec.index]
                if src.shape != h.shape:
                    raise InjectionError(
                        f"injected features for block {spec.index} have shape {src.shape}, expected {h.shape}")
                h = blend_features(src, h, inject_masks.at(h.shape[1], h.shape[2]))
            if spec.index <= 5:
                saved[spec.index] = h

        out = silu(self._norm_channels("head.norm", h))
        return conv2d(out, self.w["head.w"], self.w["head.b"]), taps

    def __call__(self, x, t, cond) -> np.ndarray:
        eps, _ = self.forward(x, t, cond)
        return eps
