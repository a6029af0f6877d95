"""Deterministic toy text conditioner.

Prompts are lowercased, split on whitespace/punctuation, and hashed into a
fixed vocabulary (FNV-1a 64 mod vocab size, ids 0/1 reserved for pad and
unknown). Embedding rows are drawn per token id from seeded streams, so the
same prompt and seed give a bit-identical embedding matrix on any platform.
The semantics are irrelevant here; only determinism and per-word token
locations matter.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, WordNotFoundError
from .rng import Rng, derive_seed, fnv1a64

PAD_ID = 0
UNK_ID = 1
VOCAB_SIZE = 4096
L_MAX = 16
D_TEXT = 64

_SPLIT = re.compile(r"[^0-9a-z]+")


@dataclass(frozen=True)
class PromptEmbedding:
    """Token ids padded to L_MAX, their embedding rows, and word positions."""

    tokens: tuple[int, ...]
    embeddings: np.ndarray                     # (L_MAX, d_text) float32
    word_spans: dict[str, tuple[int, ...]] = field(default_factory=dict)

    @property
    def length(self) -> int:
        return sum(1 for t in self.tokens if t != PAD_ID)


def normalize_words(prompt: str) -> list[str]:
    return [w for w in _SPLIT.split(prompt.lower()) if w]


def token_id(word: str, vocab_size: int = VOCAB_SIZE) -> int:
    tid = fnv1a64(word.encode("utf-8")) % vocab_size
    # ids 0 and 1 are reserved for pad / unknown
    return tid + 2 if tid < 2 else tid


def tokenize(prompt: str, vocab_size: int = VOCAB_SIZE, l_max: int = L_MAX) -> tuple[int, ...]:
    """Padded id sequence for a prompt; truncates past l_max words."""
    words = normalize_words(prompt)
    if not words:
        raise InputError(f"prompt {prompt!r} contains no words")
    ids = [token_id(w, vocab_size) for w in words[:l_max]]
    return tuple(ids + [PAD_ID] * (l_max - len(ids)))


def embed(tokens: tuple[int, ...], seed: int, d_text: int = D_TEXT) -> np.ndarray:
    """One embedding row per token id, variance 1/d_text, bit-reproducible."""
    rows = np.empty((len(tokens), d_text), dtype=np.float32)
    scale = 1.0 / np.sqrt(d_text)
    cache: dict[int, np.ndarray] = {}
    for i, tid in enumerate(tokens):
        row = cache.get(tid)
        if row is None:
            row = Rng(derive_seed(seed, tid)).fill_gaussian((d_text,), scale=scale)
            cache[tid] = row
        rows[i] = row
    return rows


def word_token_indices(prompt: str, word: str, l_max: int = L_MAX) -> tuple[int, ...]:
    """Positions whose token came from `word` (after normalization)."""
    words = normalize_words(prompt)[:l_max]
    targets = normalize_words(word)
    if len(targets) != 1:
        raise InputError(f"expected a single word, got {word!r}")
    hits = tuple(i for i, w in enumerate(words) if w == targets[0])
    if not hits:
        raise WordNotFoundError(f"word {word!r} does not occur in prompt {prompt!r}")
    return hits


def encode_prompt(prompt: str, seed: int, vocab_size: int = VOCAB_SIZE,
                  l_max: int = L_MAX, d_text: int = D_TEXT) -> PromptEmbedding:
    tokens = tokenize(prompt, vocab_size, l_max)
    words = normalize_words(prompt)[:l_max]
    spans: dict[str, tuple[int, ...]] = {}
    for w in words:
        if w not in spans:
            spans[w] = tuple(i for i, x in enumerate(words) if x == w)
    return PromptEmbedding(tokens=tokens, embeddings=embed(tokens, seed, d_text), word_spans=spans)
