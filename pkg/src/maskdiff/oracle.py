"""Closed-form noise predictors for isotropic Gaussian mixtures.

For mixture data the optimal noise prediction has a closed form: with
s_k^2 = ab * sigma_k^2 + (1 - ab) the noised marginal is a mixture of
N(sqrt(ab) * mu_k, s_k^2 I), the posterior mean of the clean sample is a
responsibility-weighted combination of per-component ridge estimates, and

    eps*(x, t) = (x - sqrt(ab) * E[x0 | x]) / sqrt(1 - ab).

These serve as drop-in denoisers so the DDIM loops can be checked against
exact statistics without any trained network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class GaussianMixture:
    """Isotropic mixture: weights sum to 1, one variance per component."""

    weights: tuple[float, ...]
    means: np.ndarray        # (K, d)
    variances: tuple[float, ...]

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        if means.ndim != 2:
            raise ConfigError(f"means must be (K, d), got shape {means.shape}")
        object.__setattr__(self, "means", means)
        k = means.shape[0]
        if len(self.weights) != k or len(self.variances) != k:
            raise ConfigError("weights, means, variances must agree on component count")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ConfigError(f"weights sum to {sum(self.weights)}, not 1")
        if any(w < 0 for w in self.weights):
            raise ConfigError("weights must be non-negative")
        if any(v <= 0 for v in self.variances):
            raise ConfigError("variances must be positive")

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @staticmethod
    def single(mean, variance: float) -> "GaussianMixture":
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        return GaussianMixture(weights=(1.0,), means=mean[None, :], variances=(float(variance),))


def gmm_eps(x_t: np.ndarray, t: int, s: NoiseSchedule, g: GaussianMixture) -> np.ndarray:
    """Optimal noise prediction for mixture data; x_t is (..., d)."""
    x = np.asarray(x_t, dtype=np.float64)
    if x.shape[-1] != g.dim:
        raise DimensionError(f"x has dimension {x.shape[-1]}, mixture has {g.dim}")
    ab = s.alpha_bar(t)
    if ab >= 1.0:
        raise ConfigError("eps undefined at t=0 (no noise present)")
    sqrt_ab = np.sqrt(ab)

    k = len(g.weights)
    diffs = x[..., None, :] - sqrt_ab * g.means  # (..., K, d)
    s2 = np.array([ab * v + (1.0 - ab) for v in g.variances])  # (K,)
    # log responsibilities, stabilised by max subtraction
    sq = np.square(diffs).sum(axis=-1)  # (..., K)
    logw = np.log(np.maximum(g.weights, 1e-300))
    logp = logw - 0.5 * g.dim * np.log(2.0 * np.pi * s2) - 0.5 * sq / s2
    logp = logp - logp.max(axis=-1, keepdims=True)
    resp = np.exp(logp)
    resp = resp / resp.sum(axis=-1, keepdims=True)

    # per-component posterior mean of x0
    shrink = (sqrt_ab * np.array(g.variances) / s2)  # (K,)
    post = g.means + shrink[:, None] * diffs  # (..., K, d)
    e_x0 = (resp[..., None] * post).sum(axis=-2)

    eps = (x - sqrt_ab * e_x0) / np.sqrt(1.0 - ab)
    return eps.astype(np.float32)


def gmm_marginal(t: int, s: NoiseSchedule, g: GaussianMixture) -> GaussianMixture:
    """Mixture describing the noised data at time t."""
    ab = s.alpha_bar(t)
    return GaussianMixture(
        weights=g.weights,
        means=np.sqrt(ab) * g.means,
        variances=tuple(ab * v + (1.0 - ab) for v in g.variances),
    )


def marginal_moments(g: GaussianMixture) -> tuple[np.ndarray, np.ndarray]:
    """Overall mean and per-dimension variance of a mixture."""
    w = np.asarray(g.weights)
    mean = (w[:, None] * g.means).sum(axis=0)
    second = (w[:, None] * (np.square(g.means) + np.asarray(g.variances)[:, None])).sum(axis=0)
    return mean, second - np.square(mean)


class OracleDenoiser:
    """Adapter exposing gmm_eps through the model(x, t, cond) protocol.

    Accepts latents of any shape whose last axis is the mixture dimension,
    so batches of vectors sample in one pass.
    """

    def __init__(self, mixture: GaussianMixture, schedule: NoiseSchedule):
        self.mixture = mixture
        self.schedule = schedule

    def __call__(self, x, t, cond=None) -> np.ndarray:
        return gmm_eps(x, t, self.schedule, self.mixture)
