"""Noise schedules and deterministic DDIM stepping.

A schedule holds the per-step noise variances beta_t and their cumulative
products alpha_bar_t, with alpha_bar[0] == 1 so that t == 0 is the clean
image. The DDIM update is implemented as the exact Euler step in rescaled
coordinates u = x / sqrt(alpha_bar), tau = sqrt(1/alpha_bar - 1):

    x_prev = sqrt(ab_prev/ab_t) * x + sqrt(ab_prev) * (tau_prev - tau_t) * eps

which is algebraically the standard DDIM update and makes the encode step
the exact inverse of the decode step for a frozen noise prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionError

# A denoiser is anything callable as model(x, t, cond) -> eps with eps the
# same shape as x. cond may be None for unconditional models.
Denoiser = Callable


@dataclass(frozen=True)
class NoiseSchedule:
    """Tables beta_t, alpha_t (1..T) and alpha_bar_t (0..T, alpha_bar[0]=1)."""

    T: int
    betas: np.ndarray       # shape (T,), betas[t-1] is beta_t
    alphas: np.ndarray      # shape (T,)
    alpha_bars: np.ndarray  # shape (T+1,), alpha_bars[0] == 1.0

    def alpha_bar(self, t: int) -> float:
        if not 0 <= t <= self.T:
            raise ConfigError(f"timestep {t} outside [0, {self.T}]")
        return float(self.alpha_bars[t])

    def tau(self, t: int) -> float:
        """Rescaled time sqrt(1/alpha_bar_t - 1); 0 at t=0."""
        return float(np.sqrt(1.0 / self.alpha_bar(t) - 1.0))


def make_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02,
                  kind: str = "linear") -> NoiseSchedule:
    if T < 2:
        raise ConfigError(f"schedule needs T >= 2, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    if kind != "linear":
        raise ConfigError(f"unknown schedule kind {kind!r}")
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alphas = 1.0 - betas
    alpha_bars = np.concatenate([[1.0], np.cumprod(alphas)])
    return NoiseSchedule(T=T, betas=betas, alphas=alphas, alpha_bars=alpha_bars)


@dataclass(frozen=True)
class RescaledState:
    """The ODE-coordinate view of a latent: u = x/sqrt(ab_t), tau(t).

    In these coordinates the deterministic sampler is a plain Euler walk
    du = eps * dtau, which is why encode and decode are mutual inverses
    for a frozen eps.
    """

    u: np.ndarray
    tau: float


def to_rescaled(x: np.ndarray, t: int, s: NoiseSchedule) -> RescaledState:
    ab = s.alpha_bar(t)
    return RescaledState(u=np.asarray(x, np.float64) / np.sqrt(ab), tau=s.tau(t))


def from_rescaled(state: RescaledState, t: int, s: NoiseSchedule) -> np.ndarray:
    ab = s.alpha_bar(t)
    if abs(s.tau(t) - state.tau) > 1e-9 * max(1.0, state.tau):
        raise ConfigError(f"state at tau={state.tau} does not belong to timestep {t}")
    return (state.u * np.sqrt(ab)).astype(np.float32)


@dataclass(frozen=True)
class TimestepPlan:
    """Monotone timestep grid walked by the sampling/encoding loops.

    decode plans are strictly decreasing and end at 0; encode plans are
    strictly increasing and start at 0. steps() counts transitions, i.e.
    model evaluations.
    """

    timesteps: tuple[int, ...]
    direction: str  # "encode" | "decode"
    encode_ratio: float = 1.0

    def __post_init__(self):
        ts = self.timesteps
        if len(ts) < 2:
            raise ConfigError("a plan needs at least two timesteps")
        if self.direction == "decode":
            ok = all(a > b for a, b in zip(ts, ts[1:])) and ts[-1] == 0
        elif self.direction == "encode":
            ok = all(a < b for a, b in zip(ts, ts[1:])) and ts[0] == 0
        else:
            raise ConfigError(f"unknown plan direction {self.direction!r}")
        if not ok:
            raise ConfigError(f"timesteps {ts} inconsistent with direction {self.direction!r}")
        if not (0.0 < self.encode_ratio <= 1.0):
            raise ConfigError(f"encode_ratio must be in (0, 1], got {self.encode_ratio}")

    def steps(self) -> int:
        return len(self.timesteps) - 1


def timestep_grid(T: int, steps: int) -> tuple[int, ...]:
    """steps+1 near-uniform grid points from 0 to T inclusive.

    Rounding ties resolve upward so the top of the grid always lands on T.
    """
    if steps < 1:
        raise ConfigError(f"need at least 1 step, got {steps}")
    if steps > T:
        raise ConfigError(f"cannot take {steps} steps on a {T}-step schedule")
    grid = np.round(np.linspace(0.0, float(T), steps + 1)).astype(int)
    return tuple(int(t) for t in grid)


def decode_plan(s: NoiseSchedule, steps: int) -> TimestepPlan:
    return TimestepPlan(timesteps=tuple(reversed(timestep_grid(s.T, steps))), direction="decode")


def encode_plan(s: NoiseSchedule, steps: int, encode_ratio: float = 1.0) -> TimestepPlan:
    """Ascending plan covering the first floor(ratio * steps) transitions."""
    if not (0.0 < encode_ratio <= 1.0):
        raise ConfigError(f"encode_ratio must be in (0, 1], got {encode_ratio}")
    grid = timestep_grid(s.T, steps)
    depth = int(np.floor(encode_ratio * steps))
    if depth < 1:
        raise ConfigError(f"encode_ratio {encode_ratio} leaves no encode step at {steps} steps")
    return TimestepPlan(timesteps=grid[: depth + 1], direction="encode", encode_ratio=encode_ratio)


def _out_dtype(x: np.ndarray):
    # latents are float32 at module boundaries; loops may carry float64
    # state internally to keep encode/decode round trips tight
    return x.dtype if x.dtype == np.float64 else np.float32


def q_sample(x0: np.ndarray, t: int, eps: np.ndarray, s: NoiseSchedule) -> np.ndarray:
    """Closed-form forward noising sqrt(ab)*x0 + sqrt(1-ab)*eps."""
    if x0.shape != eps.shape:
        raise DimensionError(f"x0 {x0.shape} and eps {eps.shape} differ")
    ab = s.alpha_bar(t)
    out = np.sqrt(ab) * np.asarray(x0, np.float64) + np.sqrt(1.0 - ab) * np.asarray(eps, np.float64)
    return out.astype(_out_dtype(x0))


def ddim_step(x_t: np.ndarray, eps: np.ndarray, t: int, t_prev: int, s: NoiseSchedule) -> np.ndarray:
    """One deterministic denoising step t -> t_prev (t_prev < t)."""
    if t_prev >= t:
        raise ConfigError(f"decode step needs t_prev < t, got {t} -> {t_prev}")
    ab_t, ab_p = s.alpha_bar(t), s.alpha_bar(t_prev)
    scale = np.sqrt(ab_p / ab_t)
    drift = np.sqrt(ab_p) * (s.tau(t_prev) - s.tau(t))
    out = scale * np.asarray(x_t, np.float64) + drift * np.asarray(eps, np.float64)
    return out.astype(_out_dtype(x_t))


def ddim_encode_step(x_t: np.ndarray, eps: np.ndarray, t: int, t_next: int, s: NoiseSchedule) -> np.ndarray:
    """One noising step t -> t_next (t_next > t); inverse of ddim_step."""
    if t_next <= t:
        raise ConfigError(f"encode step needs t_next > t, got {t} -> {t_next}")
    ab_t, ab_n = s.alpha_bar(t), s.alpha_bar(t_next)
    scale = np.sqrt(ab_n / ab_t)
    drift = np.sqrt(ab_n) * (s.tau(t_next) - s.tau(t))
    out = scale * np.asarray(x_t, np.float64) + drift * np.asarray(eps, np.float64)
    return out.astype(_out_dtype(x_t))


def eps_to_mu(x_t: np.ndarray, eps: np.ndarray, t: int, s: NoiseSchedule) -> np.ndarray:
    """Posterior mean (x_t - beta_t/sqrt(1-ab_t) * eps) / sqrt(alpha_t)."""
    if not 1 <= t <= s.T:
        raise ConfigError(f"timestep {t} outside [1, {s.T}]")
    beta = float(s.betas[t - 1])
    alpha = float(s.alphas[t - 1])
    ab = s.alpha_bar(t)
    coef = beta / np.sqrt(1.0 - ab)
    out = (np.asarray(x_t, np.float64) - coef * np.asarray(eps, np.float64)) / np.sqrt(alpha)
    return out.astype(_out_dtype(x_t))


def ddim_sample_loop(model: Denoiser, xT: np.ndarray, cond, plan: TimestepPlan,
                     s: NoiseSchedule) -> np.ndarray:
    """Fold ddim_step over a decode plan, starting from xT at the plan top.

    Loop state is float64 internally (the rescaled coordinate u = x/sqrt(ab)
    magnifies float32 storage error near t = T); the result is float32.
    """
    if plan.direction != "decode":
        raise ConfigError("sampling needs a decode plan")
    x = np.asarray(xT, dtype=np.float64)
    ts = plan.timesteps
    for t, t_prev in zip(ts, ts[1:]):
        eps = model(x, t, cond)
        x = ddim_step(x, eps, t, t_prev, s)
    return x.astype(np.float32)


def ddim_encode_loop(model: Denoiser, x0: np.ndarray, cond, plan: TimestepPlan,
                     s: NoiseSchedule) -> list[tuple[int, np.ndarray]]:
    """Fold ddim_encode_step over an encode plan.

    Returns every level [(0, x0), (t_1, y_1), ..., (t_k, y_k)] as float32;
    the editing pipeline consumes all of them for pixel-level blending.
    """
    if plan.direction != "encode":
        raise ConfigError("encoding needs an encode plan")
    x = np.asarray(x0, dtype=np.float64)
    levels = [(plan.timesteps[0], x.astype(np.float32))]
    ts = plan.timesteps
    for t, t_next in zip(ts, ts[1:]):
        eps = model(x, t, cond)
        x = ddim_encode_step(x, eps, t, t_next, s)
        levels.append((t_next, x.astype(np.float32)))
    return levels
