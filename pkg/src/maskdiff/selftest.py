"""Oracle-based health checks behind the `selftest` CLI command.

Each check compares the sampler against something independently computable:
closed-form mixture statistics, the algebraic encode/decode inverse, and
the telescoped zero-model rescale. They run in a few seconds and need no
trained weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import GaussianMixture, OracleDenoiser, gmm_marginal, marginal_moments
from .rng import Rng
from .schedule import (
    TimestepPlan,
    ddim_encode_loop,
    ddim_sample_loop,
    decode_plan,
    encode_plan,
    make_schedule,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def mixture_from_dict(data: dict) -> GaussianMixture:
    return GaussianMixture(
        weights=tuple(float(w) for w in data["weights"]),
        means=np.asarray(data["means"], dtype=np.float64),
        variances=tuple(float(v) for v in data["variances"]),
    )


def check_sampler_marginals(mixture: GaussianMixture | None = None, runs: int = 10_000,
                            steps: int = 50, seed: int = 7) -> CheckResult:
    """DDIM with the analytic denoiser must reproduce the data statistics."""
    if mixture is None:
        mixture = GaussianMixture.single([0.0] * 8, 1.0)
    s = make_schedule(1000, 1e-4, 0.02)
    model = OracleDenoiser(mixture, s)
    top = gmm_marginal(s.T, s, mixture)
    top_mean, top_var = marginal_moments(top)
    rng = Rng(seed)
    xT = (rng.gaussians(runs * mixture.dim).reshape(runs, mixture.dim)
          * np.sqrt(top_var) + top_mean).astype(np.float32)
    x0 = ddim_sample_loop(model, xT, None, decode_plan(s, steps), s)
    want_mean, want_var = marginal_moments(mixture)
    mean_err = float(np.max(np.abs(x0.mean(axis=0) - want_mean)))
    var_err = float(np.max(np.abs(x0.var(axis=0) - want_var)))
    ok = mean_err <= 0.05 and var_err <= 0.10
    return CheckResult("sampler-marginals", ok,
                       f"mean err {mean_err:.4f} (<=0.05), var err {var_err:.4f} (<=0.10)")


def check_constant_model_inversion(steps: int = 25, seed: int = 8) -> CheckResult:
    """encode then decode with a frozen eps must return the input exactly."""
    s = make_schedule(1000, 1e-4, 0.02)
    model = lambda x, t, cond: np.full_like(x, 0.3)
    x0 = Rng(seed).fill_gaussian((64,)) * 0.5
    levels = ddim_encode_loop(model, x0, None, encode_plan(s, steps), s)
    back = ddim_sample_loop(model, levels[-1][1], None, decode_plan(s, steps), s)
    err = float(np.max(np.abs(back - x0)))
    return CheckResult("constant-model-inversion", err <= 1e-5, f"L-inf err {err:.2e} (<=1e-5)")


def check_zero_model_telescope(seed: int = 9) -> CheckResult:
    """With eps == 0 the decode loop is a pure rescale by 1/sqrt(ab_T)."""
    s = make_schedule(1000, 1e-4, 0.02)
    model = lambda x, t, cond: np.zeros_like(x)
    xT = Rng(seed).fill_gaussian((32,))
    out = ddim_sample_loop(model, xT, None, decode_plan(s, 50), s)
    want = xT / np.float32(np.sqrt(s.alpha_bar(s.T)))
    err = float(np.max(np.abs(out - want) / np.maximum(np.abs(want), 1e-6)))
    return CheckResult("zero-model-telescope", err <= 1e-5, f"rel err {err:.2e} (<=1e-5)")


def run_selftest(mixture: GaussianMixture | None = None) -> list[CheckResult]:
    return [
        check_sampler_marginals(mixture),
        check_constant_model_inversion(),
        check_zero_model_telescope(),
    ]
