import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskdiff.errors import ConfigError
from maskdiff.rng import Rng
from maskdiff.schedule import (
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
    timestep_grid,
    to_rescaled,
)


@pytest.fixture(scope="module")
def toy():
    """T=4 schedule with betas 0.1..0.4; alpha_bars 1, .9, .72, .504, .3024."""
    return make_schedule(4, 0.1, 0.4)


@pytest.fixture(scope="module")
def default_schedule():
    return make_schedule(1000, 1e-4, 0.02)


class TestMakeSchedule:
    def test_cumulative_product(self, toy):
        np.testing.assert_allclose(toy.betas, [0.1, 0.2, 0.3, 0.4])
        np.testing.assert_allclose(toy.alpha_bars, [1.0, 0.9, 0.72, 0.504, 0.3024])

    def test_constant_beta(self):
        s = make_schedule(5, 0.25, 0.25)
        assert np.array_equal(s.betas, np.full(5, 0.25))

    def test_default_terminal_alpha_bar(self, default_schedule):
        # Regression value computed by this implementation at first run.
        assert default_schedule.alpha_bar(1000) < 0.01
        np.testing.assert_allclose(default_schedule.alpha_bar(1000), 4.0358e-05, rtol=1e-3)

    def test_strictly_decreasing(self, default_schedule):
        assert (np.diff(default_schedule.alpha_bars) < 0).all()

    def test_recurrence(self, default_schedule):
        ab = default_schedule.alpha_bars
        np.testing.assert_allclose(ab[1:], ab[:-1] * default_schedule.alphas, atol=1e-7)

    def test_rejects_bad_params(self):
        with pytest.raises(ConfigError):
            make_schedule(1, 0.1, 0.2)
        with pytest.raises(ConfigError):
            make_schedule(10, 0.0, 0.2)
        with pytest.raises(ConfigError):
            make_schedule(10, 0.3, 0.2)
        with pytest.raises(ConfigError):
            make_schedule(10, 0.1, 1.0)


class TestQSample:
    def test_t0_is_clean(self, toy):
        x0 = np.array([1.5, -2.0], dtype=np.float32)
        eps = np.array([3.0, 3.0], dtype=np.float32)
        assert np.array_equal(q_sample(x0, 0, eps, toy), x0)

    def test_hand_value(self, toy):
        out = q_sample(np.array([1.0], dtype=np.float32), 2, np.array([1.0], dtype=np.float32), toy)
        assert out[0] == pytest.approx(1.377678, abs=1e-5)

    def test_zero_noise(self, toy):
        x0 = np.array([2.0], dtype=np.float32)
        out = q_sample(x0, 3, np.zeros(1, dtype=np.float32), toy)
        assert out[0] == pytest.approx(np.sqrt(0.504) * 2.0, rel=1e-6)

    def test_variance_preserved(self, default_schedule):
        rng = Rng(11)
        x0 = rng.fill_gaussian((20000,))
        eps = rng.fill_gaussian((20000,))
        for t in (1, 250, 500, 999):
            xt = q_sample(x0, t, eps, default_schedule)
            assert abs(xt.var() - 1.0) < 0.05


class TestDdimStep:
    def test_zero_eps_pure_rescale(self, toy):
        x = np.array([1.0], dtype=np.float32)
        out = ddim_step(x, np.zeros(1, dtype=np.float32), 2, 1, toy)
        assert out[0] == pytest.approx(np.sqrt(0.9 / 0.72), rel=1e-6)

    def test_hand_value(self, toy):
        out = ddim_step(np.array([1.0], dtype=np.float32), np.array([1.0], dtype=np.float32), 2, 1, toy)
        assert out[0] == pytest.approx(0.842653, abs=1e-5)

    def test_encode_hand_value(self, toy):
        out = ddim_encode_step(np.array([1.0], dtype=np.float32), np.array([1.0], dtype=np.float32), 1, 2, toy)
        assert out[0] == pytest.approx(1.140732, abs=1e-5)

    def test_order_violations(self, toy):
        x = np.zeros(1, dtype=np.float32)
        with pytest.raises(ConfigError):
            ddim_step(x, x, 1, 2, toy)
        with pytest.raises(ConfigError):
            ddim_encode_step(x, x, 2, 1, toy)

    @given(
        x=st.floats(-3, 3), e=st.floats(-3, 3),
        t=st.integers(1, 3), dt=st.integers(1, 2),
    )
    @settings(max_examples=100, deadline=None)
    def test_mutual_inverse_frozen_eps(self, toy, x, e, t, dt):
        t_hi = min(t + dt, 4)
        xv = np.array([x], dtype=np.float32)
        ev = np.array([e], dtype=np.float32)
        up = ddim_encode_step(xv, ev, t, t_hi, toy)
        back = ddim_step(up, ev, t_hi, t, toy)
        assert abs(back[0] - x) <= 1e-6 * max(1.0, abs(x))


class TestRescaledCoordinates:
    def test_round_trip_invertible(self, toy):
        x = np.array([0.25, -1.5, 2.0], dtype=np.float32)
        for t in range(0, 5):
            back = from_rescaled(to_rescaled(x, t, toy), t, toy)
            np.testing.assert_allclose(back, x, atol=1e-6)

    def test_step_is_euler_in_u(self, toy):
        # x-space ddim_step equals u_prev = u + eps * (tau_prev - tau)
        x = np.array([0.7], dtype=np.float32)
        eps = np.array([0.4], dtype=np.float64)
        state = to_rescaled(x, 3, toy)
        u_prev = state.u + eps * (toy.tau(2) - toy.tau(3))
        via_u = from_rescaled(RescaledState(u=u_prev, tau=toy.tau(2)), 2, toy)
        direct = ddim_step(x, eps.astype(np.float32), 3, 2, toy)
        np.testing.assert_allclose(via_u, direct, atol=1e-6)

    def test_mismatched_timestep_rejected(self, toy):
        state = to_rescaled(np.ones(1, dtype=np.float32), 3, toy)
        with pytest.raises(ConfigError):
            from_rescaled(state, 1, toy)


class TestEpsToMu:
    def test_zero_eps(self, toy):
        out = eps_to_mu(np.array([1.0], dtype=np.float32), np.zeros(1, dtype=np.float32), 2, toy)
        assert out[0] == pytest.approx(1.0 / np.sqrt(0.8), rel=1e-6)

    def test_hand_value(self, toy):
        out = eps_to_mu(np.array([1.0], dtype=np.float32), np.array([1.0], dtype=np.float32), 2, toy)
        assert out[0] == pytest.approx(0.695457, abs=1e-5)

    def test_small_beta_limit(self):
        s = make_schedule(2, 1e-9, 1e-9)
        x = np.array([0.7], dtype=np.float32)
        out = eps_to_mu(x, np.array([0.3], dtype=np.float32), 1, s)
        assert out[0] == pytest.approx(0.7, abs=1e-4)

    def test_range_check(self, toy):
        with pytest.raises(ConfigError):
            eps_to_mu(np.zeros(1), np.zeros(1), 0, toy)


class TestPlans:
    def test_grid_endpoints_and_monotonicity(self):
        grid = timestep_grid(1000, 50)
        assert grid[0] == 0 and grid[-1] == 1000 and len(grid) == 51
        assert all(b > a for a, b in zip(grid, grid[1:]))
        assert grid[1] == 20

    def test_uneven_grid_still_lands_on_ends(self):
        grid = timestep_grid(1000, 7)
        assert grid[0] == 0 and grid[-1] == 1000
        assert all(b > a for a, b in zip(grid, grid[1:]))

    def test_plan_validation(self):
        with pytest.raises(ConfigError):
            TimestepPlan(timesteps=(5,), direction="decode")
        with pytest.raises(ConfigError):
            TimestepPlan(timesteps=(5, 3), direction="decode")  # must end at 0
        with pytest.raises(ConfigError):
            TimestepPlan(timesteps=(0, 3), direction="sideways")

    def test_encode_plan_depth(self, default_schedule):
        p = encode_plan(default_schedule, 50, encode_ratio=0.5)
        assert p.steps() == 25
        assert p.timesteps[0] == 0
        p_full = encode_plan(default_schedule, 50, encode_ratio=1.0)
        assert p_full.timesteps[-1] == 1000

    def test_steps_counts_transitions(self, default_schedule):
        assert decode_plan(default_schedule, 50).steps() == 50


class TestLoops:
    def test_zero_model_telescopes(self, default_schedule):
        model = lambda x, t, cond: np.zeros_like(x)
        xT = np.array([3.0], dtype=np.float32)
        plan = decode_plan(default_schedule, 10)
        out = ddim_sample_loop(model, xT, None, plan, default_schedule)
        want = 3.0 / np.sqrt(default_schedule.alpha_bar(1000))
        assert out[0] == pytest.approx(want, rel=1e-4)

    def test_zero_model_encode(self, default_schedule):
        model = lambda x, t, cond: np.zeros_like(x)
        x0 = np.array([2.0], dtype=np.float32)
        plan = encode_plan(default_schedule, 10)
        levels = ddim_encode_loop(model, x0, None, plan, default_schedule)
        for t, y in levels:
            assert y[0] == pytest.approx(np.sqrt(default_schedule.alpha_bar(t)) * 2.0, rel=1e-4)

    def test_plan_of_length_two_is_single_step(self, toy):
        calls = []

        def model(x, t, cond):
            calls.append(t)
            return np.full_like(x, 0.5)

        plan = TimestepPlan(timesteps=(4, 0), direction="decode")
        out = ddim_sample_loop(model, np.array([1.0], dtype=np.float32), None, plan, toy)
        assert calls == [4]
        want = ddim_step(np.array([1.0], dtype=np.float32), np.array([0.5], dtype=np.float32), 4, 0, toy)
        assert np.array_equal(out, want)

    def test_constant_eps_roundtrip_exact(self, default_schedule):
        model = lambda x, t, cond: np.full_like(x, 0.25)
        x0 = np.linspace(-1, 1, 8).astype(np.float32)
        enc = encode_plan(default_schedule, 25)
        levels = ddim_encode_loop(model, x0, None, enc, default_schedule)
        top = levels[-1][1]
        dec = decode_plan(default_schedule, 25)
        back = ddim_sample_loop(model, top, None, dec, default_schedule)
        np.testing.assert_allclose(back, x0, atol=1e-5)

    def test_loops_are_pure(self, default_schedule):
        model = lambda x, t, cond: (0.1 * x).astype(np.float32)
        xT = Rng(4).fill_gaussian((16,))
        plan = decode_plan(default_schedule, 10)
        a = ddim_sample_loop(model, xT, None, plan, default_schedule)
        b = ddim_sample_loop(model, xT, None, plan, default_schedule)
        assert np.array_equal(a, b)

    def test_wrong_direction_rejected(self, default_schedule):
        model = lambda x, t, cond: np.zeros_like(x)
        with pytest.raises(ConfigError):
            ddim_sample_loop(model, np.zeros(1, dtype=np.float32), None,
                             encode_plan(default_schedule, 5), default_schedule)
