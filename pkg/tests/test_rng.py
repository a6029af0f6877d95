"""Stream determinism and the frozen regression constants."""

import numpy as np
import pytest

from maskdiff.rng import Rng, derive_seed, fnv1a64, splitmix64

# Canonical splitmix64 output for state 0 (first word of the reference
# implementation's stream).
SPLITMIX64_ZERO_FIRST = 0xE220A8397B1DCDAF

# First four Gaussian variates for seed 42, frozen at first implementation.
SEED42_GAUSSIANS = [
    -1.6132237513849164,
    1.5344873235334187,
    0.7816920450573492,
    -0.4001934943234841,
]


def test_splitmix64_reference_vector():
    _, word = splitmix64(0)
    assert word == SPLITMIX64_ZERO_FIRST


def test_fnv1a64_reference():
    # FNV-1a 64 of empty input is the offset basis.
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C


def test_frozen_gaussians_seed42():
    got = Rng(42).gaussians(4)
    assert np.allclose(got, SEED42_GAUSSIANS, rtol=0, atol=1e-12)


def test_same_seed_same_stream():
    a = Rng(12345)
    b = Rng(12345)
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]


def test_uniforms_match_scalar_path():
    a = Rng(9)
    b = Rng(9)
    bulk = a.uniforms(50)
    scalar = np.array([b.uniform() for _ in range(50)])
    assert np.array_equal(bulk, scalar)


def test_uniform_range_open_at_zero():
    u = Rng(3).uniforms(10000)
    assert (u > 0.0).all() and (u <= 1.0).all()


def test_gaussian_carry_is_stream_consistent():
    a = Rng(77)
    b = Rng(77)
    split = np.concatenate([a.gaussians(3), a.gaussians(1)])
    assert np.array_equal(split, b.gaussians(4))


def test_gaussian_moments():
    z = Rng(5).gaussians(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1.0) < 0.02


def test_fill_gaussian_shape_scale_dtype():
    t = Rng(1).fill_gaussian((4, 5), scale=0.5)
    assert t.shape == (4, 5) and t.dtype == np.float32
    ref = Rng(1).gaussians(20) * 0.5
    assert np.array_equal(t.ravel(), ref.astype(np.float32))


def test_derive_seed_distinguishes_keys():
    s = derive_seed(42, "conv1.w")
    assert s != derive_seed(42, "conv1.b")
    assert s != derive_seed(43, "conv1.w")
    assert s == derive_seed(42, "conv1.w")
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)


def test_different_seeds_diverge():
    assert Rng(1).next_u64() != Rng(2).next_u64()


@pytest.mark.parametrize("n", [0, 1, 2, 7])
def test_gaussians_length(n):
    assert len(Rng(0).gaussians(n)) == n
