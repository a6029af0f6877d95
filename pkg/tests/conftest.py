import numpy as np
import pytest

from maskdiff.rng import Rng
from maskdiff.textcond import encode_prompt
from maskdiff.unet import UNet, UNetConfig, Weights, init_weights

WEIGHTS_SEED = 2024


@pytest.fixture(scope="session")
def unet_cfg() -> UNetConfig:
    return UNetConfig()


@pytest.fixture(scope="session")
def shared_weights(unet_cfg) -> Weights:
    # Weight init walks ~1.8M stream values; share one copy per session.
    return init_weights(unet_cfg, WEIGHTS_SEED)


@pytest.fixture
def net(unet_cfg, shared_weights) -> UNet:
    return UNet(unet_cfg, shared_weights)


@pytest.fixture(scope="session")
def source_cond():
    return encode_prompt("a dog sitting on a beach", seed=11)


@pytest.fixture(scope="session")
def target_cond():
    return encode_prompt("a dog sitting on the snow", seed=11)


@pytest.fixture
def latent16() -> np.ndarray:
    return Rng(31).fill_gaussian((3, 16, 16))
