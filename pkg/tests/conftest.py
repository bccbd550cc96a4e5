import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nca3d.nca import NcaConfig
from nca3d.presets import toy_tower
from nca3d.training import TrainConfig, train

settings.register_profile("default", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def toy_configs(regen: bool = False, seed: int = 0):
    """The desk-scale setup: 8 hidden channels, 32/32 layers, 20-30 steps, lr 0.002, pool 32, batch 5."""
    t = toy_tower()
    nca = NcaConfig(num_block_channels=len(t.palette), num_hidden=8, layer1_channels=32, layer2_channels=32, init_stdev=0.1)
    tc = TrainConfig(
        pool_size=32,
        batch_size=5,
        min_steps=20,
        max_steps=30,
        learning_rate=0.002,
        max_iterations=3000,
        regen_enabled=regen,
        rng_seed=seed,
    )
    return t, nca, tc


class ToyRun:
    def __init__(self, out, regen: bool):
        self.target, self.nca_cfg, self.train_cfg = toy_configs(regen)
        self.out = out
        self.checkpoint = train(self.target, self.nca_cfg, self.train_cfg, out)

    @property
    def loss_csv(self):
        return self.out / "loss.csv"

    @property
    def checkpoint_path(self):
        return self.out / "checkpoint.json"

    def losses(self) -> np.ndarray:
        return np.loadtxt(self.loss_csv, delimiter=",", skiprows=1, usecols=1, ndmin=1)


@pytest.fixture(scope="session")
def toy_run(tmp_path_factory):
    """Toy target trained without damage; shared by the training, evaluation and determinism checks."""
    return ToyRun(tmp_path_factory.mktemp("toy_a"), regen=False)


@pytest.fixture(scope="session")
def toy_run_repeat(tmp_path_factory):
    return ToyRun(tmp_path_factory.mktemp("toy_b"), regen=False)


@pytest.fixture(scope="session")
def toy_run_regen(tmp_path_factory):
    return ToyRun(tmp_path_factory.mktemp("toy_regen"), regen=True)
