"""Shared fixtures: a tiny federation that trains in seconds."""

from dataclasses import replace

import pytest

from src.cli.config import ExperimentConfig
from src.federation.pipeline import prepare_run
from src.synthdata.spec import SyntheticSpec


def tiny_config(**training):
    cfg = ExperimentConfig()
    cfg.data.synthetic = SyntheticSpec(clients=4, samples=80, classes=2, input_dim=4, latent_dim=4,
                                       missing_rate=0.1, conflict=0.5, seed=0)
    cfg.model.latent_dim = 4
    cfg.model.gcn_hidden = 4
    cfg.model.kappa = 2
    cfg.training.local_epochs = 20
    cfg.training.max_epochs = 6
    cfg.training.patience = 3
    cfg.training.lr_grid = [0.01, 0.001]
    for name, value in training.items():
        setattr(cfg.training, name, value)
    cfg.threads = 2
    cfg.seeds = [0]
    return cfg.validate()


@pytest.fixture(scope="module")
def tiny_run():
    return prepare_run(tiny_config(), seed=0)


def with_config(run, cfg):
    """Same clients and bundle under another config."""
    return replace(run, cfg=cfg)
