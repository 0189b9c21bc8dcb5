import numpy as np
import pytest

from qrc_chaos.config.settings import ExperimentConfig
from qrc_chaos.schemas.reservoir import ReservoirConfig
from qrc_chaos.services import reservoir_pipeline


@pytest.fixture
def small_reservoir():
    """Three-qubit reservoir (1 input, 2 hidden, 2 layers) and its propagator"""
    cfg = ReservoirConfig(d=2, n_rep=1, n_vars=1, n_hidden=2, seed=3)
    return cfg, reservoir_pipeline.build_propagator(cfg)


@pytest.fixture
def henon_reservoir():
    cfg = ReservoirConfig(d=1, n_rep=1, n_vars=2, n_hidden=2, seed=5)
    return cfg, reservoir_pipeline.build_propagator(cfg)


@pytest.fixture
def tiny_logistic_config():
    """Reduced-scale logistic experiment that runs in well under a second per fit"""
    return ExperimentConfig(
        map_kind="logistic",
        r=3.75,
        n_train=6,
        train_len=20,
        n_test=2,
        test_len=40,
        eval_start=30,
        d=1,
        n_rep=1,
        n_hidden=2,
        lle_transient=100,
        lle_iterations=2000,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(autouse=True)
def _isolated_output(tmp_path, monkeypatch):
    monkeypatch.setenv("QRC_OUT_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("QRC_SAVE_PLOTS", "false")
    monkeypatch.setenv("QRC_N_JOBS", "1")
