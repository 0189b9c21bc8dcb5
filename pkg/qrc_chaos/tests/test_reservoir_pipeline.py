from unittest import mock

import numpy as np
import pytest

from qrc_chaos.schemas.common import PropagationMode, QubitOrder
from qrc_chaos.schemas.quantum import DensityMatrix
from qrc_chaos.schemas.reservoir import ReservoirConfig
from qrc_chaos.services import quantum_sim, reservoir_pipeline
from qrc_chaos.utils.errors import ConfigError


class TestReservoirConfig:
    def test_register_sizes(self):
        cfg = ReservoirConfig(d=1, n_rep=2, n_vars=2, n_hidden=3)
        assert cfg.n_inputs == 4
        assert cfg.n_qubits == 7
        assert cfg.n_features == 7
        assert ReservoirConfig(d=1, n_rep=2, n_vars=2, n_hidden=3, include_bias=True).n_features == 8

    def test_qubit_limit(self):
        with pytest.raises(ValueError):
            ReservoirConfig(d=1, n_rep=5, n_vars=2, n_hidden=3)

    def test_fields_from_seed(self):
        cfg = ReservoirConfig(d=1, n_rep=1, n_hidden=3, seed=42)
        fields = cfg.chain_fields()
        assert fields.shape == (4,)
        assert np.all((fields >= 0.0) & (fields <= 1.0))
        np.testing.assert_array_equal(fields, ReservoirConfig(d=2, n_rep=1, n_hidden=3, seed=42).chain_fields())

    def test_mode_follows_gamma(self):
        assert ReservoirConfig(d=1, n_rep=1, n_hidden=1).mode == PropagationMode.UNITARY
        assert ReservoirConfig(d=1, n_rep=1, n_hidden=1, gamma=0.1).mode == PropagationMode.LINDBLAD


class TestLayerInputs:
    def test_grouped(self):
        cfg = ReservoirConfig(d=1, n_rep=2, n_vars=2, n_hidden=1)
        assert reservoir_pipeline.layer_inputs(cfg, [0.1, 0.7]) == [0.1, 0.1, 0.7, 0.7]

    def test_interleaved(self):
        cfg = ReservoirConfig(d=1, n_rep=2, n_vars=2, n_hidden=1, qubit_order=QubitOrder.INTERLEAVED)
        assert reservoir_pipeline.layer_inputs(cfg, [0.1, 0.7]) == [0.1, 0.7, 0.1, 0.7]

    def test_wrong_width(self):
        cfg = ReservoirConfig(d=1, n_rep=2, n_vars=2, n_hidden=1)
        with pytest.raises(ConfigError):
            reservoir_pipeline.layer_inputs(cfg, [0.1])


class TestRunWindow:
    def test_single_layer_zero_input_oracle(self):
        cfg = ReservoirConfig(d=1, n_rep=2, n_vars=1, n_hidden=2, seed=8)
        prop = reservoir_pipeline.build_propagator(cfg)
        features = reservoir_pipeline.run_window(cfg, prop, [[0.0]])

        U = prop.unitary
        expected = quantum_sim.pauli_x_expectations(DensityMatrix(U @ DensityMatrix.ground(4).data @ U.conj().T))
        np.testing.assert_allclose(features.values, expected, atol=1e-12)

    def test_propagator_applied_once_per_layer(self, small_reservoir):
        cfg, prop = small_reservoir
        with mock.patch.object(quantum_sim, "apply", wraps=quantum_sim.apply) as counter:
            reservoir_pipeline.run_window(cfg, prop, [[0.2], [0.4]])
        assert counter.call_count == 2

        one_layer = ReservoirConfig(d=1, n_rep=1, n_hidden=2, seed=3)
        with mock.patch.object(quantum_sim, "apply", wraps=quantum_sim.apply) as counter:
            reservoir_pipeline.run_window(one_layer, reservoir_pipeline.build_propagator(one_layer), [[0.2]])
        assert counter.call_count == 1

    def test_feature_bounds_and_length(self, small_reservoir, rng):
        cfg, prop = small_reservoir
        for _ in range(5):
            features = reservoir_pipeline.run_window(cfg, prop, rng.uniform(0, 1, size=(2, 1)))
            assert features.values.shape == (3,)
            assert np.all(np.abs(features.values) <= 1.0)

    def test_bias_entry(self):
        cfg = ReservoirConfig(d=1, n_rep=1, n_hidden=2, include_bias=True, seed=1)
        features = reservoir_pipeline.run_window(cfg, reservoir_pipeline.build_propagator(cfg), [[0.3]])
        assert features.values.shape == (4,)
        assert features.values[-1] == 1.0

    def test_lindblad_zero_gamma_matches_unitary(self):
        cfg = ReservoirConfig(d=1, n_rep=1, n_hidden=2, seed=6, lindblad_substeps=1000)
        unitary = reservoir_pipeline.build_propagator(cfg)
        lindblad = quantum_sim.make_propagator(
            unitary.spec, cfg.tau, mode=PropagationMode.LINDBLAD, gamma=0.0, n_substeps=cfg.lindblad_substeps
        )
        window = [[0.37]]
        np.testing.assert_allclose(
            reservoir_pipeline.run_window(cfg, lindblad, window).values,
            reservoir_pipeline.run_window(cfg, unitary, window).values,
            atol=1e-6,
        )

    def test_dephased_features_match_rk4(self):
        cfg = ReservoirConfig(d=2, n_rep=1, n_hidden=2, seed=3, gamma=0.1)
        exact = reservoir_pipeline.build_propagator(cfg)
        rk4 = quantum_sim.make_propagator(
            exact.spec, cfg.tau, mode=PropagationMode.LINDBLAD, gamma=0.1, n_substeps=400, exact=False
        )
        assert exact.exact_lindblad
        window = [[0.2], [0.7]]
        np.testing.assert_allclose(
            reservoir_pipeline.run_window(cfg, exact, window).values,
            reservoir_pipeline.run_window(cfg, rk4, window).values,
            atol=1e-6,
        )

    def test_reference_logistic_register_uses_sector_blocks(self, rng):
        cfg = ReservoirConfig(d=2, n_rep=2, n_vars=1, n_hidden=4, gamma=0.05)
        prop = reservoir_pipeline.build_propagator(cfg)
        assert prop.exact_lindblad
        M = reservoir_pipeline.batch_features(cfg, prop, rng.uniform(0, 1, size=(3, 2, 1)))
        assert M.shape == (6, 3)
        assert np.all(np.abs(M) <= 1.0)

    def test_features_depend_on_fields(self):
        window = [[0.3], [0.8]]
        first = ReservoirConfig(d=2, n_rep=1, n_hidden=2, seed=1)
        second = ReservoirConfig(d=2, n_rep=1, n_hidden=2, seed=2)
        a = reservoir_pipeline.run_window(first, reservoir_pipeline.build_propagator(first), window).values
        b = reservoir_pipeline.run_window(second, reservoir_pipeline.build_propagator(second), window).values
        assert np.max(np.abs(a - b)) > 1e-6

    def test_oldest_entry_continuity(self, small_reservoir):
        cfg, prop = small_reservoir
        base = reservoir_pipeline.run_window(cfg, prop, [[0.4], [0.6]]).values
        distances = []
        for delta in (1e-2, 1e-3, 1e-4):
            moved = reservoir_pipeline.run_window(cfg, prop, [[0.4 + delta], [0.6]]).values
            distances.append(np.linalg.norm(moved - base))
        # finite-difference slope stays bounded and the distance shrinks with delta
        assert distances[0] > distances[1] > distances[2]
        assert distances[2] / 1e-4 < 10.0

    def test_window_shape_mismatch(self, small_reservoir):
        cfg, prop = small_reservoir
        with pytest.raises(ConfigError):
            reservoir_pipeline.run_window(cfg, prop, [[0.1], [0.2], [0.3]])

    def test_propagator_size_mismatch(self, small_reservoir):
        cfg, _ = small_reservoir
        other = ReservoirConfig(d=2, n_rep=1, n_hidden=3)
        with pytest.raises(ConfigError):
            reservoir_pipeline.run_window(cfg, reservoir_pipeline.build_propagator(other), [[0.1], [0.2]])

    def test_two_variable_window(self, henon_reservoir):
        cfg, prop = henon_reservoir
        features = reservoir_pipeline.run_window(cfg, prop, [[0.2, 0.9]])
        assert features.values.shape == (4,)


class TestBatchFeatures:
    def test_single_window_column(self, small_reservoir):
        cfg, prop = small_reservoir
        window = np.array([[0.1], [0.5]])
        M = reservoir_pipeline.batch_features(cfg, prop, [window])
        assert M.shape == (3, 1)
        np.testing.assert_array_equal(M[:, 0], reservoir_pipeline.run_window(cfg, prop, window).values)

    def test_shape_and_duplicates(self, small_reservoir, rng):
        cfg, prop = small_reservoir
        windows = rng.uniform(0, 1, size=(5, 2, 1))
        windows[3] = windows[1]
        M = reservoir_pipeline.batch_features(cfg, prop, windows)
        assert M.shape == (3, 5)
        np.testing.assert_array_equal(M[:, 3], M[:, 1])

    def test_permutation_permutes_columns(self, small_reservoir, rng):
        cfg, prop = small_reservoir
        windows = rng.uniform(0, 1, size=(6, 2, 1))
        order = rng.permutation(6)
        M = reservoir_pipeline.batch_features(cfg, prop, windows)
        np.testing.assert_array_equal(reservoir_pipeline.batch_features(cfg, prop, windows[order]), M[:, order])

    def test_parallel_matches_serial(self, small_reservoir, rng):
        cfg, prop = small_reservoir
        windows = rng.uniform(0, 1, size=(70, 2, 1))
        serial = reservoir_pipeline.batch_features(cfg, prop, windows, n_jobs=1)
        parallel = reservoir_pipeline.batch_features(cfg, prop, windows, n_jobs=2)
        np.testing.assert_allclose(parallel, serial, atol=1e-12)

    def test_empty(self, small_reservoir):
        cfg, prop = small_reservoir
        with pytest.raises(ConfigError):
            reservoir_pipeline.batch_features(cfg, prop, np.empty((0, 2, 1)))

    def test_feature_frame(self, small_reservoir, rng):
        cfg, prop = small_reservoir
        M = reservoir_pipeline.batch_features(cfg, prop, rng.uniform(0, 1, size=(4, 2, 1)))
        frame = reservoir_pipeline.feature_frame(M)
        assert list(frame.columns) == ["feature", "w0", "w1", "w2", "w3"]
        assert len(frame) == 3
