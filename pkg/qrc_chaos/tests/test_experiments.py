from unittest import mock

import numpy as np
import pytest
from scipy import stats

from qrc_chaos.config.settings import ExperimentConfig
from qrc_chaos.schemas.common import MapKind, PredictionMode, Region
from qrc_chaos.schemas.experiments import SweepPoint, SweepResult
from qrc_chaos.services import experiments, readout_training, reservoir_pipeline
from qrc_chaos.services.statistics import count_clusters
from qrc_chaos.utils.errors import ConfigError


def _synthetic_sweep(lle, rmse):
    points = [
        SweepPoint(
            control=float(i), lle=l, rmse=e, rmse_per_series=np.array([e]),
            true_tail=np.zeros(2), predicted_tail=np.zeros(2), attractor=np.zeros(2),
        )
        for i, (l, e) in enumerate(zip(lle, rmse))
    ]
    return SweepResult(map_kind=MapKind.LOGISTIC, grid=[p.control for p in points], points=points)


class TestBifurcationSweep:
    def test_single_point_grid(self, tiny_logistic_config):
        sweep = experiments.bifurcation_sweep(tiny_logistic_config, [2.5])
        assert len(sweep.points) == 1
        assert sweep.lle.shape == sweep.rmse.shape == (1,)
        point = sweep.points[0]
        assert point.lle == pytest.approx(-np.log(2.0), abs=1e-3)
        # fixed-point regime: the predicted tail collapses to one value
        assert np.ptp(point.predicted_tail) < 1e-3
        assert point.true_tail.shape == (10,)

    def test_period_two_point(self, tiny_logistic_config):
        cfg = tiny_logistic_config.model_copy(update={"n_train": 20})
        sweep = experiments.bifurcation_sweep(cfg, [3.2])
        assert count_clusters(sweep.points[0].predicted_tail, tol=1e-2) == 2
        assert count_clusters(sweep.points[0].attractor) == 2

    def test_frames_aligned_with_grid(self, tiny_logistic_config):
        sweep = experiments.bifurcation_sweep(tiny_logistic_config, [3.0, 3.9])
        summary = sweep.summary_frame()
        assert summary["control"].tolist() == [3.0, 3.9]
        assert len(sweep.tails_frame()) == 2 * 10

    def test_grid_must_increase(self, tiny_logistic_config):
        with pytest.raises(ConfigError):
            experiments.bifurcation_sweep(tiny_logistic_config, [3.5, 3.0])

    def test_henon_grid_range(self):
        cfg = ExperimentConfig(map_kind="henon", n_train=2, n_test=1, test_len=30)
        with pytest.raises(ConfigError):
            experiments.bifurcation_sweep(cfg, [0.5, 1.2])


class TestHyperparameterGrid:
    def test_single_cell(self, tiny_logistic_config):
        result = experiments.hyperparameter_grid(tiny_logistic_config, layers=[1], reps=[1])
        assert result.rmse.shape == (1, 1)
        assert np.isfinite(result.rmse[0, 0])
        assert result.argmin == (1, 1)

    def test_cells_over_qubit_limit_are_skipped(self):
        cfg = ExperimentConfig(
            map_kind="henon", a=1.35, n_train=3, train_len=15, n_test=1, test_len=25, eval_start=15,
            d=1, n_rep=1, n_hidden=3,
        )
        result = experiments.hyperparameter_grid(cfg, layers=[1], reps=[1, 5])
        assert result.skipped.tolist() == [[False, True]]
        assert result.n_qubits.tolist() == [[5, 13]]
        assert result.argmin == (1, 1)
        frame = result.to_frame()
        assert frame["skipped"].tolist() == [False, True]

    def test_bad_ranges(self, tiny_logistic_config):
        with pytest.raises(ConfigError):
            experiments.hyperparameter_grid(tiny_logistic_config, layers=[], reps=[1])

    def test_expected_optimal_repetitions(self):
        assert experiments.expected_optimal_repetitions(MapKind.LOGISTIC, 0) == 2
        assert experiments.expected_optimal_repetitions(MapKind.LOGISTIC, 1) == 4
        assert experiments.expected_optimal_repetitions(MapKind.HENON, 0) == 2


class TestNoiseRobustness:
    def test_zero_gamma_arms_agree(self, tiny_logistic_config):
        result = experiments.noise_robustness(tiny_logistic_config, [0.0])
        assert result.rmse_clean_trained[0] == pytest.approx(result.rmse_insitu_trained[0], abs=1e-9)
        assert len(result.window_hash) == 64

    def test_frame_columns(self, tiny_logistic_config):
        result = experiments.noise_robustness(tiny_logistic_config, [0.0, 0.2])
        frame = result.to_frame()
        assert list(frame.columns) == ["gamma", "rmse_clean_trained", "rmse_insitu_trained"]
        assert np.all(np.isfinite(frame[["rmse_clean_trained", "rmse_insitu_trained"]].to_numpy()))

    def test_negative_gamma(self, tiny_logistic_config):
        with pytest.raises(ConfigError):
            experiments.noise_robustness(tiny_logistic_config, [-0.1])

    def test_insitu_readout_is_trained_at_each_gamma(self, tiny_logistic_config):
        with mock.patch.object(readout_training, "train_readout", wraps=readout_training.train_readout) as trainer:
            experiments.noise_robustness(tiny_logistic_config, [0.0, 0.2])
        gammas = [c.args[0].gamma for c in trainer.call_args_list]
        # one clean fit, then one in-situ fit per gamma
        assert gammas == [0.0, 0.0, 0.2]
        configs = [c.args[0].model_dump_json() for c in trainer.call_args_list]
        assert configs[1] == configs[0]
        assert configs[2] != configs[0]

    def test_clean_arm_degrades_and_insitu_recovers(self):
        cfg = ExperimentConfig(
            r=3.75, n_train=20, train_len=20, n_test=2, test_len=60, eval_start=40, d=2, n_rep=2, n_hidden=4,
        )
        result = experiments.noise_robustness(cfg, [0.0, 0.05, 0.2, 1.0])
        clean, insitu = result.rmse_clean_trained, result.rmse_insitu_trained
        assert np.all(np.diff(clean) >= -1e-12)
        assert clean[-1] >= 10 * insitu[-1]


class TestHamiltonianEnsemble:
    def test_smoke_run(self, tiny_logistic_config):
        report = experiments.hamiltonian_ensemble(tiny_logistic_config, n_samples=10, base_seed=3)
        assert report.histogram.sum() + report.n_failed == 10
        assert report.histogram.shape == (40,)
        assert report.poisson_rate >= 0.0
        assert report.seeds == [(3, i) for i in range(10)]
        assert len(report.samples_frame()) == 10
        assert len(report.histogram_frame()) == 40

    def test_rmse_histogram_is_right_skewed(self, tiny_logistic_config):
        report = experiments.hamiltonian_ensemble(tiny_logistic_config, n_samples=30, n_bins=10, base_seed=5)
        assert report.n_failed == 0
        assert stats.skew(report.rmses) > 0
        assert np.median(report.rmses) < np.mean(report.rmses)

    def test_minimum_samples(self, tiny_logistic_config):
        with pytest.raises(ConfigError):
            experiments.hamiltonian_ensemble(tiny_logistic_config, n_samples=5)

    def test_fields_are_function_of_seed_and_index(self):
        first = experiments.ensemble_fields(5, 11, 3)
        np.testing.assert_array_equal(first, experiments.ensemble_fields(5, 11, 3))
        assert not np.array_equal(first, experiments.ensemble_fields(5, 11, 4))
        assert np.all((first >= 0.0) & (first <= 1.0))


class TestCorrelation:
    def test_monotone_rmse(self):
        lle = np.linspace(0.05, 0.7, 12)
        sweep = _synthetic_sweep(lle, 1e-4 * np.exp(3 * lle))
        assert experiments.lle_rmse_correlation(sweep, Region.ALL) == pytest.approx(1.0)

    def test_chaotic_only_filters_negative_lle(self):
        lle = np.concatenate([-np.linspace(0.1, 1.0, 6), np.linspace(0.1, 0.6, 6)])
        rmse = np.concatenate([np.linspace(1e-2, 2e-2, 6), np.linspace(1e-4, 1e-3, 6)])
        sweep = _synthetic_sweep(lle, rmse)
        assert experiments.lle_rmse_correlation(sweep, Region.CHAOTIC_ONLY) == pytest.approx(1.0)
        assert experiments.lle_rmse_correlation(sweep, Region.ALL) < 1.0

    def test_too_few_chaotic_points(self):
        sweep = _synthetic_sweep([-0.5] * 11 + [0.2], np.linspace(0.1, 1.0, 12))
        with pytest.raises(ConfigError):
            experiments.lle_rmse_correlation(sweep, Region.CHAOTIC_ONLY)

    def test_short_sweep_rejected(self):
        lle = np.linspace(0.05, 0.7, experiments.MIN_CORRELATION_POINTS - 1)
        sweep = _synthetic_sweep(lle, 1e-4 * np.exp(3 * lle))
        with pytest.raises(ConfigError, match="at least 10 points"):
            experiments.lle_rmse_correlation(sweep, Region.ALL)

    def test_regime_averages(self):
        sweep = _synthetic_sweep([-0.5, -0.1, 0.2, 0.4], [1.0, 3.0, 10.0, 20.0])
        averages = experiments.regime_averages(sweep)
        assert averages["regular"] == pytest.approx(2.0)
        assert averages["chaotic"] == pytest.approx(15.0)
        assert averages["n_chaotic"] == 2


class TestPredictionModes:
    @staticmethod
    def _config(r, mode):
        return ExperimentConfig(
            r=r, n_train=20, train_len=20, n_test=2, test_len=80, eval_start=30,
            d=1, n_rep=1, n_hidden=2, prediction_mode=mode,
        )

    def _score(self, cfg):
        dataset = experiments.build_experiment_dataset(cfg)
        rcfg = cfg.reservoir_config()
        _, report = experiments.fit_and_score(cfg, rcfg, reservoir_pipeline.build_propagator(rcfg), dataset)
        return report

    def test_autonomous_reproduces_fixed_point(self):
        report = self._score(self._config(2.5, PredictionMode.AUTONOMOUS))
        assert report.rmse < 1e-2
        assert np.ptp(report.predictions[0][-10:, 0]) < 1e-3

    def test_autonomous_diverges_when_fully_chaotic(self):
        autonomous = self._score(self._config(4.0, PredictionMode.AUTONOMOUS))
        teacher_forced = self._score(self._config(4.0, PredictionMode.TEACHER_FORCED))
        assert autonomous.rmse > 0.1
        assert autonomous.rmse > 3 * teacher_forced.rmse
