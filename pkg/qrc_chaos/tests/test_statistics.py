import numpy as np
import pytest

from qrc_chaos.services.statistics import count_clusters, fit_poisson_histogram, spearman
from qrc_chaos.utils.errors import ConfigError, NumericalGuardError


class TestSpearman:
    def test_identical(self):
        assert spearman([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_computed(self):
        # d = [0, -1, 1, 0]: 1 - 6 * 2 / (4 * 15) = 0.8
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_monotone_transform(self):
        u = np.linspace(0.1, 1.0, 12)
        assert spearman(u, np.exp(5 * u)) == pytest.approx(1.0)

    def test_ties_use_average_ranks(self):
        # ranks of v: [1.5, 1.5, 3, 4]
        assert spearman([1, 2, 3, 4], [5, 5, 7, 9]) == pytest.approx(np.corrcoef([1, 2, 3, 4], [1.5, 1.5, 3, 4])[0, 1])

    def test_degenerate_ranks(self):
        with pytest.raises(NumericalGuardError, match="degenerate ranks"):
            spearman([1, 2, 3], [4, 4, 4])

    def test_too_few_points(self):
        with pytest.raises(ConfigError):
            spearman([1], [2])

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            spearman([1, 2, 3], [1, 2])


class TestPoissonHistogram:
    def test_identical_values(self):
        hist = fit_poisson_histogram([0.01] * 15)
        assert hist.counts.sum() == 15
        assert hist.counts[0] == 15
        assert hist.rate == 0.0

    def test_counts_sum_to_samples(self, rng):
        values = rng.exponential(size=10)
        hist = fit_poisson_histogram(values, n_bins=40)
        assert hist.counts.shape == (40,)
        assert hist.edges.shape == (41,)
        assert hist.counts.sum() == 10
        assert hist.rate >= 0.0

    def test_rate_is_weighted_mean_bin_index(self):
        # bins of width 1 over [0, 4]: values fall in bins 0, 0, 1, 3
        hist = fit_poisson_histogram([0.0, 0.5, 1.5, 4.0], n_bins=4)
        np.testing.assert_array_equal(hist.counts, [2, 1, 0, 1])
        assert hist.rate == pytest.approx((0 + 0 + 1 + 3) / 4)
        assert hist.fitted.sum() == pytest.approx(4 * np.exp(-1.0) * (1 + 1 + 1 / 2 + 1 / 6))

    def test_non_finite(self):
        with pytest.raises(NumericalGuardError):
            fit_poisson_histogram([0.1, np.nan])


class TestClusters:
    def test_two_clusters(self):
        assert count_clusters([0.5130, 0.7995, 0.5131, 0.7994]) == 2

    def test_single_value(self):
        assert count_clusters([0.6] * 10) == 1

    def test_empty(self):
        assert count_clusters([]) == 0
