"""
Statistics used by the experiment drivers
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from qrc_chaos.utils.errors import ConfigError, NumericalGuardError

logger = logging.getLogger(__name__)


def spearman(u: Sequence[float], v: Sequence[float]) -> float:
    """
    Spearman rank correlation with average ranks for ties

    Raises:
        ConfigError: unequal lengths or fewer than 2 points
        NumericalGuardError: one of the rank vectors is constant ("degenerate ranks")
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ConfigError(f"spearman needs two vectors of equal length, got {u.shape} and {v.shape}")
    if u.shape[0] < 2:
        raise ConfigError("spearman needs at least 2 points")

    ranks_u = stats.rankdata(u)
    ranks_v = stats.rankdata(v)
    if np.ptp(ranks_u) == 0 or np.ptp(ranks_v) == 0:
        raise NumericalGuardError("degenerate ranks")

    rho = stats.spearmanr(u, v)[0]
    return float(np.clip(rho, -1.0, 1.0))


@dataclass
class PoissonHistogram:
    counts: np.ndarray      # length n_bins
    edges: np.ndarray       # length n_bins + 1
    rate: float             # MLE of the Poisson rate over bin indices
    fitted: np.ndarray      # expected counts per bin under the fit


def fit_poisson_histogram(values: Sequence[float], n_bins: int = 40) -> PoissonHistogram:
    """
    Equal-width histogram over [min, max] and a Poisson fit over bin indices

    The rate is the count-weighted mean bin index (maximum likelihood). When all
    values coincide every sample lands in bin 0 and the rate is 0.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ConfigError("Cannot build a histogram from zero samples")
    if n_bins < 1:
        raise ConfigError(f"n_bins must be >= 1, got {n_bins}")
    if not np.all(np.isfinite(values)):
        raise NumericalGuardError("Histogram values contain non-finite entries")

    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        counts = np.zeros(n_bins, dtype=int)
        counts[0] = values.size
        edges = np.linspace(lo, lo + 1.0, n_bins + 1)
    else:
        counts, edges = np.histogram(values, bins=n_bins, range=(lo, hi))

    indices = np.arange(n_bins)
    rate = float(np.sum(indices * counts) / np.sum(counts))
    fitted = stats.poisson.pmf(indices, rate) * values.size if rate > 0 else (indices == 0) * float(values.size)

    logger.debug(f"Poisson histogram: {values.size} samples, {n_bins} bins, rate={rate:.4f}")
    return PoissonHistogram(counts=counts, edges=edges, rate=rate, fitted=np.asarray(fitted, dtype=float))


def count_clusters(values: Sequence[float], tol: float = 1e-2) -> int:
    """Number of groups after sorting, splitting wherever consecutive values differ by more than ``tol``"""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        return 0
    return int(1 + np.count_nonzero(np.diff(values) > tol))
