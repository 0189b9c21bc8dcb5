"""
Chaotic map service: orbit generation, dataset normalization, Lyapunov
estimation and supervised windowing for the logistic and Henon maps.
"""

import logging
import math
from typing import List, Tuple

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from qrc_chaos.schemas.chaos import LyapunovEstimate, MapParams, NormalizedDataset, TimeSeries
from qrc_chaos.schemas.common import MapKind
from qrc_chaos.utils.errors import ConfigError, DivergentOrbitError

logger = logging.getLogger(__name__)

HENON_ESCAPE_RADIUS = 10.0
HENON_BURN_IN = 100
HENON_SAMPLE_BOX = ((-0.5, 0.5), (-0.2, 0.2))
LOGISTIC_SAMPLE_RANGE = (0.05, 0.95)
MAX_GENERATION_RETRIES = 100

# Degree of x_t as a polynomial in x_{t-1}: r x (1 - x) and 1 - a x^2 + y
MAP_POLYNOMIAL_DEGREE = {MapKind.LOGISTIC: 2, MapKind.HENON: 2}


def map_step(state: np.ndarray, params: MapParams) -> np.ndarray:
    """
    Advance one step of the map.

    Args:
        state: current state, shape (1,) for logistic or (2,) = (x, y) for Henon
        params: map parameters

    Returns:
        Next state as a new array
    """
    state = np.asarray(state, dtype=float).reshape(-1)
    if state.shape[0] != params.dim:
        raise ConfigError(f"State dimension {state.shape[0]} does not match {params.kind.value} map")
    if not np.all(np.isfinite(state)):
        raise DivergentOrbitError("divergent orbit")

    if params.kind == MapKind.LOGISTIC:
        x = state[0]
        return np.array([params.r * x * (1.0 - x)])

    x, y = state
    return np.array([1.0 - params.a * x * x + y, params.b * x])


def generate_series(params: MapParams, initial_state, length: int) -> TimeSeries:
    """
    Iterate the map ``length - 1`` times from ``initial_state``.

    The initial state is step 1 of the returned series.

    Raises:
        ConfigError: bad length or initial state
        DivergentOrbitError: Henon orbit escaped |x| > 10 (message names the step)
    """
    if length < 1:
        raise ConfigError(f"length must be >= 1, got {length}")
    initial = np.asarray(initial_state, dtype=float).reshape(-1)
    if initial.shape[0] != params.dim:
        raise ConfigError(f"Initial state must have dimension {params.dim}")
    if params.kind == MapKind.LOGISTIC and not 0.0 < initial[0] < 1.0:
        raise ConfigError(f"Logistic initial state must lie in (0, 1), got {initial[0]}")

    values = np.empty((length, params.dim))
    values[0] = initial
    for t in range(1, length):
        nxt = map_step(values[t - 1], params)
        if not np.all(np.isfinite(nxt)) or (
            params.kind == MapKind.HENON and abs(nxt[0]) > HENON_ESCAPE_RADIUS
        ):
            raise DivergentOrbitError(
                f"{params.label()} orbit diverged at step {t + 1}", step=t + 1
            )
        values[t] = nxt

    return TimeSeries(values=values, params=params, initial_state=initial.copy())


def sample_initial_state(params: MapParams, rng: np.random.Generator) -> np.ndarray:
    """Draw a random initial state; Henon draws are burned in onto the attractor"""
    if params.kind == MapKind.LOGISTIC:
        return np.array([rng.uniform(*LOGISTIC_SAMPLE_RANGE)])

    (x_lo, x_hi), (y_lo, y_hi) = HENON_SAMPLE_BOX
    start = np.array([rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)])
    burned = generate_series(params, start, HENON_BURN_IN + 1)
    return burned.values[-1].copy()


def _generate_pool(
    params: MapParams, count: int, length: int, rng: np.random.Generator, max_retries: int
) -> List[TimeSeries]:
    pool = []
    for i in range(count):
        for attempt in range(max_retries):
            try:
                initial = sample_initial_state(params, rng)
                pool.append(generate_series(params, initial, length))
                break
            except DivergentOrbitError as e:
                logger.debug(f"Series {i}: attempt {attempt + 1} diverged ({e}), resampling")
        else:
            raise DivergentOrbitError(
                f"{params.label()}: no bounded orbit found for series {i} after {max_retries} attempts"
            )
    return pool


def build_dataset(
    params: MapParams,
    n_train: int = 100,
    train_len: int = 20,
    n_test: int = 10,
    test_len: int = 200,
    seed: int = 0,
    max_retries: int = MAX_GENERATION_RETRIES,
) -> NormalizedDataset:
    """
    Build normalized train/test pools.

    Logistic series are divided by the pooled training maximum. Henon series get a
    per-variable min-max map to [0, 1] over the pooled training series. The same
    transform is applied to the test series (which may leave [0, 1] marginally; the
    number of such values is stored as ``test_clamp_count``).
    """
    for name, value in (("n_train", n_train), ("train_len", train_len), ("n_test", n_test), ("test_len", test_len)):
        if value < 1:
            raise ConfigError(f"{name} must be >= 1, got {value}")

    rng = np.random.default_rng(seed)
    raw_train = _generate_pool(params, n_train, train_len, rng, max_retries)
    raw_test = _generate_pool(params, n_test, test_len, rng, max_retries)

    pooled = np.concatenate([s.values for s in raw_train], axis=0)
    lo = pooled.min(axis=0)
    hi = pooled.max(axis=0)

    if params.kind == MapKind.LOGISTIC:
        normalization = "max"
        offset = np.zeros(params.dim)
        gain = np.where(hi > 0, 1.0 / np.where(hi > 0, hi, 1.0), 1.0)
    else:
        normalization = "minmax"
        span = hi - lo
        offset = lo.copy()
        gain = np.where(span > 0, 1.0 / np.where(span > 0, span, 1.0), 1.0)

    def _normalize(series: TimeSeries) -> TimeSeries:
        return TimeSeries(
            values=(series.values - offset) * gain,
            params=series.params,
            initial_state=series.initial_state,
        )

    train = [_normalize(s) for s in raw_train]
    test = [_normalize(s) for s in raw_test]
    test_values = np.concatenate([s.values for s in test], axis=0)
    clamp_count = int(np.count_nonzero((test_values < 0.0) | (test_values > 1.0)))

    dataset = NormalizedDataset(
        train=train,
        test=test,
        offset=offset,
        gain=gain,
        raw_bounds=np.stack([lo, hi], axis=1),
        normalization=normalization,
        test_clamp_count=clamp_count,
        seed=seed,
    )
    logger.info(
        f"Built dataset for {params.label()}: {n_train}x{train_len} train, "
        f"{n_test}x{test_len} test, normalization={normalization}, test values outside [0,1]: {clamp_count}"
    )
    return dataset


def largest_lyapunov(
    params: MapParams,
    transient: int = 1000,
    n_iter: int = 100_000,
    seed: int = 0,
) -> LyapunovEstimate:
    """
    Largest Lyapunov exponent by tangent-space averaging.

    Logistic: mean of ln|r(1 - 2x_t)| after the transient. Henon: a tangent vector
    is pushed through the Jacobian [[-2a x_t, 1], [b, 0]] and renormalized every step.
    """
    if transient < 100:
        raise ConfigError(f"transient must be >= 100, got {transient}")
    if n_iter < 1000:
        raise ConfigError(f"n_iter must be >= 1000, got {n_iter}")

    rng = np.random.default_rng(seed)
    tiny = np.finfo(float).tiny

    if params.kind == MapKind.LOGISTIC:
        r = params.r
        x = float(rng.uniform(*LOGISTIC_SAMPLE_RANGE))
        for _ in range(transient):
            x = r * x * (1.0 - x)
        total = 0.0
        for _ in range(n_iter):
            total += math.log(max(abs(r * (1.0 - 2.0 * x)), tiny))
            x = r * x * (1.0 - x)
        if not math.isfinite(x):
            raise DivergentOrbitError(f"{params.label()} orbit diverged during Lyapunov estimation")
        lam = total / n_iter
    else:
        a, b = params.a, params.b
        x, y = sample_initial_state(params, rng)
        for step in range(transient):
            x, y = 1.0 - a * x * x + y, b * x
            if abs(x) > HENON_ESCAPE_RADIUS:
                raise DivergentOrbitError(f"{params.label()} orbit diverged at step {step + 1}", step=step + 1)
        u, v = 1.0, 0.0
        total = 0.0
        for step in range(n_iter):
            u, v = -2.0 * a * x * u + v, b * u
            norm = math.hypot(u, v)
            total += math.log(max(norm, tiny))
            u, v = u / norm, v / norm
            x, y = 1.0 - a * x * x + y, b * x
            if abs(x) > HENON_ESCAPE_RADIUS:
                raise DivergentOrbitError(
                    f"{params.label()} orbit diverged at step {transient + step + 1}",
                    step=transient + step + 1,
                )
        lam = total / n_iter

    logger.debug(f"LLE for {params.label()}: {lam:.6f}")
    return LyapunovEstimate(lambda_star=float(lam), n_iter=n_iter, transient=transient)


def series_windows(values: np.ndarray, d: int, gap: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rolling windows with stride 1 over one series.

    Returns:
        (windows, targets) with shapes (n, d, dim) and (n, dim), n = len - d - gap
    """
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if gap < 0:
        raise ConfigError(f"gap must be >= 0, got {gap}")
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    length = values.shape[0]
    if length <= d + gap:
        raise ConfigError(f"Series of length {length} is too short for d={d}, gap={gap}")

    n = length - d - gap
    windows = sliding_window_view(values, d, axis=0)[:n].transpose(0, 2, 1)
    targets = values[d + gap:]
    return np.ascontiguousarray(windows), targets.copy()


def build_windows(
    dataset: NormalizedDataset, d: int, gap: int = 0, split: str = "train"
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Windows of every series in ``dataset.train`` (or ``test``) as (window d x dim, target) pairs"""
    series_list = dataset.train if split == "train" else dataset.test
    pairs = []
    for series in series_list:
        windows, targets = series_windows(series.values, d, gap)
        pairs.extend(zip(windows, targets))
    return pairs


def stack_windows(dataset: NormalizedDataset, d: int, gap: int = 0, split: str = "train") -> Tuple[np.ndarray, np.ndarray]:
    """Array form of ``build_windows``: (windows (s, d, dim), targets (s, dim))"""
    series_list = dataset.train if split == "train" else dataset.test
    parts = [series_windows(s.values, d, gap) for s in series_list]
    return np.concatenate([w for w, _ in parts]), np.concatenate([t for _, t in parts])


def two_step_logistic(x, r: float):
    """x_{t+1} as an explicit degree-4 polynomial of x_{t-1}"""
    x = np.asarray(x, dtype=float)
    r2, r3 = r * r, r * r * r
    return -r3 * x**4 + 2.0 * r3 * x**3 - r2 * (1.0 + r) * x**2 + r2 * x


def polynomial_degree(kind: MapKind) -> int:
    """Highest polynomial degree of x_t in x_{t-1}"""
    try:
        return MAP_POLYNOMIAL_DEGREE[MapKind(kind)]
    except (KeyError, ValueError) as e:
        raise ConfigError(f"No polynomial degree known for map kind {kind!r}") from e


def bifurcation_orbit(
    params: MapParams, n_transient: int = 500, n_keep: int = 100, seed: int = 0
) -> np.ndarray:
    """Long-time attractor samples x_inf of the first variable (raw units)"""
    rng = np.random.default_rng(seed)
    initial = sample_initial_state(params, rng)
    series = generate_series(params, initial, n_transient + n_keep)
    return series.values[n_transient:, 0].copy()


def series_to_frame(series_list: List[TimeSeries]) -> pd.DataFrame:
    """Long-format frame with columns series_id, t, x[, y]; t is 1-based"""
    frames = []
    for series_id, series in enumerate(series_list):
        frame = pd.DataFrame({"series_id": series_id, "t": np.arange(1, series.length + 1)})
        frame["x"] = series.values[:, 0]
        if series.dim == 2:
            frame["y"] = series.values[:, 1]
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)
