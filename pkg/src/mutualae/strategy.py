"""Distance-based position sizing and a non-overlapping rebalance backtest.

For a trailing context window the aggregate inverse-distance weight of
the "up" profiles against the "down" profiles gives the long probability
theta; exposure is 2 * theta - 1 in [-1, 1].  The backtest rebalances
every h steps on held-out data, pays the realized forward return times
the exposure, and never reads anything later than the decision time.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .dataio import SeriesPair
from .errors import ConfigError, DataError, ShapeError
from .regimes import PatternLibrary, profile_distance


def theta_from_distances(d_up: float, d_down: float) -> float:
    """Long weight from aggregate class distances.

    Inverse-distance weighting, algebraically d_down / (d_up + d_down).
    Ties at zero mean the window matches both classes exactly; that is
    reported as a neutral 0.5 with a warning.
    """
    if d_up < 0 or d_down < 0:
        raise ValueError("distances must be non-negative")
    if d_up == 0.0 and d_down == 0.0:
        warnings.warn("window matches both profile classes exactly; "
                      "returning neutral weight", stacklevel=2)
        return 0.5
    if d_up == 0.0:
        return 1.0
    if d_down == 0.0:
        return 0.0
    return d_down / (d_up + d_down)


def position(x_window_raw: np.ndarray, library: PatternLibrary) -> float:
    """Long weight for one trailing raw-unit context window."""
    x_window_raw = np.asarray(x_window_raw, dtype=np.float64)
    if x_window_raw.ndim != 1 or len(x_window_raw) != library.profile_len:
        raise ShapeError(
            f"expected a 1-d window of length {library.profile_len}, "
            f"got shape {x_window_raw.shape}")
    xz = library.normalize_context(x_window_raw)
    d_up = sum(profile_distance(xz, p) for p in library.up)
    d_down = sum(profile_distance(xz, p) for p in library.down)
    return theta_from_distances(d_up, d_down)


@dataclass
class BacktestResult:
    """Per-rebalance decisions and the usual summary numbers."""

    times: np.ndarray          # decision indices into the evaluated segment
    dates: np.ndarray
    theta: np.ndarray
    exposure: np.ndarray
    payoff: np.ndarray         # exposure * realized forward return, net of cost
    cumulative: np.ndarray
    total_return: float
    max_drawdown: float
    hit_rate: float
    n_trades: int
    context_name: str = "x"

    def summary(self) -> dict:
        return {"total_return": self.total_return,
                "max_drawdown": self.max_drawdown,
                "hit_rate": self.hit_rate,
                "n_trades": self.n_trades,
                "context_name": self.context_name}


def backtest(segment: SeriesPair, library: PatternLibrary,
             step: int | None = None, cost: float = 0.0) -> BacktestResult:
    """Trade a held-out segment against a pattern library.

    Decisions happen every ``step`` observations (default: the target
    horizon, so payoff intervals do not overlap).  At decision time t the
    strategy sees x[t - P + 1 .. t] only; the payoff books exposure times
    y[t], the forward return already aligned at t.  ``cost`` charges
    proportional turnover |e_t - e_{t-1}| per rebalance.
    """
    P = library.profile_len
    h = segment.horizon
    if h < 1:
        raise ConfigError(
            f"backtest needs a forward horizon >= 1, segment has h={h}")
    if step is None:
        step = h
    if step < 1:
        raise ConfigError(f"step must be >= 1, got {step}")
    if cost < 0:
        raise ConfigError(f"cost must be >= 0, got {cost}")
    if len(segment) < P + h:
        raise DataError(
            f"segment has {len(segment)} samples, need at least "
            f"profile_len + horizon = {P + h}")

    times = np.arange(P - 1, len(segment), step)
    theta = np.empty(len(times))
    for i, t in enumerate(times):
        theta[i] = position(segment.x[t - P + 1: t + 1], library)
    exposure = 2.0 * theta - 1.0
    turnover = np.abs(np.diff(exposure, prepend=0.0))
    payoff = exposure * segment.y[times] - cost * turnover
    cumulative = np.cumsum(payoff)
    peaks = np.maximum.accumulate(cumulative)
    max_dd = float(np.max(peaks - cumulative)) if len(cumulative) else 0.0
    hit = float(np.mean(payoff > 0)) if len(payoff) else 0.0
    return BacktestResult(times=times, dates=segment.dates[times], theta=theta,
                          exposure=exposure, payoff=payoff, cumulative=cumulative,
                          total_return=float(np.sum(payoff)), max_drawdown=max_dd,
                          hit_rate=hit, n_trades=len(times),
                          context_name=segment.context_name)


@dataclass
class SweepPairResult:
    """Outcome of training one context pair end to end."""

    context_a: str
    context_b: str
    duplicate: bool
    backtest_a: BacktestResult
    backtest_b: BacktestResult
    agreement_final: float

    @property
    def combined_return(self) -> float:
        return self.backtest_a.total_return + self.backtest_b.total_return


def _sweep_one(job):
    from .pipeline import run_pair   # deferred; pipeline builds on this module

    a, b, settings, seed = job
    duplicate = np.array_equal(a.x, b.x)
    outcome = run_pair(a, b, settings, seed=seed)
    return SweepPairResult(
        context_a=a.context_name, context_b=b.context_name,
        duplicate=duplicate, backtest_a=outcome.backtest_a,
        backtest_b=outcome.backtest_b,
        agreement_final=outcome.result.agreement[-1].level)


def pair_sweep(contexts: list, settings, seed: int = 0, workers: int = 1) -> list:
    """Train and evaluate every unordered context pair.

    ``contexts`` are SeriesPair views sharing one target; ``settings`` is
    a pipeline RunSettings.  Pairs whose context values are identical are
    flagged as duplicates and still evaluated (a useful control: the two
    networks then differ only in architecture and initialization).  Each
    pair owns a derived seed, so results do not depend on ``workers`` and
    come back in combination order either way.
    """
    if len(contexts) < 2:
        raise DataError("pair sweep needs at least two context series")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    names = [c.context_name for c in contexts]
    if len(set(names)) != len(names):
        raise ConfigError(f"context names must be unique, got {names}")

    jobs = [(a, b, settings, seed + 7919 * (i * len(contexts) + j))
            for (i, a), (j, b) in itertools.combinations(enumerate(contexts), 2)]
    if workers == 1:
        return [_sweep_one(job) for job in jobs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_one, jobs))
