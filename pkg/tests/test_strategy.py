"""Position sizing properties and backtest accounting."""

import numpy as np
import pytest

from mutualae.dataio import SeriesPair
from mutualae.errors import ConfigError, DataError, ShapeError
from mutualae.regimes import PatternLibrary, Profile
from mutualae.strategy import (BacktestResult, backtest, position,
                               theta_from_distances)


# -- theta -----------------------------------------------------------------------

def test_theta_tie_is_half():
    assert theta_from_distances(1.0, 1.0) == 0.5
    assert theta_from_distances(7.3, 7.3) == 0.5


def test_theta_hand_value():
    assert theta_from_distances(1.0, 3.0) == pytest.approx(0.75)
    assert theta_from_distances(3.0, 1.0) == pytest.approx(0.25)


def test_theta_monotone_in_up_distance():
    grid = np.linspace(0.01, 5.0, 50)
    values = [theta_from_distances(d, 2.0) for d in grid]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_theta_bounded():
    rng = np.random.default_rng(0)
    for _ in range(200):
        d_up, d_down = rng.uniform(1e-6, 10.0, 2)
        assert 0.0 < theta_from_distances(d_up, d_down) < 1.0


def test_theta_exact_match_edges():
    assert theta_from_distances(0.0, 2.0) == 1.0
    assert theta_from_distances(2.0, 0.0) == 0.0
    with pytest.warns(UserWarning, match="both"):
        assert theta_from_distances(0.0, 0.0) == 0.5


def test_theta_scale_invariant():
    assert theta_from_distances(1.0, 3.0) == pytest.approx(
        theta_from_distances(10.0, 30.0))


def test_theta_rejects_negative():
    with pytest.raises(ValueError):
        theta_from_distances(-1.0, 1.0)


# -- position --------------------------------------------------------------------

def _toy_library(P: int = 4) -> PatternLibrary:
    up = [Profile(values=np.ones(P), label="up", cluster_id=0, members=5)]
    down = [Profile(values=-np.ones(P), label="down", cluster_id=0, members=5)]
    return PatternLibrary(up=up, down=down, profile_len=P, y_mean=0.0,
                          y_std=1.0, x_mean=0.0, x_std=1.0, horizon=2,
                          n_up=5, n_down=5)


def test_position_prefers_nearer_class():
    lib = _toy_library()
    assert position(np.full(4, 0.9), lib) > 0.5    # close to the up profile
    assert position(np.full(4, -0.9), lib) < 0.5
    assert position(np.zeros(4), lib) == pytest.approx(0.5)


def test_position_exact_profile_match():
    lib = _toy_library()
    assert position(np.ones(4), lib) == 1.0
    assert position(-np.ones(4), lib) == 0.0


def test_position_applies_context_normalization():
    lib = _toy_library()
    lib.x_mean, lib.x_std = 10.0, 2.0
    # raw 12.0 normalizes to 1.0, an exact up match
    assert position(np.full(4, 12.0), lib) == 1.0


def test_position_shape_guard():
    lib = _toy_library()
    with pytest.raises(ShapeError):
        position(np.ones(5), lib)
    with pytest.raises(ShapeError):
        position(np.ones((4, 2)), lib)


# -- backtest --------------------------------------------------------------------

def _segment(x: np.ndarray, y: np.ndarray, h: int = 2) -> SeriesPair:
    n = len(y)
    dates = np.datetime64("2010-01-01") + 7 * np.arange(n)
    return SeriesPair(dates, y, x, context_name="ctx", horizon=h)


def test_backtest_oracle_payoffs():
    # context alternates between the two profiles every 4 steps, so each
    # decision window matches one class exactly and exposure is +1 or -1
    lib = _toy_library(P=4)
    blocks = 6
    x = np.concatenate([np.ones(4) if b % 2 == 0 else -np.ones(4)
                        for b in range(blocks)])
    y = np.linspace(0.01, 0.24, len(x))
    seg = _segment(x, y, h=2)
    res = backtest(seg, lib, step=4)
    np.testing.assert_array_equal(res.times, np.arange(3, 24, 4))
    expected_exposure = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
    np.testing.assert_allclose(res.exposure, expected_exposure)
    np.testing.assert_allclose(res.payoff, expected_exposure * y[res.times],
                               atol=1e-12)
    assert res.total_return == pytest.approx(float(np.sum(res.payoff)))
    assert res.n_trades == 6
    assert res.context_name == "ctx"


def test_backtest_neutral_theta_pays_nothing():
    lib = _toy_library(P=4)
    seg = _segment(np.zeros(20), np.random.default_rng(1).normal(size=20) * 0.01)
    res = backtest(seg, lib)
    np.testing.assert_allclose(res.theta, 0.5, atol=1e-12)
    np.testing.assert_allclose(res.payoff, 0.0, atol=1e-12)
    assert res.total_return == 0.0
    assert res.max_drawdown == 0.0


def test_backtest_sign_flip_negates_pnl():
    lib = _toy_library(P=4)
    rng = np.random.default_rng(2)
    x = np.sign(rng.normal(size=30)) * 0.8
    y = rng.normal(size=30) * 0.02
    up = backtest(_segment(x, y), lib)
    down = backtest(_segment(-x, y), lib)
    np.testing.assert_allclose(up.payoff, -down.payoff, atol=1e-12)
    assert up.total_return == pytest.approx(-down.total_return)


def test_backtest_cost_charges_turnover():
    lib = _toy_library(P=4)
    x = np.concatenate([np.ones(4), -np.ones(4), np.ones(4)])
    y = np.zeros(12)
    res = backtest(_segment(x, y), lib, step=4, cost=0.01)
    # entering costs |1 - 0|, each flip costs |±2|
    np.testing.assert_allclose(res.payoff, [-0.01, -0.02, -0.02], atol=1e-12)
    assert res.total_return == pytest.approx(-0.05)


def test_backtest_default_step_is_horizon():
    lib = _toy_library(P=4)
    seg = _segment(np.ones(21), np.zeros(21), h=3)
    res = backtest(seg, lib)
    assert np.all(np.diff(res.times) == 3)


def test_backtest_drawdown_and_hit_rate():
    lib = _toy_library(P=2)
    lib.profile_len = 2
    for p in lib.up + lib.down:
        p.values = p.values[:2]
    x = np.concatenate([np.ones(2), np.ones(2), -np.ones(2), np.ones(2)])
    y = np.array([0, 0.10, 0, 0.05, 0, 0.02, 0, 0.04])
    # decisions at t=1,3,5,7 with exposures +1,+1,-1,+1
    res = backtest(_segment(x, y, h=2), lib, step=2)
    np.testing.assert_allclose(res.payoff, [0.10, 0.05, -0.02, 0.04], atol=1e-12)
    assert res.max_drawdown == pytest.approx(0.02)
    assert res.hit_rate == pytest.approx(0.75)


def test_backtest_requires_horizon():
    lib = _toy_library()
    seg = _segment(np.ones(30), np.zeros(30), h=0)
    with pytest.raises(ConfigError, match="horizon"):
        backtest(seg, lib)


def test_backtest_requires_enough_data():
    lib = _toy_library(P=4)
    seg = _segment(np.ones(5), np.zeros(5), h=2)
    with pytest.raises(DataError, match="at least"):
        backtest(seg, lib)


def test_backtest_never_reads_past_decision_time():
    # perturbing data strictly after a decision's payoff interval must not
    # change that decision or its payoff
    lib = _toy_library(P=4)
    rng = np.random.default_rng(3)
    x = rng.normal(size=40)
    y = rng.normal(size=40) * 0.01
    base = backtest(_segment(x, y, h=2), lib, step=2)
    cut = base.times[len(base.times) // 2]
    x2, y2 = x.copy(), y.copy()
    x2[cut + 1:] = 99.0
    y2[cut + 1:] = -99.0
    bent = backtest(_segment(x2, y2, h=2), lib, step=2)
    keep = base.times <= cut
    np.testing.assert_array_equal(base.theta[keep], bent.theta[keep])
    np.testing.assert_array_equal(base.payoff[keep], bent.payoff[keep])
