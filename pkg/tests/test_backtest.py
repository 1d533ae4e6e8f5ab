import json
import math
import statistics

import numpy as np
import pytest

from rwm_statarb.backtest import BacktestConfig, HorizonPolicy, emit_report, load_report, run_backtest
from rwm_statarb.ensemble import LossMode
from rwm_statarb.errors import InvalidArgumentError, NotEnoughDataError
from rwm_statarb.market_data import OuParams, PriceSeries, generate_ou


def series(prices, symbol="T"):
    return PriceSeries(symbol, np.arange(len(prices)) * 60 + 1_700_000_000, prices)


@pytest.fixture(scope="module")
def ou_series():
    return generate_ou(OuParams(theta=2.0, mu_level=0.0, sigma_noise=0.3, x0=0.0, dt=0.01,
                                n_steps=800, seed=17))


def hand_s(window_prices):
    return (window_prices[-1] - statistics.mean(window_prices)) / statistics.stdev(window_prices)


SAWTOOTH = [10, 10, 10, 10, 8, 10, 12, 10, 10, 10]
PRECEDENCE = [10, 10, 10, 10, 8, 14, 14, 14, 14]


class TestTradeLog:
    def test_sawtooth(self):
        cfg = BacktestConfig([0.5], [1.25], window=5)
        rep = run_backtest(series(SAWTOOTH), cfg)
        trades = rep.experts[0].trades
        assert [(t.index, t.action) for t in trades] == [
            (4, "open_long"), (5, "close_long"), (6, "open_short"), (7, "close_short"),
        ]
        for t in trades:
            assert t.s_score == pytest.approx(hand_s(SAWTOOTH[t.index - 4:t.index + 1]), abs=1e-12)
            assert t.price == SAWTOOTH[t.index]
        # hand-traced s-path: -1.789 (< -1.25), 0.447 (> -0.5), 1.414 (> 1.25), 0.0 (< 0.5)
        assert [round(t.s_score, 3) for t in trades] == [-1.789, 0.447, 1.414, 0.0]

    def test_close_before_open(self):
        rep = run_backtest(series(PRECEDENCE), BacktestConfig([0.5], [1.25], window=5))
        trades = rep.experts[0].trades
        assert [(t.index, t.action) for t in trades] == [(4, "open_long"), (5, "close_long")]
        assert trades[1].s_score > 1.25  # would have opened a short if flat

    def test_round_returns_follow_positions(self):
        rep = run_backtest(series(SAWTOOTH), BacktestConfig([0.5], [1.25], window=5))
        # rounds k = 4..8: long over 8->10, flat, short over 12->10, flat, flat
        assert rep.experts[0].returns == pytest.approx([0.25, 0.0, 1 / 6, 0.0, 0.0], abs=1e-15)


class TestDegenerate:
    def test_constant_prices(self):
        rep = run_backtest(series([50.0] * 30), BacktestConfig(window=10))
        assert all(not e.trades for e in rep.experts)
        assert rep.final.regret == 0.0
        np.testing.assert_allclose(rep.ensemble["final_distribution"], [1 / 9] * 9, atol=1e-15)
        assert all(e.losses == [0.5] * 20 for e in rep.experts)

    def test_single_expert(self, ou_series):
        rep = run_backtest(ou_series, BacktestConfig([0.5], [1.25], window=30))
        e = rep.experts[0]
        assert rep.final.regret == 0.0
        assert [p.algo_loss for p in rep.curve] == list(np.cumsum(e.losses))
        assert rep.ensemble["returns"] == e.returns

    def test_too_short(self):
        with pytest.raises(NotEnoughDataError):
            run_backtest(series([1.0] * 5), BacktestConfig(window=5))

    def test_config_validation(self):
        with pytest.raises(InvalidArgumentError):
            BacktestConfig(beta=1.0)
        with pytest.raises(InvalidArgumentError):
            BacktestConfig([2.0], [1.0])
        with pytest.raises(InvalidArgumentError):
            BacktestConfig(beta=0.9, horizon=HorizonPolicy.DOUBLING)


class TestAccounting:
    @pytest.mark.parametrize("mode", list(LossMode))
    def test_curve_consistency(self, ou_series, mode):
        rep = run_backtest(ou_series, BacktestConfig(window=40, loss_mode=mode))
        cum = np.cumsum(np.array([e.losses for e in rep.experts]), axis=1)
        for p in rep.curve:
            mn = cum[:, p.t - 1].min()
            assert p.regret == pytest.approx(p.algo_loss - mn, abs=1e-9)
            assert p.min_loss == pytest.approx(mn, abs=1e-9)
        last = rep.curve[-1]
        assert (last.t, last.algo_loss, last.min_loss, last.regret) == (
            rep.final.horizon, rep.final.cum_algo_loss, rep.final.min_expert_loss, rep.final.regret)

    def test_ensemble_return_identity(self, ou_series):
        """Replays the distribution from expert losses and re-derives sum_t p_t . r_t."""
        rep = run_backtest(ou_series, BacktestConfig(window=40))
        L = np.array([e.losses for e in rep.experts]).T
        R = np.array([e.returns for e in rep.experts]).T
        logb = math.log(rep.ensemble["beta"])
        cum = np.zeros(L.shape[1])
        total = 0.0
        for l, r in zip(L, R):
            w = np.exp((cum - cum.min()) * logb)
            total += float(w @ r / w.sum())
            cum += l
        assert rep.ensemble["cum_return"] == pytest.approx(total, abs=1e-9)

    def test_zero_one_known_horizon_bound(self, ou_series):
        rep = run_backtest(ou_series, BacktestConfig(window=40, loss_mode=LossMode.ZERO_ONE))
        f = rep.final
        assert f.cum_algo_loss <= f.min_expert_loss + 2 * math.sqrt(f.horizon * math.log(9))

    def test_doubling_policy(self, ou_series):
        rep = run_backtest(ou_series, BacktestConfig(window=40, horizon=HorizonPolicy.DOUBLING))
        assert sum(e["length"] for e in rep.ensemble["epochs"]) == rep.final.horizon
        assert rep.final.bound_general is None

    def test_sample_mode(self, ou_series):
        cfg = BacktestConfig(window=40, sample=True, seed=3)
        a, b = run_backtest(ou_series, cfg), run_backtest(ou_series, cfg)
        assert a.ensemble["sampled_experts"] == b.ensemble["sampled_experts"]
        assert len(a.ensemble["sampled_experts"]) == a.final.horizon
        assert 0.0 <= a.ensemble["sampled_cum_loss"] <= a.final.horizon


class TestEmit:
    def test_files_and_round_trip(self, ou_series, tmp_path):
        rep = run_backtest(ou_series, BacktestConfig(window=40))
        paths = emit_report(rep, tmp_path / "out")
        for p in paths.values():
            assert (tmp_path / "out" / p.split("/")[-1]).exists()
        d = json.loads((tmp_path / "out" / "report.json").read_text())
        assert set(d) == {"schema_version", "config", "final", "curve_path", "experts", "ensemble"}
        curve_rows = (tmp_path / "out" / "regret_curve.csv").read_text().strip().splitlines()
        assert curve_rows[0] == "t,algo_loss,min_loss,regret,sqrt_bound"
        assert len(curve_rows) - 1 == rep.final.horizon
        assert load_report(tmp_path / "out") == rep

    def test_trades_csv(self, tmp_path):
        rep = run_backtest(series(SAWTOOTH), BacktestConfig([0.5], [1.25], window=5))
        emit_report(rep, tmp_path)
        lines = (tmp_path / "trades.csv").read_text().splitlines()
        assert len(lines) == 5
        assert lines[1].startswith("0,0.5,1.25,4,")

    def test_unwritable_directory(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        rep = run_backtest(series([50.0] * 12), BacktestConfig(window=10))
        with pytest.raises(OSError, match=str(blocker / "sub")):
            emit_report(rep, blocker / "sub")

    def test_deterministic_bytes(self, ou_series, tmp_path):
        for name in ("a", "b"):
            emit_report(run_backtest(ou_series, BacktestConfig(window=40)), tmp_path / name)
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
