"""Backtest loop: rolling statistics -> expert positions -> losses -> RWM."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .ensemble import (
    DoublingEnsemble,
    EnsembleState,
    LossMode,
    RegretReport,
    optimal_beta,
    sample_expert,
)
from .errors import CertificationError, DegenerateVolatilityError, InvalidArgumentError, NotEnoughDataError
from .experts import (
    DEFAULT_CAP,
    DEFAULT_WINDOW,
    ExpertSpec,
    ExpertState,
    Position,
    expert_grid,
    return_to_loss,
    rolling_stats,
    round_return,
    s_score,
    step_position,
)
from .market_data import PriceSeries

SCHEMA_VERSION = "rwm-statarb.backtest/1"
DEFAULT_GAMMA1 = (0.25, 0.5, 0.75)
DEFAULT_GAMMA2 = (1.0, 1.25, 1.5)


class HorizonPolicy(str, Enum):
    KNOWN = "known"
    DOUBLING = "doubling"


@dataclass(frozen=True)
class BacktestConfig:
    gamma1_values: tuple[float, ...] = DEFAULT_GAMMA1
    gamma2_values: tuple[float, ...] = DEFAULT_GAMMA2
    window: int = DEFAULT_WINDOW
    loss_mode: LossMode = LossMode.CONTINUOUS
    cap: float = DEFAULT_CAP
    beta: float | None = None
    horizon: HorizonPolicy = HorizonPolicy.KNOWN
    seed: int = 0
    sample: bool = False

    def __post_init__(self):
        object.__setattr__(self, "gamma1_values", tuple(float(g) for g in self.gamma1_values))
        object.__setattr__(self, "gamma2_values", tuple(float(g) for g in self.gamma2_values))
        object.__setattr__(self, "loss_mode", LossMode(self.loss_mode))
        object.__setattr__(self, "horizon", HorizonPolicy(self.horizon))
        if self.beta is not None and not 0.0 < self.beta < 1.0:
            raise InvalidArgumentError(f"beta override must lie in (0, 1), got {self.beta}")
        if self.beta is not None and self.horizon is HorizonPolicy.DOUBLING:
            raise InvalidArgumentError("a beta override cannot be combined with the doubling policy")
        if not self.cap > 0:
            raise InvalidArgumentError(f"cap must be positive, got {self.cap}")
        self.experts()

    def experts(self) -> list[ExpertSpec]:
        return expert_grid(self.gamma1_values, self.gamma2_values, self.window)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma1_values"] = list(self.gamma1_values)
        d["gamma2_values"] = list(self.gamma2_values)
        d["loss_mode"] = self.loss_mode.value
        d["horizon"] = self.horizon.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BacktestConfig":
        return cls(**d)


@dataclass(frozen=True)
class Trade:
    index: int
    timestamp: int
    action: str
    price: float
    s_score: float


@dataclass
class ExpertRecord:
    gamma1: float
    gamma2: float
    cum_loss: float
    cum_return: float
    losses: list[float]
    returns: list[float]
    trades: list[Trade]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trades"] = [asdict(t) for t in self.trades]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExpertRecord":
        d = dict(d)
        d["trades"] = [Trade(**t) for t in d["trades"]]
        return cls(**d)


@dataclass
class CurvePoint:
    t: int
    algo_loss: float
    min_loss: float
    regret: float
    sqrt_bound: float


@dataclass
class BacktestReport:
    config: BacktestConfig
    symbol: str
    final: RegretReport
    curve: list[CurvePoint]
    experts: list[ExpertRecord]
    ensemble: dict
    schema_version: str = SCHEMA_VERSION

    def to_json_dict(self, curve_path: str = "regret_curve.csv") -> dict:
        return {
            "schema_version": self.schema_version,
            "config": {**self.config.to_dict(), "symbol": self.symbol},
            "final": self.final.to_dict(),
            "curve_path": curve_path,
            "experts": [e.to_dict() for e in self.experts],
            "ensemble": self.ensemble,
        }


def _trade_action(before: Position, after: Position) -> str | None:
    if before is after:
        return None
    if before is Position.FLAT:
        return f"open_{after.value}"
    return f"close_{before.value}"


def run_backtest(series: PriceSeries, config: BacktestConfig | None = None) -> BacktestReport:
    """Run every expert and the ensemble over ``series``.

    Round t uses the signal at index k = window - 1 + (t - 1) to set positions,
    then realizes the return from price k to price k + 1. Warm-up indices
    produce no rounds, so T = len(series) - window.
    """
    config = config or BacktestConfig()
    specs = config.experts()
    n = len(specs)
    prices, stamps = series.prices, series.timestamps
    window = config.window
    if len(prices) <= window:
        raise NotEnoughDataError(
            f"series of length {len(prices)} needs more than window={window} observations"
        )
    T = len(prices) - window

    if config.horizon is HorizonPolicy.DOUBLING:
        learner = DoublingEnsemble(n, config.loss_mode)
    else:
        beta = config.beta if config.beta is not None else optimal_beta(n, T)
        learner = EnsembleState(n, beta, config.loss_mode)
    rng = np.random.default_rng(config.seed)

    states = [ExpertState() for _ in specs]
    losses = np.empty((T, n))
    returns = np.empty((T, n))
    trades: list[list[Trade]] = [[] for _ in specs]
    ens_returns, ens_losses, sampled = [], [], []
    curve: list[CurvePoint] = []
    running = np.zeros(n)
    log_n = math.log(n)

    for t in range(T):
        k = window - 1 + t
        price = float(prices[k])
        mean, std = rolling_stats(prices, k, window)
        try:
            s = s_score(price, mean, std)
        except DegenerateVolatilityError:
            s = None
        for i, spec in enumerate(specs):
            if s is not None:
                new = step_position(states[i], s, spec, price)
                action = _trade_action(states[i].position, new.position)
                if action:
                    trades[i].append(Trade(k, int(stamps[k]), action, price, s))
                states[i] = new
            r = round_return(states[i], price, float(prices[k + 1]))
            returns[t, i] = r
            losses[t, i] = return_to_loss(r, config.loss_mode, config.cap)

        dist = learner.distribution
        ens_returns.append(float(np.dot(dist, returns[t])))
        if config.sample:
            j = sample_expert(learner, rng)
            sampled.append(j)
            ens_losses.append(float(losses[t, j]))
        learner.update(losses[t])

        running += losses[t]
        min_loss = float(running.min())
        curve.append(CurvePoint(
            t=t + 1,
            algo_loss=learner.cum_algo_loss,
            min_loss=min_loss,
            regret=learner.cum_algo_loss - min_loss,
            sqrt_bound=min_loss + 2.0 * math.sqrt((t + 1) * log_n),
        ))

    final = learner.regret()
    if (config.loss_mode is LossMode.ZERO_ONE and config.horizon is HorizonPolicy.KNOWN
            and config.beta is None and final.cum_algo_loss > final.bound_sqrt):
        raise CertificationError(
            f"loss {final.cum_algo_loss} exceeds tuned bound {final.bound_sqrt}"
        )

    experts = [
        ExpertRecord(
            gamma1=spec.gamma1,
            gamma2=spec.gamma2,
            cum_loss=float(learner.cum_expert_losses[i]),
            cum_return=math.fsum(returns[:, i]),
            losses=losses[:, i].tolist(),
            returns=returns[:, i].tolist(),
            trades=trades[i],
        )
        for i, spec in enumerate(specs)
    ]
    ensemble = {
        "n_experts": n,
        "horizon": T,
        "cum_return": math.fsum(ens_returns),
        "returns": ens_returns,
        "final_distribution": learner.distribution.tolist(),
    }
    if isinstance(learner, DoublingEnsemble):
        ensemble["epochs"] = [asdict(e) for e in learner.epoch_log()]
    else:
        ensemble["beta"] = learner.beta
    if config.sample:
        ensemble["sampled_experts"] = sampled
        ensemble["sampled_cum_loss"] = math.fsum(ens_losses)
        ensemble["sampled_cum_return"] = math.fsum(returns[t, j] for t, j in enumerate(sampled))
    return BacktestReport(config, series.symbol, final, curve, experts, ensemble)


CURVE_FIELDS = ("t", "algo_loss", "min_loss", "regret", "sqrt_bound")
TRADE_FIELDS = ("expert", "gamma1", "gamma2", "index", "timestamp", "action", "price", "s_score")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def emit_report(report: BacktestReport, directory) -> dict[str, str]:
    """Write report.json, regret_curve.csv and trades.csv into ``directory``."""
    directory = os.fspath(directory)
    paths = {
        "report": os.path.join(directory, "report.json"),
        "curve": os.path.join(directory, "regret_curve.csv"),
        "trades": os.path.join(directory, "trades.csv"),
    }
    try:
        os.makedirs(directory, exist_ok=True)
        with open(paths["curve"], "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(CURVE_FIELDS) + "\n")
            for p in report.curve:
                fh.write(",".join(_fmt(getattr(p, f)) for f in CURVE_FIELDS) + "\n")
        with open(paths["trades"], "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(TRADE_FIELDS) + "\n")
            for i, e in enumerate(report.experts):
                for tr in e.trades:
                    row = (i, e.gamma1, e.gamma2, tr.index, tr.timestamp, tr.action, tr.price, tr.s_score)
                    fh.write(",".join(_fmt(x) for x in row) + "\n")
        # json writes floats with repr(), the shortest exact round-trip form.
        with open(paths["report"], "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(os.path.basename(paths["curve"])), fh,
                      indent=1, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report to {directory}: {exc.strerror}") from exc
    return paths


def load_report(directory) -> BacktestReport:
    directory = os.fspath(directory)
    with open(os.path.join(directory, "report.json"), encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("schema_version") != SCHEMA_VERSION:
        raise InvalidArgumentError(f"unsupported report schema {d.get('schema_version')!r}")
    curve = []
    with open(os.path.join(directory, d["curve_path"]), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            curve.append(CurvePoint(
                t=int(row["t"]), algo_loss=float(row["algo_loss"]), min_loss=float(row["min_loss"]),
                regret=float(row["regret"]), sqrt_bound=float(row["sqrt_bound"]),
            ))
    config = dict(d["config"])
    symbol = config.pop("symbol")
    return BacktestReport(
        config=BacktestConfig.from_dict(config),
        symbol=symbol,
        final=RegretReport.from_dict(d["final"]),
        curve=curve,
        experts=[ExpertRecord.from_dict(e) for e in d["experts"]],
        ensemble=d["ensemble"],
        schema_version=d["schema_version"],
    )
