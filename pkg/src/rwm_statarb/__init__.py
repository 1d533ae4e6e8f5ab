"""Randomized Weighted Majority over s-score mean-reversion experts."""
from .backtest import BacktestConfig, BacktestReport, HorizonPolicy, emit_report, load_report, run_backtest
from .ensemble import (
    DoublingEnsemble,
    EnsembleState,
    LossMode,
    RegretReport,
    init_ensemble,
    optimal_beta,
    run_doubling,
    sample_expert,
    theoretical_bound_general,
    theoretical_bound_sqrt,
)
from .errors import (
    CertificationError,
    DataFormatError,
    DegenerateVolatilityError,
    InvalidArgumentError,
    NotEnoughDataError,
)
from .experts import ExpertSpec, ExpertState, Position, expert_grid, return_to_loss, round_return, s_score, step_position
from .market_data import OuParams, PriceSeries, generate_ou, load_csv, save_csv
from .verify import LossMatrix, brute_force_best, certify, generate_losses

__version__ = "0.1.0"

__all__ = [
    "BacktestConfig",
    "BacktestReport",
    "HorizonPolicy",
    "emit_report",
    "load_report",
    "run_backtest",
    "DoublingEnsemble",
    "EnsembleState",
    "LossMode",
    "RegretReport",
    "init_ensemble",
    "optimal_beta",
    "run_doubling",
    "sample_expert",
    "theoretical_bound_general",
    "theoretical_bound_sqrt",
    "CertificationError",
    "DataFormatError",
    "DegenerateVolatilityError",
    "InvalidArgumentError",
    "NotEnoughDataError",
    "ExpertSpec",
    "ExpertState",
    "Position",
    "expert_grid",
    "return_to_loss",
    "round_return",
    "s_score",
    "step_position",
    "OuParams",
    "PriceSeries",
    "generate_ou",
    "load_csv",
    "save_csv",
    "LossMatrix",
    "brute_force_best",
    "certify",
    "generate_losses",
]
