"""Command-line entry point: simulate / backtest / verify / sweep.

Exit codes: 0 success, 1 invalid arguments or input, 2 runtime or I/O
failure, 3 a certified bound was violated.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys

import numpy as np

from .backtest import DEFAULT_GAMMA1, DEFAULT_GAMMA2, BacktestConfig, HorizonPolicy, emit_report, run_backtest
from .ensemble import LossMode
from .errors import CertificationError, InvalidArgumentError
from .experts import DEFAULT_CAP, DEFAULT_WINDOW
from .market_data import OuParams, generate_ou, load_csv, save_csv
from .verify import AdversarialAlternating, IidBernoulli, SingleGoodExpert, certify_sweep

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_CERT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; the contract reserves 2 for runtime errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _emit(payload: dict) -> None:
    print(json.dumps(payload, separators=(",", ":"), allow_nan=False))


def _add_ou_flags(p: argparse.ArgumentParser, required: bool = False) -> None:
    g = p.add_argument_group("OU series")
    g.add_argument("--theta", type=float, default=0.5, help="mean-reversion speed (default: %(default)s)")
    g.add_argument("--mu", type=float, default=0.0, help="long-run log level (default: %(default)s)")
    g.add_argument("--sigma", type=float, default=0.1, help="volatility (default: %(default)s)")
    g.add_argument("--x0", type=float, default=0.0, help="initial log level (default: %(default)s)")
    g.add_argument("--dt", type=float, default=0.01, help="time step (default: %(default)s)")
    g.add_argument("--steps", type=int, default=2000, help="number of observations (default: %(default)s)")


def _ou_params(args) -> OuParams:
    return OuParams(theta=args.theta, mu_level=args.mu, sigma_noise=args.sigma, x0=args.x0,
                    dt=args.dt, n_steps=args.steps, seed=args.seed)


def _add_backtest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW, help="rolling window (default: %(default)s)")
    p.add_argument("--loss-mode", choices=[m.value for m in LossMode], default=LossMode.CONTINUOUS.value,
                   help="expert loss mapping (default: %(default)s)")
    p.add_argument("--cap", type=float, default=DEFAULT_CAP, help="return cap for continuous loss (default: %(default)s)")
    p.add_argument("--horizon", choices=[h.value for h in HorizonPolicy], default=HorizonPolicy.KNOWN.value,
                   help="beta policy (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rwm-statarb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a seeded OU price series to CSV")
    _add_ou_flags(p)
    p.add_argument("--seed", type=int, default=0, help="generator seed (default: %(default)s)")
    p.add_argument("--symbol", default="OU", help="series label (default: %(default)s)")
    p.add_argument("-o", "--output", required=True, help="output CSV path")

    p = sub.add_parser("backtest", help="run the RWM ensemble over a price CSV")
    p.add_argument("-i", "--input", required=True, help="input CSV (timestamp,price)")
    p.add_argument("--price-column", default="price", help="price column name (default: %(default)s)")
    p.add_argument("--gamma1", type=float, nargs="+", default=list(DEFAULT_GAMMA1),
                   help="close thresholds (default: %(default)s)")
    p.add_argument("--gamma2", type=float, nargs="+", default=list(DEFAULT_GAMMA2),
                   help="open thresholds (default: %(default)s)")
    _add_backtest_flags(p)
    p.add_argument("--beta", type=float, default=None, help="fixed beta instead of the tuned value (default: tuned)")
    p.add_argument("--sample", action="store_true", help="also record sampled single-expert play")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default: %(default)s)")
    p.add_argument("-o", "--output", required=True, help="report directory")

    p = sub.add_parser("verify", help="certify the loss bounds on generated loss matrices")
    p.add_argument("--kind", choices=["bernoulli", "single-good", "alternating"], default="bernoulli",
                   help="loss generator (default: %(default)s)")
    p.add_argument("-p", type=float, default=0.5, help="Bernoulli loss probability (default: %(default)s)")
    p.add_argument("--p-good", type=float, default=0.1, help="best expert loss probability (default: %(default)s)")
    p.add_argument("--p-bad", type=float, default=0.5, help="other experts' loss probability (default: %(default)s)")
    p.add_argument("-n", type=int, default=10, help="number of experts (default: %(default)s)")
    p.add_argument("-t", type=int, default=1000, help="rounds per matrix (default: %(default)s)")
    p.add_argument("--trials", type=int, default=1, help="matrices to certify (default: %(default)s)")
    p.add_argument("--beta", type=float, default=None, help="fixed beta (default: tuned)")
    p.add_argument("--seed", type=int, default=0, help="sweep seed (default: %(default)s)")
    p.add_argument("--json", dest="json_path", default=None, help="write certificates to this JSON file")

    p = sub.add_parser("sweep", help="regret versus expert-pool size on one series")
    p.add_argument("-i", "--input", default=None, help="input CSV; a seeded OU series when omitted")
    p.add_argument("--price-column", default="price", help="price column name (default: %(default)s)")
    _add_ou_flags(p)
    p.add_argument("--sizes", type=int, nargs="+", default=[1, 9, 81],
                   help="pool sizes, each a perfect square k*k (default: %(default)s)")
    p.add_argument("--gamma1", type=float, nargs="+", default=[round(0.1 * i, 10) for i in range(1, 10)],
                   help="candidate close thresholds (default: %(default)s)")
    p.add_argument("--gamma2", type=float, nargs="+", default=[round(1.0 + 0.2 * i, 10) for i in range(9)],
                   help="candidate open thresholds (default: %(default)s)")
    _add_backtest_flags(p)
    p.add_argument("--seed", type=int, default=0, help="OU seed (default: %(default)s)")
    p.add_argument("-o", "--output", required=True, help="output CSV path")
    return parser


def cmd_simulate(args) -> int:
    series = generate_ou(_ou_params(args), symbol=args.symbol)
    save_csv(series, args.output)
    _emit({"command": "simulate", "output": args.output, "length": len(series)})
    return EXIT_OK


def cmd_backtest(args) -> int:
    config = BacktestConfig(
        gamma1_values=args.gamma1, gamma2_values=args.gamma2, window=args.window,
        loss_mode=args.loss_mode, cap=args.cap, beta=args.beta, horizon=args.horizon,
        seed=args.seed, sample=args.sample,
    )
    series = load_csv(args.input, args.price_column)
    report = run_backtest(series, config)
    emit_report(report, args.output)
    f = report.final
    _emit({
        "command": "backtest", "n_experts": len(report.experts), "horizon": f.horizon,
        "regret": f.regret, "algo_loss": f.cum_algo_loss, "min_loss": f.min_expert_loss,
        "bound_sqrt": f.bound_sqrt, "output": args.output,
    })
    return EXIT_OK


def _loss_kind(args):
    if args.kind == "bernoulli":
        return IidBernoulli(args.p)
    if args.kind == "single-good":
        return SingleGoodExpert(args.p_good, args.p_bad)
    return AdversarialAlternating()


def cmd_verify(args) -> int:
    certs = certify_sweep(_loss_kind(args), args.n, args.t, args.trials, args.seed, args.beta)
    ok = sum(c.satisfied for c in certs)
    payload = {
        "command": "verify", "trials": len(certs), "satisfied": ok,
        "status": f"{ok}/{len(certs)} satisfied",
        "max_potential_residual": max(c.max_potential_residual for c in certs),
        "max_regret": max(c.regret for c in certs),
        "min_expert_loss": [c.min_expert_loss for c in certs] if len(certs) <= 10 else None,
    }
    if args.json_path:
        with open(args.json_path, "w", encoding="utf-8") as fh:
            json.dump([c.to_dict() for c in certs], fh, indent=1)
    _emit(payload)
    return EXIT_OK if ok == len(certs) else EXIT_CERT


def _evenly_spaced(values: list[float], k: int) -> list[float]:
    values = sorted(values)
    if k > len(values):
        raise InvalidArgumentError(f"need {k} thresholds but only {len(values)} were given")
    if k == 1:
        return [values[(len(values) - 1) // 2]]
    idx = np.linspace(0, len(values) - 1, k).round().astype(int)
    return [values[i] for i in idx]


def cmd_sweep(args) -> int:
    if args.input:
        series = load_csv(args.input, args.price_column)
    else:
        series = generate_ou(_ou_params(args))
    rows = []
    for size in args.sizes:
        k = math.isqrt(size) if size > 0 else 0
        if size < 1 or k * k != size:
            raise InvalidArgumentError(f"pool size must be a positive perfect square, got {size}")
        config = BacktestConfig(
            gamma1_values=_evenly_spaced(args.gamma1, k), gamma2_values=_evenly_spaced(args.gamma2, k),
            window=args.window, loss_mode=args.loss_mode, cap=args.cap, horizon=args.horizon, seed=args.seed,
        )
        report = run_backtest(series, config)
        n, T = len(report.experts), report.final.horizon
        rows.append((n, T, report.final.regret, 2.0 * math.sqrt(T * math.log(n))))
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_experts", "horizon", "regret", "regret_bound"])
        for n, T, r, b in rows:
            w.writerow([n, T, f"{r:.17g}", f"{b:.17g}"])
    _emit({"command": "sweep", "output": args.output,
           "rows": [{"n_experts": n, "regret": r, "regret_bound": b} for n, _, r, b in rows]})
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "backtest": cmd_backtest, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except CertificationError as exc:
        log.error("%s", exc)
        return EXIT_CERT
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
