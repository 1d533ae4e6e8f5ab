"""Certification of the RWM loss bounds on explicit loss matrices.

Two independent routes are kept apart on purpose:

* :func:`brute_force_best` sums matrix columns directly and never touches
  the learner's incremental bookkeeping.
* :func:`replay_literal` is a line-by-line transcription of the weighted
  majority pseudocode on plain Python floats, used to cross-check the
  vectorized learner on small instances.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np

from .ensemble import EnsembleState, LossMode, optimal_beta, theoretical_bound_general, theoretical_bound_sqrt
from .errors import InvalidArgumentError

POTENTIAL_RESIDUAL_TOL = 1e-12
FLOAT_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LossMatrix:
    values: np.ndarray
    mode: LossMode = LossMode.ZERO_ONE

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mode", LossMode(self.mode))
        if v.ndim != 2:
            raise InvalidArgumentError(f"loss matrix must be 2-d, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise InvalidArgumentError("loss entries must lie in [0, 1]")
        if self.mode is LossMode.ZERO_ONE and not np.all((v == 0) | (v == 1)):
            raise InvalidArgumentError("zero-one matrix has non-binary entries")

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def n_experts(self) -> int:
        return self.values.shape[1]


def brute_force_best(matrix: LossMatrix | np.ndarray) -> tuple[int, float]:
    """Best expert in hindsight by direct column summation; ties go to the lowest index."""
    v = matrix.values if isinstance(matrix, LossMatrix) else np.asarray(matrix, dtype=float)
    if v.ndim != 2 or v.size == 0:
        raise InvalidArgumentError("brute_force_best needs a non-empty 2-d matrix")
    totals = [math.fsum(v[:, j]) for j in range(v.shape[1])]
    best = min(range(len(totals)), key=lambda j: (totals[j], j))
    return best, totals[best]


def replay_literal(matrix: LossMatrix | np.ndarray, beta: float) -> dict:
    """Weighted majority exactly as written in pseudocode, zero-one losses only.

    Returns the final weights, per-round distributions and expected losses,
    and the weight sums W_1 .. W_{T+1}. Slow; meant for small matrices.
    """
    v = matrix.values if isinstance(matrix, LossMatrix) else np.asarray(matrix, dtype=float)
    T, N = v.shape
    w = [1.0] * N
    p = [1.0 / N] * N
    dists, expected, potentials = [], [], [float(N)]
    for t in range(T):
        dists.append(list(p))
        expected.append(sum(p[i] * v[t, i] for i in range(N)))
        for i in range(N):
            if v[t, i] == 1:
                w[i] = beta * w[i]
        W = sum(w)
        potentials.append(W)
        p = [w[i] / W for i in range(N)]
    return {"weights": w, "distributions": dists, "expected_losses": expected, "potentials": potentials}


@dataclass(frozen=True)
class BoundCertificate:
    horizon: int
    n_experts: int
    beta: float
    beta_is_tuned: bool
    algo_loss: float
    min_expert_loss: float
    best_expert_index: int
    bound_general: float
    bound_sqrt: float
    general_satisfied: bool
    sqrt_satisfied: bool
    lower_bound_satisfied: bool
    max_potential_residual: float
    min_potential_slack: float
    algo_loss_residual: float
    oracle_residual: float

    @property
    def regret(self) -> float:
        return self.algo_loss - self.min_expert_loss

    @property
    def satisfied(self) -> bool:
        """Every proven inequality held. The horizon-tuned bound only counts
        when beta was the tuned value."""
        return (
            self.general_satisfied
            and (self.sqrt_satisfied or not self.beta_is_tuned)
            and self.lower_bound_satisfied
            and self.max_potential_residual <= POTENTIAL_RESIDUAL_TOL
            and self.algo_loss_residual <= FLOAT_RESIDUAL_TOL
            and self.oracle_residual <= FLOAT_RESIDUAL_TOL
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regret"] = self.regret
        d["satisfied"] = self.satisfied
        return d


def certify(matrix: LossMatrix, beta: float | None = None) -> BoundCertificate:
    """Replay RWM over ``matrix`` and check the loss bounds and potential identity.

    The bound comparisons are exact. Floating-point discrepancies (the
    potential identity, loss re-summation, oracle agreement) are recorded as
    residuals and judged against fixed tolerances.
    """
    if not isinstance(matrix, LossMatrix):
        raise InvalidArgumentError("certify expects a LossMatrix")
    if matrix.mode is not LossMode.ZERO_ONE:
        raise InvalidArgumentError("certify requires a zero-one loss matrix")
    T, N = matrix.values.shape
    if T == 0 or N == 0:
        raise InvalidArgumentError("certify needs a non-empty matrix")
    tuned = optimal_beta(N, T)
    if beta is None:
        beta = tuned

    state = EnsembleState(N, beta, LossMode.ZERO_ONE)
    trace = state.run(matrix.values)
    report = state.regret()

    best, oracle_min = brute_force_best(matrix)
    oracle_totals = matrix.values.sum(axis=0)
    oracle_residual = float(np.max(np.abs(state.cum_expert_losses - oracle_totals)))
    oracle_residual = max(oracle_residual, abs(report.min_expert_loss - oracle_min))

    algo_loss = state.cum_algo_loss
    algo_loss_residual = abs(algo_loss - math.fsum(trace.expected_losses)) / max(1.0, algo_loss)

    predicted = 1.0 - (1.0 - beta) * trace.expected_losses
    residual = float(np.max(np.abs(trace.potential_ratio - predicted)))

    # W_{T+1} >= max_i w_i = beta ** L_min, in log space.
    slack = float(trace.log_potential[-1] - oracle_min * math.log(beta))

    bound_general = theoretical_bound_general(N, beta, oracle_min)
    bound_sqrt = theoretical_bound_sqrt(N, T, oracle_min)
    return BoundCertificate(
        horizon=T,
        n_experts=N,
        beta=beta,
        beta_is_tuned=beta == tuned,
        algo_loss=algo_loss,
        min_expert_loss=oracle_min,
        best_expert_index=best,
        bound_general=bound_general,
        bound_sqrt=bound_sqrt,
        general_satisfied=algo_loss <= bound_general,
        sqrt_satisfied=algo_loss <= bound_sqrt,
        lower_bound_satisfied=slack >= 0.0,
        max_potential_residual=residual,
        min_potential_slack=slack,
        algo_loss_residual=algo_loss_residual,
        oracle_residual=oracle_residual,
    )


@dataclass(frozen=True)
class IidBernoulli:
    p: float


@dataclass(frozen=True)
class SingleGoodExpert:
    """Expert 0 errs with probability ``p_good``, every other with ``p_bad``."""

    p_good: float
    p_bad: float


@dataclass(frozen=True)
class AdversarialAlternating:
    """Expert i errs exactly in rounds t with t mod N == i (t from 0)."""


LossKind = Union[IidBernoulli, SingleGoodExpert, AdversarialAlternating]


def _check_prob(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"{name} must lie in [0, 1], got {p}")


def generate_losses(kind: LossKind, n: int, t: int, seed=0) -> LossMatrix:
    if n < 1 or t < 0:
        raise InvalidArgumentError(f"need n >= 1 and t >= 0, got n={n}, t={t}")
    rng = np.random.default_rng(seed)
    if isinstance(kind, IidBernoulli):
        _check_prob("p", kind.p)
        values = rng.random((t, n)) < kind.p
    elif isinstance(kind, SingleGoodExpert):
        _check_prob("p_good", kind.p_good)
        _check_prob("p_bad", kind.p_bad)
        probs = np.full(n, kind.p_bad)
        probs[0] = kind.p_good
        values = rng.random((t, n)) < probs
    elif isinstance(kind, AdversarialAlternating):
        values = (np.arange(t)[:, None] % n) == np.arange(n)[None, :]
    else:
        raise InvalidArgumentError(f"unknown loss generator {kind!r}")
    return LossMatrix(values.astype(float), LossMode.ZERO_ONE)


def certify_sweep(kind: LossKind, n: int, t: int, trials: int, seed=0, beta: float | None = None) -> list[BoundCertificate]:
    """Certify ``trials`` independently seeded matrices from one generator."""
    if trials < 1:
        raise InvalidArgumentError(f"trials must be >= 1, got {trials}")
    children = np.random.SeedSequence(seed).spawn(trials)
    return [certify(generate_losses(kind, n, t, child), beta) for child in children]
