"""Randomized Weighted Majority over a fixed pool of experts.

The learner keeps one weight per expert, plays the normalized weights as a
distribution, and after each round shrinks the weight of every expert by
``beta ** loss``. With zero-one losses this is exactly "multiply by beta on a
mistake, leave unchanged otherwise".

Weights are never multiplied in place. Each expert's weight is a closed form
of its cumulative loss, ``beta ** L_i``, so the learner stores cumulative
losses and derives log-weights on demand. That keeps the weights exact for
any horizon (no drift, no underflow) and makes the distribution a softmax of
``L_i * log(beta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError

# Upper clamp for optimal_beta when log(n) == 0.
BETA_CEILING = 1.0 - 1e-9


class LossMode(str, Enum):
    ZERO_ONE = "zero_one"
    CONTINUOUS = "continuous"


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise InvalidArgumentError(f"beta must lie in (0, 1), got {beta!r}")
    return beta


def check_losses(losses: Sequence[float] | np.ndarray, n_experts: int, mode: LossMode) -> np.ndarray:
    """Validate one round's loss vector and return it as a float array."""
    arr = np.asarray(losses, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != n_experts:
        raise InvalidArgumentError(
            f"loss vector must have length {n_experts}, got shape {arr.shape}"
        )
    _check_entries(arr, LossMode(mode))
    return arr


def _check_entries(arr: np.ndarray, mode: LossMode) -> None:
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InvalidArgumentError("loss entries must lie in [0, 1]")
    if mode is LossMode.ZERO_ONE and not np.all((arr == 0.0) | (arr == 1.0)):
        raise InvalidArgumentError("zero-one mode requires every loss to be 0 or 1")


def optimal_beta(n: int, horizon: int) -> float:
    """``max(1/2, 1 - sqrt(ln n / horizon))``, clamped below 1.

    For a single expert the formula gives exactly 1, which is not a valid
    learning rate; any beta yields zero regret there, so we return
    ``1 - 1e-9``.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if horizon < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {horizon}")
    beta = max(0.5, 1.0 - math.sqrt(math.log(n) / horizon))
    return min(beta, BETA_CEILING)


def theoretical_bound_general(n: int, beta: float, min_loss: float) -> float:
    """Loss bound valid for any fixed beta in [1/2, 1)."""
    beta = _check_beta(beta)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    return math.log(n) / (1.0 - beta) + (2.0 - beta) * min_loss


def theoretical_bound_sqrt(n: int, horizon: int, min_loss: float) -> float:
    """Loss bound for the horizon-tuned beta: ``min_loss + 2 sqrt(T ln n)``."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if horizon < 0:
        raise InvalidArgumentError(f"horizon must be >= 0, got {horizon}")
    return min_loss + 2.0 * math.sqrt(horizon * math.log(n))


@dataclass(frozen=True)
class RegretReport:
    horizon: int
    cum_algo_loss: float
    min_expert_loss: float
    best_expert_index: int
    regret: float
    bound_general: float | None
    bound_sqrt: float

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "cum_algo_loss": self.cum_algo_loss,
            "min_expert_loss": self.min_expert_loss,
            "best_expert_index": self.best_expert_index,
            "regret": self.regret,
            "bound_general": self.bound_general,
            "bound_sqrt": self.bound_sqrt,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegretReport":
        return cls(**d)


def _regret_report(
    n: int, horizon: int, cum_algo_loss: float, cum_expert_losses: np.ndarray,
    beta: float | None,
) -> RegretReport:
    best = int(np.argmin(cum_expert_losses))
    min_loss = float(cum_expert_losses[best])
    return RegretReport(
        horizon=horizon,
        cum_algo_loss=cum_algo_loss,
        min_expert_loss=min_loss,
        best_expert_index=best,
        regret=cum_algo_loss - min_loss,
        bound_general=None if beta is None else theoretical_bound_general(n, beta, min_loss),
        bound_sqrt=theoretical_bound_sqrt(n, horizon, min_loss),
    )


@dataclass
class RoundTrace:
    """Per-round record of a batched replay.

    ``distributions[k]`` is the distribution played in round k, before that
    round's losses were seen. ``potential_ratio[k]`` is W_{k+1} / W_k computed
    from the explicit weight sums, and ``log_potential`` holds log W_k for
    k = 1 .. T+1.
    """

    distributions: np.ndarray
    expected_losses: np.ndarray
    potential_ratio: np.ndarray
    log_potential: np.ndarray


class EnsembleState:
    """The RWM learner.

    >>> s = EnsembleState(2, 0.5)
    >>> s.update([1, 0])
    0.5
    >>> s.distribution.round(6).tolist()
    [0.333333, 0.666667]
    """

    def __init__(self, n_experts: int, beta: float, loss_mode: LossMode | str = LossMode.CONTINUOUS):
        if int(n_experts) != n_experts or n_experts < 1:
            raise InvalidArgumentError(f"n_experts must be a positive integer, got {n_experts!r}")
        self.n_experts = int(n_experts)
        self.beta = _check_beta(beta)
        self.loss_mode = LossMode(loss_mode)
        self.round = 1
        self.cum_expert_losses = np.zeros(self.n_experts)
        self.cum_algo_loss = 0.0
        self._log_beta = math.log(self.beta)
        self.distribution = np.full(self.n_experts, 1.0 / self.n_experts)

    @property
    def horizon(self) -> int:
        """Rounds played so far (T)."""
        return self.round - 1

    @property
    def log_weights(self) -> np.ndarray:
        return self.cum_expert_losses * self._log_beta

    @property
    def weights(self) -> np.ndarray:
        """Unnormalized weights ``beta ** L_i``; may underflow to 0 on long runs."""
        return np.exp(self.log_weights)

    @property
    def log_potential(self) -> float:
        """log W_t, the log of the weight sum, computed without underflow."""
        lw = self.log_weights
        m = lw.max()
        return float(m + math.log(np.exp(lw - m).sum()))

    def _refresh_distribution(self) -> None:
        lw = self.log_weights
        w = np.exp(lw - lw.max())
        self.distribution = w / w.sum()

    def update(self, losses: Sequence[float] | np.ndarray) -> float:
        """Play one round. Returns the expected loss ``sum_i p_i l_i``."""
        arr = check_losses(losses, self.n_experts, self.loss_mode)
        lo = arr.min()
        # Offset by the round minimum: exact when every expert has the same loss.
        expected = float(lo + np.dot(self.distribution, arr - lo))
        self.cum_algo_loss += expected
        self.cum_expert_losses = self.cum_expert_losses + arr
        self.round += 1
        self._refresh_distribution()
        return expected

    def run(self, matrix: np.ndarray) -> RoundTrace:
        """Play every row of ``matrix`` (T x N) as consecutive rounds.

        Vectorized equivalent of calling :meth:`update` once per row, with
        the explicit potential tracked alongside.
        """
        L = np.asarray(matrix, dtype=float)
        if L.ndim != 2 or L.shape[1] != self.n_experts:
            raise InvalidArgumentError(
                f"loss matrix must have shape (T, {self.n_experts}), got {L.shape}"
            )
        _check_entries(L, self.loss_mode)
        T = L.shape[0]
        if T == 0:
            empty = np.empty(0)
            return RoundTrace(np.empty((0, self.n_experts)), empty, empty,
                              np.array([self.log_potential]))

        cum_after = self.cum_expert_losses + np.cumsum(L, axis=0)
        cum_before = np.vstack([self.cum_expert_losses, cum_after[:-1]])
        lw_before = cum_before * self._log_beta
        lw_after = cum_after * self._log_beta
        # Both sums share the shift of round t, so the ratio is free of scale.
        shift = lw_before.max(axis=1, keepdims=True)
        w_before = np.exp(lw_before - shift)
        w_after = np.exp(lw_after - shift)
        W_before = w_before.sum(axis=1)
        W_after = w_after.sum(axis=1)
        dists = w_before / W_before[:, None]
        lo = L.min(axis=1)
        expected = lo + np.einsum("ij,ij->i", dists, L - lo[:, None])

        log_pot = np.empty(T + 1)
        log_pot[:-1] = shift[:, 0] + np.log(W_before)
        m_last = lw_after[-1].max()
        log_pot[-1] = m_last + math.log(np.exp(lw_after[-1] - m_last).sum())

        for x in expected:
            self.cum_algo_loss += float(x)
        self.cum_expert_losses = cum_after[-1].copy()
        self.round += T
        self._refresh_distribution()
        return RoundTrace(dists, expected, W_after / W_before, log_pot)

    def regret(self) -> RegretReport:
        return _regret_report(
            self.n_experts, self.horizon, self.cum_algo_loss, self.cum_expert_losses, self.beta
        )


def init_ensemble(n: int, beta: float, loss_mode: LossMode | str = LossMode.CONTINUOUS) -> EnsembleState:
    return EnsembleState(n, beta, loss_mode)


def update(state: EnsembleState, losses: Sequence[float] | np.ndarray) -> tuple[EnsembleState, float]:
    """Functional form of :meth:`EnsembleState.update` (mutates ``state``)."""
    expected = state.update(losses)
    return state, expected


def regret(state) -> RegretReport:
    return state.regret()


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_index(distribution: np.ndarray, rng) -> int:
    """Draw an index from ``distribution`` by inverting its CDF at one uniform."""
    u = _as_generator(rng).random()
    cdf = np.cumsum(distribution)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(idx, len(distribution) - 1)


def sample_expert(state, rng) -> int:
    """Sample an expert from the learner's current distribution.

    ``rng`` is a :class:`numpy.random.Generator` (consumed one uniform per
    call) or a seed.
    """
    return sample_index(state.distribution, rng)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    start_round: int
    length: int
    beta: float
    algo_loss: float


class DoublingEnsemble:
    """Horizon-free RWM: epoch k lasts 2**k rounds and runs a fresh learner
    tuned with ``optimal_beta(n, 2**k)``.

    Regret is measured against the best single expert over the whole stream,
    not per epoch.
    """

    def __init__(self, n_experts: int, loss_mode: LossMode | str = LossMode.CONTINUOUS):
        if int(n_experts) != n_experts or n_experts < 1:
            raise InvalidArgumentError(f"n_experts must be a positive integer, got {n_experts!r}")
        self.n_experts = int(n_experts)
        self.loss_mode = LossMode(loss_mode)
        self.cum_expert_losses = np.zeros(self.n_experts)
        self.cum_algo_loss = 0.0
        self.round = 1
        self.epochs: list[EpochRecord] = []
        self._epoch = -1
        self._epoch_start = 1
        self._current: EnsembleState | None = None

    @property
    def horizon(self) -> int:
        return self.round - 1

    def _epoch_full(self) -> bool:
        return self._current is None or self._current.horizon >= 2 ** self._epoch

    def _close_epoch(self) -> None:
        if self._current is not None:
            self.epochs.append(EpochRecord(
                epoch=self._epoch,
                start_round=self._epoch_start,
                length=self._current.horizon,
                beta=self._current.beta,
                algo_loss=self._current.cum_algo_loss,
            ))

    @property
    def beta(self) -> float:
        """Beta of the epoch the next round belongs to."""
        k = self._epoch + 1 if self._epoch_full() else self._epoch
        return optimal_beta(self.n_experts, 2 ** k)

    @property
    def distribution(self) -> np.ndarray:
        if self._epoch_full():
            return np.full(self.n_experts, 1.0 / self.n_experts)
        return self._current.distribution

    def update(self, losses: Sequence[float] | np.ndarray) -> float:
        arr = check_losses(losses, self.n_experts, self.loss_mode)
        if self._epoch_full():
            self._close_epoch()
            self._epoch += 1
            self._epoch_start = self.round
            self._current = EnsembleState(
                self.n_experts, optimal_beta(self.n_experts, 2 ** self._epoch), self.loss_mode
            )
        expected = self._current.update(arr)
        self.cum_algo_loss += expected
        self.cum_expert_losses = self.cum_expert_losses + arr
        self.round += 1
        return expected

    def epoch_log(self) -> list[EpochRecord]:
        """Completed epochs plus the one in progress."""
        log = list(self.epochs)
        if self._current is not None:
            log.append(EpochRecord(self._epoch, self._epoch_start, self._current.horizon,
                                   self._current.beta, self._current.cum_algo_loss))
        return log

    def regret(self) -> RegretReport:
        # No single beta governs the run, so the fixed-beta bound is undefined.
        return _regret_report(
            self.n_experts, self.horizon, self.cum_algo_loss, self.cum_expert_losses, None
        )


def run_doubling(
    n: int, loss_stream: Iterable[Sequence[float]], loss_mode: LossMode | str = LossMode.CONTINUOUS
) -> tuple[RegretReport, list[EpochRecord]]:
    learner = DoublingEnsemble(n, loss_mode)
    for losses in loss_stream:
        learner.update(losses)
    return learner.regret(), learner.epoch_log()
