"""Krichevsky-Trofimov estimator and the per-arm KT environment model.

All probabilities are carried as base-2 logarithms ("bits", denoted lb).
``LogProb`` is a plain float holding lb(p); it is <= 0 for any marginal of a
realized sequence. Conversions back to linear scale happen only at output
boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArm, InvalidLength

LogProb = float

_LOG2_PI = math.log2(math.pi)
_INV_LN2 = 1.0 / math.log(2.0)


@dataclass
class KtStats:
    """Sufficient statistic of one KT estimator: counts of 0s and 1s."""

    zeros: int = 0
    ones: int = 0

    @property
    def total(self) -> int:
        return self.zeros + self.ones

    def copy(self) -> "KtStats":
        return KtStats(self.zeros, self.ones)


@dataclass
class KteState:
    """One independent KT estimator per arm (arms are 1-based)."""

    num_arms: int
    per_arm: list[KtStats] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.per_arm:
            self.per_arm = [KtStats() for _ in range(self.num_arms)]
        if len(self.per_arm) != self.num_arms:
            raise ValueError("per_arm length must equal num_arms")

    def stats(self, arm: int) -> KtStats:
        _check_arm(arm, self.num_arms)
        return self.per_arm[arm - 1]

    @property
    def total(self) -> int:
        return sum(s.total for s in self.per_arm)

    def copy(self) -> "KteState":
        return KteState(self.num_arms, [s.copy() for s in self.per_arm])


def _check_arm(arm: int, num_arms: int) -> None:
    if not 1 <= arm <= num_arms:
        raise InvalidArm(f"arm {arm} outside 1..{num_arms}")


def _check_symbol(symbol: int) -> None:
    if symbol not in (0, 1):
        raise ValueError(f"symbol must be 0 or 1, got {symbol!r}")


def kt_predict(stats: KtStats, symbol: int) -> LogProb:
    """lb of the sequential KT predictive probability (count + 1/2) / (n + 1)."""
    _check_symbol(symbol)
    num = (stats.ones if symbol else stats.zeros) + 0.5
    return math.log2(num / (stats.total + 1))


def kt_update(stats: KtStats, symbol: int) -> KtStats:
    """Return a new KtStats with the matching count incremented."""
    _check_symbol(symbol)
    if symbol:
        return KtStats(stats.zeros, stats.ones + 1)
    return KtStats(stats.zeros + 1, stats.ones)


def kt_log_marginal(stats: KtStats) -> LogProb:
    """lb of the closed-form KT marginal B(zeros + 1/2, ones + 1/2) / pi.

    Computed via log-Gamma; agrees with the sequential product of
    :func:`kt_predict` to well under 1e-9 bits.
    """
    a = stats.zeros + 0.5
    b = stats.ones + 0.5
    lg = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return lg * _INV_LN2 - _LOG2_PI


def kt_posterior_mean(stats: KtStats) -> float:
    """Posterior mean (ones + 1/2) / (n + 1) of the latent success probability."""
    return (stats.ones + 0.5) / (stats.total + 1)


def kt_posterior_sample(stats: KtStats, rng: np.random.Generator) -> float:
    """Draw from the Beta(ones + 1/2, zeros + 1/2) posterior."""
    return float(rng.beta(stats.ones + 0.5, stats.zeros + 0.5))


def kte_predict(state: KteState, arm: int, symbol: int) -> LogProb:
    """Predictive lb-probability of ``symbol`` under the given arm's estimator."""
    return kt_predict(state.stats(arm), symbol)


def kte_update(state: KteState, arm: int, symbol: int) -> KteState:
    """Return a new KteState with only the given arm's estimator advanced."""
    _check_arm(arm, state.num_arms)
    per_arm = list(state.per_arm)
    per_arm[arm - 1] = kt_update(per_arm[arm - 1], symbol)
    return KteState(state.num_arms, per_arm)


def kte_log_marginal(state: KteState) -> LogProb:
    """lb of the product of per-arm KT marginals."""
    return sum(kt_log_marginal(s) for s in state.per_arm)


def kt_redundancy_bound(n: int) -> float:
    """Worst-case excess bits of KT over the best Bernoulli model: lb(n)/2 + 1."""
    if n < 1:
        raise InvalidLength(f"n must be >= 1, got {n}")
    return 0.5 * math.log2(n) + 1.0


def kte_redundancy_bound(n: int, used_arms: int) -> float:
    """Worst-case excess bits of the per-arm KT model over the true bandit.

    ``used_arms`` is the number of distinct arms pulled at least once.
    """
    if n < 1:
        raise InvalidLength(f"n must be >= 1, got {n}")
    if not 1 <= used_arms <= n:
        raise InvalidLength(f"used_arms must be in 1..{n}, got {used_arms}")
    return 0.5 * used_arms * math.log2(n / used_arms) + used_arms
