"""Incremental partition-tree-weighted mixture over per-arm KT estimators.

The model mixes, over all binary temporal partitions of ``1..2^D``, the product
of per-segment KT-environment marginals, with a recursive tree prior: at every
internal node the tree stops with probability ``gamma`` and splits with
probability ``1 - gamma`` (unit leaves are free). The mixture marginal, the set
of currently active dyadic segments, and the posterior over those segments are
all maintained in O(D) time and O(D * A) space per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NotActive, OutOfHorizon
from .kt import KtStats, KteState, LogProb

_INV_LN2 = 1.0 / math.log(2.0)
_log2 = math.log2
_log1p = math.log1p


class Segment(NamedTuple):
    """Closed time interval [c, d], 1-based inclusive on both ends."""

    c: int
    d: int

    @property
    def length(self) -> int:
        return self.d - self.c + 1


def active_segments(t: int, depth: int) -> list[Segment]:
    """The D+1 dyadic segments containing time ``t``, largest scale first.

    These are the nodes on the root-to-leaf path selected by the binary digits
    of ``t - 1`` (most significant first: 0 = left child, 1 = right child).
    """
    if not 1 <= t <= (1 << depth):
        raise OutOfHorizon(f"t={t} outside 1..2^{depth}")
    tau = t - 1
    c = 1
    segs = [Segment(1, 1 << depth)]
    for i in range(depth - 1, -1, -1):
        if (tau >> i) & 1:
            c += 1 << i
        segs.append(Segment(c, c + (1 << i) - 1))
    return segs


@dataclass
class SegmentPosterior:
    """Normalized posterior over the active segments, largest scale first."""

    entries: list[tuple[Segment, float]]

    def weights(self) -> list[float]:
        return [w for _, w in self.entries]


class PtwState:
    """Mutable per-level sufficient statistics of the mixture.

    For each scale ``i`` in 0..D the state tracks, restricted to the currently
    active scale-``i`` segment: per-arm 0/1 counts, the lb KT-environment
    marginal, and the lb mixture marginal of that segment's subtree. A per-level
    buffer holds the lb mixture value of the completed left sibling, which the
    split branch of the recursion multiplies in once the right half begins.

    ``update`` advances the state in place (single writer); queries are pure.
    """

    __slots__ = (
        "depth", "num_arms", "gamma", "time", "horizon",
        "_zeros", "_ones", "_log_kte", "_log_ptw", "_log_buf",
        "_log_gamma", "_log_1mgamma",
    )

    def __init__(self, depth: int, num_arms: int, gamma: float) -> None:
        if depth < 0:
            raise ValueError(f"depth must be >= 0, got {depth}")
        if num_arms < 1:
            raise ValueError(f"num_arms must be >= 1, got {num_arms}")
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {gamma}")
        self.depth = depth
        self.num_arms = num_arms
        self.gamma = gamma
        self.time = 0
        self.horizon = 1 << depth
        levels = depth + 1
        self._zeros = [[0] * num_arms for _ in range(levels)]
        self._ones = [[0] * num_arms for _ in range(levels)]
        self._log_kte = [0.0] * levels
        self._log_ptw = [0.0] * levels
        self._log_buf = [0.0] * levels
        self._log_gamma = _log2(gamma)
        self._log_1mgamma = _log2(1.0 - gamma)

    def update(self, arm: int, percept: int) -> "PtwState":
        """Absorb one (arm, percept) pair; returns self."""
        t = self.time + 1
        if t > self.horizon:
            raise OutOfHorizon(f"horizon 2^{self.depth} exhausted")
        if not 1 <= arm <= self.num_arms:
            from .errors import InvalidArm

            raise InvalidArm(f"arm {arm} outside 1..{self.num_arms}")
        if percept not in (0, 1):
            raise ValueError(f"percept must be 0 or 1, got {percept!r}")

        zeros, ones = self._zeros, self._ones
        log_kte, log_ptw, log_buf = self._log_kte, self._log_ptw, self._log_buf

        tau = t - 1
        if tau:
            # Binary-counter boundary handling: the scale-j segment ending at
            # tau was the left child of its (still open) parent; smaller scales
            # closed as right children whose values are already folded in.
            j = (tau & -tau).bit_length() - 1
            log_buf[j + 1] = log_ptw[j]
            na = self.num_arms
            for i in range(j + 1):
                zeros[i] = [0] * na
                ones[i] = [0] * na
                log_kte[i] = 0.0
                log_ptw[i] = 0.0
                log_buf[i] = 0.0

        a = arm - 1
        lg = self._log_gamma
        lo = self._log_1mgamma
        prev = 0.0
        for i in range(self.depth + 1):
            zi = zeros[i]
            oi = ones[i]
            z = zi[a]
            o = oi[a]
            if percept:
                num = o + 0.5
                oi[a] = o + 1
            else:
                num = z + 0.5
                zi[a] = z + 1
            lk = log_kte[i] + _log2(num / (z + o + 1))
            log_kte[i] = lk
            if i:
                s = lg + lk
                r = lo + log_buf[i] + prev
                if s < r:
                    s, r = r, s
                prev = s + _log1p(2.0 ** (r - s)) * _INV_LN2
                log_ptw[i] = prev
            else:
                prev = lk
                log_ptw[0] = lk
        self.time = t
        return self

    def log_marginal(self) -> LogProb:
        """lb of the mixture marginal of everything absorbed so far."""
        return self._log_ptw[self.depth]

    def posterior_weights(self) -> list[float]:
        """Posterior masses of the active segments at time ``time + 1``.

        Ordered largest scale first, matching :func:`active_segments`. Stopping
        at the scale-D segment has posterior gamma * KTE/PTW of its data; each
        smaller scale takes the same ratio out of the mass left by all larger
        scales; the unit segment absorbs the remainder. Segments that only
        begin at ``time + 1`` carry no data, so their ratio is the prior gamma.
        """
        t = self.time + 1
        if t > self.horizon:
            raise OutOfHorizon(f"horizon 2^{self.depth} exhausted")
        tau = t - 1
        depth = self.depth
        fresh = depth if tau == 0 else (tau & -tau).bit_length() - 1
        g = self.gamma
        log_kte, log_ptw = self._log_kte, self._log_ptw
        out = [0.0] * (depth + 1)
        rem = 1.0
        for k in range(depth):
            i = depth - k
            if i <= fresh:
                ratio = g
            else:
                ratio = g * 2.0 ** (log_kte[i] - log_ptw[i])
            w = rem * ratio
            out[k] = w
            rem -= w
        out[depth] = rem if rem > 0.0 else 0.0
        return out

    def level_counts(self, scale: int) -> tuple[list[int], list[int]]:
        """Raw per-arm (zeros, ones) of the active segment at ``scale``.

        Live views for the hot path; callers must not mutate them. Use
        :func:`segment_arm_stats` for a safe copy keyed by segment.
        """
        return self._zeros[scale], self._ones[scale]

    def copy(self) -> "PtwState":
        fresh = PtwState(self.depth, self.num_arms, self.gamma)
        fresh.time = self.time
        fresh._zeros = [row[:] for row in self._zeros]
        fresh._ones = [row[:] for row in self._ones]
        fresh._log_kte = self._log_kte[:]
        fresh._log_ptw = self._log_ptw[:]
        fresh._log_buf = self._log_buf[:]
        return fresh


def ptw_update(state: PtwState, arm: int, percept: int) -> PtwState:
    """Advance ``state`` in place by one (arm, percept) pair and return it."""
    return state.update(arm, percept)


def ptw_log_marginal(state: PtwState) -> LogProb:
    return state.log_marginal()


def segment_posterior(state: PtwState, t_query: int) -> SegmentPosterior:
    """Posterior over the active segments used to act at ``t_query``.

    ``t_query`` must equal ``state.time + 1``: the decision at the next step is
    conditioned on everything absorbed so far.
    """
    if t_query != state.time + 1:
        raise ValueError(
            f"t_query must be state.time + 1 = {state.time + 1}, got {t_query}"
        )
    segs = active_segments(t_query, state.depth)
    weights = state.posterior_weights()
    return SegmentPosterior(list(zip(segs, weights)))


def sample_segment(posterior: SegmentPosterior, rng: np.random.Generator) -> Segment:
    """Categorical draw from the posterior.

    A singleton posterior is returned directly without consuming the stream,
    so a depth-0 model spends exactly the same draws as a flat sampler.
    """
    entries = posterior.entries
    if len(entries) == 1:
        return entries[0][0]
    u = rng.random()
    acc = 0.0
    for seg, w in entries:
        acc += w
        if u < acc:
            return seg
    return entries[-1][0]


def segment_arm_stats(state: PtwState, seg: Segment) -> KteState:
    """Per-arm 0/1 counts accumulated strictly inside ``seg`` so far.

    ``seg`` must be active at time ``state.time + 1``; a segment that only
    starts there has all-zero counts.
    """
    t = state.time + 1
    segs = active_segments(t, state.depth)
    try:
        k = segs.index(Segment(*seg))
    except ValueError:
        raise NotActive(f"segment {seg} not active at t={t}") from None
    scale = state.depth - k
    if seg[0] == t:
        return KteState(state.num_arms)
    per_arm = [
        KtStats(state._zeros[scale][a], state._ones[scale][a])
        for a in range(state.num_arms)
    ]
    return KteState(state.num_arms, per_arm)
