"""Piecewise-stationary Bernoulli bandit environments and the regret oracle.

A ground-truth environment is a partition of 1..T into segments plus one
success-probability vector per segment. Specs are materialized fully up front
so the same spec (and the same percept randomness) can be replayed against
every algorithm under comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArm, NsbanditError, OutOfHorizon
from .kt import LogProb
from .ptw import Segment


@dataclass(frozen=True)
class NssbpSpec:
    """A fully materialized non-stationary Bernoulli bandit instance."""

    num_arms: int
    horizon: int
    partition: tuple[Segment, ...]
    params: tuple[tuple[float, ...], ...]  # one theta vector per segment

    def __post_init__(self) -> None:
        if self.num_arms < 1:
            raise ValueError("num_arms must be >= 1")
        if len(self.partition) != len(self.params):
            raise ValueError("partition and params must align")
        expect = 1
        for seg, theta in zip(self.partition, self.params):
            if seg.c != expect or seg.d < seg.c:
                raise ValueError(f"segments must tile 1..T contiguously, got {seg}")
            if len(theta) != self.num_arms:
                raise ValueError("every theta vector must have num_arms entries")
            if any(not 0.0 <= th <= 1.0 for th in theta):
                raise ValueError("theta values must lie in [0, 1]")
            expect = seg.d + 1
        if expect != self.horizon + 1:
            raise ValueError(f"partition covers 1..{expect - 1}, horizon is {self.horizon}")

    def segment_index(self, t: int) -> int:
        if not 1 <= t <= self.horizon:
            raise OutOfHorizon(f"t={t} outside 1..{self.horizon}")
        lo, hi = 0, len(self.partition) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self.partition[mid].d < t:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def theta(self, t: int, arm: int) -> float:
        if not 1 <= arm <= self.num_arms:
            raise InvalidArm(f"arm {arm} outside 1..{self.num_arms}")
        return self.params[self.segment_index(t)][arm - 1]

    def best_mean(self, t: int) -> float:
        return max(self.params[self.segment_index(t)])


@dataclass
class RegretCurve:
    """Cumulative pseudo-regret, one value per time step."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)

    @property
    def final(self) -> float:
        return float(self.values[-1]) if len(self.values) else 0.0

    def __len__(self) -> int:
        return len(self.values)


def _segment_lengths(p: float, horizon: int, rng: np.random.Generator) -> list[int]:
    # rng.geometric has support {1, 2, ...}; this is the drawn change count + 1,
    # so mean length is 1/p and zero-length segments cannot occur.
    lengths: list[int] = []
    covered = 0
    while covered < horizon:
        length = int(rng.geometric(p))
        length = min(length, horizon - covered)
        lengths.append(length)
        covered += length
    return lengths


def gen_geometric_uniform(
    p: float, num_arms: int, horizon: int, rng: np.random.Generator
) -> NssbpSpec:
    """Geometrically spaced change points; every theta vector drawn uniform."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    segments: list[Segment] = []
    params: list[tuple[float, ...]] = []
    start = 1
    for length in _segment_lengths(p, horizon, rng):
        segments.append(Segment(start, start + length - 1))
        params.append(tuple(float(x) for x in rng.random(num_arms)))
        start += length
    return NssbpSpec(num_arms, horizon, tuple(segments), tuple(params))


def gen_stationary(num_arms: int, horizon: int, rng: np.random.Generator) -> NssbpSpec:
    """A single segment covering the whole horizon, theta uniform."""
    theta = tuple(float(x) for x in rng.random(num_arms))
    return NssbpSpec(num_arms, horizon, (Segment(1, horizon),), (theta,))


def gen_geometric_adversarial(
    p: float, num_arms: int, horizon: int, rng: np.random.Generator
) -> NssbpSpec:
    """Like the uniform generator, but every arm that was best in the previous
    segment keeps its parameter across the change."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    segments: list[Segment] = []
    params: list[tuple[float, ...]] = []
    start = 1
    prev: tuple[float, ...] | None = None
    for length in _segment_lengths(p, horizon, rng):
        theta = [float(x) for x in rng.random(num_arms)]
        if prev is not None:
            best = max(prev)
            for a, th in enumerate(prev):
                if th == best:
                    theta[a] = th
        segments.append(Segment(start, start + length - 1))
        params.append(tuple(theta))
        prev = params[-1]
        start += length
    return NssbpSpec(num_arms, horizon, tuple(segments), tuple(params))


def adversarial_two_segment() -> NssbpSpec:
    """Fixed hard instance: the pre-change best arm keeps its mean across the
    change, so exploiting it yields no evidence that anything changed."""
    num_arms = 10
    horizon = 10000
    theta1 = tuple(0.2 if a == 0 else 0.1 for a in range(num_arms))
    theta2 = tuple(0.8 if a == 1 else 0.2 for a in range(num_arms))
    return NssbpSpec(
        num_arms,
        horizon,
        (Segment(1, 5000), Segment(5001, 10000)),
        (theta1, theta2),
    )


def env_step(spec: NssbpSpec, t: int, arm: int, rng: np.random.Generator) -> int:
    """One Bernoulli percept for pulling ``arm`` at time ``t``."""
    th = spec.theta(t, arm)
    return int(rng.random() < th)


def pseudo_regret_step(spec: NssbpSpec, t: int, arm: int) -> float:
    """Gap between the best arm's mean and the played arm's mean at ``t``."""
    seg = spec.segment_index(t)
    theta = spec.params[seg]
    if not 1 <= arm <= spec.num_arms:
        raise InvalidArm(f"arm {arm} outside 1..{spec.num_arms}")
    return max(theta) - theta[arm - 1]


def env_log_likelihood(
    spec: NssbpSpec, actions: list[int] | tuple[int, ...], percepts: list[int] | tuple[int, ...]
) -> LogProb:
    """lb probability of the percepts given the actions under the true spec."""
    if len(actions) != len(percepts):
        raise ValueError("actions and percepts must have equal length")
    if len(actions) > spec.horizon:
        raise OutOfHorizon(f"{len(actions)} steps exceed horizon {spec.horizon}")
    total = 0.0
    for k, (a, x) in enumerate(zip(actions, percepts)):
        th = spec.theta(k + 1, a)
        pr = th if x else 1.0 - th
        if pr <= 0.0:
            return -math.inf
        total += math.log2(pr)
    return total


# ---------------------------------------------------------------------------
# Serialization: {"num_arms": A, "horizon": T, "segments": [[c, d, [theta...]]]}
# ---------------------------------------------------------------------------


def spec_to_dict(spec: NssbpSpec) -> dict:
    return {
        "num_arms": spec.num_arms,
        "horizon": spec.horizon,
        "segments": [
            [seg.c, seg.d, list(theta)] for seg, theta in zip(spec.partition, spec.params)
        ],
    }


def spec_from_dict(data: dict) -> NssbpSpec:
    try:
        segments = tuple(Segment(int(row[0]), int(row[1])) for row in data["segments"])
        params = tuple(tuple(float(x) for x in row[2]) for row in data["segments"])
        return NssbpSpec(int(data["num_arms"]), int(data["horizon"]), segments, params)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise NsbanditError(f"malformed environment spec: {exc}") from exc


def save_spec(spec: NssbpSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec)), encoding="utf-8")


def load_spec(path: str | Path) -> NssbpSpec:
    return spec_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
