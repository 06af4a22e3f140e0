"""Bandit policies behind a single select/observe interface.

Every policy exposes ``select_action(rng) -> arm`` (arms are 1-based),
``observe(arm, percept)`` and ``reset()``. Selection depends only on past
observations and the supplied random stream; ``observe`` must be called
exactly once per time step. One policy instance serves one episode at a time.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from .errors import ConfigError
from .ptw import PtwState


def argmax_uniform(values, rng: np.random.Generator) -> int:
    """Index of the maximum, exact ties broken uniformly at random."""
    if isinstance(values, np.ndarray):
        values = values.tolist()
    best = max(values)
    if values.count(best) == 1:
        return values.index(best)
    ties = [i for i, v in enumerate(values) if v == best]
    return ties[rng.integers(len(ties))]


def beta_draws(alphas, betas, rng: np.random.Generator) -> list[float]:
    """One Beta draw per arm. Scalar draws; at benchmark arm counts this is
    several times faster than a single vectorized call."""
    b = rng.beta
    return [b(a, c) for a, c in zip(alphas, betas)]


def default_depth(horizon: int) -> int:
    """Smallest depth D with horizon <= 2^D."""
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    return (horizon - 1).bit_length()


class Policy(ABC):
    """Behavioral contract shared by every algorithm in the benchmark."""

    def __init__(self, num_arms: int) -> None:
        if num_arms < 1:
            raise ValueError("num_arms must be >= 1")
        self.num_arms = num_arms

    @abstractmethod
    def select_action(self, rng: np.random.Generator) -> int: ...

    @abstractmethod
    def observe(self, arm: int, percept: int) -> None: ...

    @abstractmethod
    def reset(self) -> None: ...


class ActivePtwPolicy(Policy):
    """Hierarchical posterior-sampling policy over piecewise-stationary models.

    Each step: draw an active segment from the partition-mixture posterior,
    draw per-arm success probabilities from that segment's Beta posteriors,
    then either play the best draw (``mode="meu"``) or, with a probability that
    shrinks with the sampled segment's length, a uniformly random arm
    (``mode="meufe"``). The exploration probability for a segment (c, d) is
    ``min(1, max(1, d - c) ** -0.5)``, so unit segments always explore.
    """

    def __init__(
        self,
        num_arms: int,
        horizon: int,
        mode: str = "meu",
        gamma: float | None = None,
        depth: int | None = None,
    ) -> None:
        super().__init__(num_arms)
        if mode not in ("meu", "meufe"):
            raise ConfigError(f"mode must be 'meu' or 'meufe', got {mode!r}")
        if depth is None:
            depth = default_depth(horizon)
        if horizon > (1 << depth):
            raise ConfigError(f"horizon {horizon} exceeds 2^{depth}")
        if gamma is None:
            gamma = num_arms / (num_arms + 1.0)
        self.mode = mode
        self.gamma = gamma
        self.depth = depth
        self.horizon = horizon
        self.ptw = PtwState(depth, num_arms, gamma)
        # Diagnostics only; never consulted by the decision rule.
        self.forced_counts = np.zeros(num_arms, dtype=np.int64)

    def reset(self) -> None:
        self.ptw = PtwState(self.depth, self.num_arms, self.gamma)
        self.forced_counts[:] = 0

    def select_action(self, rng: np.random.Generator) -> int:
        # Equivalent to sampling a segment from segment_posterior() and then
        # its per-arm Beta posteriors, with the segment identified by scale
        # arithmetic instead of materialized segment objects.
        ptw = self.ptw
        weights = ptw.posterior_weights()
        depth = ptw.depth
        if depth == 0:
            k = 0
        else:
            u = rng.random()
            acc = 0.0
            k = depth
            for idx, w in enumerate(weights):
                acc += w
                if u < acc:
                    k = idx
                    break
        scale = depth - k
        t = ptw.time + 1
        start = ((t - 1) >> scale << scale) + 1
        if start == t:
            alphas = betas = [0.5] * self.num_arms
        else:
            zeros, ones = ptw.level_counts(scale)
            alphas = [o + 0.5 for o in ones]
            betas = [z + 0.5 for z in zeros]
        draws = beta_draws(alphas, betas, rng)
        if self.mode == "meufe":
            length_minus_1 = (1 << scale) - 1
            explore = 1.0 if scale == 0 else length_minus_1**-0.5
            if rng.random() < explore:
                arm = int(rng.integers(1, self.num_arms + 1))
                self.forced_counts[arm - 1] += 1
                return arm
        return argmax_uniform(draws, rng) + 1

    def observe(self, arm: int, percept: int) -> None:
        self.ptw.update(arm, percept)


class ThompsonSamplingPolicy(Policy):
    """Per-arm Beta posterior sampling; plays the argmax of the draws.

    The prior defaults to Jeffreys Beta(1/2, 1/2) so the posterior matches the
    KT-based models; pass ``prior=(1.0, 1.0)`` for the uniform prior instead.
    """

    def __init__(self, num_arms: int, prior: tuple[float, float] = (0.5, 0.5)) -> None:
        super().__init__(num_arms)
        self.prior = (float(prior[0]), float(prior[1]))
        self.reset()

    def reset(self) -> None:
        self.successes = [0] * self.num_arms
        self.failures = [0] * self.num_arms

    def select_action(self, rng: np.random.Generator) -> int:
        a0, b0 = self.prior
        draws = beta_draws(
            [s + a0 for s in self.successes], [f + b0 for f in self.failures], rng
        )
        return argmax_uniform(draws, rng) + 1

    def observe(self, arm: int, percept: int) -> None:
        if percept:
            self.successes[arm - 1] += 1
        else:
            self.failures[arm - 1] += 1


class _UcbCore:
    """Counts/means plus the classical sqrt(2 ln t / n) index."""

    __slots__ = ("num_arms", "counts", "sums", "t")

    def __init__(self, num_arms: int) -> None:
        self.num_arms = num_arms
        self.counts = np.zeros(num_arms)
        self.sums = np.zeros(num_arms)
        self.t = 0

    def pick(self, rng: np.random.Generator) -> int:
        if self.t < self.num_arms:
            # Round-robin until every arm has one pull.
            return self.t
        idx = self.sums / self.counts + np.sqrt(2.0 * math.log(self.t) / self.counts)
        return argmax_uniform(idx, rng)

    def add(self, arm0: int, reward: float) -> None:
        self.counts[arm0] += 1
        self.sums[arm0] += reward
        self.t += 1


class Ucb1Policy(Policy):
    def __init__(self, num_arms: int) -> None:
        super().__init__(num_arms)
        self.reset()

    def reset(self) -> None:
        self.core = _UcbCore(self.num_arms)

    def select_action(self, rng: np.random.Generator) -> int:
        return self.core.pick(rng) + 1

    def observe(self, arm: int, percept: int) -> None:
        self.core.add(arm - 1, float(percept))


class SlidingWindowUcbPolicy(Policy):
    """UCB1 restricted to the last ``window`` observations via a ring buffer.

    Arms with no observation inside the window are replayed immediately
    (lowest index first), which also reproduces UCB1's round-robin start; with
    ``window >= t`` the decisions coincide with UCB1 exactly.
    """

    def __init__(self, num_arms: int, window: int) -> None:
        super().__init__(num_arms)
        if window < 1:
            raise ConfigError(f"window must be >= 1, got {window}")
        self.window = window
        self.reset()

    def reset(self) -> None:
        self.ring_arm = np.full(self.window, -1, dtype=np.int64)
        self.ring_reward = np.zeros(self.window)
        self.counts = np.zeros(self.num_arms)
        self.sums = np.zeros(self.num_arms)
        self.t = 0

    def select_action(self, rng: np.random.Generator) -> int:
        empty = np.flatnonzero(self.counts == 0)
        if len(empty):
            return int(empty[0]) + 1
        idx = self.sums / self.counts + np.sqrt(
            2.0 * math.log(min(self.t, self.window)) / self.counts
        )
        return argmax_uniform(idx, rng) + 1

    def observe(self, arm: int, percept: int) -> None:
        slot = self.t % self.window
        old = self.ring_arm[slot]
        if old >= 0:
            self.counts[old] -= 1
            self.sums[old] -= self.ring_reward[slot]
        self.ring_arm[slot] = arm - 1
        self.ring_reward[slot] = float(percept)
        self.counts[arm - 1] += 1
        self.sums[arm - 1] += float(percept)
        self.t += 1

    def window_stats(self) -> tuple[np.ndarray, np.ndarray]:
        """In-window (counts, sums) per arm; exposed for oracle recomputation."""
        return self.counts.copy(), self.sums.copy()


def bernoulli_kl(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q), in nats."""
    if p <= 0.0:
        return math.log(1.0 / (1.0 - q)) if q < 1.0 else math.inf
    if p >= 1.0:
        return math.log(1.0 / q) if q > 0.0 else math.inf
    if q <= 0.0 or q >= 1.0:
        return math.inf
    return p * math.log(p / q) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))


def klucb_index(mean: float, pulls: int, t: int, tol: float = 1e-9) -> float:
    """Largest q in [mean, 1] with pulls * KL(mean || q) <= ln t, by bisection."""
    if pulls <= 0:
        return 1.0
    if mean >= 1.0:
        return 1.0
    target = math.log(max(t, 2)) / pulls
    lo, hi = mean, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bernoulli_kl(mean, mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


class KlUcbPolicy(Policy):
    def __init__(self, num_arms: int) -> None:
        super().__init__(num_arms)
        self.reset()

    def reset(self) -> None:
        self.counts = np.zeros(self.num_arms, dtype=np.int64)
        self.sums = np.zeros(self.num_arms)
        self.t = 0

    def select_action(self, rng: np.random.Generator) -> int:
        if self.t < self.num_arms:
            return self.t + 1
        idx = np.array(
            [
                klucb_index(self.sums[a] / self.counts[a], int(self.counts[a]), self.t)
                for a in range(self.num_arms)
            ]
        )
        return argmax_uniform(idx, rng) + 1

    def observe(self, arm: int, percept: int) -> None:
        self.counts[arm - 1] += 1
        self.sums[arm - 1] += float(percept)
        self.t += 1


class _AlgInstance:
    """One scheduled base-learner run covering an aligned 2^m-length span."""

    __slots__ = ("order", "end", "core", "reward_sum", "steps")

    def __init__(self, order: int, end: int, num_arms: int) -> None:
        self.order = order
        self.end = end
        self.core = _UcbCore(num_arms)
        self.reward_sum = 0.0
        self.steps = 0


class MasterUcb1Policy(Policy):
    """Multi-scale randomly restarted UCB1 with non-stationarity tests.

    Blocks of doubling length each run a full-block UCB1 instance. Inside an
    order-n block, an order-m instance (m < n) may start at every offset
    aligned to 2^m, with probability rho(2^n) / rho(2^m) where rho is the base
    learner's per-step regret rate; the most recently started live instance
    acts, and control returns to the enclosing instance when it expires. Two
    tests watch for non-stationarity: when an instance ends with its

    pessimistic mean above the lowest optimistic estimate recorded in the
    block, or when the block's running mean falls well below that estimate,
    everything restarts from an order-0 block. Trigger counts and the instance
    schedule are kept in ``test1_count`` / ``test2_count`` / ``instance_log``.

    ``restart_prob_scale=0`` disables the whole restarting machinery and runs
    a single UCB1 instance for the entire horizon.
    """

    TEST2_SLACK = 3.0

    def __init__(
        self, num_arms: int, horizon: int, restart_prob_scale: float = 1.0
    ) -> None:
        super().__init__(num_arms)
        if not 0.0 <= restart_prob_scale <= 1.0:
            raise ConfigError("restart_prob_scale must be in [0, 1]")
        self.horizon = horizon
        self.restart_prob_scale = restart_prob_scale
        self.reset()

    def reset(self) -> None:
        self.t = 0  # completed steps
        self.block_order = 0
        self.block_start = 0
        self.block_end = 0
        self.block_elapsed = 0
        self.block_reward = 0.0
        self.u_min = math.inf
        self.stack: list[_AlgInstance] = []
        self.instance_log: list[tuple[int, int]] = []
        self.test1_count = 0
        self.test2_count = 0
        self._restart_pending = False
        self._started = False
        self._plain = _UcbCore(self.num_arms) if self.restart_prob_scale == 0.0 else None
        self._acting: _AlgInstance | None = None

    def _rho(self, length: int) -> float:
        # Per-step regret rate of UCB1 over `length` steps, capped at 1.
        return min(1.0, math.sqrt(self.num_arms * math.log(max(self.horizon, 2)) / length))

    def _start_block(self) -> None:
        self.block_start = self.t
        self.block_end = self.t + (1 << self.block_order)
        self.block_elapsed = 0
        self.block_reward = 0.0
        self.u_min = math.inf
        root = _AlgInstance(self.block_order, self.block_end, self.num_arms)
        self.stack = [root]
        self.instance_log.append((self.t + 1, self.block_order))

    def select_action(self, rng: np.random.Generator) -> int:
        if self._plain is not None:
            self._acting = None
            return self._plain.pick(rng) + 1
        if not self.stack:
            if self._restart_pending:
                self.block_order = 0
                self._restart_pending = False
            elif self._started:
                self.block_order += 1
            self._started = True
            self._start_block()
        offset = self.t - self.block_start
        rho_block = self._rho(1 << self.block_order)
        for m in range(self.block_order - 1, -1, -1):
            if offset % (1 << m) == 0 and self.stack[-1].order > m:
                p = self.restart_prob_scale * rho_block / self._rho(1 << m)
                if rng.random() < p:
                    self.stack.append(_AlgInstance(m, self.t + (1 << m), self.num_arms))
                    self.instance_log.append((self.t + 1, m))
        inst = self.stack[-1]
        self._acting = inst
        return inst.core.pick(rng) + 1

    def _finish_instance(self, inst: _AlgInstance) -> bool:
        """Record the finished run's estimate; True when test 1 fires."""
        if inst.steps == 0:
            return False
        mean = inst.reward_sum / inst.steps
        rho = self._rho(1 << inst.order)
        self.u_min = min(self.u_min, mean + rho)
        if mean - rho > self.u_min:
            self.test1_count += 1
            return True
        return False

    def observe(self, arm: int, percept: int) -> None:
        reward = float(percept)
        self.t += 1
        if self._plain is not None:
            self._plain.add(arm - 1, reward)
            return
        inst = self._acting
        if inst is not None:
            inst.core.add(arm - 1, reward)
            inst.reward_sum += reward
            inst.steps += 1
        self.block_elapsed += 1
        self.block_reward += reward
        while self.stack and self.stack[-1].end <= self.t:
            if self._finish_instance(self.stack.pop()):
                self.stack = []
                self._restart_pending = True
                return
        if not self.stack:
            return  # block completed; the next select doubles the order
        if self.u_min < math.inf:
            block_mean = self.block_reward / self.block_elapsed
            if block_mean + self.TEST2_SLACK * self._rho(self.block_elapsed) < self.u_min:
                self.test2_count += 1
                self.stack = []
                self._restart_pending = True


class UniformPolicy(Policy):
    def reset(self) -> None:
        pass

    def select_action(self, rng: np.random.Generator) -> int:
        return int(rng.integers(1, self.num_arms + 1))

    def observe(self, arm: int, percept: int) -> None:
        pass


class ConstantPolicy(Policy):
    def __init__(self, num_arms: int, arm: int) -> None:
        super().__init__(num_arms)
        if not 1 <= arm <= num_arms:
            raise ConfigError(f"constant arm {arm} outside 1..{num_arms}")
        self.arm = arm

    def reset(self) -> None:
        pass

    def select_action(self, rng: np.random.Generator) -> int:
        return self.arm

    def observe(self, arm: int, percept: int) -> None:
        pass


POLICY_NAMES = (
    "activeptw",
    "ts",
    "ucb1",
    "swucb",
    "klucb",
    "master_ucb1",
    "uniform",
    "constant",
)


def build_policy(
    name: str, num_arms: int, horizon: int, params: dict | None = None
) -> Policy:
    """Construct a policy from its registry name and a parameter map."""
    opts = dict(params or {})
    try:
        if name == "activeptw":
            policy: Policy = ActivePtwPolicy(
                num_arms,
                horizon,
                mode=opts.pop("mode", "meu"),
                gamma=opts.pop("gamma", None),
                depth=opts.pop("depth", None),
            )
        elif name == "ts":
            policy = ThompsonSamplingPolicy(num_arms, prior=tuple(opts.pop("prior", (0.5, 0.5))))
        elif name == "ucb1":
            policy = Ucb1Policy(num_arms)
        elif name == "swucb":
            policy = SlidingWindowUcbPolicy(num_arms, window=int(opts.pop("window")))
        elif name == "klucb":
            policy = KlUcbPolicy(num_arms)
        elif name == "master_ucb1":
            policy = MasterUcb1Policy(
                num_arms,
                horizon,
                restart_prob_scale=float(opts.pop("restart_prob_scale", 1.0)),
            )
        elif name == "uniform":
            policy = UniformPolicy(num_arms)
        elif name == "constant":
            policy = ConstantPolicy(num_arms, arm=int(opts.pop("arm")))
        else:
            raise ConfigError(f"unknown policy {name!r}; known: {list(POLICY_NAMES)}")
    except KeyError as exc:
        raise ConfigError(f"policy {name!r} is missing required parameter {exc}") from exc
    if opts:
        raise ConfigError(f"unknown parameters for policy {name!r}: {sorted(opts)}")
    return policy
