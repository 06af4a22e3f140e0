"""Brute-force oracles and checkable bound functions.

Everything here is deliberately slow and direct: full enumeration of the
binary temporal partitions, explicit per-segment counting, and closed-form
bounds. The fast incremental engine is validated against these, never the
other way around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, InvalidLength, OutOfHorizon
from .kt import KtStats, LogProb, kt_log_marginal
from .ptw import Segment, SegmentPosterior, active_segments

_MAX_ENUM_DEPTH = 12


@dataclass
class PartitionEnumeration:
    """All binary temporal partitions of 1..2^D with their prior weights."""

    depth: int
    entries: list[tuple[tuple[Segment, ...], float]]

    def __len__(self) -> int:
        return len(self.entries)


def _enumerate(depth: int, start: int, gamma: float) -> list[tuple[tuple[Segment, ...], float]]:
    if depth == 0:
        return [((Segment(start, start),), 1.0)]
    half = 1 << (depth - 1)
    out = [((Segment(start, start + 2 * half - 1),), gamma)]
    left = _enumerate(depth - 1, start, gamma)
    right = _enumerate(depth - 1, start + half, gamma)
    split = 1.0 - gamma
    for p1, w1 in left:
        for p2, w2 in right:
            out.append((p1 + p2, split * w1 * w2))
    return out


def enumerate_partitions(depth: int, gamma: float) -> PartitionEnumeration:
    """Full partition class with prior weights; stop costs gamma, split 1-gamma.

    Unit segments are free. Guarded at depth 12; the class size satisfies
    |C_D| = 1 + |C_{D-1}|^2, so anything beyond depth 5 is impractical anyway.
    """
    if depth < 0 or depth > _MAX_ENUM_DEPTH:
        raise InvalidLength(f"depth must be in 0..{_MAX_ENUM_DEPTH}, got {depth}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    return PartitionEnumeration(depth, _enumerate(depth, 1, gamma))


@lru_cache(maxsize=64)
def _cached_enum(depth: int, gamma: float) -> PartitionEnumeration:
    # Read-only reuse across the many brute-force calls of a conformance run.
    return enumerate_partitions(depth, gamma)


def _segment_kte_log(
    seg: Segment, actions: list[int] | tuple[int, ...], percepts: list[int] | tuple[int, ...]
) -> LogProb:
    """lb KT-environment marginal of the data falling inside ``seg``."""
    counts: dict[int, list[int]] = {}
    hi = min(seg.d, len(actions))
    for k in range(seg.c - 1, hi):
        a = actions[k]
        c = counts.setdefault(a, [0, 0])
        c[percepts[k]] += 1
    return sum(kt_log_marginal(KtStats(c[0], c[1])) for c in counts.values())


def brute_force_marginal(
    actions: list[int] | tuple[int, ...],
    percepts: list[int] | tuple[int, ...],
    depth: int,
    gamma: float,
) -> LogProb:
    """Direct weighted sum over all partitions of per-segment KTE products."""
    n = len(actions)
    if n != len(percepts):
        raise ValueError("actions and percepts must have equal length")
    if n > (1 << depth):
        raise OutOfHorizon(f"length {n} exceeds 2^{depth}")
    if n == 0:
        return 0.0
    enum = _cached_enum(depth, gamma)
    seg_cache: dict[Segment, float] = {}
    terms = np.empty(len(enum.entries))
    for idx, (partition, weight) in enumerate(enum.entries):
        total = math.log2(weight)
        for seg in partition:
            if seg.c > n:
                continue
            val = seg_cache.get(seg)
            if val is None:
                val = _segment_kte_log(seg, actions, percepts)
                seg_cache[seg] = val
            total += val
        terms[idx] = total
    m = terms.max()
    return float(m + math.log2(np.exp2(terms - m).sum()))


def brute_force_segment_posterior(
    actions: list[int] | tuple[int, ...],
    percepts: list[int] | tuple[int, ...],
    depth: int,
    gamma: float,
    t: int,
) -> SegmentPosterior:
    """Posterior over the active segments at ``t`` given the data before ``t``.

    Sums, per active segment, the normalized posterior mass of every partition
    containing it.
    """
    if t != len(actions) + 1:
        raise ValueError(f"t must be len(actions) + 1 = {len(actions) + 1}, got {t}")
    if len(actions) != len(percepts):
        raise ValueError("actions and percepts must have equal length")
    if t > (1 << depth):
        raise OutOfHorizon(f"t={t} exceeds 2^{depth}")
    n = len(actions)
    enum = _cached_enum(depth, gamma)
    seg_cache: dict[Segment, float] = {}
    logs = np.empty(len(enum.entries))
    for idx, (partition, weight) in enumerate(enum.entries):
        total = math.log2(weight)
        for seg in partition:
            if seg.c > n:
                continue
            val = seg_cache.get(seg)
            if val is None:
                val = _segment_kte_log(seg, actions, percepts)
                seg_cache[seg] = val
            total += val
        logs[idx] = total
    m = logs.max()
    post = np.exp2(logs - m)
    post /= post.sum()
    segs = active_segments(t, depth)
    weights = []
    for seg in segs:
        mass = sum(
            post[idx]
            for idx, (partition, _) in enumerate(enum.entries)
            if seg in partition
        )
        weights.append(float(mass))
    return SegmentPosterior(list(zip(segs, weights)))


def reference_active_segments(t: int, depth: int) -> list[Segment]:
    """Slow recursive reference for the active-segment path.

    Walks the digits of ``t - 1`` (most significant first) exactly as written
    in the recursive definition; used only to cross-check the fast routine.
    """
    if not 1 <= t <= (1 << depth):
        raise OutOfHorizon(f"t={t} outside 1..2^{depth}")
    bits = [(t - 1) >> (depth - 1 - k) & 1 for k in range(depth)]

    def f(b: list[int], o: int) -> list[Segment]:
        k = len(b)
        seg = Segment(o, o + (1 << k) - 1)
        if not b:
            return [seg]
        if b[0] == 0:
            return [seg] + f(b[1:], o)
        return [seg] + f(b[1:], o + (1 << (k - 1)))

    return f(bits, 1)


def piecewise_redundancy_bound(t: int, num_arms: int, num_segments: int) -> float:
    """Worst-case redundancy (bits) of the depth-D mixture against a piecewise
    stationary bandit with ``num_segments`` segments, after ``t`` steps."""
    if t < 1 or num_arms < 1 or num_segments < 1:
        raise DomainError("t, num_arms and num_segments must all be >= 1")
    a = float(num_arms)
    cover = num_segments * (math.ceil(math.log2(t)) + 1)
    inner = math.ceil(t / (a * cover))
    return cover * (0.5 * a * math.log2(inner) + a + 2.0)


def kt_concentration_bound(t: int, s: int, eps: float) -> float:
    """Upper bound on the posterior tail P[|theta - posterior mean| >= eps]
    after ``s`` successes in ``t`` Bernoulli draws, clamped to [0, 1]."""
    if not 2 <= s <= t - 2:
        raise DomainError(f"need 2 <= s <= t - 2, got s={s}, t={t}")
    if eps <= 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    val = (
        1.25
        * (t - 1) ** 1.5
        / math.sqrt((s - 0.5) * (t - s + 0.5))
        * math.exp(-2.0 * (t - 1) * eps * eps)
    )
    return min(1.0, max(0.0, val))


def exploration_count_bound(n: int, num_arms: int, eps: float) -> tuple[int, float]:
    """Forced-exploration guarantee for the exploring reference policy.

    Returns ``(min_count, failure_prob)``: with probability at least
    ``1 - failure_prob`` every arm is forcibly explored at least ``min_count``
    times over ``n`` steps at exploration rate ``1/sqrt(n)``. The deviation
    term is linear in ``n`` as stated, so the bound is only informative for
    small ``eps``; callers should check ``min_count >= 0``.
    """
    if n < 1 or num_arms < 1:
        raise DomainError("n and num_arms must be >= 1")
    if eps <= 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    min_count = math.floor(math.sqrt(n) / num_arms - eps * n)
    failure = 2.0 * num_arms * math.exp(-2.0 * eps * eps * n)
    return min_count, failure


# ---------------------------------------------------------------------------
# Named suites behind the `verify` CLI subcommand. Each returns (ok, detail).
# ---------------------------------------------------------------------------


def _suite_active_segments() -> tuple[bool, str]:
    worked = active_segments(3, 2)
    if worked != [Segment(1, 4), Segment(3, 4), Segment(3, 3)]:
        return False, f"worked example mismatch: {worked}"
    for depth in range(1, 5):
        enum = enumerate_partitions(depth, 0.5)
        all_segs = {seg for partition, _ in enum.entries for seg in partition}
        for t in range(1, (1 << depth) + 1):
            fast = set(active_segments(t, depth))
            by_def = {seg for seg in all_segs if seg.c <= t <= seg.d}
            if fast != by_def:
                return False, f"definition filter mismatch at t={t}, D={depth}"
    for depth in range(1, 11):
        for t in range(1, (1 << depth) + 1):
            if active_segments(t, depth) != reference_active_segments(t, depth):
                return False, f"recursive reference mismatch at t={t}, D={depth}"
    return True, "definition filter D<=4, recursive reference D<=10"


def _suite_prior_normalization() -> tuple[bool, str]:
    sizes = {1: 2, 2: 5, 3: 26}
    for gamma in (0.1, 0.5, 0.9):
        for depth in range(1, 5):
            enum = enumerate_partitions(depth, gamma)
            total = sum(w for _, w in enum.entries)
            if abs(total - 1.0) > 1e-12:
                return False, f"prior sums to {total} at D={depth}, gamma={gamma}"
            if depth in sizes and len(enum) != sizes[depth]:
                return False, f"|C_{depth}| = {len(enum)}, expected {sizes[depth]}"
    return True, "weights normalize for gamma in {0.1, 0.5, 0.9}, class sizes check"


def _suite_marginal_equivalence(rng: np.random.Generator, cases: int = 20) -> tuple[bool, str]:
    from .ptw import PtwState

    worst = 0.0
    for depth in (1, 2, 3):
        for num_arms in (1, 2, 3):
            for gamma in (0.5, num_arms / (num_arms + 1.0)):
                for _ in range(cases):
                    n = int(rng.integers(1, (1 << depth) + 1))
                    actions = [int(a) for a in rng.integers(1, num_arms + 1, n)]
                    percepts = [int(x) for x in rng.integers(0, 2, n)]
                    state = PtwState(depth, num_arms, gamma)
                    for a, x in zip(actions, percepts):
                        state.update(a, x)
                    got = state.log_marginal()
                    want = brute_force_marginal(actions, percepts, depth, gamma)
                    worst = max(worst, abs(got - want))
                    if state.time < state.horizon:
                        post = segment_posterior_weights_vs_brute(
                            state, actions, percepts, depth, gamma
                        )
                        worst = max(worst, post)
    ok = worst <= 1e-9
    return ok, f"max |incremental - enumerated| = {worst:.2e}"


def segment_posterior_weights_vs_brute(state, actions, percepts, depth, gamma) -> float:
    """Max abs difference between engine and enumerated segment posteriors."""
    from .ptw import segment_posterior

    t = state.time + 1
    fast = segment_posterior(state, t)
    slow = brute_force_segment_posterior(actions, percepts, depth, gamma, t)
    return max(
        abs(wf - ws) for (_, wf), (_, ws) in zip(fast.entries, slow.entries)
    )


def _suite_kt_redundancy(rng: np.random.Generator, cases: int = 1000) -> tuple[bool, str]:
    from scipy.special import gammaln

    worst = -math.inf
    for _ in range(cases):
        n = int(rng.integers(1, 4097))
        theta = float(rng.random())
        ones = int(rng.binomial(n, theta))
        zeros = n - ones
        kt = (
            gammaln(zeros + 0.5) + gammaln(ones + 0.5) - gammaln(n + 1.0)
        ) / math.log(2.0) - math.log2(math.pi)
        if 0 < theta < 1:
            lik = ones * math.log2(theta) + zeros * math.log2(1.0 - theta)
        else:
            lik = 0.0 if (ones == n if theta == 1.0 else zeros == n) else -math.inf
        excess = (-kt + lik) - (0.5 * math.log2(n) + 1.0)
        worst = max(worst, excess)
    return worst <= 1e-12, f"max bound excess = {worst:.3e} bits over {cases} cases"


def _suite_kte_redundancy(rng: np.random.Generator, cases: int = 200) -> tuple[bool, str]:
    from .kt import kte_redundancy_bound

    worst = -math.inf
    for _ in range(cases):
        num_arms = int(rng.integers(1, 9))
        n = int(rng.integers(1, 2049))
        theta = rng.random(num_arms)
        actions = rng.integers(0, num_arms, n)
        u = rng.random(n)
        percepts = (u < theta[actions]).astype(int)
        kte = 0.0
        lik = 0.0
        used = 0
        for a in range(num_arms):
            mask = actions == a
            na = int(mask.sum())
            if na == 0:
                continue
            used += 1
            ones = int(percepts[mask].sum())
            zeros = na - ones
            kte += kt_log_marginal(KtStats(zeros, ones))
            th = theta[a]
            lik += ones * math.log2(th) + zeros * math.log2(1.0 - th)
        excess = (-kte + lik) - kte_redundancy_bound(n, used)
        worst = max(worst, excess)
    return worst <= 1e-9, f"max bound excess = {worst:.3e} bits over {cases} cases"


def _suite_piecewise_redundancy(rng: np.random.Generator, cases: int = 50) -> tuple[bool, str]:
    from .environments import env_log_likelihood, gen_geometric_uniform
    from .ptw import PtwState

    worst = -math.inf
    for _ in range(cases):
        depth = int(rng.integers(3, 9))
        horizon = 1 << depth
        num_arms = int(rng.integers(1, 6))
        spec = gen_geometric_uniform(
            min(0.9, float(rng.random()) * 0.2 + 4.0 / horizon), num_arms, horizon, rng
        )
        # The redundancy statement is for the half/half tree prior.
        state = PtwState(depth, num_arms, 0.5)
        actions = []
        percepts = []
        for t in range(1, horizon + 1):
            a = int(rng.integers(1, num_arms + 1))
            th = spec.theta(t, a)
            x = int(rng.random() < th)
            actions.append(a)
            percepts.append(x)
            state.update(a, x)
            lik = env_log_likelihood(spec, actions, percepts)
            if lik == -math.inf:
                continue
            excess = (-state.log_marginal() + lik) - piecewise_redundancy_bound(
                t, num_arms, len(spec.partition)
            )
            worst = max(worst, excess)
    return worst <= 1e-9, f"max bound excess = {worst:.3e} bits over {cases} runs"


def _suite_concentration(rng: np.random.Generator, draws: int = 10**6) -> tuple[bool, str]:
    worst = -math.inf
    for t in (6, 10, 25, 50, 100, 200):
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            s = round(2 + frac * (t - 4))
            mean = (s + 0.5) / (t + 1)
            theta = rng.beta(s + 0.5, t - s + 0.5, draws)
            for eps in (0.05, 0.1, 0.2, 0.3, 0.5):
                bound = kt_concentration_bound(t, s, eps)
                if bound >= 1.0:
                    continue
                p_hat = float(np.mean(np.abs(theta - mean) >= eps))
                sigma = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / draws)
                worst = max(worst, p_hat - (bound + 3.0 * sigma))
    return worst <= 0.0, f"max (tail - bound - 3 sigma) = {worst:.3e}"


def _suite_exploration_counts(rng: np.random.Generator, reps: int = 20000) -> tuple[bool, str]:
    checked = 0
    for n in (256, 1024, 4096, 65536):
        alpha = 1.0 / math.sqrt(n)
        for num_arms in (1, 2, 5):
            for eps in (0.005, 1.0 / (2.0 * num_arms * math.sqrt(n)), n ** -0.6):
                min_count, failure = exploration_count_bound(n, num_arms, eps)
                if min_count < 0:
                    continue  # vacuous: counts are always >= 0
                checked += 1
                totals = rng.binomial(n, alpha, reps)
                if num_arms == 1:
                    counts = totals[:, None]
                else:
                    counts = np.empty((reps, num_arms), dtype=np.int64)
                    probs = np.full(num_arms, 1.0 / num_arms)
                    for r in range(reps):
                        counts[r] = rng.multinomial(totals[r], probs)
                fails = float(np.mean((counts < min_count).any(axis=1)))
                allowance = min(1.0, failure) + 3.0 * math.sqrt(
                    max(failure * (1 - failure), 1e-12) / reps
                )
                if fails > allowance:
                    return False, (
                        f"failure rate {fails:.4f} > bound {failure:.4f} at "
                        f"n={n}, A={num_arms}, eps={eps:.2e}"
                    )
    return True, f"{checked} informative grid cells respected the bound"


def _suite_beta_sampler(rng: np.random.Generator, draws: int = 10**5) -> tuple[bool, str]:
    from scipy import stats

    # 0.001-significance KS critical value for large n.
    crit = 1.94947 / math.sqrt(draws)
    worst = 0.0
    for a, b in ((0.5, 0.5), (2.5, 8.5), (100.5, 1.5)):
        sample = rng.beta(a, b, draws)
        stat = stats.kstest(sample, stats.beta(a, b).cdf).statistic
        worst = max(worst, float(stat))
    return worst <= crit, f"max KS statistic {worst:.5f} (threshold {crit:.5f})"


def run_suites(quick: bool = False, seed: int = 20240911) -> list[tuple[str, bool, str]]:
    """Run every verification suite; returns (name, passed, detail) triples."""
    rng = np.random.default_rng(seed)
    scale = 0.2 if quick else 1.0
    suites = [
        ("active-segments", lambda: _suite_active_segments()),
        ("prior-normalization", lambda: _suite_prior_normalization()),
        ("marginal-equivalence", lambda: _suite_marginal_equivalence(rng, max(3, int(20 * scale)))),
        ("kt-redundancy", lambda: _suite_kt_redundancy(rng, max(50, int(1000 * scale)))),
        ("kte-redundancy", lambda: _suite_kte_redundancy(rng, max(20, int(200 * scale)))),
        ("piecewise-redundancy", lambda: _suite_piecewise_redundancy(rng, max(5, int(50 * scale)))),
        ("posterior-concentration", lambda: _suite_concentration(rng, max(10**5, int(10**6 * scale)))),
        ("exploration-counts", lambda: _suite_exploration_counts(rng, max(2000, int(20000 * scale)))),
        ("beta-sampler-ks", lambda: _suite_beta_sampler(rng)),
    ]
    results = []
    for name, fn in suites:
        ok, detail = fn()
        results.append((name, ok, detail))
    return results
