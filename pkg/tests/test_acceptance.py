"""End-to-end acceptance gate.

Each test exercises one release criterion at its stated tolerance and prints
one pass/fail line; run with ``pytest tests/test_acceptance.py -v -s`` to see
the report. The regime comparisons (6-8) use frozen master seeds; their
orderings were additionally checked across independent seeds at equal or
larger episode counts.
"""

import math

import numpy as np
import pytest
from scipy.special import gammaln

from nsbandit.cli import bench_step_cost
from nsbandit.environments import env_log_likelihood, gen_geometric_uniform
from nsbandit.harness import AlgorithmSpec, ExperimentConfig, run_experiment
from nsbandit.kt import KtStats, kt_log_marginal, kte_redundancy_bound
from nsbandit.ptw import PtwState, Segment, active_segments, segment_posterior
from nsbandit.verification import (
    _suite_exploration_counts,
    brute_force_marginal,
    brute_force_segment_posterior,
    enumerate_partitions,
    kt_concentration_bound,
    reference_active_segments,
    piecewise_redundancy_bound,
)

THREADS = 2


def report(num: int, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def test_criterion_1_oracle_equivalence():
    # Incremental marginal and segment posterior vs full enumeration:
    # D in 1..4, A in 1..3, gamma in {1/2, A/(A+1)}, 100 random runs each,
    # checked at a mid prefix and at the end, to 1e-9 bits / 1e-9 weight.
    rng = np.random.default_rng(2024)
    worst_marginal = 0.0
    worst_posterior = 0.0
    cases = 0
    for depth in (1, 2, 3, 4):
        horizon = 1 << depth
        for num_arms in (1, 2, 3):
            for gamma in (0.5, num_arms / (num_arms + 1.0)):
                for _ in range(100):
                    n = int(rng.integers(1, horizon + 1))
                    actions = [int(a) for a in rng.integers(1, num_arms + 1, n)]
                    percepts = [int(x) for x in rng.integers(0, 2, n)]
                    state = PtwState(depth, num_arms, gamma)
                    mid = max(1, n // 2)
                    for k, (a, x) in enumerate(zip(actions, percepts), start=1):
                        state.update(a, x)
                        if k == mid or k == n:
                            want = brute_force_marginal(
                                actions[:k], percepts[:k], depth, gamma
                            )
                            worst_marginal = max(
                                worst_marginal, abs(state.log_marginal() - want)
                            )
                            if k < horizon:
                                fast = segment_posterior(state, k + 1)
                                slow = brute_force_segment_posterior(
                                    actions[:k], percepts[:k], depth, gamma, k + 1
                                )
                                for (sa, wa), (sb, wb) in zip(fast.entries, slow.entries):
                                    assert sa == sb
                                    worst_posterior = max(worst_posterior, abs(wa - wb))
                    cases += 1
    ok = worst_marginal <= 1e-9 and worst_posterior <= 1e-9
    report(
        1,
        ok,
        f"{cases} runs; max marginal gap {worst_marginal:.2e} bits, "
        f"max posterior gap {worst_posterior:.2e}",
    )


def test_criterion_2_posterior_normalization_million_steps():
    rng = np.random.default_rng(2)
    steps = 10**6
    state = PtwState(20, 3, 0.75)
    arms = rng.integers(1, 4, steps)
    bits = rng.integers(0, 2, steps)
    worst = 0.0
    for k in range(steps):
        state.update(int(arms[k]), int(bits[k]))
        if state.time < state.horizon:
            total = math.fsum(state.posterior_weights())
            dev = abs(total - 1.0)
            if dev > worst:
                worst = dev
    ok = worst <= 1e-9
    report(2, ok, f"max |sum(q) - 1| = {worst:.2e} over {steps} steps at depth 20")


def test_criterion_3_active_segments():
    worked = active_segments(3, 2)
    ok = worked == [Segment(1, 4), Segment(3, 4), Segment(3, 3)]
    for depth in range(1, 5):
        enum = enumerate_partitions(depth, 0.5)
        all_segs = {seg for partition, _ in enum.entries for seg in partition}
        for t in range(1, (1 << depth) + 1):
            by_def = {s for s in all_segs if s.c <= t <= s.d}
            ok &= set(active_segments(t, depth)) == by_def
    for depth in range(0, 11):
        for t in range(1, (1 << depth) + 1):
            ok &= active_segments(t, depth) == reference_active_segments(t, depth)
    report(3, ok, "worked example, definition filter D<=4, recursive reference D<=10")


def test_criterion_4_redundancy_bounds():
    rng = np.random.default_rng(4)

    # Single-estimator bound on 1000 random (theta, string) pairs, n <= 4096.
    n = rng.integers(1, 4097, 1000)
    theta = rng.random(1000)
    ones = rng.binomial(n, theta)
    zeros = n - ones
    kt_bits = (
        gammaln(zeros + 0.5) + gammaln(ones + 0.5) - gammaln(n + 1.0)
    ) / math.log(2) - math.log2(math.pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        lik = np.where(ones > 0, ones * np.log2(theta), 0.0) + np.where(
            zeros > 0, zeros * np.log2(1 - theta), 0.0
        )
    kt_excess = float((-kt_bits + lik - (0.5 * np.log2(n) + 1.0)).max())

    # Per-arm model bound on 200 stationary traces with arbitrary actions.
    kte_excess = -math.inf
    for _ in range(200):
        num_arms = int(rng.integers(1, 9))
        steps = int(rng.integers(1, 2049))
        th = rng.random(num_arms)
        acts = rng.integers(0, num_arms, steps)
        percs = (rng.random(steps) < th[acts]).astype(int)
        model = 0.0
        lik2 = 0.0
        used = 0
        for a in range(num_arms):
            mask = acts == a
            if not mask.any():
                continue
            used += 1
            o = int(percs[mask].sum())
            z = int(mask.sum()) - o
            model += kt_log_marginal(KtStats(z, o))
            lik2 += o * math.log2(th[a]) + z * math.log2(1 - th[a])
        kte_excess = max(kte_excess, (-model + lik2) - kte_redundancy_bound(steps, used))

    # Mixture bound on 200 random piecewise-stationary environments, D <= 10,
    # uniformly random actions, checked at every step (half/half tree prior).
    mix_excess = -math.inf
    for _ in range(200):
        depth = int(rng.integers(3, 11))
        horizon = 1 << depth
        num_arms = int(rng.integers(1, 6))
        p = min(0.9, 8.0 / horizon + float(rng.random()) * 0.05)
        spec = gen_geometric_uniform(p, num_arms, horizon, rng)
        state = PtwState(depth, num_arms, 0.5)
        lik3 = 0.0
        for t in range(1, horizon + 1):
            a = int(rng.integers(1, num_arms + 1))
            th_t = spec.theta(t, a)
            x = int(rng.random() < th_t)
            state.update(a, x)
            pr = th_t if x else 1.0 - th_t
            if pr <= 0.0:
                lik3 = -math.inf
            else:
                lik3 += math.log2(pr)
            if lik3 == -math.inf:
                continue
            bound = piecewise_redundancy_bound(t, num_arms, len(spec.partition))
            mix_excess = max(mix_excess, (-state.log_marginal() + lik3) - bound)

    ok = kt_excess <= 1e-9 and kte_excess <= 1e-9 and mix_excess <= 1e-9
    report(
        4,
        ok,
        f"max excess bits: single {kt_excess:.2e}, per-arm {kte_excess:.2e}, "
        f"mixture {mix_excess:.2e} (zero violations)",
    )


def test_criterion_5_posterior_concentration():
    rng = np.random.default_rng(5)
    draws = 10**6
    worst = -math.inf
    cells = 0
    for t in (6, 10, 25, 50, 100, 200):
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            s = round(2 + frac * (t - 4))
            mean = (s + 0.5) / (t + 1)
            theta = rng.beta(s + 0.5, t - s + 0.5, draws)
            dev = np.abs(theta - mean)
            for eps in (0.05, 0.1, 0.2, 0.3, 0.5):
                bound = kt_concentration_bound(t, s, eps)
                if bound >= 1.0:
                    continue
                cells += 1
                p_hat = float(np.mean(dev >= eps))
                sigma = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / draws)
                worst = max(worst, p_hat - (bound + 3 * sigma))
    ok = worst <= 0.0
    report(5, ok, f"{cells} informative cells; max (tail - bound - 3sigma) = {worst:.2e}")


def test_criterion_6_stationary_matches_flat_sampler():
    cfg = ExperimentConfig(
        regime="stationary",
        num_arms=5,
        horizon=5000,
        episodes=400,
        master_seed=42,
        checkpoint_stride=1000,
        algorithms=[
            AlgorithmSpec("activeptw", {"mode": "meu"}, "ptw-meu"),
            AlgorithmSpec("activeptw", {"mode": "meufe"}, "ptw-meufe"),
            AlgorithmSpec("ts", label="ts"),
        ],
    )
    summary = run_experiment(cfg, threads=THREADS)
    meu = summary.row("ptw-meu")
    meufe = summary.row("ptw-meufe")
    ts = summary.row("ts")
    gap = abs(meu.mean_final_regret - ts.mean_final_regret)
    allowance = meu.ci95 + ts.ci95
    ok = gap <= allowance and meufe.mean_final_regret > meu.mean_final_regret
    report(
        6,
        ok,
        f"meu {meu.mean_final_regret:.2f}+/-{meu.ci95:.2f} vs "
        f"ts {ts.mean_final_regret:.2f}+/-{ts.ci95:.2f} (gap {gap:.2f} <= {allowance:.2f}); "
        f"meufe {meufe.mean_final_regret:.2f} > meu",
    )


def test_criterion_7_geometric_regime_ordering():
    cfg = ExperimentConfig(
        regime="geometric_uniform",
        p=0.001,
        num_arms=5,
        horizon=100_000,
        episodes=100,
        master_seed=707,
        checkpoint_stride=10_000,
        algorithms=[
            AlgorithmSpec("activeptw", {"mode": "meu"}, "ptw-meu"),
            AlgorithmSpec("swucb", {"window": 1000}, "swucb"),
            AlgorithmSpec("ts", label="ts"),
        ],
    )
    summary = run_experiment(cfg, threads=THREADS)
    ptw = summary.row("ptw-meu").mean_final_regret
    sw = summary.row("swucb").mean_final_regret
    ts = summary.row("ts").mean_final_regret
    ok = ptw < 0.6 * sw and ptw < 0.4 * ts
    report(
        7,
        ok,
        f"ptw {ptw:.0f} vs swucb {sw:.0f} (ratio {ptw / sw:.3f} < 0.6) "
        f"and ts {ts:.0f} (ratio {ptw / ts:.3f} < 0.4)",
    )


def test_criterion_8_adversarial_instance():
    cfg = ExperimentConfig(
        regime="fixed_adversarial",
        num_arms=10,
        horizon=10_000,
        episodes=200,
        master_seed=808,
        checkpoint_stride=1000,
        algorithms=[
            AlgorithmSpec("activeptw", {"mode": "meu"}, "ptw-meu"),
            AlgorithmSpec("activeptw", {"mode": "meufe"}, "ptw-meufe"),
            AlgorithmSpec("ts", label="ts"),
        ],
    )
    summary = run_experiment(cfg, threads=THREADS)
    meu = summary.row("ptw-meu").mean_final_regret
    meufe = summary.row("ptw-meufe").mean_final_regret
    ts = summary.row("ts").mean_final_regret
    rel = abs(meu - ts) / ts
    ok = meufe < meu and rel <= 0.15
    report(
        8,
        ok,
        f"meufe {meufe:.0f} < meu {meu:.0f}; meu within {rel:.1%} of ts {ts:.0f} (<= 15%)",
    )


def test_criterion_9_forced_exploration_grid():
    rng = np.random.default_rng(9)
    ok, detail = _suite_exploration_counts(rng, reps=20_000)
    report(9, ok, detail)


def test_criterion_10_per_step_complexity():
    steps = 100_000
    cost16 = bench_step_cost(16, steps)
    cost32 = bench_step_cost(32, steps)
    ratio = cost32 / cost16
    ok = ratio <= 2.5
    report(
        10,
        ok,
        f"{cost16 * 1e6:.1f} us/step at depth 16 vs {cost32 * 1e6:.1f} at depth 32 "
        f"(ratio {ratio:.2f} <= 2.5)",
    )
