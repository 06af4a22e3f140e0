"""Benchmark command line: run / table / verify / bench."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import NsbanditError
from .harness import (
    ExperimentConfig,
    emit_csv,
    emit_curves,
    load_config,
    run_experiment,
)

TABLE_RATES = (0.01, 0.001, 0.0001, 0.00001)


def _thread_count(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("NSBANDIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise NsbanditError(f"NSBANDIT_THREADS must be an integer, got {env!r}") from None
    return 1


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "episodes", None) is not None:
        cfg = replace(cfg, episodes=args.episodes)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, master_seed=args.seed)
    cfg.validate()
    return cfg


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    threads = _thread_count(args.threads)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = run_experiment(cfg, threads=threads)

    summary_path = out_dir / "summary.csv"
    curves_path = out_dir / "curves.csv"
    emit_csv(summary, summary_path)
    emit_curves(summary, curves_path)
    (out_dir / "resolved_config.json").write_text(
        json.dumps(summary.config, indent=2), encoding="utf-8"
    )

    from .plots import render_final_regret, render_regret_curves

    fig1 = render_regret_curves(summary, out_dir / "regret_curves.png")
    fig2 = render_final_regret(summary, out_dir / "final_regret.png")

    for row in summary.rows:
        print(f"{row.label}: {row.mean_final_regret:.6g} +/- {row.ci95:.6g}")
    print(f"wrote {summary_path}, {curves_path}, {fig1.name}, {fig2.name} in {out_dir}")
    return 0


def _cmd_table(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if cfg.regime not in ("geometric_uniform", "geometric_adversarial"):
        raise NsbanditError(
            f"table needs a geometric regime config, got {cfg.regime!r}"
        )
    threads = _thread_count(args.threads)
    cells: dict[str, list[str]] = {alg.display(): [] for alg in cfg.algorithms}
    for p in TABLE_RATES:
        summary = run_experiment(replace(cfg, p=p), threads=threads)
        for row in summary.rows:
            cells[row.label].append(f"{row.mean_final_regret:.2f} +/- {row.ci95:.2f}")
    label_w = max(len(lbl) for lbl in cells) + 2
    col_w = max(12, max(len(c) for cols in cells.values() for c in cols) + 2)
    print(
        f"A={cfg.num_arms}, T={cfg.horizon}, {cfg.episodes} episodes per cell, "
        f"seed {cfg.master_seed}"
    )
    header = "Algorithm".ljust(label_w) + "".join(
        f"p={p:g}".rjust(col_w) for p in TABLE_RATES
    )
    print(header)
    print("-" * len(header))
    for label, cols in cells.items():
        print(label.ljust(label_w) + "".join(c.rjust(col_w) for c in cols))
    return 0


def _cmd_verify(args) -> int:
    from .verification import run_suites

    results = run_suites(quick=args.quick, seed=args.seed)
    all_ok = True
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        all_ok &= ok
    return 0 if all_ok else 1


def bench_step_cost(depth: int, steps: int, num_arms: int = 5, seed: int = 0) -> float:
    """Mean seconds per update+posterior step at the given tree depth.

    A fresh state replaces an exhausted one so the step count stays fixed
    even when it exceeds the depth's horizon.
    """
    from .ptw import PtwState

    rng = np.random.default_rng(seed)
    arms = rng.integers(1, num_arms + 1, steps)
    bits = rng.integers(0, 2, steps)
    gamma = num_arms / (num_arms + 1.0)
    state = PtwState(depth, num_arms, gamma)
    t0 = time.perf_counter()
    for k in range(steps):
        if state.time == state.horizon:
            state = PtwState(depth, num_arms, gamma)
        state.update(int(arms[k]), int(bits[k]))
        if state.time < state.horizon:
            state.posterior_weights()
    return (time.perf_counter() - t0) / steps


def _cmd_bench(args) -> int:
    depths = [int(d) for d in args.depths.split(",")]
    print(f"steps={args.steps}, arms={args.arms}")
    prev = None
    for depth in depths:
        cost = bench_step_cost(depth, args.steps, args.arms)
        line = f"D={depth:3d}: {cost * 1e6:8.2f} us/step"
        if prev is not None:
            line += f"  (x{cost / prev:.2f} vs previous)"
        print(line)
        prev = cost
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsbandit",
        description="Non-stationary Bernoulli bandit benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment and write CSVs + figures")
    p_run.add_argument("--config", required=True, help="experiment config (JSON)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--episodes", type=int, default=None, help="override episode count")
    p_run.add_argument("--seed", type=int, default=None, help="override master seed")
    p_run.add_argument("--threads", type=int, default=None,
                       help="parallel episode workers (default $NSBANDIT_THREADS or 1)")
    p_run.set_defaults(func=_cmd_run)

    p_table = sub.add_parser("table", help="print a regret grid over change rates")
    p_table.add_argument("--config", required=True)
    p_table.add_argument("--episodes", type=int, default=None)
    p_table.add_argument("--seed", type=int, default=None)
    p_table.add_argument("--threads", type=int, default=None)
    p_table.set_defaults(func=_cmd_table)

    p_verify = sub.add_parser("verify", help="run the verification suites")
    p_verify.add_argument("--quick", action="store_true", help="reduced sample sizes")
    p_verify.add_argument("--seed", type=int, default=20240911)
    p_verify.set_defaults(func=_cmd_verify)

    p_bench = sub.add_parser("bench", help="per-step cost of the mixture engine vs depth")
    p_bench.add_argument("--steps", type=int, default=100000)
    p_bench.add_argument("--depths", default="16,32", help="comma-separated depths")
    p_bench.add_argument("--arms", type=int, default=5)
    p_bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NsbanditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
