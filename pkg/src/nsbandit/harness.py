"""Experiment orchestration: episodes, seeding, aggregation and CSV output.

Common random numbers: every algorithm in a comparison replays the same
environment (one spec and one per-(t, arm) uniform table per episode), while
each algorithm draws its own policy randomness. Seed streams are derived from
the master seed with a splittable counter scheme,
``numpy.random.SeedSequence(master_seed, spawn_key=(purpose, *indices))``,
with purpose tags 1 = environment spec, 2 = percept table, 3 = policy (keyed
additionally by a CRC-32 of the algorithm's canonical name + parameters, so
identical algorithm entries share identical streams).
"""

from __future__ import annotations

import csv
import json
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environments import (
    NssbpSpec,
    RegretCurve,
    adversarial_two_segment,
    gen_geometric_adversarial,
    gen_geometric_uniform,
    gen_stationary,
)
from .errors import ConfigError
from .policies import POLICY_NAMES, Policy, build_policy, default_depth

_TAG_SPEC = 1
_TAG_PERCEPTS = 2
_TAG_POLICY = 3

REGIMES = ("geometric_uniform", "stationary", "geometric_adversarial", "fixed_adversarial")


def child_seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Named splittable child stream: hash of (master, purpose tag, indices)."""
    return np.random.SeedSequence(
        entropy=master_seed, spawn_key=tuple(int(k) & 0xFFFFFFFF for k in key)
    )


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class AlgorithmSpec:
    """One benchmark entry: registry name, parameter map, display label."""

    name: str
    params: dict = field(default_factory=dict)
    label: str | None = None

    def display(self) -> str:
        if self.label:
            return self.label
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner})"

    def stream_key(self) -> int:
        # Keyed by what the policy *is*, not by its display label, so two rows
        # configured identically replay identical action streams.
        canon = json.dumps({"name": self.name, "params": self.params}, sort_keys=True)
        return zlib.crc32(canon.encode("utf-8"))


@dataclass
class ExperimentConfig:
    regime: str
    num_arms: int
    horizon: int
    episodes: int
    algorithms: list[AlgorithmSpec]
    master_seed: int = 0
    p: float | None = None
    checkpoint_stride: int | None = None
    depth: int | None = None
    gamma: float | None = None

    def validate(self) -> None:
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}; known: {list(REGIMES)}")
        if self.regime in ("geometric_uniform", "geometric_adversarial"):
            if self.p is None or not 0.0 < self.p <= 1.0:
                raise ConfigError(f"regime {self.regime!r} needs p in (0, 1], got {self.p}")
        if self.regime == "fixed_adversarial":
            fixed = adversarial_two_segment()
            if self.num_arms != fixed.num_arms or self.horizon != fixed.horizon:
                raise ConfigError(
                    "fixed_adversarial regime requires num_arms="
                    f"{fixed.num_arms}, horizon={fixed.horizon}"
                )
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.episodes < 1:
            raise ConfigError(f"episodes must be >= 1, got {self.episodes}")
        if self.num_arms < 1:
            raise ConfigError(f"num_arms must be >= 1, got {self.num_arms}")
        if self.depth is not None and self.horizon > (1 << self.depth):
            raise ConfigError(
                f"horizon {self.horizon} exceeds 2^depth = {1 << self.depth}"
            )
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must be in (0, 1), got {self.gamma}")
        stride = self.resolved_stride()
        if stride < 1:
            raise ConfigError(f"checkpoint_stride must be >= 1, got {stride}")
        if not self.algorithms:
            raise ConfigError("at least one algorithm entry is required")
        seen = set()
        for alg in self.algorithms:
            if alg.name not in POLICY_NAMES:
                raise ConfigError(f"unknown policy {alg.name!r}; known: {list(POLICY_NAMES)}")
            label = alg.display()
            if label in seen:
                raise ConfigError(f"duplicate algorithm label {label!r}; set 'label'")
            seen.add(label)

    def resolved_depth(self) -> int:
        return self.depth if self.depth is not None else default_depth(self.horizon)

    def resolved_gamma(self) -> float:
        return self.gamma if self.gamma is not None else self.num_arms / (self.num_arms + 1.0)

    def resolved_stride(self) -> int:
        if self.checkpoint_stride is not None:
            return self.checkpoint_stride
        return max(1, self.horizon // 1000)

    def checkpoint_times(self) -> np.ndarray:
        stride = self.resolved_stride()
        times = np.arange(stride, self.horizon + 1, stride, dtype=np.int64)
        if len(times) == 0 or times[-1] != self.horizon:
            times = np.append(times, self.horizon)
        return times

    def policy_params(self, alg: AlgorithmSpec) -> dict:
        params = dict(alg.params)
        if alg.name == "activeptw":
            params.setdefault("depth", self.resolved_depth())
            params.setdefault("gamma", self.resolved_gamma())
        return params

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "p": self.p,
            "num_arms": self.num_arms,
            "horizon": self.horizon,
            "episodes": self.episodes,
            "master_seed": self.master_seed,
            "checkpoint_stride": self.resolved_stride(),
            "depth": self.resolved_depth(),
            "gamma": self.resolved_gamma(),
            "algorithms": [
                {"name": a.name, "params": a.params, "label": a.display()}
                for a in self.algorithms
            ],
        }


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {
        "regime", "p", "num_arms", "horizon", "episodes", "master_seed",
        "checkpoint_stride", "depth", "gamma", "algorithms",
    }
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    try:
        algorithms = [
            AlgorithmSpec(
                name=entry["name"],
                params=dict(entry.get("params", {})),
                label=entry.get("label"),
            )
            for entry in data.get("algorithms", [])
        ]
        cfg = ExperimentConfig(
            regime=data["regime"],
            num_arms=int(data["num_arms"]),
            horizon=int(data["horizon"]),
            episodes=int(data["episodes"]),
            algorithms=algorithms,
            master_seed=int(data.get("master_seed", 0)),
            p=None if data.get("p") is None else float(data["p"]),
            checkpoint_stride=(
                None if data.get("checkpoint_stride") is None else int(data["checkpoint_stride"])
            ),
            depth=None if data.get("depth") is None else int(data["depth"]),
            gamma=None if data.get("gamma") is None else float(data["gamma"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


class PerceptTable:
    """Per-(t, arm) uniforms materialized lazily in forward order.

    The value at (t, arm) depends only on the seed, so two tables with the
    same seed replay identical environment randomness regardless of which
    arms are queried. Rows must be visited in non-decreasing t.
    """

    def __init__(self, seed, horizon: int, num_arms: int, chunk: int = 1 << 15) -> None:
        self.horizon = horizon
        self.num_arms = num_arms
        self.chunk = chunk
        self._rng = make_rng(seed)
        self._block = np.empty((0, num_arms))
        self._block_idx = -1

    def row(self, t: int) -> np.ndarray:
        idx = (t - 1) // self.chunk
        if idx < self._block_idx:
            raise ValueError("percept table rows must be visited in forward order")
        while self._block_idx < idx:
            self._block_idx += 1
            lo = self._block_idx * self.chunk
            rows = min(self.chunk, self.horizon - lo)
            self._block = self._rng.random((rows, self.num_arms))
        return self._block[(t - 1) % self.chunk]


def make_env_spec(cfg: ExperimentConfig, episode: int) -> NssbpSpec:
    rng = make_rng(child_seed(cfg.master_seed, _TAG_SPEC, episode))
    if cfg.regime == "geometric_uniform":
        return gen_geometric_uniform(cfg.p, cfg.num_arms, cfg.horizon, rng)
    if cfg.regime == "stationary":
        return gen_stationary(cfg.num_arms, cfg.horizon, rng)
    if cfg.regime == "geometric_adversarial":
        return gen_geometric_adversarial(cfg.p, cfg.num_arms, cfg.horizon, rng)
    return adversarial_two_segment()


def run_episode(
    policy: Policy,
    spec: NssbpSpec,
    seed,
    policy_seed=None,
) -> RegretCurve:
    """One full interaction loop; returns the cumulative pseudo-regret curve.

    ``seed`` drives the environment percepts; ``policy_seed`` (derived from
    ``seed`` when omitted) drives the policy's own randomness. Bit-identical
    given (policy configuration, spec, seeds).
    """
    horizon = spec.horizon
    limit = getattr(policy, "horizon", None)
    if limit is not None and limit < horizon:
        raise ConfigError(f"policy horizon {limit} < environment horizon {horizon}")
    if policy_seed is None:
        entropy = seed if isinstance(seed, int) else 0
        policy_seed = child_seed(entropy, _TAG_POLICY, 0)
    table = PerceptTable(seed, horizon, spec.num_arms)
    rng = make_rng(policy_seed)

    ends = np.array([seg.d for seg in spec.partition], dtype=np.int64)
    thetas = np.array(spec.params)
    best = thetas.max(axis=1)

    values = np.empty(horizon)
    cum = 0.0
    k = 0
    select = policy.select_action
    observe = policy.observe
    row = table.row
    for t in range(1, horizon + 1):
        arm = select(rng)
        th_row = thetas[k]
        percept = 1 if row(t)[arm - 1] < th_row[arm - 1] else 0
        observe(arm, percept)
        cum += best[k] - th_row[arm - 1]
        values[t - 1] = cum
        if t == ends[k] and t < horizon:
            k += 1
    return RegretCurve(values)


@dataclass
class AlgorithmResult:
    label: str
    episodes: int
    mean_final_regret: float
    ci95: float
    curve_t: np.ndarray
    curve_mean: np.ndarray
    curve_ci95: np.ndarray


@dataclass
class ExperimentSummary:
    rows: list[AlgorithmResult]
    config: dict

    def row(self, label: str) -> AlgorithmResult:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


def _episode_worker(args: tuple[ExperimentConfig, int]) -> list[tuple[float, np.ndarray]]:
    cfg, episode = args
    spec = make_env_spec(cfg, episode)
    ckpt = cfg.checkpoint_times()
    env_seed = child_seed(cfg.master_seed, _TAG_PERCEPTS, episode)
    out = []
    for alg in cfg.algorithms:
        policy = build_policy(alg.name, cfg.num_arms, cfg.horizon, cfg.policy_params(alg))
        pol_seed = child_seed(cfg.master_seed, _TAG_POLICY, alg.stream_key(), episode)
        curve = run_episode(policy, spec, env_seed, policy_seed=pol_seed)
        out.append((curve.final, curve.values[ckpt - 1].copy()))
    return out


def _ci95(values: np.ndarray) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    return 1.96 * float(np.std(values, ddof=1)) / np.sqrt(n)


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentSummary:
    """Run every (algorithm, episode) pair and aggregate means with 95% CIs.

    Episodes are independent work units; with ``threads`` > 1 they run in a
    process pool and are reduced in episode order, so the result is identical
    to a serial run.
    """
    cfg.validate()
    ckpt = cfg.checkpoint_times()
    n_alg = len(cfg.algorithms)
    finals = [np.empty(cfg.episodes) for _ in range(n_alg)]
    curve_sum = [np.zeros(len(ckpt)) for _ in range(n_alg)]
    curve_sq = [np.zeros(len(ckpt)) for _ in range(n_alg)]

    jobs = [(cfg, episode) for episode in range(cfg.episodes)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            episode_results = list(pool.map(_episode_worker, jobs, chunksize=1))
    else:
        episode_results = [_episode_worker(job) for job in jobs]

    for episode, per_alg in enumerate(episode_results):
        for i, (final, ck) in enumerate(per_alg):
            finals[i][episode] = final
            curve_sum[i] += ck
            curve_sq[i] += ck * ck

    rows = []
    n = cfg.episodes
    for i, alg in enumerate(cfg.algorithms):
        mean_curve = curve_sum[i] / n
        if n > 1:
            var = np.maximum(curve_sq[i] - n * mean_curve**2, 0.0) / (n - 1)
            ci_curve = 1.96 * np.sqrt(var / n)
        else:
            ci_curve = np.zeros(len(ckpt))
        rows.append(
            AlgorithmResult(
                label=alg.display(),
                episodes=n,
                mean_final_regret=float(finals[i].mean()),
                ci95=_ci95(finals[i]),
                curve_t=ckpt.copy(),
                curve_mean=mean_curve,
                curve_ci95=ci_curve,
            )
        )
    return ExperimentSummary(rows=rows, config=cfg.to_dict())


def emit_csv(summary: ExperimentSummary, path: str | Path) -> None:
    """Final-regret table: algorithm, episodes, mean_final_regret, ci95."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "episodes", "mean_final_regret", "ci95"])
        for row in summary.rows:
            writer.writerow(
                [row.label, row.episodes, f"{row.mean_final_regret:.6g}", f"{row.ci95:.6g}"]
            )


def emit_curves(summary: ExperimentSummary, path: str | Path) -> None:
    """Checkpointed curves: algorithm, t, mean_regret, ci95."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "t", "mean_regret", "ci95"])
        for row in summary.rows:
            for t, m, c in zip(row.curve_t, row.curve_mean, row.curve_ci95):
                writer.writerow([row.label, int(t), f"{m:.6g}", f"{c:.6g}"])
