"""Multi-agent episode runner, seed sweeps and metrics.

An episode plays T iterations of simultaneous moves: every agent picks an
action using only information from iterations before t, the joint
configuration is evaluated (dataset lookup, or a live simulation with a
per-iteration seed), and each agent then observes its own satisfaction as
the reward. Seed sweeps derive every per-agent stream from
``(base_seed, seed_index, bss)``, so sweeps parallelize across processes
without changing a single logged row.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .agents import Agent, Hyperparameters, make_agent, reward
from .dataset import Dataset, lookup
from .deployment import Deployment, MacParams
from .errors import ValidationError
from .seeding import rng_stream, stable_hash
from .sim import simulate
from .spectrum import Action

log = logging.getLogger(__name__)

RUNLOG_HEADER = "seed,iteration,bss,primary,max_bw,sigma,epsilon,context"
SUMMARY_HEADER = "iteration,mean_gain,worst_gain"


@dataclass(frozen=True)
class RunConfig:
    """Everything a reproducible sweep needs."""

    algorithms: tuple[str, ...]  # one per BSS
    iterations: int = 200
    iteration_seconds: float = 5.0
    seeds: int = 100
    base_seed: int = 0
    threads: int = 1
    worst_mode: str = "min-then-avg"  # or "avg-then-min"
    hyper: Hyperparameters = field(default_factory=Hyperparameters)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if self.seeds < 1:
            raise ValidationError("seeds must be >= 1")
        if self.worst_mode not in ("min-then-avg", "avg-then-min"):
            raise ValidationError(f"unknown worst_mode {self.worst_mode!r}")


@dataclass(frozen=True)
class RunRow:
    seed: int
    iteration: int
    bss: int
    primary: int
    max_bw: int
    sigma: float
    epsilon: float
    context: int


@dataclass
class RunLog:
    """Per-(seed, iteration, bss) record of one sweep."""

    n_seeds: int
    iterations: int
    n_bss: int
    rows: list[RunRow]

    def sigma_array(self) -> np.ndarray:
        """Rewards as a (seeds, iterations, bss) array; validates shape."""
        expected = self.n_seeds * self.iterations * self.n_bss
        if len(self.rows) != expected:
            raise ValidationError(
                f"ragged run log: {len(self.rows)} rows, expected {expected}"
            )
        out = np.empty((self.n_seeds, self.iterations, self.n_bss))
        for row in self.rows:
            out[row.seed, row.iteration - 1, row.bss] = row.sigma
        return out


@dataclass(frozen=True)
class MetricsSummary:
    """Aggregated curves: per-iteration normalized cumulative gain."""

    mean_gain: np.ndarray  # mean over seeds of BSS-mean G_t/t
    worst_gain: np.ndarray  # worst-BSS G_t/t per the chosen mode
    tau: tuple[Optional[int], ...]  # per seed
    worst_mode: str

    @property
    def final_mean(self) -> float:
        return float(self.mean_gain[-1])

    @property
    def final_worst(self) -> float:
        return float(self.worst_gain[-1])


class DatasetEnvironment:
    """Replays stored throughputs; one fixed value per joint configuration."""

    live = False

    def __init__(self, dataset: Dataset, deployment: Deployment):
        if dataset.n_bss != deployment.n_bss or dataset.n_channels != deployment.n_channels:
            raise ValidationError("dataset shape does not match deployment")
        self._dataset = dataset
        self._loads = deployment.loads_mbps
        self.n_channels = deployment.n_channels
        self.n_bss = deployment.n_bss

    def evaluate(self, actions: Sequence[Action], t: int, episode_seed: int):
        throughput = lookup(self._dataset, actions)
        sigmas = [reward(throughput[w], self._loads[w]) for w in range(self.n_bss)]
        return sigmas, None


class LiveEnvironment:
    """Simulates each iteration afresh with a seed derived from (seed, t)."""

    live = True

    def __init__(
        self,
        deployment: Deployment,
        mac: MacParams,
        iteration_seconds: float,
        record_occupancy: bool = False,
    ):
        self._deployment = deployment
        self._mac = mac
        self._duration = iteration_seconds
        self._record_occupancy = record_occupancy
        self.n_channels = deployment.n_channels
        self.n_bss = deployment.n_bss

    def evaluate(self, actions: Sequence[Action], t: int, episode_seed: int):
        result = simulate(
            self._deployment,
            tuple(actions),
            self._duration,
            self._mac,
            seed=stable_hash(episode_seed, t),
            record_occupancy=self._record_occupancy,
        )
        loads = self._deployment.loads_mbps
        sigmas = [
            reward(result.throughput_mbps[w], loads[w]) for w in range(self.n_bss)
        ]
        return sigmas, result.occupancy


@dataclass(frozen=True)
class EnvSpec:
    """Picklable recipe for building an environment inside worker processes."""

    deployment: Deployment
    mac: MacParams
    dataset: Optional[Dataset] = None  # None means live mode
    iteration_seconds: float = 5.0
    record_occupancy: bool = False

    def build(self):
        if self.dataset is not None:
            return DatasetEnvironment(self.dataset, self.deployment)
        return LiveEnvironment(
            self.deployment, self.mac, self.iteration_seconds, self.record_occupancy
        )


def build_agents(
    algorithms: Sequence[str],
    n_channels: int,
    base_seed: int,
    seed_index: int,
    hyper: Hyperparameters,
) -> list[Agent]:
    return [
        make_agent(name, n_channels, rng_stream("agent", base_seed, seed_index, w), hyper)
        for w, name in enumerate(algorithms)
    ]


def run_episode(
    env, agents: Sequence[Agent], iterations: int, seed_index: int, episode_seed: int
) -> list[RunRow]:
    """One seed's trajectory: simultaneous selection, then joint evaluation."""
    rows = []
    for t in range(1, iterations + 1):
        actions = [agent.select() for agent in agents]
        sigmas, occupancy = env.evaluate(actions, t, episode_seed)
        for w, agent in enumerate(agents):
            agent.observe(sigmas[w], occupancy[w] if occupancy is not None else None)
            rows.append(
                RunRow(
                    seed=seed_index,
                    iteration=t,
                    bss=w,
                    primary=actions[w].primary,
                    max_bw=actions[w].max_bandwidth,
                    sigma=sigmas[w],
                    epsilon=agent.last_epsilon,
                    context=agent.last_context,
                )
            )
    return rows


def _run_seed(args) -> list[RunRow]:
    env_spec, config, seed_index = args
    env = env_spec.build()
    agents = build_agents(
        config.algorithms, env.n_channels, config.base_seed, seed_index, config.hyper
    )
    episode_seed = stable_hash(config.base_seed, seed_index)
    return run_episode(env, agents, config.iterations, seed_index, episode_seed)


def run_sweep(env_spec: EnvSpec, config: RunConfig) -> RunLog:
    """Run every seed; output is independent of the thread count."""
    n_bss = env_spec.deployment.n_bss
    if len(config.algorithms) != n_bss:
        raise ValidationError(
            f"need one algorithm per bss ({n_bss}), got {len(config.algorithms)}"
        )
    if env_spec.dataset is not None and any(
        name == "heuristic" for name in config.algorithms
    ):
        raise ValidationError(
            "heuristic needs occupancy observations, which dataset mode cannot "
            "provide; use a live environment"
        )
    tasks = [(env_spec, config, s) for s in range(config.seeds)]
    rows: list[RunRow] = []
    if config.threads > 1 and config.seeds > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            for seed_rows in pool.map(_run_seed, tasks):
                rows.extend(seed_rows)
    else:
        for task in tasks:
            rows.extend(_run_seed(task))
    log.info("sweep finished: %d seeds x %d iterations", config.seeds, config.iterations)
    return RunLog(config.seeds, config.iterations, n_bss, rows)


def normalized_gain(rewards: Sequence[float]) -> np.ndarray:
    """Prefix means G_t / t of a reward sequence."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        raise ValidationError("reward sequence must be non-empty")
    if rewards.min() < 0 or rewards.max() > 1:
        raise ValidationError("rewards must lie in [0, 1]")
    return np.cumsum(rewards) / np.arange(1, rewards.size + 1)


def tau(sigmas: np.ndarray, threshold: float) -> Optional[int]:
    """First iteration at which every BSS is simultaneously satisfied.

    ``sigmas`` is a single seed's (iterations, bss) array; None when the
    joint threshold is never reached.
    """
    hits = np.flatnonzero(sigmas.min(axis=1) >= threshold)
    return int(hits[0]) + 1 if hits.size else None


def aggregate(
    run_log: RunLog, worst_mode: str = "min-then-avg", sat_threshold: float = 0.99
) -> MetricsSummary:
    """Collapse a sweep into mean and worst-BSS gain curves plus tau.

    Worst mode "min-then-avg" takes each seed's worst BSS before averaging
    over seeds; "avg-then-min" averages each BSS over seeds first.
    """
    if worst_mode not in ("min-then-avg", "avg-then-min"):
        raise ValidationError(f"unknown worst_mode {worst_mode!r}")
    sig = run_log.sigma_array()  # (seeds, T, W)
    steps = np.arange(1, run_log.iterations + 1)[None, :, None]
    gain = np.cumsum(sig, axis=1) / steps  # per-BSS G_t/t
    mean_curve = gain.mean(axis=2).mean(axis=0)
    if worst_mode == "min-then-avg":
        worst_curve = gain.min(axis=2).mean(axis=0)
    else:
        worst_curve = gain.mean(axis=0).min(axis=1)
    taus = tuple(tau(sig[s], sat_threshold) for s in range(run_log.n_seeds))
    return MetricsSummary(mean_curve, worst_curve, taus, worst_mode)


def write_runlog_csv(path, run_log: RunLog) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(RUNLOG_HEADER + "\n")
        for r in run_log.rows:
            fh.write(
                f"{r.seed},{r.iteration},{r.bss},{r.primary},{r.max_bw},"
                f"{r.sigma:.6f},{r.epsilon:.6f},{r.context}\n"
            )


def write_summary_csv(path, summary: MetricsSummary) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for t in range(len(summary.mean_gain)):
            fh.write(
                f"{t + 1},{summary.mean_gain[t]:.6f},{summary.worst_gain[t]:.6f}\n"
            )
