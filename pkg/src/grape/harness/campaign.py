"""Monte Carlo campaigns: convergence, suboptimality, robustness and adaptability.

Every run is seeded from ``SeedSequence([campaign_seed, run_index])`` so a run's
outcome depends only on the campaign spec and its index, never on worker
scheduling. Rows come back in run-index order.
"""
from __future__ import annotations

import copy
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..analysis import MAX_ORACLE_AGENTS, MAX_ORACLE_TASKS, bound_report
from ..engine import AddAgent, AddTask, RemoveAgent, RemoveTask, SchedulerConfig, Simulator
from .generate import GeneratorParams, build_network, generate_scenario, new_agents, new_tasks
from .io import format_csv

EXPERIMENTS = ("convergence", "suboptimality", "robustness", "adaptability")
NETWORKS = ("full", "mst", "range")

RUN_COLUMNS = (
    "run", "seed", "experiment", "reward", "n_a", "n_t", "network", "d_G", "f",
    "iterations", "dummy_iterations", "time_steps", "iterations_per_na", "messages_sent",
    "max_dummy_streak", "j_grape", "lambda", "bound_general", "half_bound_applicable",
    "j_opt", "alpha_true", "j_tilde", "delta", "minreq_bound", "minreq_half_bound",
    "requirements_met", "converged",
)
ADAPT_COLUMNS = (
    "run", "seed", "reward", "n_a", "n_t", "network", "target", "magnitude_pct", "count",
    "baseline_iterations", "additional_iterations", "additional_per_na",
    "additional_time_steps", "converged",
)
GROUP_KEYS = ("experiment", "reward", "n_a", "n_t", "network", "f", "target", "magnitude_pct")
SUMMARY_STATS = ("mean", "q1", "median", "q3")


class CampaignFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class CampaignSpec:
    """A grid of generator settings times ``n_runs`` seeded runs per grid cell."""

    experiment: str = "convergence"
    n_runs: int = 10
    n_agents: tuple[int, ...] = (40,)
    n_tasks: tuple[int, ...] = (5,)
    rewards: tuple[str, ...] = ("submodular",)
    networks: tuple[str, ...] = ("full",)
    radius: float = 50.0
    seed: int = 0
    scheduler: SchedulerConfig = SchedulerConfig()
    generator: GeneratorParams = GeneratorParams(1, 1)  # template; counts/reward overridden
    oracle: Optional[bool] = None  # default: on for suboptimality within the oracle caps
    fractions: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8)
    magnitudes: tuple[int, ...] = (-50, -40, -30, -20, -10, 10, 20, 30, 40, 50)
    targets: tuple[str, ...] = ("agents", "tasks")
    allow_nonconverged: bool = False
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if not self.n_agents or min(self.n_agents) < 1 or not self.n_tasks or min(self.n_tasks) < 1:
            raise ValueError("agent and task counts must be >= 1")
        for net in self.networks:
            if net not in NETWORKS:
                raise ValueError(f"network must be one of {NETWORKS}")
        for f in self.fractions:
            if not 0 <= f < 1:
                raise ValueError("non-operating fractions must be in [0, 1)")
        for m in self.magnitudes:
            if not -100 < m:
                raise ValueError("removal magnitudes must stay above -100%")
        for t in self.targets:
            if t not in ("agents", "tasks"):
                raise ValueError("targets must be 'agents' or 'tasks'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def cells(self):
        return list(itertools.product(self.rewards, self.networks, self.n_agents, self.n_tasks))

    def columns(self) -> tuple[str, ...]:
        cols = ADAPT_COLUMNS if self.experiment == "adaptability" else RUN_COLUMNS
        return cols + ("wall_time",) if self.timing else cols


def run_seeds(campaign_seed: int, run_index: int) -> tuple[int, int]:
    """(scenario seed, scheduler seed) for one run."""
    a, b = np.random.SeedSequence([campaign_seed, run_index]).generate_state(2, np.uint64)
    return int(a), int(b)


@dataclass(frozen=True)
class _Job:
    spec: CampaignSpec
    index: int
    reward: str
    network: str
    n_a: int
    n_t: int


def _oracle_on(spec: CampaignSpec, n_a: int, n_t: int) -> bool:
    if spec.oracle is None:
        return spec.experiment == "suboptimality" and n_a <= MAX_ORACLE_AGENTS and n_t <= MAX_ORACLE_TASKS
    return spec.oracle


def _setup(job: _Job):
    spec = job.spec
    params = replace(spec.generator, n_agents=job.n_a, n_tasks=job.n_t, reward=job.reward)
    sc_seed, sched_seed = run_seeds(spec.seed, job.index)
    scenario = generate_scenario(params, sc_seed)
    graph = build_network(job.network, [a.position for a in scenario.agents], spec.radius)
    return params, scenario, graph, sc_seed, sched_seed


def _run_row(job: _Job, scenario, graph, sc_seed, config, f) -> dict:
    t0 = time.perf_counter()
    sim = Simulator(scenario, graph, config)
    rep = sim.run()
    row = {"run": job.index, "seed": sc_seed, "experiment": job.spec.experiment,
           "reward": job.reward, "n_a": job.n_a, "n_t": job.n_t, "network": job.network,
           "d_G": sim.d_G, "f": f, "iterations": rep.iterations,
           "dummy_iterations": rep.dummy_iterations, "time_steps": rep.time_steps,
           "iterations_per_na": rep.iterations / job.n_a, "messages_sent": rep.messages_sent,
           "max_dummy_streak": rep.max_dummy_streak, "converged": rep.converged}
    if rep.converged:
        sizes = rep.final_partition.sizes
        row["requirements_met"] = all(sizes[j] >= t.min_requirement
                                      for j, t in enumerate(scenario.tasks) if j)
        br = bound_report(rep.final_partition, scenario,
                          oracle=_oracle_on(job.spec, job.n_a, job.n_t), check=False)
        row.update({"j_grape": br.j_grape, "lambda": br.lambda_, "bound_general": br.bound_general,
                    "half_bound_applicable": br.half_bound_applicable, "j_opt": br.j_opt,
                    "alpha_true": br.alpha_true})
        if br.minreq is not None:
            row.update({"j_tilde": br.minreq.j_tilde, "delta": br.minreq.delta,
                        "minreq_bound": br.minreq.bound,
                        "minreq_half_bound": br.minreq.half_bound})
    if job.spec.timing:
        row["wall_time"] = time.perf_counter() - t0
    return row


def _execute(job: _Job) -> list[dict]:
    spec = job.spec
    params, scenario, graph, sc_seed, sched_seed = _setup(job)
    base = replace(spec.scheduler, rng_seed=sched_seed)
    if spec.experiment in ("convergence", "suboptimality"):
        f = base.non_operating_fraction if base.mode == "non-operating" else 0.0
        return [_run_row(job, scenario, graph, sc_seed, base, f)]
    if spec.experiment == "robustness":
        return [_run_row(job, scenario, graph, sc_seed,
                         replace(base, mode="non-operating", non_operating_fraction=f), f)
                for f in spec.fractions]
    return _adaptability(job, params, scenario, graph, sc_seed, base)


def _events(target: str, magnitude: int, params, scenario, rng) -> list:
    base_count = scenario.n_agents if target == "agents" else scenario.n_tasks
    count = int(math.floor(abs(magnitude) / 100 * base_count + 0.5))
    if magnitude < 0:
        count = min(count, base_count - 1)
        ids = sorted(rng.choice(base_count, size=count, replace=False).tolist(), reverse=True)
        if target == "agents":
            return [RemoveAgent(int(i)) for i in ids]
        return [RemoveTask(int(i) + 1) for i in ids]
    if target == "agents":
        return [AddAgent(a) for a in new_agents(params, scenario, count, rng)]
    return [AddTask(t) for t in new_tasks(params, scenario, count, rng)]


def _adaptability(job, params, scenario, graph, sc_seed, config) -> list[dict]:
    spec = job.spec
    t0 = time.perf_counter()
    factory = lambda pos: build_network(job.network, pos, spec.radius)
    sim = Simulator(scenario, graph, config, network_factory=factory)
    baseline = sim.run()
    if not baseline.converged:
        return [{"run": job.index, "seed": sc_seed, "reward": job.reward, "n_a": job.n_a,
                 "n_t": job.n_t, "network": job.network, "converged": False}]
    rows = []
    ev_rng = np.random.default_rng([sc_seed, 1])
    for target in spec.targets:
        for mag in spec.magnitudes:
            events = _events(target, mag, params, scenario, ev_rng)
            fork = copy.deepcopy(sim)
            fork.inject(events)
            rep = fork.run()
            row = {"run": job.index, "seed": sc_seed, "reward": job.reward, "n_a": job.n_a,
                   "n_t": job.n_t, "network": job.network, "target": target,
                   "magnitude_pct": mag, "count": len(events),
                   "baseline_iterations": baseline.iterations,
                   "additional_iterations": rep.iterations,
                   "additional_per_na": rep.iterations / job.n_a,
                   "additional_time_steps": rep.time_steps, "converged": rep.converged}
            if spec.timing:
                row["wall_time"] = time.perf_counter() - t0
            rows.append(row)
    return rows


def _jobs(spec: CampaignSpec) -> list[_Job]:
    jobs = []
    index = 0
    for reward, network, n_a, n_t in spec.cells():
        for _ in range(spec.n_runs):
            jobs.append(_Job(spec, index, reward, network, n_a, n_t))
            index += 1
    return jobs


def run_campaign(spec: CampaignSpec) -> list[dict]:
    """Per-run rows in run-index order. Raises on a non-converged run unless allowed."""
    jobs = _jobs(spec)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as ex:
            chunks = list(ex.map(_execute, jobs))
    else:
        chunks = [_execute(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    if not spec.allow_nonconverged:
        bad = [r["run"] for r in rows if not r["converged"]]
        if bad:
            raise CampaignFailure(f"{len(bad)} run(s) did not converge, first run index {bad[0]}")
    return rows


def summarize(rows: Sequence[dict], columns: Sequence[str]) -> list[dict]:
    """Mean and quartiles of every numeric column, one block per configuration."""
    keys = [k for k in GROUP_KEYS if k in columns]
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r.get(k) for k in keys), []).append(r)
    numeric = [c for c in columns if c not in keys and c not in ("run", "seed")]
    out = []
    for key, members in groups.items():
        stats = {}
        for c in numeric:
            vals = [r.get(c) for r in members]
            vals = [float(v) for v in vals if v is not None and not isinstance(v, str)]
            if vals:
                arr = np.array(vals)
                q1, med, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
                stats[c] = (float(arr.mean()), float(q1), float(med), float(q3))
        for k, name in enumerate(SUMMARY_STATS):
            row = {"run": name, **dict(zip(keys, key))}
            row.update({c: v[k] for c, v in stats.items()})
            out.append(row)
    return out


def campaign_csv(spec: CampaignSpec, rows: Optional[Sequence[dict]] = None,
                 summary: bool = True) -> str:
    if rows is None:
        rows = run_campaign(spec)
    cols = spec.columns()
    body = list(rows) + (summarize(rows, cols) if summary else [])
    return format_csv(cols, body)
