"""Random scenario generation for the Monte Carlo experiments.

Tasks are spread uniformly over a square arena; agents start inside a smaller
square placed at the arena centre (shifted by ``agent_offset`` if given).
Peaked rewards draw ``r_max ~ U[lo, hi] * n_a / n_t`` with desired size
``n_d = round(r_max / sum(r_max) * n_a)`` (at least 1); submodular rewards use
``eps = 2`` and ``r_min ~ U[lo, hi] / log_eps(n_a / n_t + 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..core import AgentSpec, Scenario, TaskSpec
from ..network import CommGraph, fully_connected, is_connected, mst_graph, range_graph
from ..utility import AuxiliaryUtility, Peaked, Submodular, UtilityModel

REWARDS = ("peaked", "submodular")
FORMATIONS = ("circle", "skewed", "square")


@dataclass(frozen=True)
class GeneratorParams:
    n_agents: int
    n_tasks: int
    reward: str = "submodular"
    arena: float = 1000.0
    agent_arena: float = 250.0
    agent_offset: tuple[float, float] = (0.0, 0.0)
    cost_coefficient: float = 0.1
    reward_range: tuple[float, float] = (1000.0, 2000.0)
    epsilon: float = 2.0
    min_requirements: bool = False
    beta: float = 1.0
    formation: Optional[str] = None

    def __post_init__(self):
        if self.n_agents < 1 or self.n_tasks < 1:
            raise ValueError("need at least one agent and one task")
        if self.reward not in REWARDS:
            raise ValueError(f"reward must be one of {REWARDS}")
        if not 0 < self.agent_arena <= self.arena:
            raise ValueError("agent_arena must be in (0, arena]")
        if self.cost_coefficient < 0:
            raise ValueError("cost_coefficient must be >= 0")
        lo, hi = self.reward_range
        if not 0 < lo <= hi:
            raise ValueError("reward_range must satisfy 0 < lo <= hi")
        if self.formation is not None and self.formation not in FORMATIONS:
            raise ValueError(f"formation must be one of {FORMATIONS}")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _agent_positions(params: GeneratorParams, rng: np.random.Generator) -> np.ndarray:
    n = params.n_agents
    c = params.arena / 2
    half = params.agent_arena / 2
    cx, cy = c + params.agent_offset[0], c + params.agent_offset[1]
    if params.formation in (None, "square"):
        return np.column_stack([cx - half + rng.random(n) * params.agent_arena,
                                cy - half + rng.random(n) * params.agent_arena])
    radius = half * np.sqrt(rng.random(n))
    theta = rng.random(n) * 2 * np.pi
    x, y = radius * np.cos(theta), radius * np.sin(theta)
    if params.formation == "skewed":
        x, y = 1.6 * x, y / 1.6
        rot = np.pi / 6
        x, y = x * np.cos(rot) - y * np.sin(rot), x * np.sin(rot) + y * np.cos(rot)
    return np.column_stack([cx + x, cy + y])


def _task_positions(params: GeneratorParams, rng: np.random.Generator) -> np.ndarray:
    if params.formation is None:
        return rng.random((params.n_tasks, 2)) * params.arena
    # keep tasks away from the formation: outside a disc around its centre
    c = params.arena / 2
    keep_out = params.agent_arena + 100.0
    out = []
    while len(out) < params.n_tasks:
        p = rng.random(2) * params.arena
        if math.hypot(p[0] - c - params.agent_offset[0], p[1] - c - params.agent_offset[1]) > keep_out:
            out.append(p)
    return np.array(out)


def _reward_models(params: GeneratorParams, rng: np.random.Generator, n_agents: int,
                   n_tasks: int, count: Optional[int] = None, existing_total: float = 0.0):
    """Reward models for ``count`` tasks (default ``n_tasks``) in an ``n_agents``/``n_tasks`` world."""
    lo, hi = params.reward_range
    base = rng.uniform(lo, hi, size=n_tasks if count is None else count)
    if params.reward == "peaked":
        r_max = base * n_agents / n_tasks
        total = existing_total + r_max.sum()
        return [Peaked(float(r), max(1, round_half_up(r / total * n_agents))) for r in r_max]
    eps = params.epsilon
    r_min = base / (math.log(n_agents / n_tasks + 1) / math.log(eps))
    return [Submodular(float(r), eps) for r in r_min]


def _requirements(params: GeneratorParams, rng: np.random.Generator) -> list[int]:
    n_a, n_t = params.n_agents, params.n_tasks
    req = rng.integers(0, max(1, n_a // n_t) + 1, size=n_t)
    while req.sum() > n_a:
        req[int(np.argmax(req))] -= 1
    return [int(r) for r in req]


def generate_scenario(params: GeneratorParams, seed: int) -> Scenario:
    """Deterministic scenario for ``(params, seed)``."""
    rng = np.random.default_rng(seed)
    tasks_xy = _task_positions(params, rng)
    agents_xy = _agent_positions(params, rng)
    models = _reward_models(params, rng, params.n_agents, params.n_tasks)
    req = _requirements(params, rng) if params.min_requirements else [0] * params.n_tasks
    agents = [AgentSpec(i, (float(x), float(y)), params.cost_coefficient)
              for i, (x, y) in enumerate(agents_xy)]
    tasks = [TaskSpec(j + 1, (float(x), float(y)), m, r)
             for j, ((x, y), m, r) in enumerate(zip(tasks_xy, models, req))]
    utility = AuxiliaryUtility(UtilityModel(), params.beta) if params.min_requirements else UtilityModel()
    return Scenario.build(agents, tasks, utility, rng_seed=seed)


def new_agents(params: GeneratorParams, scenario: Scenario, count: int,
               rng: np.random.Generator) -> list[AgentSpec]:
    """Extra agents drawn from the same placement distribution (ids are appended)."""
    xy = _agent_positions(replace(params, n_agents=count), rng)
    start = scenario.n_agents
    return [AgentSpec(start + k, (float(x), float(y)), params.cost_coefficient)
            for k, (x, y) in enumerate(xy)]


def new_tasks(params: GeneratorParams, scenario: Scenario, count: int,
              rng: np.random.Generator) -> list[TaskSpec]:
    """Extra tasks; existing tasks keep their reward parameters."""
    xy = rng.random((count, 2)) * params.arena
    existing = sum(t.reward_model.r_max for t in scenario.tasks[1:]
                   if isinstance(t.reward_model, Peaked))
    models = _reward_models(params, rng, scenario.n_agents, scenario.n_tasks + count,
                            count, existing)
    start = scenario.n_tasks + 1
    return [TaskSpec(start + k, (float(x), float(y)), m)
            for k, ((x, y), m) in enumerate(zip(xy, models))]


def build_network(kind: str, positions, radius: float = 50.0) -> CommGraph:
    if kind == "full":
        return fully_connected(len(positions))
    if kind == "mst":
        return mst_graph(positions)
    if kind == "range":
        return range_graph(positions, radius)
    raise ValueError(f"unknown network kind {kind!r}")


def generate_connected_formation(params: GeneratorParams, seed: int, radius: float = 50.0,
                                 max_attempts: int = 100) -> tuple[Scenario, CommGraph]:
    """Formation scenario whose range graph is connected; redraws with seeds ``seed + k``."""
    for k in range(max_attempts):
        sc = generate_scenario(params, seed + k)
        g = range_graph([a.position for a in sc.agents], radius)
        if is_connected(g):
            return sc, g
    raise RuntimeError(f"no connected formation within {max_attempts} attempts")
