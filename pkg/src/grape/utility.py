"""Reward models, individual utilities and the minimum-requirement wrapper.

Individual utility follows the equal-fair sharing rule: a coalition's reward is
split evenly among its members and each member pays its own travel cost::

    u_i(t_j, p) = r(t_j, p) / p - c_i(t_j),        u_i(void, p) = 0

Two evaluation paths exist. Scalar functions (``reward``, ``individual_utility``,
``auxiliary_utility``) are used by the verifiers; :func:`utility_table` builds the
dense ``(n_agents, n_tasks + 1, n_agents + 1)`` array the engine reads. Both use
the same floating point operations so their values agree bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .core import VOID, AgentSpec, Scenario, TaskSpec


@dataclass(frozen=True)
class Peaked:
    """Reward peaking at ``r_max`` when ``n_d`` agents participate."""

    r_max: float
    n_d: int

    def __post_init__(self):
        if not self.r_max > 0:
            raise ValueError("r_max must be > 0")
        if int(self.n_d) != self.n_d or self.n_d < 1:
            raise ValueError("n_d must be an integer >= 1")

    def reward(self, p: int) -> float:
        return self.r_max * p / self.n_d * math.exp(-p / self.n_d + 1)


@dataclass(frozen=True)
class Submodular:
    """Reward ``r_min * log_eps(p + eps - 1)``: increasing with diminishing gain."""

    r_min: float
    epsilon: float = 2.0

    def __post_init__(self):
        if not self.r_min > 0:
            raise ValueError("r_min must be > 0")
        if not self.epsilon > 1:
            raise ValueError("epsilon must be > 1")

    def reward(self, p: int) -> float:
        return self.r_min * (math.log(p + self.epsilon - 1) / math.log(self.epsilon))


@dataclass(frozen=True)
class Tabular:
    """Explicit rewards; ``values[p - 1]`` is the reward for ``p`` participants."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def reward(self, p: int) -> float:
        if p > len(self.values):
            raise ValueError(f"tabular reward has no value for p={p}")
        return self.values[p - 1]


@dataclass(frozen=True)
class Void:
    def reward(self, p: int) -> float:
        return 0.0


RewardModel = Union[Peaked, Submodular, Tabular, Void]


def reward(model: RewardModel, p: int) -> float:
    if p < 1:
        raise ValueError(f"participant count must be >= 1, got {p}")
    return model.reward(p)


@dataclass(frozen=True)
class UtilityModel:
    """Equal-fair reward sharing minus the agent's travel cost."""

    def value(self, agent: AgentSpec, task: TaskSpec, p: int,
              tasks: Optional[Sequence[TaskSpec]] = None) -> float:
        if task.is_void:
            return 0.0
        return reward(task.reward_model, p) / p - agent.cost(task)


@dataclass(frozen=True)
class RequirementUtility:
    """Base utility that pays nothing while a task is below its minimum requirement."""

    base: UtilityModel = UtilityModel()

    def value(self, agent, task, p, tasks=None) -> float:
        if p < task.min_requirement:
            return 0.0
        return self.base.value(agent, task, p, tasks)


@dataclass(frozen=True)
class AuxiliaryUtility:
    """Auxiliary utility steering agents into tasks that still miss their requirement.

    For ``p <= R_j`` the agent sees a constant dummy utility ``u0`` that beats
    joining any task whose requirement is already met; above ``R_j`` it sees the
    base utility. Requirements ``R_j`` come from ``TaskSpec.min_requirement``.
    """

    base: UtilityModel = UtilityModel()
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")

    @property
    def original(self) -> RequirementUtility:
        return RequirementUtility(self.base)

    def dummy_utility(self, agent: AgentSpec, tasks: Sequence[TaskSpec]) -> float:
        # The void option (0) and u(t_j, R_j) enter the max so that the auxiliary
        # utility dominates the original one everywhere.
        best = 0.0
        for t in tasks:
            if t.is_void:
                continue
            best = max(best, self.base.value(agent, t, t.min_requirement + 1))
            if t.min_requirement > 0:
                best = max(best, self.base.value(agent, t, t.min_requirement))
        return best + self.beta

    def value(self, agent, task, p, tasks=None) -> float:
        if task.is_void:
            return 0.0
        if p <= task.min_requirement:
            if tasks is None:
                raise ValueError("auxiliary utility needs the task list below the requirement")
            return self.dummy_utility(agent, tasks)
        return self.base.value(agent, task, p, tasks)


AnyUtility = Union[UtilityModel, RequirementUtility, AuxiliaryUtility]


def individual_utility(model: AnyUtility, agent: AgentSpec, task: TaskSpec, p: int,
                       tasks: Optional[Sequence[TaskSpec]] = None) -> float:
    if p < 1:
        raise ValueError(f"participant count must be >= 1, got {p}")
    return model.value(agent, task, p, tasks)


def auxiliary_utility(aux: AuxiliaryUtility, agent: AgentSpec, task: TaskSpec, p: int,
                      tasks: Sequence[TaskSpec]) -> float:
    return individual_utility(aux, agent, task, p, tasks)


@dataclass(frozen=True)
class SpaoReport:
    passed: bool
    task: Optional[int] = None
    p: Optional[int] = None

    def __bool__(self):
        return self.passed


def check_spao(model: AnyUtility, agent: AgentSpec, tasks: Sequence[TaskSpec],
               n_agents: int) -> SpaoReport:
    """Pass iff ``u(t_j, p)`` is non-increasing over ``p = 1..n_agents`` for every real task.

    A failure reports the first ``(task, p)`` where ``u(t_j, p) > u(t_j, p - 1)``.
    """
    for t in tasks:
        if t.is_void:
            continue
        prev = model.value(agent, t, 1, tasks)
        for p in range(2, n_agents + 1):
            cur = model.value(agent, t, p, tasks)
            if cur > prev:
                return SpaoReport(False, t.id, p)
            prev = cur
    return SpaoReport(True)


@dataclass(frozen=True)
class ConditionReport:
    passed: bool
    reason: str = ""
    pair: Optional[tuple[int, int]] = None


def check_requirement_preference(aux: AuxiliaryUtility, agent: AgentSpec, tasks: Sequence[TaskSpec],
                      n_agents: int) -> ConditionReport:
    """Check that an unfilled task beats every filled one, plus SPAO of the wrapper.

    For every task ``j`` with ``R_j > 0`` and every other option ``k`` (void
    included, where the comparison is against utility 0) the agent must strictly
    prefer ``(t_j, R_j)`` over ``(t_k, R_k + 1)``.
    """
    required = [t for t in tasks if t.min_requirement > 0]
    for tj in required:
        uj = aux.value(agent, tj, tj.min_requirement, tasks)
        for tk in tasks:
            uk = aux.value(agent, tk, tk.min_requirement + 1, tasks)
            if not uj > uk:
                return ConditionReport(False, "requirement preference", (tj.id, tk.id))
    spao = check_spao(aux, agent, tasks, n_agents)
    if not spao.passed:
        return ConditionReport(False, "spao", (spao.task, spao.p))
    return ConditionReport(True)


def _reward_table(tasks: Sequence[TaskSpec], n_agents: int) -> np.ndarray:
    out = np.zeros((len(tasks), n_agents + 1))
    for j, t in enumerate(tasks):
        if t.is_void:
            continue
        for p in range(1, n_agents + 1):
            out[j, p] = reward(t.reward_model, p)
    return out


def _base_table(agents: Sequence[AgentSpec], tasks: Sequence[TaskSpec],
                n_agents: int) -> np.ndarray:
    rewards = _reward_table(tasks, n_agents)
    p = np.arange(n_agents + 1, dtype=float)
    p[0] = 1.0
    shared = rewards / p[None, :]
    cost = np.array([[a.cost(t) for t in tasks] for a in agents], dtype=float).reshape(
        len(agents), len(tasks))
    table = shared[None, :, :] - cost[:, :, None]
    table[:, VOID, :] = 0.0
    table[:, :, 0] = 0.0
    return table


def utility_table(scenario: Scenario) -> np.ndarray:
    """Dense ``U[i, j, p]`` for ``p = 0..n_agents`` (column 0 unused, left at 0)."""
    return utility_table_for(scenario.utility, scenario.agents, scenario.tasks,
                             scenario.n_agents)


def utility_table_for(model: AnyUtility, agents: Sequence[AgentSpec],
                      tasks: Sequence[TaskSpec], n_agents: int) -> np.ndarray:
    if isinstance(model, UtilityModel):
        return _base_table(agents, tasks, n_agents)
    base = _base_table(agents, tasks, n_agents)
    req = np.array([t.min_requirement for t in tasks])
    p = np.arange(n_agents + 1)
    if isinstance(model, RequirementUtility):
        below = p[None, :] < req[:, None]
        base[:, below] = 0.0
        return base
    if isinstance(model, AuxiliaryUtility):
        u0 = np.array([model.dummy_utility(a, tasks) for a in agents], dtype=float)
        below = (p[None, :] <= req[:, None]) & (req[:, None] > 0)
        below[:, 0] = False
        jj, pp = np.nonzero(below)
        base[:, jj, pp] = u0[:, None]
        return base
    raise TypeError(f"unsupported utility model {type(model).__name__}")
