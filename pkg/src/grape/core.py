"""Domain types shared across the package: agents, tasks, partitions, scenarios.

Task index 0 is always the void task (doing nothing). Real tasks use indices
``1..n_tasks``. A :class:`Partition` stores only the agent -> task map; coalitions
and their sizes are derived from it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Sequence, Union

if TYPE_CHECKING:
    from .utility import AuxiliaryUtility, RewardModel, UtilityModel

VOID = 0

Point = tuple[float, float]


@dataclass(frozen=True)
class AgentSpec:
    id: int
    position: Point
    cost_coefficient: float = 1.0

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"agent id must be non-negative, got {self.id}")
        if not self.cost_coefficient >= 0:
            raise ValueError(f"cost_coefficient must be >= 0, got {self.cost_coefficient}")

    def cost(self, task: "TaskSpec") -> float:
        """Travel cost to ``task``: cost coefficient times Euclidean distance."""
        if task.is_void:
            return 0.0
        dx = self.position[0] - task.position[0]
        dy = self.position[1] - task.position[1]
        return self.cost_coefficient * math.hypot(dx, dy)


@dataclass(frozen=True)
class TaskSpec:
    id: int
    position: Point
    reward_model: "RewardModel"
    min_requirement: int = 0

    def __post_init__(self):
        from .utility import Void

        if self.id < 0:
            raise ValueError(f"task id must be non-negative, got {self.id}")
        if self.min_requirement < 0:
            raise ValueError("min_requirement must be >= 0")
        if self.id == VOID and not isinstance(self.reward_model, Void):
            raise ValueError("task 0 is reserved for the void task")
        if isinstance(self.reward_model, Void) and self.min_requirement:
            raise ValueError("the void task cannot carry a minimum requirement")

    @property
    def is_void(self) -> bool:
        return self.id == VOID

    @classmethod
    def void(cls) -> "TaskSpec":
        from .utility import Void

        return cls(VOID, (0.0, 0.0), Void())


@dataclass(frozen=True)
class Partition:
    """Disjoint, exhaustive assignment of agents to coalitions ``S_0..S_nt``.

    ``assignment[i]`` is the task index chosen by agent ``i`` (0 = void).
    """

    assignment: tuple[int, ...]
    n_tasks: int

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))
        if self.n_tasks < 0:
            raise ValueError("n_tasks must be >= 0")
        for i, j in enumerate(self.assignment):
            if not 0 <= j <= self.n_tasks:
                raise ValueError(f"agent {i} assigned to unknown task {j}")

    @property
    def n_agents(self) -> int:
        return len(self.assignment)

    @cached_property
    def sizes(self) -> tuple[int, ...]:
        counts = [0] * (self.n_tasks + 1)
        for j in self.assignment:
            counts[j] += 1
        return tuple(counts)

    @cached_property
    def coalitions(self) -> tuple[frozenset, ...]:
        members: list[list[int]] = [[] for _ in range(self.n_tasks + 1)]
        for i, j in enumerate(self.assignment):
            members[j].append(i)
        return tuple(frozenset(m) for m in members)

    def task_of(self, agent: int) -> int:
        return self.assignment[agent]

    def size_with(self, agent: int, task: int) -> int:
        """``|S_task ∪ {agent}|``."""
        n = self.sizes[task]
        return n if self.assignment[agent] == task else n + 1


def partition_singleton_void(n_agents: int, n_tasks: int) -> Partition:
    """Every agent on the void task."""
    if n_agents < 0 or n_tasks < 0:
        raise ValueError("counts must be non-negative")
    return Partition((VOID,) * n_agents, n_tasks)


def move_agent(partition: Partition, agent: int, to: int) -> Partition:
    if not 0 <= agent < partition.n_agents:
        raise ValueError(f"unknown agent {agent}")
    if not 0 <= to <= partition.n_tasks:
        raise ValueError(f"unknown task {to}")
    if partition.assignment[agent] == to:
        return partition
    a = list(partition.assignment)
    a[agent] = to
    return Partition(tuple(a), partition.n_tasks)


@dataclass(frozen=True)
class Scenario:
    """A problem instance: agents, tasks (``tasks[0]`` is void) and a utility model."""

    agents: tuple[AgentSpec, ...]
    tasks: tuple[TaskSpec, ...]
    utility: Union["UtilityModel", "AuxiliaryUtility"] = field(default=None)
    rng_seed: int = 0

    def __post_init__(self):
        from .utility import UtilityModel

        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if self.utility is None:
            object.__setattr__(self, "utility", UtilityModel())
        for i, a in enumerate(self.agents):
            if a.id != i:
                raise ValueError(f"agent at position {i} has id {a.id}")
        if not self.tasks or not self.tasks[0].is_void:
            raise ValueError("tasks[0] must be the void task")
        for j, t in enumerate(self.tasks):
            if t.id != j:
                raise ValueError(f"task at position {j} has id {t.id}")

    @classmethod
    def build(cls, agents: Sequence[AgentSpec], real_tasks: Sequence[TaskSpec],
              utility=None, rng_seed: int = 0) -> "Scenario":
        return cls(tuple(agents), (TaskSpec.void(), *real_tasks), utility, rng_seed)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks) - 1

    @property
    def requirements(self) -> tuple[int, ...]:
        return tuple(t.min_requirement for t in self.tasks)

    def utility_of(self, agent: int, task: int, p: int) -> float:
        """Individual utility of ``agent`` doing ``task`` with ``p`` participants."""
        return self.utility.value(self.agents[agent], self.tasks[task], p, self.tasks)

    def check_partition(self, partition: Partition) -> None:
        if partition.n_agents != self.n_agents or partition.n_tasks != self.n_tasks:
            raise ValueError(
                f"partition shape ({partition.n_agents} agents, {partition.n_tasks} tasks) "
                f"does not match scenario ({self.n_agents}, {self.n_tasks})")


def global_utility(partition: Partition, scenario: Scenario) -> float:
    """Sum over agents of their individual utility under ``partition``."""
    scenario.check_partition(partition)
    sizes = partition.sizes
    total = 0.0
    for i, j in enumerate(partition.assignment):
        if j != VOID:
            total += scenario.utility_of(i, j, sizes[j])
    return total
