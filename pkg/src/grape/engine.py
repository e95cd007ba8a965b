"""Decentralised decision loop with the distributed mutex, simulated in discrete time.

Each time step every operating agent runs one pass of the per-agent loop:

1. if unsatisfied, best-respond on its locally known partition; on a strict
   improvement it joins the better coalition, bumps its evolution counter ``r``
   and draws a fresh random stamp ``s``; then marks itself satisfied;
2. broadcast ``(r, s, partition)`` to its neighbours;
3. keep the dominant message among those received (largest ``r``, then
   largest ``s``); adopting a foreign partition makes the agent unsatisfied.

Messages are delivered in bulk at the end of the step. Agents that are not
operating in a step neither decide, send nor receive.

Every partition version records its parent, so after a run the chain of moves
behind the surviving partition is known exactly. Only moves on that chain are
counted as iterations; a step without a chain move is a dummy iteration, except
the terminal confirmation step.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .analysis import verify_nash_stable
from .core import VOID, AgentSpec, Partition, Scenario, TaskSpec, move_agent
from .network import CommGraph, diameter, is_connected
from .utility import utility_table

MODES = ("synchronous", "non-operating", "bounded")


class SpaoViolation(ValueError):
    pass


@dataclass(frozen=True)
class SchedulerConfig:
    """How time steps are scheduled.

    ``non-operating`` removes a freshly sampled fraction of agents each step;
    ``bounded`` caps every agent at ``max_transactions`` recipients per step,
    rotating round-robin through its neighbours.
    """

    mode: str = "synchronous"
    non_operating_fraction: float = 0.0
    max_transactions: int = 1
    rng_seed: int = 0
    max_time_steps: Optional[int] = None
    initial: str = "void"
    allow_non_spao: bool = False
    record_trace: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown scheduler mode {self.mode!r}")
        if not 0 <= self.non_operating_fraction < 1:
            raise ValueError("non_operating_fraction must be in [0, 1)")
        if self.max_transactions < 1:
            raise ValueError("max_transactions must be >= 1")
        if self.initial not in ("void", "random"):
            raise ValueError("initial must be 'void' or 'random'")


@dataclass(frozen=True)
class AgentState:
    satisfied: bool
    r: int
    s: float
    partition: Partition
    author: int = -1


@dataclass(frozen=True)
class AgentMessage:
    r: int
    s: float
    partition: Partition
    sender: int
    author: int = -1


@dataclass(frozen=True)
class TraceRecord:
    time_step: int
    agent: int
    action: str
    r: int
    s: float
    task_from: int
    task_to: int


@dataclass(frozen=True)
class RunReport:
    final_partition: Partition
    converged: bool
    iterations: int
    dummy_iterations: int
    time_steps: int
    messages_sent: int
    event_log: tuple[tuple[int, int, int, int], ...]
    max_dummy_streak: int = 0
    initial_partition: Optional[Partition] = None
    trace: Optional[tuple[TraceRecord, ...]] = None


@dataclass(frozen=True)
class AddAgent:
    spec: AgentSpec


@dataclass(frozen=True)
class RemoveAgent:
    agent: int


@dataclass(frozen=True)
class AddTask:
    spec: TaskSpec


@dataclass(frozen=True)
class RemoveTask:
    task: int


Event = Union[AddAgent, RemoveAgent, AddTask, RemoveTask]


def best_response(agent: int, local: Partition, scenario: Scenario) -> tuple[int, bool]:
    """Most preferred coalition for ``agent`` given ``local``, other agents fixed.

    Ties keep the current coalition; otherwise the lowest task index wins. The
    flag says whether the choice is strictly better than staying.
    """
    cur = local.assignment[agent]
    u_cur = scenario.utility_of(agent, cur, local.sizes[cur])
    best_j, best_u = cur, u_cur
    for j in range(scenario.n_tasks + 1):
        u = scenario.utility_of(agent, j, local.size_with(agent, j))
        if u > best_u:
            best_j, best_u = j, u
    return best_j, best_j != cur


def _dominates(m, own) -> bool:
    if (m.r, m.s) != (own.r, own.s):
        return (m.r, m.s) > (own.r, own.s)
    return m.partition != own.partition and m.author > own.author


def d_mutex(own: AgentState, received: Iterable[AgentMessage]) -> tuple[AgentState, bool]:
    """Adopt the dominant received message; adoption leaves the agent unsatisfied.

    Equal ``(r, s)`` with different partitions is broken by the larger author id
    (the agent that produced the partition).
    """
    best = own
    adopted = False
    for m in received:
        if _dominates(m, best):
            best, adopted = m, True
    if not adopted:
        return replace(own, satisfied=True), True
    return AgentState(False, best.r, best.s, best.partition, best.author), False


class Simulator:
    """Stateful run of the decision loop over one scenario and one network.

    Call :meth:`run` to step until convergence; :meth:`inject` then applies
    agent/task events to the converged state and a further :meth:`run` measures
    the re-convergence.
    """

    def __init__(self, scenario: Scenario, graph: CommGraph, config: SchedulerConfig = SchedulerConfig(),
                 network_factory: Optional[Callable[[Sequence], CommGraph]] = None):
        self.config = config
        self.network_factory = network_factory
        self.rng = np.random.default_rng(config.rng_seed)
        self.trace: Optional[list[TraceRecord]] = [] if config.record_trace else None
        self.t = 0
        self.messages_sent = 0
        self.converged = False
        # version store; arrays of versions nobody holds are dropped
        self._assign: list[Optional[np.ndarray]] = []
        self._sizes: list[Optional[np.ndarray]] = []
        self._r: list[int] = []
        self._s: list[float] = []
        self._author: list[int] = []
        self._parent: list[int] = []
        self._move: list[Optional[tuple[int, int, int]]] = []
        self._step: list[int] = []
        self._load(scenario, graph)
        if config.initial == "void":
            init = np.zeros(self.n, dtype=np.int64)
        else:
            init = self.rng.integers(0, self.nt + 1, size=self.n)
        root = self._new_version(init, r=0, s=0.0, author=-1, parent=-1, move=None)
        self.ver = np.full(self.n, root, dtype=np.int64)
        self.satisfied = np.zeros(self.n, dtype=bool)
        self._segment_start = 0
        self._segment_initial = self.partition_of(root)

    def _load(self, scenario: Scenario, graph: CommGraph) -> None:
        if graph.n_agents != scenario.n_agents:
            raise ValueError(f"graph has {graph.n_agents} agents, scenario {scenario.n_agents}")
        if not is_connected(graph):
            raise ValueError("communication graph must be (strongly) connected")
        self.scenario = scenario
        self.graph = graph
        self.n = scenario.n_agents
        self.nt = scenario.n_tasks
        self.U = utility_table(scenario)
        if not self.config.allow_non_spao and self.n > 1:
            bad = np.diff(self.U[:, 1:, 1:], axis=2) > 0
            if bad.any():
                i, j, p = (int(x) for x in np.argwhere(bad)[0])
                raise SpaoViolation(f"agent {i} utility for task {j + 1} increases at p={p + 2}")
        self.d_G = diameter(graph)
        self.max_time_steps = self.config.max_time_steps or 10 * max(self.d_G, 1) * max(self.n, 1) ** 2
        self._src, self._dst = graph.arcs
        self._deg = np.array([len(nb) for nb in graph.out], dtype=np.int64)

    def _new_version(self, assign, r, s, author, parent, move) -> int:
        assign = np.asarray(assign, dtype=np.int64)
        self._assign.append(assign)
        self._sizes.append(np.bincount(assign, minlength=self.nt + 1))
        self._r.append(r)
        self._s.append(s)
        self._author.append(author)
        self._parent.append(parent)
        self._move.append(move)
        self._step.append(self.t)
        return len(self._r) - 1

    def partition_of(self, version: int) -> Partition:
        return Partition(tuple(int(x) for x in self._assign[version]), self.nt)

    def local_state(self, agent: int) -> AgentState:
        v = int(self.ver[agent])
        return AgentState(bool(self.satisfied[agent]), self._r[v], self._s[v],
                          self.partition_of(v), self._author[v])

    def _operating(self) -> np.ndarray:
        op = np.ones(self.n, dtype=bool)
        if self.config.mode == "non-operating":
            # at least two agents keep operating, otherwise no message is ever delivered
            k = min(int(round(self.config.non_operating_fraction * self.n)), max(self.n - 2, 0))
            if k:
                op[self.rng.choice(self.n, size=k, replace=False)] = False
        return op

    def _record(self, agent, action, version, task_from, task_to):
        if self.trace is not None:
            self.trace.append(TraceRecord(self.t, int(agent), action, self._r[version],
                                          self._s[version], int(task_from), int(task_to)))

    def _decide(self, op: np.ndarray) -> np.ndarray:
        cand = np.nonzero(op & ~self.satisfied)[0]
        moved = np.zeros(self.n, dtype=bool)
        if cand.size == 0:
            return moved
        vers = self.ver[cand]
        own = np.fromiter((self._assign[v][i] for v, i in zip(vers, cand)), dtype=np.int64,
                          count=cand.size)
        sizes = np.stack([self._sizes[v] for v in vers])
        tasks = np.arange(self.nt + 1)
        with_me = sizes + (tasks[None, :] != own[:, None])
        vals = self.U[cand[:, None], tasks[None, :], with_me]
        best = np.argmax(vals, axis=1)
        rows = np.arange(cand.size)
        better = vals[rows, best] > vals[rows, own]
        for k in rows:
            i, v = int(cand[k]), int(vers[k])
            if better[k]:
                j_from, j_to = int(own[k]), int(best[k])
                assign = self._assign[v].copy()
                assign[i] = j_to
                s = float(self.rng.random())
                nv = self._new_version(assign, self._r[v] + 1, s, i, v, (i, j_from, j_to))
                self.ver[i] = nv
                moved[i] = True
                self._record(i, "move", nv, j_from, j_to)
        self.satisfied[cand] = True
        return moved

    def _incoming_arcs(self, op: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
        if self.config.mode == "bounded":
            nc = self.config.max_transactions
            src, dst = [], []
            for k in np.nonzero(op)[0]:
                nb = self.graph.out[k]
                if not nb:
                    continue
                for m in range(min(nc, len(nb))):
                    src.append(k)
                    dst.append(nb[(self.t * nc + m) % len(nb)])
            src = np.asarray(src, dtype=np.int64)
            dst = np.asarray(dst, dtype=np.int64)
            sent = len(src)
        else:
            src, dst = self._src, self._dst
            sent = int(self._deg[op].sum())
            keep = op[src]
            src, dst = src[keep], dst[keep]
        keep = op[dst]
        return src[keep], dst[keep], sent

    def _communicate(self, op: np.ndarray, moved: np.ndarray) -> None:
        live = np.unique(self.ver)
        r = np.array([self._r[v] for v in live])
        s = np.array([self._s[v] for v in live])
        a = np.array([self._author[v] for v in live])
        order = np.lexsort((a, s, r))
        vrank = np.empty(live.size, dtype=np.int64)
        vrank[order] = np.arange(live.size)
        rank = vrank[np.searchsorted(live, self.ver)]
        best = rank.copy()
        if self.graph.is_complete and self.config.mode != "bounded" and self.n > 1:
            self.messages_sent += int(op.sum()) * (self.n - 1)
            if op.any():
                best[op] = rank[op].max()
        else:
            src, dst, sent = self._incoming_arcs(op)
            self.messages_sent += sent
            np.maximum.at(best, dst, rank[src])
        adopt = np.nonzero(best > rank)[0]
        for i in adopt:
            old = int(self.ver[i])
            nv = int(live[order[best[i]]])
            self.ver[i] = nv
            self.satisfied[i] = False
            self._record(i, "adopt", nv, self._assign[old][i], self._assign[nv][i])
        if self.trace is not None:
            idle = op & ~moved
            idle[adopt] = False
            for i in np.nonzero(idle)[0]:
                v = int(self.ver[i])
                j = self._assign[v][i]
                self._record(i, "idle", v, j, j)
        held = set(np.unique(self.ver).tolist())
        for v in live.tolist():
            if v not in held:
                self._assign[v] = None
                self._sizes[v] = None

    def step(self) -> bool:
        """Advance one time step; return True once converged."""
        op = self._operating()
        moved = self._decide(op)
        self._communicate(op, moved)
        self.t += 1
        if self.satisfied[op].all() and (self.ver == self.ver[0]).all():
            if verify_nash_stable(self.partition_of(int(self.ver[0])), self.scenario):
                self.converged = True
        return self.converged

    def _dominant_version(self) -> int:
        return int(max(np.unique(self.ver),
                       key=lambda v: (self._r[v], self._s[v], self._author[v])))

    def _chain(self, version: int) -> list[int]:
        moves = []
        v = version
        while v >= 0 and self._move[v] is not None:
            moves.append(v)
            v = self._parent[v]
        return moves[::-1]

    def run(self) -> RunReport:
        self.converged = False
        deadline = self._segment_start + self.max_time_steps
        while self.t < deadline:
            if self.step():
                break
        final = int(self.ver[0]) if self.converged else self._dominant_version()
        chain = self._chain(final)
        chain_steps = [self._step[v] for v in chain]
        steps = self.t - self._segment_start
        dummy = steps - len(set(chain_steps))
        if self.converged and (self.t - 1) not in chain_steps:
            dummy -= 1
        streak, longest = 0, 0
        marks = set(chain_steps)
        last = self.t - 1 if self.converged else self.t
        for t in range(self._segment_start, last):
            streak = 0 if t in marks else streak + 1
            longest = max(longest, streak)
        log = tuple((self._step[v], *self._move[v]) for v in chain)
        return RunReport(self.partition_of(final), self.converged, len(chain), dummy, steps,
                         self.messages_sent, log, longest, self._segment_initial,
                         tuple(self.trace) if self.trace is not None else None)

    def inject(self, events: Sequence[Event], graph: Optional[CommGraph] = None) -> None:
        """Apply agent/task events to a converged state.

        Agent and task indices are compacted after removals (agents and tasks after
        the removed one shift down by one); added agents and tasks are appended.
        Members of a removed task fall back to the void task. The partition keeps
        its ``(r, s)`` so the evolution counter continues across the event, and
        every agent is re-activated.
        """
        if not self.converged:
            raise RuntimeError("events can only be injected into a converged run")
        v = int(self.ver[0])
        assign = [int(x) for x in self._assign[v]]
        agents = list(self.scenario.agents)
        tasks = list(self.scenario.tasks)
        for ev in events:
            if isinstance(ev, AddAgent):
                agents.append(ev.spec)
                assign.append(VOID)
            elif isinstance(ev, RemoveAgent):
                if not 0 <= ev.agent < len(agents):
                    raise ValueError(f"no agent {ev.agent} to remove")
                del agents[ev.agent]
                del assign[ev.agent]
            elif isinstance(ev, AddTask):
                tasks.append(ev.spec)
            elif isinstance(ev, RemoveTask):
                if not 1 <= ev.task < len(tasks):
                    raise ValueError(f"no task {ev.task} to remove")
                del tasks[ev.task]
                assign = [VOID if j == ev.task else (j - 1 if j > ev.task else j) for j in assign]
            else:
                raise TypeError(f"unknown event {ev!r}")
        agents = [replace(a, id=i) for i, a in enumerate(agents)]
        tasks = [replace(t, id=j) for j, t in enumerate(tasks)]
        scenario = replace(self.scenario, agents=tuple(agents), tasks=tuple(tasks))
        if graph is None:
            if self.network_factory is None:
                if len(agents) != self.n:
                    raise ValueError("agent count changed; pass a graph or a network_factory")
                graph = self.graph
            else:
                graph = self.network_factory([a.position for a in agents])
        r, s, author = self._r[v], self._s[v], self._author[v]
        for k in range(len(self._assign)):
            self._assign[k] = None
            self._sizes[k] = None
        self._load(scenario, graph)
        nv = self._new_version(assign, r, s, author, v, None)
        self.ver = np.full(self.n, nv, dtype=np.int64)
        self.satisfied = np.zeros(self.n, dtype=bool)
        self._segment_start = self.t
        self._segment_initial = self.partition_of(nv)
        self.messages_sent = 0
        self.converged = False
        if self.trace is not None:
            self.trace = []


def run(scenario: Scenario, graph: CommGraph, sched: SchedulerConfig = SchedulerConfig()) -> RunReport:
    return Simulator(scenario, graph, sched).run()


def replay(initial: Partition, event_log: Iterable[tuple[int, int, int, int]]) -> Partition:
    """Apply a run's chain of moves to its starting partition."""
    p = initial
    for _, agent, _, to in event_log:
        p = move_agent(p, agent, to)
    return p


def write_trace(records: Iterable[TraceRecord], path) -> None:
    with Path(path).open("w") as fh:
        for rec in records:
            fh.write(json.dumps({"time_step": rec.time_step, "agent": rec.agent,
                                 "action": rec.action, "r": rec.r, "s": rec.s,
                                 "task_from": rec.task_from, "task_to": rec.task_to}) + "\n")


def read_trace(path) -> list[TraceRecord]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(TraceRecord(**json.loads(line)))
    return out
