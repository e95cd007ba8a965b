"""Stability verification, suboptimality bounds and exact optimum oracles.

The Nash stability check and the coworker-tolerance diagnostic evaluate utilities
through the scalar path (``Scenario.utility_of``) so they share no code with the
engine's vectorised best response. Bounds and oracles work on the dense
utility table.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import VOID, Partition, Scenario, global_utility
from .utility import AuxiliaryUtility, RequirementUtility, utility_table, utility_table_for

MAX_ORACLE_AGENTS = 14
MAX_ORACLE_TASKS = 4


class NotNashStable(ValueError):
    pass


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class NashReport:
    passed: bool
    agent: Optional[int] = None
    task: Optional[int] = None

    def __bool__(self):
        return self.passed


def verify_nash_stable(partition: Partition, scenario: Scenario) -> NashReport:
    """No agent strictly gains by moving alone to another coalition (void included)."""
    scenario.check_partition(partition)
    for i, cur in enumerate(partition.assignment):
        u_cur = scenario.utility_of(i, cur, partition.sizes[cur])
        for j in range(scenario.n_tasks + 1):
            if j == cur:
                continue
            if scenario.utility_of(i, j, partition.size_with(i, j)) > u_cur:
                return NashReport(False, i, j)
    return NashReport(True)


def tolerable_coworkers(partition: Partition, agent: int, scenario: Scenario) -> int:
    """How many extra members the agent's coalition could take before it would leave.

    Minimum over the other coalitions ``S_j`` of the largest ``Δ`` with
    ``u(t_cur, |S_cur| + Δ) >= u(t_j, |S_j ∪ {agent}|)``, searched over coalition
    sizes ``1..n_agents``. When no size qualifies the result is ``-|S_cur|``;
    when every size qualifies it is ``n_agents - |S_cur|``.
    """
    n = scenario.n_agents
    cur = partition.assignment[agent]
    size = partition.sizes[cur]
    best = n - size
    for j in range(scenario.n_tasks + 1):
        if j == cur:
            continue
        target = scenario.utility_of(agent, j, partition.size_with(agent, j))
        ok = [q for q in range(1, n + 1) if scenario.utility_of(agent, cur, q) >= target]
        delta = max(ok) - size if ok else -size
        best = min(best, delta)
    return best


def _lambda_from_table(partition: Partition, table: np.ndarray) -> float:
    n = partition.n_agents
    assign = np.asarray(partition.assignment)
    p = np.arange(1, n + 1, dtype=float)
    total = 0.0
    for j in range(1, partition.n_tasks + 1):
        with_i = partition.sizes[j] + (assign != j)
        cur = table[np.arange(n), j, with_i]
        loss = p[None, :] * (table[:, j, 1:] - cur[:, None])
        if loss.size:
            total += max(0.0, float(loss.max()))
    return total


def lambda_value(partition: Partition, scenario: Scenario, table=None) -> float:
    """Per-coalition worst loss ``max_{i, p} p * (u_i(t_j, p) - u_i(t_j, |S_j ∪ {i}|))``, summed.

    Coalitions whose worst loss is negative contribute zero.
    """
    scenario.check_partition(partition)
    if table is None:
        table = utility_table(scenario)
    return _lambda_from_table(partition, table)


def ratio_bound(j: float, extra: float) -> float:
    """``j / (j + extra)`` with the degenerate cases pinned: 1 when both vanish."""
    if j + extra == 0:
        return 1.0
    if j <= 0:
        return 0.0
    return j / (j + extra)


def lambda_bound(partition: Partition, scenario: Scenario, check: bool = True,
                 table=None) -> tuple[float, float]:
    """Return ``(lambda, J / (J + lambda))`` for a Nash stable partition."""
    if check:
        rep = verify_nash_stable(partition, scenario)
        if not rep:
            raise NotNashStable(f"agent {rep.agent} prefers task {rep.task}")
    lam = lambda_value(partition, scenario, table)
    j = global_utility(partition, scenario)
    return lam, ratio_bound(j, lam)


def _feasible_sizes(counts: np.ndarray, requirements: np.ndarray) -> np.ndarray:
    return np.all(counts[:, 1:] >= requirements[None, 1:], axis=1)


def brute_force_optimal(scenario: Scenario, feasible_only: bool = False,
                        table=None) -> tuple[float, Partition]:
    """Exact maximum of the global utility by enumerating every assignment.

    With ``feasible_only`` only assignments meeting every minimum requirement are
    considered. The enumeration is split into a prefix loop and a vectorised
    suffix block; every one of the ``(n_tasks + 1) ** n_agents`` assignments is
    scored. About 0.3 s for 12 agents and 3 tasks; the 14 agent, 4 task cap takes
    minutes.
    """
    n, nt = scenario.n_agents, scenario.n_tasks
    if n > MAX_ORACLE_AGENTS or nt > MAX_ORACLE_TASKS:
        raise OracleTooLarge(f"brute force capped at {MAX_ORACLE_AGENTS} agents and "
                             f"{MAX_ORACLE_TASKS} tasks, got {n} and {nt}")
    if table is None:
        table = utility_table(scenario)
    T = nt + 1
    req = np.asarray(scenario.requirements) if feasible_only else np.zeros(T, dtype=int)
    if n == 0:
        return 0.0, Partition((), nt)

    m = 1
    while m < n and T ** (m + 1) <= 1 << 16:
        m += 1
    k = n - m
    codes = np.arange(T ** m)
    digits = np.empty((T ** m, m), dtype=np.int64)
    rest = codes.copy()
    for c in range(m - 1, -1, -1):
        digits[:, c] = rest % T
        rest //= T
    rows = np.arange(T ** m)
    cs = np.zeros((T ** m, T), dtype=np.int64)
    ws = np.zeros((T ** m, T, n + 1))
    for c in range(m):
        cs[rows, digits[:, c]] += 1
        ws[rows, digits[:, c], :] += table[k + c, digits[:, c], :]
    # suffix[j, c] = suffix agents' utility on task j when c prefix agents join it
    suffix = np.stack([np.stack([ws[rows, j, cs[:, j] + c] for c in range(k + 1)])
                       for j in range(T)])

    best_val, best_assign = -math.inf, None
    for prefix in itertools.product(range(T), repeat=k):
        cp = np.zeros(T, dtype=np.int64)
        wp = np.zeros((T, n + 1))
        for i, j in enumerate(prefix):
            cp[j] += 1
            wp[j] += table[i, j]
        vals = np.zeros(T ** m)
        for j in range(T):
            vals += suffix[j, cp[j]]
            if cp[j]:
                vals += np.take(wp[j, cp[j]:cp[j] + m + 1], cs[:, j])
        if feasible_only:
            vals = np.where(_feasible_sizes(cs + cp[None, :], req), vals, -math.inf)
        a = int(np.argmax(vals))
        if vals[a] > best_val:
            best_val = float(vals[a])
            best_assign = tuple(prefix) + tuple(int(d) for d in digits[a])
    if best_assign is None:
        raise ValueError("no feasible assignment exists")
    part = Partition(best_assign, nt)
    # rescore through the scalar path so the value is the plain agent-wise sum
    return global_utility(part, scenario), part


def optimal_by_sizes(scenario: Scenario, feasible_only: bool = False,
                     table=None) -> tuple[float, Partition]:
    """Exact optimum via coalition-size vectors plus one assignment problem each.

    For fixed sizes ``(n_0..n_t)`` the best placement of agents is a linear
    assignment over slots, solved exactly. Independent cross-check for
    :func:`brute_force_optimal`; scales to larger agent counts with few tasks.
    """
    n, nt = scenario.n_agents, scenario.n_tasks
    if table is None:
        table = utility_table(scenario)
    req = scenario.requirements if feasible_only else (0,) * (nt + 1)
    best_val, best = -math.inf, None
    for bars in itertools.combinations(range(n + nt), nt):
        sizes, prev = [], -1
        for b in bars:
            sizes.append(b - prev - 1)
            prev = b
        sizes.append(n + nt - 1 - prev)
        if any(sizes[j] < req[j] for j in range(1, nt + 1)):
            continue
        slots = [j for j in range(nt + 1) for _ in range(sizes[j])]
        w = np.array([[table[i, j, sizes[j]] for j in slots] for i in range(n)]).reshape(n, n)
        r, c = linear_sum_assignment(w, maximize=True)
        val = float(w[r, c].sum())
        if val > best_val:
            best_val = val
            assign = [0] * n
            for i, s in zip(r, c):
                assign[i] = slots[s]
            best = Partition(tuple(assign), nt)
    if best is None:
        raise ValueError("no feasible assignment exists")
    return global_utility(best, scenario), best


@dataclass(frozen=True)
class HalfBoundReport:
    applicable: bool
    social_nondecreasing: bool
    spao: bool
    witness: Optional[tuple[int, int]] = None

    def __bool__(self):
        return self.applicable


def _half_bound_from_table(table: np.ndarray, tol: float = 1e-12) -> HalfBoundReport:
    n = table.shape[0]
    spao = bool(np.all(np.diff(table[:, 1:, 1:], axis=2) <= 0)) if n > 1 else True
    social = True
    witness = None
    for j in range(1, table.shape[1]):
        for p in range(1, n):
            # worst case over coalitions S with |S| = p and a joining agent l not in S of
            #   sum_{i in S} (u_i(p+1) - u_i(p)) + u_l(p+1)
            d = table[:, j, p + 1] - table[:, j, p]
            order = np.argsort(d, kind="stable")
            ds = d[order]
            low_p = ds[:p].sum()
            low_p1 = ds[:p + 1].sum()
            rank = np.empty(n, dtype=int)
            rank[order] = np.arange(n)
            others = np.where(rank < p, low_p1 - d, low_p)
            margin = others + table[:, j, p + 1]
            scale = max(1.0, float(np.abs(table[:, j, p:p + 2]).max()) * (p + 1))
            if margin.min() < -tol * scale:
                social = False
                witness = (j, p)
                break
        if not social:
            break
    return HalfBoundReport(social and spao, social, spao, witness)


def check_half_bound_conditions(scenario: Scenario, table=None) -> HalfBoundReport:
    """Check the two premises of the 50 % guarantee.

    (i) adding any agent to any coalition never lowers the coalition's summed
    utility, checked against the worst coalition and worst joiner for every task
    and size; (ii) every individual utility is non-increasing in coalition size.
    """
    if table is None:
        table = utility_table(scenario)
    return _half_bound_from_table(table)


@dataclass(frozen=True)
class MinReqBounds:
    j_tilde: float
    delta: float
    lambda_tilde: float
    bound: float
    half_bound: Optional[float]


@dataclass(frozen=True)
class BoundReport:
    j_grape: float
    lambda_: float
    bound_general: float
    half_bound_applicable: bool
    j_opt: Optional[float] = None
    alpha_true: Optional[float] = None
    minreq: Optional[MinReqBounds] = None


def minreq_bounds(partition: Partition, scenario: Scenario) -> MinReqBounds:
    """Bounds for a partition found with the auxiliary (minimum-requirement) utility."""
    aux = scenario.utility
    if not isinstance(aux, AuxiliaryUtility):
        raise TypeError("minreq_bounds needs a scenario using AuxiliaryUtility")
    scenario.check_partition(partition)
    for j in range(1, scenario.n_tasks + 1):
        if partition.sizes[j] < scenario.tasks[j].min_requirement:
            raise ValueError(f"task {j} has {partition.sizes[j]} agents, "
                             f"requires {scenario.tasks[j].min_requirement}")
    original = replace(scenario, utility=aux.original)
    j_tilde = global_utility(partition, scenario)
    j = global_utility(partition, original)
    delta = j_tilde - j
    aux_table = utility_table(scenario)
    lam_t = _lambda_from_table(partition, aux_table)
    shrink = ratio_bound(j, delta)
    bound = ratio_bound(j, lam_t) * shrink
    half = 0.5 * shrink if _half_bound_from_table(aux_table).applicable else None
    return MinReqBounds(j_tilde, delta, lam_t, bound, half)


def bound_report(partition: Partition, scenario: Scenario, oracle: bool = False,
                 check: bool = True) -> BoundReport:
    """Collect the suboptimality figures for a converged partition.

    For minimum-requirement scenarios ``j_grape`` is measured with the original
    utility and ``bound_general`` is the requirement-aware bound.
    """
    if check:
        rep = verify_nash_stable(partition, scenario)
        if not rep:
            raise NotNashStable(f"agent {rep.agent} prefers task {rep.task}")
    if isinstance(scenario.utility, AuxiliaryUtility):
        mr = minreq_bounds(partition, scenario)
        original = replace(scenario, utility=scenario.utility.original)
        j = global_utility(partition, original)
        lam, bound, half_ok = mr.lambda_tilde, mr.bound, mr.half_bound is not None
        opt_scenario, feasible = original, True
    else:
        mr = None
        table = utility_table(scenario)
        lam = _lambda_from_table(partition, table)
        j = global_utility(partition, scenario)
        bound = ratio_bound(j, lam)
        half_ok = _half_bound_from_table(table).applicable
        opt_scenario, feasible = scenario, False
    j_opt = alpha = None
    if oracle:
        j_opt, _ = brute_force_optimal(opt_scenario, feasible_only=feasible)
        alpha = 1.0 if j_opt == 0 else j / j_opt
    return BoundReport(j, lam, bound, half_ok, j_opt, alpha, mr)
