import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from grape import (AuxiliaryUtility, Partition, Peaked, Submodular, UtilityModel, bound_report,
                   brute_force_optimal, check_half_bound_conditions, fully_connected, global_utility,
                   lambda_bound, minreq_bounds, optimal_by_sizes, run, tolerable_coworkers,
                   verify_nash_stable)
from grape.analysis import NotNashStable, OracleTooLarge, lambda_value
from grape.harness.generate import GeneratorParams, build_network, generate_scenario

from conftest import make_scenario


def naive_optimum(sc, feasible_only=False):
    best = -math.inf
    for a in itertools.product(range(sc.n_tasks + 1), repeat=sc.n_agents):
        p = Partition(a, sc.n_tasks)
        if feasible_only and any(p.sizes[j] < sc.tasks[j].min_requirement
                                 for j in range(1, sc.n_tasks + 1)):
            continue
        best = max(best, global_utility(p, sc))
    return best


def naive_lambda(p, sc):
    total = 0.0
    for j in range(1, sc.n_tasks + 1):
        terms = [q * (sc.utility_of(i, j, q) - sc.utility_of(i, j, p.size_with(i, j)))
                 for i in range(sc.n_agents) for q in range(1, sc.n_agents + 1)]
        total += max(0.0, max(terms))
    return total


def converged(sc, net="full", seed=0):
    rep = run(sc, build_network(net, [a.position for a in sc.agents]))
    assert rep.converged
    return rep.final_partition


def test_verifier_single_agent_on_argmax():
    sc = make_scenario([(0.0, 0.0)], [((0.0, 0.0), Submodular(10.0)), ((0.0, 0.0), Submodular(5.0))])
    assert verify_nash_stable(Partition((1,), 2), sc)
    rep = verify_nash_stable(Partition((2,), 2), sc)
    assert not rep and (rep.agent, rep.task) == (0, 1)


def test_verifier_reports_void_deviation():
    sc = make_scenario([(0.0, 0.0)], [((100.0, 0.0), Submodular(1.0))], cost=1.0)
    rep = verify_nash_stable(Partition((1,), 1), sc)
    assert (rep.agent, rep.task) == (0, 0)


def test_two_agent_submodular_optimum():
    sc = make_scenario([(0.0, 0.0)] * 2, [((0.0, 0.0), Submodular(10.0, 2.0))])
    j, p = brute_force_optimal(sc)
    assert p.assignment == (1, 1)
    assert j == pytest.approx(10 * math.log2(3), rel=1e-15)


def test_one_agent_two_tasks_optimum():
    sc = make_scenario([(0.0, 0.0)], [((3.0, 4.0), Submodular(10.0)), ((0.0, 1.0), Submodular(7.0))],
                       cost=1.0)
    j, p = brute_force_optimal(sc)
    assert j == max(0.0, 10 - 5.0, 7 - 1.0) and p.assignment == (2,)


@pytest.mark.parametrize("seed", range(4))
def test_oracles_agree_with_naive_enumeration(seed):
    sc = generate_scenario(GeneratorParams(6, 2, "peaked" if seed % 2 else "submodular"), seed)
    ref = naive_optimum(sc)
    assert brute_force_optimal(sc)[0] == pytest.approx(ref, rel=1e-12)
    assert optimal_by_sizes(sc)[0] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_feasible_oracle_agrees_with_naive_enumeration(seed):
    sc = generate_scenario(GeneratorParams(6, 2, min_requirements=True), seed + 20)
    orig = replace(sc, utility=sc.utility.original)
    ref = naive_optimum(orig, feasible_only=True)
    assert brute_force_optimal(orig, feasible_only=True)[0] == pytest.approx(ref, rel=1e-12)
    assert optimal_by_sizes(orig, feasible_only=True)[0] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_brute_force_matches_size_decomposition_at_twelve_agents(seed):
    sc = generate_scenario(GeneratorParams(12, 3, "peaked"), seed)
    assert brute_force_optimal(sc)[0] == pytest.approx(optimal_by_sizes(sc)[0], rel=1e-12)


def test_oracle_cap():
    with pytest.raises(OracleTooLarge):
        brute_force_optimal(generate_scenario(GeneratorParams(15, 2), 0))


@pytest.mark.parametrize("seed", range(5))
def test_lambda_matches_naive_sum(seed):
    sc = generate_scenario(GeneratorParams(10, 3, "peaked" if seed % 2 else "submodular"), seed)
    p = converged(sc)
    assert lambda_value(p, sc) == pytest.approx(naive_lambda(p, sc), rel=1e-12)
    lam, bound = lambda_bound(p, sc)
    j = global_utility(p, sc)
    assert bound == pytest.approx(j / (j + lam))


def test_lambda_bound_rejects_unstable_partition():
    sc = make_scenario([(0.0, 0.0)], [((0.0, 0.0), Submodular(10.0))])
    with pytest.raises(NotNashStable):
        lambda_bound(Partition((0,), 1), sc)


def test_optimal_partition_gives_alpha_one():
    sc = make_scenario([(0.0, 0.0)] * 3, [((0.0, 0.0), Submodular(10.0))])
    p = converged(sc)
    rep = bound_report(p, sc, oracle=True)
    assert rep.alpha_true == pytest.approx(1.0, rel=1e-12)
    assert rep.bound_general <= rep.alpha_true + 1e-12


@pytest.mark.parametrize("seed", range(6))
def test_bound_encloses_true_ratio(seed):
    sc = generate_scenario(GeneratorParams(10, 3, "peaked" if seed % 2 else "submodular"), seed)
    rep = bound_report(converged(sc), sc, oracle=True)
    assert 0 < rep.bound_general <= rep.alpha_true * (1 + 1e-12)
    assert rep.alpha_true <= 1 + 1e-12


def test_half_bound_conditions_conditions():
    zero = generate_scenario(GeneratorParams(8, 3, cost_coefficient=0.0), 0)
    assert check_half_bound_conditions(zero).applicable
    peaked = generate_scenario(GeneratorParams(8, 3, "peaked", cost_coefficient=0.0), 0)
    assert not check_half_bound_conditions(peaked).applicable
    # a far task: adding an agent pays its travel cost but adds little reward
    costly = make_scenario([(0.0, 0.0)] * 3, [((100.0, 0.0), Submodular(150.0))], cost=1.0)
    rep = check_half_bound_conditions(costly)
    assert not rep.applicable and rep.spao and not rep.social_nondecreasing


def test_half_bound_conditions_matches_exhaustive_coalition_check():
    for seed in range(6):
        sc = generate_scenario(GeneratorParams(5, 2, cost_coefficient=0.02 * seed), seed)
        ok = True
        for j in (1, 2):
            for size in range(1, 5):
                for S in itertools.combinations(range(5), size):
                    for l in set(range(5)) - set(S):
                        before = sum(sc.utility_of(i, j, size) for i in S)
                        after = sum(sc.utility_of(i, j, size + 1) for i in S + (l,))
                        if after < before - 1e-9:
                            ok = False
        assert check_half_bound_conditions(sc).social_nondecreasing == ok


@pytest.mark.parametrize("seed", range(8))
def test_half_bound_when_applicable(seed):
    sc = generate_scenario(GeneratorParams(8, 2, cost_coefficient=0.0), seed)
    rep = bound_report(converged(sc), sc, oracle=True)
    assert rep.half_bound_applicable and rep.alpha_true >= 0.5


def test_minreq_reduces_to_plain_bounds_without_requirements():
    sc = generate_scenario(GeneratorParams(8, 2), 3)
    aux = replace(sc, utility=AuxiliaryUtility())
    p = converged(aux)
    mr = minreq_bounds(p, aux)
    lam, bound = lambda_bound(p, sc)
    assert mr.delta == 0.0 and mr.lambda_tilde == lam and mr.bound == bound


def test_minreq_scaled_example_meets_requirement():
    # three tasks, the third needs 3 of 12 agents and is the least attractive
    tasks = [((500.0, 520.0), Submodular(900.0), 0), ((520.0, 500.0), Submodular(900.0), 0),
             ((900.0, 900.0), Submodular(300.0), 3)]
    xy = [(500.0 + i, 500.0) for i in range(12)]
    sc = make_scenario(xy, tasks, cost=0.1, utility=AuxiliaryUtility(UtilityModel(), 1.0))
    plain = converged(replace(sc, utility=UtilityModel()))
    assert plain.sizes[3] < 3
    p = converged(sc)
    assert p.sizes[3] >= 3
    rep = bound_report(p, sc, oracle=True)
    assert rep.minreq.delta >= 0
    assert rep.alpha_true >= rep.minreq.bound * (1 - 1e-12)


def test_minreq_bounds_rejects_violated_requirement():
    sc = make_scenario([(0.0, 0.0)] * 2, [((0.0, 0.0), Submodular(1.0), 2)],
                       utility=AuxiliaryUtility())
    with pytest.raises(ValueError):
        minreq_bounds(Partition((1, 0), 1), sc)


def test_tolerable_coworkers_properties():
    sc = generate_scenario(GeneratorParams(15, 3, "peaked"), 4)
    p = converged(sc)
    assert all(tolerable_coworkers(p, i, sc) >= 0 for i in range(15))
    # an agent that wants to leave has negative slack; after moving it is non-negative
    bad = Partition((0,) * 15, 3)
    i = 0
    assert tolerable_coworkers(bad, i, sc) < 0
    from grape import best_response, move_agent
    j, _ = best_response(i, bad, sc)
    assert tolerable_coworkers(move_agent(bad, i, j), i, sc) >= 0


def test_lambda_invariant_under_relabelling_identical_agents():
    xy = [(10.0, 0.0)] * 3 + [(50.0, 50.0)] * 3
    tasks = [((0.0, 0.0), Submodular(40.0)), ((60.0, 60.0), Peaked(90.0, 2))]
    sc = make_scenario(xy, tasks, cost=0.1)
    p = converged(sc)
    perm = [2, 0, 1, 5, 3, 4]
    q = Partition(tuple(p.assignment[perm[i]] for i in range(6)), 2)
    assert lambda_value(p, sc) == lambda_value(q, sc)
