"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (about ten minutes on one
core) or as a script: ``python tests/test_acceptance.py``.
"""
import itertools
import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from grape import (AddAgent, SchedulerConfig, Simulator, bound_report,
                   check_half_bound_conditions, run, verify_nash_stable)
from grape.harness.campaign import CampaignSpec, campaign_csv, run_campaign, run_seeds
from grape.harness.generate import GeneratorParams, build_network, generate_scenario, new_agents

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance
REL = 1e-12


def report(n, passed, detail):
    line = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def positions(sc):
    return [a.position for a in sc.agents]


@pytest.fixture(scope="module")
def grid_runs():
    """14 runs for each of 36 cells: reward x network x n_a x n_t (504 runs)."""
    out = []
    idx = 0
    for kind, net, n, nt in itertools.product(("peaked", "submodular"), ("full", "mst"),
                                              (10, 40, 160), (3, 5, 20)):
        for _ in range(14):
            sc_seed, run_seed = run_seeds(1, idx)
            idx += 1
            sc = generate_scenario(GeneratorParams(n, nt, kind), sc_seed)
            g = build_network(net, positions(sc))
            rep = run(sc, g, SchedulerConfig(rng_seed=run_seed))
            ok = bool(verify_nash_stable(rep.final_partition, sc)) if rep.converged else None
            out.append(dict(kind=kind, net=net, n=n, nt=nt, rep=rep, nash=ok, sc=sc))
    return out


def test_criterion_1_nash_stability(grid_runs):
    converged = [r for r in grid_runs if r["rep"].converged]
    failures = sum(1 for r in converged if not r["nash"])
    report(1, len(grid_runs) >= 500 and failures == 0 and len(converged) == len(grid_runs),
           f"{len(converged)}/{len(grid_runs)} runs converged, {failures} failed the stability check")


def test_criterion_2_iteration_bound(grid_runs):
    over = [r for r in grid_runs if r["rep"].iterations > r["n"] * (r["n"] + 1) // 2]
    ratios = []
    for k in range(20):
        sc_seed, run_seed = run_seeds(2, k)
        sc = generate_scenario(GeneratorParams(320, 20, ("peaked", "submodular")[k % 2]), sc_seed)
        rep = run(sc, build_network("full", positions(sc)), SchedulerConfig(rng_seed=run_seed))
        assert rep.converged
        ratios.append(rep.iterations / 320)
    mean = float(np.mean(ratios))
    report(2, not over and mean < 5,
           f"{len(over)} runs above n(n+1)/2; n_a=320 full mean iterations/n_a = {mean:.3f} (< 5)")


def test_criterion_3_dummy_iterations(grid_runs):
    mst = [r["rep"].time_steps / r["rep"].iterations for r in grid_runs if r["net"] == "mst"]
    full_dummy = [r["rep"].dummy_iterations for r in grid_runs if r["net"] == "full"]
    ok = min(mst) >= 1 and max(mst) <= 10 and all(d == 0 for d in full_dummy)
    report(3, ok, f"mst time_steps/iterations in [{min(mst):.2f}, {max(mst):.2f}] "
                  f"(mean {np.mean(mst):.2f}); full max dummy = {max(full_dummy)}")


def test_bound_band_at_160_agents(grid_runs):
    cell = [r for r in grid_runs if r["n"] == 160 and r["nt"] == 20]
    bounds = [bound_report(r["rep"].final_partition, r["sc"], check=False).bound_general
              for r in cell]
    assert 0.5 <= np.mean(bounds) <= 0.9


def test_criterion_4_suboptimality_bound():
    worst_gap, worst_alpha, bad = math.inf, -math.inf, 0
    count = 0
    for kind in ("peaked", "submodular"):
        for k in range(100):
            sc_seed, run_seed = run_seeds(4, k)
            sc = generate_scenario(GeneratorParams(12, 3, kind), sc_seed)
            rep = run(sc, build_network("full", positions(sc)), SchedulerConfig(rng_seed=run_seed))
            br = bound_report(rep.final_partition, sc, oracle=True)
            count += 1
            if not (br.bound_general <= br.alpha_true * (1 + REL) and br.alpha_true <= 1 + REL):
                bad += 1
            worst_gap = min(worst_gap, br.alpha_true - br.bound_general)
            worst_alpha = max(worst_alpha, br.alpha_true)
    report(4, bad == 0, f"{count} instances, {bad} violations; min(alpha - bound) = "
                        f"{worst_gap:.4f}, max alpha = {worst_alpha:.12f}")


def test_criterion_5_half_bound():
    checked, low, skipped = 0, math.inf, 0
    k = 0
    bad = 0
    while checked < 100:
        sc_seed, run_seed = run_seeds(5, k)
        k += 1
        rng = np.random.default_rng(sc_seed)
        n, nt = int(rng.integers(2, 13)), int(rng.integers(1, 4))
        sc = generate_scenario(GeneratorParams(n, nt, "submodular", cost_coefficient=0.0), sc_seed)
        if not check_half_bound_conditions(sc).applicable:
            skipped += 1
            continue
        rep = run(sc, build_network("full", positions(sc)), SchedulerConfig(rng_seed=run_seed))
        br = bound_report(rep.final_partition, sc, oracle=True)
        checked += 1
        low = min(low, br.alpha_true)
        bad += br.alpha_true < 0.5
    report(5, bad == 0, f"{checked} applicable instances ({skipped} skipped), min alpha = {low:.4f}")


def test_criterion_6_minimum_requirements():
    unmet, below, nonconv = 0, 0, 0
    with_req = 0
    margin = math.inf
    for k in range(100):
        sc_seed, run_seed = run_seeds(6, k)
        kind = ("peaked", "submodular")[k % 2]
        sc = generate_scenario(GeneratorParams(12, 3, kind, min_requirements=True), sc_seed)
        assert sum(sc.requirements) <= sc.n_agents
        with_req += any(sc.requirements)
        net = ("full", "mst")[(k // 2) % 2]
        rep = run(sc, build_network(net, positions(sc)), SchedulerConfig(rng_seed=run_seed))
        if not rep.converged:
            nonconv += 1
            continue
        sizes = rep.final_partition.sizes
        if any(sizes[j] < sc.tasks[j].min_requirement for j in range(1, 4)):
            unmet += 1
            continue
        br = bound_report(rep.final_partition, sc, oracle=True)
        if br.alpha_true < br.minreq.bound * (1 - REL):
            below += 1
        margin = min(margin, br.alpha_true - br.minreq.bound)
    report(6, unmet == 0 and below == 0 and nonconv == 0,
           f"100 instances ({with_req} with requirements): {nonconv} not converged, "
           f"{unmet} requirement violations, {below} below the bound; min margin {margin:.4f}")


def test_criterion_7_adaptability():
    over_one = 0
    worst = 0
    for k in range(100):
        sc_seed, run_seed = run_seeds(7, k)
        kind = ("peaked", "submodular")[k % 2]
        net = ("full", "mst")[(k // 2) % 2]
        params = GeneratorParams(40, 5, kind)
        sc = generate_scenario(params, sc_seed)
        factory = lambda pos, net=net: build_network(net, pos)
        sim = Simulator(sc, factory(positions(sc)), SchedulerConfig(rng_seed=run_seed),
                        network_factory=factory)
        assert sim.run().converged
        extra = new_agents(params, sc, 1, np.random.default_rng(sc_seed))
        sim.inject([AddAgent(extra[0])])
        rep = sim.run()
        worst = max(worst, rep.iterations)
        if not rep.converged or rep.iterations > sc.n_agents + 1:
            over_one += 1
    spec = CampaignSpec("adaptability", n_runs=5, n_agents=(80,), n_tasks=(10,),
                        rewards=("peaked", "submodular"), networks=("full", "mst"), seed=7)
    rows = run_campaign(spec)
    over_bound, order = 0, 0
    for r in rows:
        if r["target"] == "agents":
            n_after = r["n_a"] + (r["count"] if r["magnitude_pct"] > 0 else -r["count"])
        else:
            n_after = r["n_a"]
        over_bound += r["additional_iterations"] > n_after * (n_after + 1) // 2
        order += r["additional_iterations"] > 5 * r["n_a"]
    top = max(r["additional_per_na"] for r in rows)
    report(7, over_one == 0 and over_bound == 0 and order == 0 and all(r["converged"] for r in rows),
           f"+1 agent: {over_one}/100 trials above n_a+1 (max {worst}); sweep of {len(rows)} "
           f"events: {over_bound} above n(n+1)/2, {order} above 5 n_a, max additional/n_a = {top:.2f}")


def test_criterion_8_robustness():
    spec = CampaignSpec("robustness", n_runs=100, n_agents=(40,), n_tasks=(5,),
                        rewards=("submodular",), networks=("mst",), seed=8)
    rows = run_campaign(CampaignSpec(**{**spec.__dict__, "allow_nonconverged": True}))
    conv = all(r["converged"] for r in rows)
    by_run = {}
    for r in rows:
        by_run.setdefault(r["run"], {})[r["f"]] = r
    ratios = [d[0.8]["iterations"] / d[0.0]["iterations"] for d in by_run.values()]
    within = all(0.5 <= x <= 2.0 for x in ratios)
    rho = spearmanr([r["f"] for r in rows], [r["time_steps"] for r in rows]).statistic
    growth = [np.mean([d[f]["time_steps"] / d[0.0]["time_steps"] for d in by_run.values()])
              for f in spec.fractions]
    b0 = np.mean([d[0.0]["bound_general"] for d in by_run.values()])
    b8 = np.mean([d[0.8]["bound_general"] for d in by_run.values()])
    close = abs(b8 - b0) <= 0.05 * abs(b0)
    report(8, conv and within and rho >= 0 and close,
           f"all converged={conv}; iterations ratio f=0.8/f=0 in [{min(ratios):.2f}, "
           f"{max(ratios):.2f}]; spearman(f, time_steps) = {rho:.3f}; mean growth "
           f"{', '.join(f'{g:.2f}' for g in growth)}; bound mean {b0:.4f} vs {b8:.4f}")


def test_criterion_9_determinism(tmp_path, capsys):
    from grape.cli import main

    specs = [CampaignSpec("convergence", n_runs=3, n_agents=(10, 30), networks=("full", "mst"),
                          rewards=("peaked", "submodular"), seed=9),
             CampaignSpec("suboptimality", n_runs=3, n_agents=(8,), n_tasks=(2,), seed=9),
             CampaignSpec("robustness", n_runs=2, n_agents=(20,), seed=9),
             CampaignSpec("adaptability", n_runs=1, n_agents=(20,), networks=("mst",), seed=9)]
    same = all(campaign_csv(s) == campaign_csv(s) for s in specs)
    parallel = campaign_csv(specs[0]) == campaign_csv(CampaignSpec(**{**specs[0].__dict__,
                                                                      "workers": 2}))
    args = ["run", "--na", "25", "--nt", "4", "--network", "mst", "--scheduler",
            "non-operating", "--fraction", "0.3", "--seed", "9"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    cli_same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
                   for f in ("report.json", "trace.jsonl", "partition.txt", "scenario.txt"))
    report(9, same and parallel and cli_same,
           f"campaign CSV repeat identical={same}, serial==parallel={parallel}, "
           f"CLI run outputs identical={cli_same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
