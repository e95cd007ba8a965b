"""Command line entry point: ``grape <subcommand> ...``.

Exit codes: 0 success, 1 verification failure (or a run that did not
converge), 2 usage error or malformed input file.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import OracleTooLarge, bound_report, brute_force_optimal, verify_nash_stable
from .engine import SchedulerConfig, Simulator, SpaoViolation, write_trace
from .harness.campaign import CampaignFailure, CampaignSpec, campaign_csv, run_campaign
from .harness.generate import (FORMATIONS, REWARDS, GeneratorParams, build_network,
                               generate_connected_formation, generate_scenario)
from .harness.io import (FormatError, format_csv, format_partition, format_scenario,
                         read_partition, read_scenario, write_partition)
from .network import is_connected, read_edge_list

SCHEDULERS = ("synchronous", "non-operating", "bounded")


class UsageError(Exception):
    pass


def _csv_list(kind):
    def parse(text):
        try:
            return tuple(kind(x) for x in text.split(",") if x)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


def _global_flags(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(None), help="random seed")
    p.add_argument("--network", default=d(None),
                   help="full | mst | range (campaign accepts a comma list)")
    p.add_argument("--scheduler", choices=SCHEDULERS, default=d(None))
    p.add_argument("--out", default=d(None), help="output file or directory")


def _generator_flags(p):
    p.add_argument("--scenario", help="scenario file (overrides generator flags)")
    p.add_argument("--na", type=int, default=12, help="number of agents")
    p.add_argument("--nt", type=int, default=3, help="number of tasks")
    p.add_argument("--reward", choices=REWARDS, default="submodular")
    p.add_argument("--cost", type=float, default=0.1, help="travel cost per metre")
    p.add_argument("--min-req", action="store_true", help="random minimum requirements")
    p.add_argument("--beta", type=float, default=1.0, help="auxiliary utility offset")
    p.add_argument("--formation", choices=FORMATIONS)


def _scheduler_flags(p):
    p.add_argument("--fraction", type=float, default=0.0, help="non-operating fraction")
    p.add_argument("--transactions", type=int, default=1, help="recipients per step (bounded)")
    p.add_argument("--initial", choices=("void", "random"), default="void")
    p.add_argument("--max-steps", type=int, help="time-step cap")
    p.add_argument("--radius", type=float, default=50.0, help="range network radius (m)")
    p.add_argument("--edges", help="edge-list file to use as the network")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grape", description="Decentralised task allocation")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="emit a scenario file")
    _generator_flags(g)

    r = sub.add_parser("run", help="single run: report, partition and trace")
    _generator_flags(r)
    _scheduler_flags(r)
    r.add_argument("--oracle", action="store_true", help="also compute the optimum (small only)")

    c = sub.add_parser("campaign", help="Monte Carlo campaign to CSV")
    c.add_argument("--experiment", choices=("convergence", "suboptimality", "robustness",
                                            "adaptability"), default="convergence")
    c.add_argument("--runs", type=int, default=10)
    c.add_argument("--na", type=_csv_list(int), default=(40,))
    c.add_argument("--nt", type=_csv_list(int), default=(5,))
    c.add_argument("--reward", type=_csv_list(str), default=("submodular",))
    c.add_argument("--cost", type=float, default=0.1)
    c.add_argument("--min-req", action="store_true")
    c.add_argument("--beta", type=float, default=1.0)
    c.add_argument("--fraction", type=float, default=0.0)
    c.add_argument("--transactions", type=int, default=1)
    c.add_argument("--radius", type=float, default=50.0)
    c.add_argument("--fractions", type=_csv_list(float), default=(0.0, 0.2, 0.4, 0.6, 0.8))
    c.add_argument("--magnitudes", type=_csv_list(int),
                   default=(-50, -40, -30, -20, -10, 10, 20, 30, 40, 50))
    c.add_argument("--targets", type=_csv_list(str), default=("agents", "tasks"))
    c.add_argument("--oracle", action="store_true", default=None)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--timing", action="store_true", help="add a wall_time column")
    c.add_argument("--no-summary", action="store_true")
    c.add_argument("--allow-nonconverged", action="store_true")

    v = sub.add_parser("verify", help="check Nash stability of a partition file")
    v.add_argument("--scenario", required=True)
    v.add_argument("--partition", required=True)

    o = sub.add_parser("oracle", help="brute-force optimum of a small instance")
    _generator_flags(o)
    o.add_argument("--feasible-only", action="store_true",
                   help="only assignments meeting the minimum requirements")

    e = sub.add_parser("export-positions", help="positions and final assignment as CSV")
    _generator_flags(e)
    _scheduler_flags(e)

    for p in (g, r, c, v, o, e):
        _global_flags(p, suppress=True)
    return parser


def _opt(args, name, default):
    v = getattr(args, name, None)
    return default if v is None else v


def _scenario(args):
    if args.scenario:
        return read_scenario(args.scenario), None
    params = GeneratorParams(args.na, args.nt, args.reward, cost_coefficient=args.cost,
                             min_requirements=args.min_req, beta=args.beta,
                             formation=args.formation)
    seed = _opt(args, "seed", 0)
    if args.formation and _opt(args, "network", "full") == "range":
        return generate_connected_formation(params, seed, getattr(args, "radius", 50.0))
    return generate_scenario(params, seed), None


def _graph(args, scenario, graph):
    if getattr(args, "edges", None):
        graph = read_edge_list(args.edges)
    if graph is None:
        graph = build_network(_opt(args, "network", "full"),
                              [a.position for a in scenario.agents], args.radius)
    if graph.n_agents != scenario.n_agents:
        raise UsageError(f"network has {graph.n_agents} agents, scenario {scenario.n_agents}")
    if not is_connected(graph):
        raise UsageError("communication network is not connected")
    return graph


def _config(args) -> SchedulerConfig:
    return SchedulerConfig(mode=_opt(args, "scheduler", "synchronous"),
                           non_operating_fraction=args.fraction,
                           max_transactions=args.transactions, rng_seed=_opt(args, "seed", 0),
                           max_time_steps=args.max_steps, initial=args.initial,
                           record_trace=True)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, newline="\n")
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    scenario, _ = _scenario(args)
    _emit(format_scenario(scenario), _opt(args, "out", None))
    return 0


def _run(args):
    scenario, graph = _scenario(args)
    graph = _graph(args, scenario, graph)
    sim = Simulator(scenario, graph, _config(args))
    return scenario, sim, sim.run()


def cmd_run(args) -> int:
    scenario, sim, rep = _run(args)
    report = {"converged": rep.converged, "n_a": scenario.n_agents, "n_t": scenario.n_tasks,
              "network": _opt(args, "network", "full") if not args.edges else "edges",
              "d_G": sim.d_G, "iterations": rep.iterations,
              "dummy_iterations": rep.dummy_iterations, "time_steps": rep.time_steps,
              "messages_sent": rep.messages_sent, "max_dummy_streak": rep.max_dummy_streak,
              "assignment": list(rep.final_partition.assignment)}
    if rep.converged:
        try:
            br = bound_report(rep.final_partition, scenario, oracle=args.oracle)
        except OracleTooLarge as e:
            raise UsageError(str(e)) from None
        report.update({"j_grape": br.j_grape, "lambda": br.lambda_,
                       "bound_general": br.bound_general,
                       "half_bound_applicable": br.half_bound_applicable,
                       "j_opt": br.j_opt, "alpha_true": br.alpha_true})
        if br.minreq is not None:
            report["minreq"] = {"j_tilde": br.minreq.j_tilde, "delta": br.minreq.delta,
                                "lambda_tilde": br.minreq.lambda_tilde,
                                "bound": br.minreq.bound, "half_bound": br.minreq.half_bound}
    text = json.dumps(report, indent=2) + "\n"
    out = _opt(args, "out", None)
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.json").write_text(text, newline="\n")
        write_partition(rep.final_partition, d / "partition.txt")
        (d / "scenario.txt").write_text(format_scenario(scenario), newline="\n")
        write_trace(rep.trace, d / "trace.jsonl")
    sys.stdout.write(text)
    return 0 if rep.converged else 1


def cmd_campaign(args) -> int:
    networks = _csv_list(str)(_opt(args, "network", "full"))
    params = GeneratorParams(1, 1, cost_coefficient=args.cost, min_requirements=args.min_req,
                             beta=args.beta)
    sched = SchedulerConfig(mode=_opt(args, "scheduler", "synchronous"),
                            non_operating_fraction=args.fraction,
                            max_transactions=args.transactions)
    spec = CampaignSpec(experiment=args.experiment, n_runs=args.runs, n_agents=args.na,
                        n_tasks=args.nt, rewards=args.reward, networks=networks,
                        radius=args.radius, seed=_opt(args, "seed", 0), scheduler=sched,
                        generator=params, oracle=args.oracle, fractions=args.fractions,
                        magnitudes=args.magnitudes, targets=args.targets,
                        allow_nonconverged=args.allow_nonconverged, workers=args.workers,
                        timing=args.timing)
    try:
        rows = run_campaign(spec)
    except CampaignFailure as e:
        print(f"campaign failed: {e}", file=sys.stderr)
        return 1
    _emit(campaign_csv(spec, rows, summary=not args.no_summary), _opt(args, "out", None))
    return 0


def cmd_verify(args) -> int:
    scenario = read_scenario(args.scenario)
    partition = read_partition(args.partition)
    try:
        scenario.check_partition(partition)
    except ValueError as e:
        raise FormatError(args.partition, 1, str(e)) from None
    rep = verify_nash_stable(partition, scenario)
    if rep:
        print("nash stable")
        return 0
    print(f"not nash stable: agent {rep.agent} prefers task {rep.task}")
    return 1


def cmd_oracle(args) -> int:
    scenario, _ = _scenario(args)
    try:
        j_opt, part = brute_force_optimal(scenario, feasible_only=args.feasible_only)
    except OracleTooLarge as e:
        raise UsageError(str(e)) from None
    print(f"j_opt {j_opt!r}")
    out = _opt(args, "out", None)
    if out:
        write_partition(part, out)
    else:
        sys.stdout.write(format_partition(part))
    return 0


def cmd_export_positions(args) -> int:
    scenario, sim, rep = _run(args)
    rows = [{"kind": "task", "id": t.id, "x": t.position[0], "y": t.position[1], "task": t.id}
            for t in scenario.tasks[1:]]
    rows += [{"kind": "agent", "id": a.id, "x": a.position[0], "y": a.position[1],
              "task": rep.final_partition.assignment[a.id]} for a in scenario.agents]
    _emit(format_csv(("kind", "id", "x", "y", "task"), rows), _opt(args, "out", None))
    return 0 if rep.converged else 1


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "campaign": cmd_campaign, "verify": cmd_verify,
            "oracle": cmd_oracle, "export-positions": cmd_export_positions}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (FormatError, UsageError, SpaoViolation) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
