"""Flat-file formats: scenarios, partitions and CSV tables.

Scenario grammar (one record per line, ``#`` starts a comment line)::

    grape-scenario 1
    seed <int>
    utility base|requirement|auxiliary
    beta <float>                      # auxiliary only
    [agents]
    <id> <x> <y> <cost_coefficient>
    [tasks]
    <id> <x> <y> <min_requirement> peaked <r_max> <n_d>
    <id> <x> <y> <min_requirement> submodular <r_min> <epsilon>
    <id> <x> <y> <min_requirement> tabular <v1> <v2> ...

Real tasks are numbered from 1; the void task is implicit. Floats are written
with ``repr`` so that writing a parsed file reproduces it byte for byte.

Partition grammar::

    grape-partition 1
    n_tasks <int>
    <agent> <task>          # one line per agent, agents in order
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

from ..core import AgentSpec, Partition, Scenario, TaskSpec
from ..utility import (AuxiliaryUtility, Peaked, RequirementUtility, Submodular, Tabular,
                       UtilityModel)

SCENARIO_MAGIC = "grape-scenario 1"
PARTITION_MAGIC = "grape-partition 1"


class FormatError(ValueError):
    """Malformed input file; the message names the offending line."""

    def __init__(self, source, lineno: int, msg: str):
        super().__init__(f"{source}:{lineno}: {msg}")
        self.source = source
        self.lineno = lineno


def _f(x: float) -> str:
    return repr(float(x))


def _model_fields(model) -> list[str]:
    if isinstance(model, Peaked):
        return ["peaked", _f(model.r_max), str(model.n_d)]
    if isinstance(model, Submodular):
        return ["submodular", _f(model.r_min), _f(model.epsilon)]
    if isinstance(model, Tabular):
        return ["tabular", *(_f(v) for v in model.values)]
    raise TypeError(f"cannot serialise reward model {type(model).__name__}")


def format_scenario(scenario: Scenario) -> str:
    u = scenario.utility
    lines = [SCENARIO_MAGIC, f"seed {scenario.rng_seed}"]
    if isinstance(u, AuxiliaryUtility):
        lines += ["utility auxiliary", f"beta {_f(u.beta)}"]
    elif isinstance(u, RequirementUtility):
        lines.append("utility requirement")
    else:
        lines.append("utility base")
    lines.append("[agents]")
    for a in scenario.agents:
        lines.append(" ".join([str(a.id), _f(a.position[0]), _f(a.position[1]),
                               _f(a.cost_coefficient)]))
    lines.append("[tasks]")
    for t in scenario.tasks[1:]:
        lines.append(" ".join([str(t.id), _f(t.position[0]), _f(t.position[1]),
                               str(t.min_requirement), *_model_fields(t.reward_model)]))
    return "\n".join(lines) + "\n"


def write_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(format_scenario(scenario), newline="\n")


def _num(tok: str, kind, source, lineno, what):
    try:
        v = kind(tok)
    except ValueError:
        raise FormatError(source, lineno, f"bad {what} {tok!r}") from None
    if kind is float and not math.isfinite(v):
        raise FormatError(source, lineno, f"{what} must be finite")
    return v


def _parse_model(toks, source, lineno):
    kind, args = toks[0], toks[1:]
    try:
        if kind == "peaked":
            if len(args) != 2:
                raise FormatError(source, lineno, "peaked needs r_max n_d")
            return Peaked(_num(args[0], float, source, lineno, "r_max"),
                          _num(args[1], int, source, lineno, "n_d"))
        if kind == "submodular":
            if len(args) != 2:
                raise FormatError(source, lineno, "submodular needs r_min epsilon")
            return Submodular(_num(args[0], float, source, lineno, "r_min"),
                              _num(args[1], float, source, lineno, "epsilon"))
        if kind == "tabular":
            if not args:
                raise FormatError(source, lineno, "tabular needs at least one value")
            return Tabular(tuple(_num(a, float, source, lineno, "value") for a in args))
    except FormatError:
        raise
    except ValueError as e:
        raise FormatError(source, lineno, str(e)) from None
    raise FormatError(source, lineno, f"unknown reward model {kind!r}")


def parse_scenario(text: str, source="<scenario>") -> Scenario:
    header: dict[str, str] = {}
    agents, tasks = [], []
    section = None
    seen_magic = False
    last = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        last = lineno
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not seen_magic:
            if line != SCENARIO_MAGIC:
                raise FormatError(source, lineno, f"expected {SCENARIO_MAGIC!r}")
            seen_magic = True
            continue
        if line in ("[agents]", "[tasks]"):
            section = line[1:-1]
            continue
        toks = line.split()
        if section is None:
            if len(toks) != 2 or toks[0] not in ("seed", "utility", "beta"):
                raise FormatError(source, lineno, f"unexpected header line {raw!r}")
            header[toks[0]] = toks[1]
            if toks[0] == "seed":
                _num(toks[1], int, source, lineno, "seed")
            elif toks[0] == "beta":
                _num(toks[1], float, source, lineno, "beta")
            elif toks[1] not in ("base", "requirement", "auxiliary"):
                raise FormatError(source, lineno, f"unknown utility {toks[1]!r}")
        elif section == "agents":
            if len(toks) != 4:
                raise FormatError(source, lineno, "agent line needs: id x y cost_coefficient")
            aid = _num(toks[0], int, source, lineno, "agent id")
            if aid != len(agents):
                raise FormatError(source, lineno, f"agent ids must be 0..n-1 in order, got {aid}")
            xy = (_num(toks[1], float, source, lineno, "x"), _num(toks[2], float, source, lineno, "y"))
            try:
                agents.append(AgentSpec(aid, xy, _num(toks[3], float, source, lineno, "cost")))
            except ValueError as e:
                raise FormatError(source, lineno, str(e)) from None
        else:
            if len(toks) < 6:
                raise FormatError(source, lineno, "task line needs: id x y R model params...")
            tid = _num(toks[0], int, source, lineno, "task id")
            if tid != len(tasks) + 1:
                raise FormatError(source, lineno, f"task ids must be 1..n in order, got {tid}")
            xy = (_num(toks[1], float, source, lineno, "x"), _num(toks[2], float, source, lineno, "y"))
            req = _num(toks[3], int, source, lineno, "min_requirement")
            model = _parse_model(toks[4:], source, lineno)
            try:
                tasks.append(TaskSpec(tid, xy, model, req))
            except ValueError as e:
                raise FormatError(source, lineno, str(e)) from None
    if not seen_magic:
        raise FormatError(source, max(last, 1), "empty scenario file")
    kind = header.get("utility", "base")
    if kind == "auxiliary":
        utility = AuxiliaryUtility(UtilityModel(), float(header.get("beta", "1.0")))
    elif kind == "requirement":
        utility = RequirementUtility(UtilityModel())
    else:
        utility = UtilityModel()
    try:
        return Scenario.build(agents, tasks, utility, rng_seed=int(header.get("seed", "0")))
    except ValueError as e:
        raise FormatError(source, last, str(e)) from None


def read_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text(), source=str(path))


def format_partition(partition: Partition) -> str:
    lines = [PARTITION_MAGIC, f"n_tasks {partition.n_tasks}"]
    lines += [f"{i} {j}" for i, j in enumerate(partition.assignment)]
    return "\n".join(lines) + "\n"


def write_partition(partition: Partition, path) -> None:
    Path(path).write_text(format_partition(partition), newline="\n")


def parse_partition(text: str, source="<partition>") -> Partition:
    n_tasks = None
    assign = []
    seen_magic = False
    last = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        last = lineno
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not seen_magic:
            if line != PARTITION_MAGIC:
                raise FormatError(source, lineno, f"expected {PARTITION_MAGIC!r}")
            seen_magic = True
            continue
        toks = line.split()
        if n_tasks is None:
            if len(toks) != 2 or toks[0] != "n_tasks":
                raise FormatError(source, lineno, "expected 'n_tasks <int>'")
            n_tasks = _num(toks[1], int, source, lineno, "n_tasks")
            continue
        if len(toks) != 2:
            raise FormatError(source, lineno, "expected '<agent> <task>'")
        agent = _num(toks[0], int, source, lineno, "agent")
        task = _num(toks[1], int, source, lineno, "task")
        if agent != len(assign):
            raise FormatError(source, lineno, f"agents must be listed 0..n-1 in order, got {agent}")
        if not 0 <= task <= n_tasks:
            raise FormatError(source, lineno, f"task {task} outside 0..{n_tasks}")
        assign.append(task)
    if n_tasks is None:
        raise FormatError(source, max(last, 1), "missing header")
    return Partition(tuple(assign), n_tasks)


def read_partition(path) -> Partition:
    return parse_partition(Path(path).read_text(), source=str(path))


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_csv(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(columns: Sequence[str], rows: Iterable[dict], path) -> None:
    Path(path).write_text(format_csv(columns, rows), newline="\n")
