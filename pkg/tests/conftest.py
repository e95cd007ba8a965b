import pytest

from grape import AgentSpec, Peaked, Scenario, Submodular, TaskSpec, Tabular


def make_scenario(agent_xy, tasks, cost=0.0, utility=None, seed=0):
    """tasks: list of (xy, reward_model) or (xy, reward_model, R)."""
    agents = [AgentSpec(i, xy, cost) for i, xy in enumerate(agent_xy)]
    specs = []
    for j, t in enumerate(tasks, start=1):
        xy, model, *rest = t
        specs.append(TaskSpec(j, xy, model, rest[0] if rest else 0))
    return Scenario.build(agents, specs, utility, rng_seed=seed)


@pytest.fixture
def tiny():
    # two agents at the origin, one submodular task, zero cost
    return make_scenario([(0.0, 0.0), (0.0, 0.0)], [((0.0, 0.0), Submodular(10.0, 2.0))])


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
