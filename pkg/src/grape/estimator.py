"""scikit-learn style front end: ``GrapeAllocator().fit(scenario).labels_``."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .analysis import bound_report
from .core import Scenario, global_utility
from .engine import SchedulerConfig, Simulator
from .network import fully_connected, mst_graph, range_graph


def check_scenario(X) -> Scenario:
    """Accept a :class:`Scenario` or a path to a scenario file."""
    if isinstance(X, Scenario):
        scenario = X
    elif isinstance(X, (str, Path)):
        from .harness.io import read_scenario

        scenario = read_scenario(X)
    else:
        raise TypeError(f"expected a Scenario or a scenario file path, got {type(X).__name__}")
    if scenario.n_agents < 1:
        raise ValueError("scenario has no agents")
    return scenario


class GrapeAllocator(BaseEstimator):
    """Allocate agents to tasks by running the decentralised decision loop.

    ``labels_[i]`` is the task of agent ``i`` (0 = void). ``score`` returns the
    global utility of the allocation on the fitted scenario.
    """

    def __init__(self, network="full", radius=50.0, mode="synchronous",
                 non_operating_fraction=0.0, max_transactions=1, initial="void",
                 max_time_steps=None, random_state=0):
        self.network = network
        self.radius = radius
        self.mode = mode
        self.non_operating_fraction = non_operating_fraction
        self.max_transactions = max_transactions
        self.initial = initial
        self.max_time_steps = max_time_steps
        self.random_state = random_state

    def _graph(self, scenario):
        pos = [a.position for a in scenario.agents]
        if self.network == "full":
            return fully_connected(len(pos))
        if self.network == "mst":
            return mst_graph(pos)
        if self.network == "range":
            return range_graph(pos, self.radius)
        raise ValueError(f"unknown network {self.network!r}")

    def fit(self, X, y=None):
        scenario = check_scenario(X)
        config = SchedulerConfig(mode=self.mode, non_operating_fraction=self.non_operating_fraction,
                                 max_transactions=self.max_transactions,
                                 rng_seed=int(self.random_state or 0),
                                 max_time_steps=self.max_time_steps, initial=self.initial)
        sim = Simulator(scenario, self._graph(scenario), config)
        report = sim.run()
        self.scenario_ = scenario
        self.report_ = report
        self.partition_ = report.final_partition
        self.labels_ = np.array(report.final_partition.assignment, dtype=np.int64)
        self.converged_ = report.converged
        self.n_iter_ = report.iterations
        self.diameter_ = sim.d_G
        return self

    def _same(self, X):
        check_is_fitted(self, "labels_")
        if X is None:
            return
        if check_scenario(X) != self.scenario_:
            raise ValueError("predict/score take the fitted scenario; call fit on a new one")

    def predict(self, X=None):
        self._same(X)
        return self.labels_.copy()

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_.copy()

    def score(self, X=None, y=None):
        self._same(X)
        return global_utility(self.partition_, self.scenario_)

    def bounds(self, oracle=False):
        """Suboptimality figures for the fitted allocation."""
        check_is_fitted(self, "labels_")
        return bound_report(self.partition_, self.scenario_, oracle=oracle)
