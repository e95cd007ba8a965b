"""Decentralised multi-agent task allocation as an anonymous hedonic game."""
from .analysis import (BoundReport, NashReport, NotNashStable, OracleTooLarge, bound_report,
                       brute_force_optimal, check_half_bound_conditions, lambda_bound,
                       minreq_bounds, optimal_by_sizes, tolerable_coworkers, verify_nash_stable)
from .core import (VOID, AgentSpec, Partition, Scenario, TaskSpec, global_utility, move_agent,
                   partition_singleton_void)
from .engine import (AddAgent, AddTask, AgentMessage, AgentState, RemoveAgent, RemoveTask,
                     RunReport, SchedulerConfig, Simulator, SpaoViolation, best_response,
                     d_mutex, replay, run)
from .estimator import GrapeAllocator, check_scenario
from .network import (CommGraph, diameter, fully_connected, is_connected, mst_graph, neighbors,
                      range_graph)
from .utility import (AuxiliaryUtility, Peaked, RequirementUtility, Submodular, Tabular,
                      UtilityModel, Void, auxiliary_utility, check_requirement_preference, check_spao,
                      individual_utility, reward, utility_table)

__version__ = "0.1.0"
