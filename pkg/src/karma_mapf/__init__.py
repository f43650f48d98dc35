"""Decentralised multi-agent path finding with Karma-based conflict negotiation."""
from .world import Action, GridMap, Heading, Pose, successors, unconstrained_cost
from .conflicts import Conflict, ReservationTable, Trajectory, detect_conflicts
from .planner import AstarCounter, SearchQuery, plan
from .negotiation import Mechanism, MechanismKind, NegotiationContext, plan_one_shot, resolve_agent, token_passing_plan
from .cbs import cbs_solve, joint_brute_force
from .mapd import MetricsSummary, SimConfig, Simulation, run

__all__ = [
    "Action", "GridMap", "Heading", "Pose", "successors", "unconstrained_cost",
    "Conflict", "ReservationTable", "Trajectory", "detect_conflicts",
    "AstarCounter", "SearchQuery", "plan",
    "Mechanism", "MechanismKind", "NegotiationContext", "plan_one_shot", "resolve_agent", "token_passing_plan",
    "cbs_solve", "joint_brute_force",
    "MetricsSummary", "SimConfig", "Simulation", "run",
]
__version__ = "0.1.0"
