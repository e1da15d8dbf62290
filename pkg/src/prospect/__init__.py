"""Risk-bounded energy-aware planning for a UAV carried and recharged by a UGV."""
from .instance import Instance, Plan, Point3, Tour, check_feasibility, project_to_ground
from .planner import Infeasible, PlannerRequest, expected_mission_time, plan_offline, solve
from .travel import UniformEdgeModel, WindBoundModel, model_from_dict

__all__ = [
    "Instance", "Plan", "Point3", "Tour", "check_feasibility", "project_to_ground",
    "Infeasible", "PlannerRequest", "expected_mission_time", "plan_offline", "solve",
    "UniformEdgeModel", "WindBoundModel", "model_from_dict",
]
