"""Receding-horizon re-planning that keeps the mission-wide risk bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .instance import Instance, Plan, Point3, Tour, project_to_ground
from .planner import PlannerRequest, solve
from .risk import NEG_INF, tour_logprob
from .travel import TravelModel


class BudgetExhausted(ValueError):
    """Tours beyond the horizon already use up the whole risk budget."""


@dataclass(frozen=True)
class MissionState:
    plan: Plan
    current_tour: int
    next_waypoint_index: int
    uav_pos: Point3
    ugv_pos: Point3
    elapsed_flight: float = 0.0
    phase: str = "between_tours"  # between_tours | mid_tour | done


@dataclass(frozen=True)
class ReplanConfig:
    horizon: int = 2
    mid_tour: bool = True
    between_tours: bool = True
    seed: int = 0


@dataclass
class ReplanOutcome:
    plan: Plan
    fallback: bool
    changed: bool
    phase: str
    horizon: int
    risk_budget: float = math.nan
    old_logprob: float = math.nan
    new_logprob: float = math.nan
    reason: str = ""

    def event(self, trigger_time: float) -> dict:
        return {"time": trigger_time, "phase": self.phase, "horizon": self.horizon,
                "risk_budget": self.risk_budget, "old_logprob": self.old_logprob,
                "new_logprob": self.new_logprob, "fallback": self.fallback,
                "changed": self.changed, "reason": self.reason}


def risk_budget(plan: Plan, i: int, horizon: int, p_r: float) -> float:
    """Risk allowed for tours ``i..i+horizon`` given the stored success
    log-probabilities of the tours after them."""
    if not 0 <= horizon <= plan.m - 1 - i:
        raise ValueError(f"horizon {horizon} outside 0..{plan.m - 1 - i}")
    tail = math.fsum(plan.planned_success_logprobs[i + horizon + 1:])
    allowed = -math.expm1(math.log1p(-p_r) - tail)
    if not allowed > 0:
        raise BudgetExhausted(f"tours after the horizon already consume the risk budget ({tail:.6g})")
    return allowed


def _splice(plan: Plan, i: int, horizon: int, tours, lps) -> Plan:
    new_tours = plan.tours[:i] + tuple(tours) + plan.tours[i + horizon + 1:]
    new_lps = plan.planned_success_logprobs[:i] + tuple(lps) + plan.planned_success_logprobs[i + horizon + 1:]
    return Plan(new_tours, plan.instance_ref, new_lps, math.fsum(new_lps))


def _better(cand_m, cand_lp, inc_m, inc_lp) -> bool:
    # fewer tours first, then higher joint log success; ties keep the incumbent
    return (cand_m, -cand_lp) < (inc_m, -inc_lp)


def _clamp_horizon(plan: Plan, i: int, horizon: int) -> int:
    return max(0, min(horizon, plan.m - 1 - i))


def _request(points, inst: Instance, model, uav, ugv, elapsed, final, risk, seed, ref):
    return PlannerRequest(points=tuple(points), n_full=inst.n, uav_start=uav, ugv_start=ugv,
                          final=final, budget=inst.max_flight_time, risk=risk, model=model,
                          initial_flight_time=elapsed, seed=seed, bounds=inst.env_bounds,
                          instance_ref=ref)


def replan_between_tours(state: MissionState, horizon: int, model: TravelModel, inst: Instance,
                         seed: int = 0) -> ReplanOutcome:
    """Re-solve tours ``i..i+horizon`` from the team's common ground position."""
    plan, i = state.plan, state.current_tour
    h = _clamp_horizon(plan, i, horizon)
    old = math.fsum(plan.planned_success_logprobs[i:i + h + 1])
    try:
        budget = risk_budget(plan, i, h, inst.risk_level)
    except BudgetExhausted as exc:
        return ReplanOutcome(plan, True, False, "between_tours", h, reason=str(exc))
    window = plan.tours[i:i + h + 1]
    points = [p for t in window for p in t.waypoints]
    final = project_to_ground(window[-1].collect_air)
    req = _request(points, inst, model, state.uav_pos, state.uav_pos, 0.0, final, budget,
                   seed, plan.instance_ref)
    res = solve(req)
    incumbent_ok = old >= math.log1p(-budget)
    if res.plan is None:
        if incumbent_ok:
            return ReplanOutcome(plan, False, False, "between_tours", h, budget, old, old, "incumbent kept")
        return ReplanOutcome(plan, True, False, "between_tours", h, budget, old, reason="planner infeasible")
    new = res.plan.planned_total_logprob
    if incumbent_ok and not _better(res.plan.m, new, len(window), old):
        return ReplanOutcome(plan, False, False, "between_tours", h, budget, old, old, "incumbent kept")
    spliced = _splice(plan, i, h, res.plan.tours, res.plan.planned_success_logprobs)
    return ReplanOutcome(spliced, False, True, "between_tours", h, budget, old, new)


def replan_mid_tour(state: MissionState, horizon: int, model: TravelModel, inst: Instance,
                    seed: int = 0) -> ReplanOutcome:
    """Re-solve the rest of tour ``i`` plus the next ``horizon`` tours while the
    UAV is airborne at ``state.uav_pos`` with ``elapsed_flight`` spent."""
    plan, i = state.plan, state.current_tour
    tour = plan.tours[i]
    remaining = tour.waypoints[state.next_waypoint_index:]
    if not remaining:
        ground = tour.collect_ground
        nxt = replace(state, plan=_splice(plan, i, 0, (), ()), uav_pos=ground, ugv_pos=ground,
                      elapsed_flight=0.0, next_waypoint_index=0, phase="between_tours")
        if i >= nxt.plan.m:
            return ReplanOutcome(plan, False, False, "done", 0, reason="no tours left")
        return replan_between_tours(nxt, horizon, model, inst, seed)

    h = _clamp_horizon(plan, i, horizon)
    incumbent_first = Tour(state.uav_pos, tour.collect_air, state.ugv_pos, tour.collect_ground,
                           tuple(remaining), partial=True, elapsed=state.elapsed_flight)
    inc_lps = [tour_logprob(incumbent_first, inst.max_flight_time, model),
               *plan.planned_success_logprobs[i + 1:i + h + 1]]
    old = math.fsum(inc_lps) if NEG_INF not in inc_lps else NEG_INF
    if state.elapsed_flight >= inst.max_flight_time:
        return ReplanOutcome(plan, True, False, "mid_tour", h, old_logprob=old, reason="flight budget exhausted")
    try:
        budget = risk_budget(plan, i, h, inst.risk_level)
    except BudgetExhausted as exc:
        return ReplanOutcome(plan, True, False, "mid_tour", h, old_logprob=old, reason=str(exc))
    window = plan.tours[i + 1:i + h + 1]
    points = [*remaining, *(p for t in window for p in t.waypoints)]
    last = window[-1] if window else tour
    final = project_to_ground(last.collect_air)
    req = _request(points, inst, model, state.uav_pos, state.ugv_pos, state.elapsed_flight,
                   final, budget, seed, plan.instance_ref)
    res = solve(req)
    incumbent_ok = old >= math.log1p(-budget)
    inc_plan = _splice(plan, i, h, (incumbent_first, *plan.tours[i + 1:i + h + 1]), inc_lps)
    if res.plan is None:
        if incumbent_ok:
            return ReplanOutcome(inc_plan, False, False, "mid_tour", h, budget, old, old, "incumbent kept")
        return ReplanOutcome(plan, True, False, "mid_tour", h, budget, old, reason="planner infeasible")
    new = res.plan.planned_total_logprob
    if incumbent_ok and not _better(res.plan.m, new, h + 1, old):
        return ReplanOutcome(inc_plan, False, False, "mid_tour", h, budget, old, old, "incumbent kept")
    spliced = _splice(plan, i, h, res.plan.tours, res.plan.planned_success_logprobs)
    return ReplanOutcome(spliced, False, True, "mid_tour", h, budget, old, new)
