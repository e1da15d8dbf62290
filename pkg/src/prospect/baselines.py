"""Reference solvers: brute-force oracles, the deterministic-margin planner and
a simulated-annealing planner."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .instance import Instance, Plan, Point3, Tour, make_tour, project_to_ground
from .planner import Infeasible, PlannerRequest, expected_mission_time, plan_offline
from .risk import NEG_INF, margin_scaled_budget, tour_cost_f, tour_cost_f_prime, tour_logprob
from .sequencer import VisitOrder, cost_matrix, path_cost, pinned_endpoints, solve_visit_order
from .travel import TravelModel, UniformEdgeModel, uav_path_moments


class SizeError(ValueError):
    pass


@dataclass
class OracleResult:
    best_logprob_per_m: list[float]  # index m - 1
    best_plan: Plan | None
    m_min: int | None


def compositions(n: int):
    """All ways to cut ``range(n)`` into contiguous nonempty segments, as
    lists of ``(start, end)`` pairs (inclusive)."""
    for mask in range(1 << (n - 1)):
        cuts = [i + 1 for i in range(n - 1) if mask >> i & 1]
        bounds = [0, *cuts, n]
        yield [(bounds[k], bounds[k + 1] - 1) for k in range(len(bounds) - 1)]


def exhaustive_partition_oracle(order: VisitOrder, req: PlannerRequest, max_n: int = 8) -> OracleResult:
    """Enumerate every contiguous partition of the visit order and every
    release/collect pair of every segment."""
    n = len(order.order)
    if n > max_n:
        raise SizeError(f"oracle limited to {max_n} points, got {n}")
    seq = [req.points[i] for i in order.order]
    memo = {}

    def seg_best(a, b, first):
        key = (a, b, first)
        if key in memo:
            return memo[key]
        best = (NEG_INF, -1, -1)
        if first and req.separated:
            for c in range(a, b + 1):
                v = tour_cost_f_prime(seq, b, c, req.uav_start, req.ugv_start,
                                      req.initial_flight_time, req.budget, req.model).log_prob
                if v > best[0]:
                    best = (v, -1, c)
        else:
            for r in range(a, b + 1):
                for c in range(a, b + 1):
                    if r == c and a != b:
                        continue
                    v = tour_cost_f(seq, a, b, r, c, req.budget, req.model).log_prob
                    if v > best[0]:
                        best = (v, r, c)
        memo[key] = best
        return best

    best_m = [NEG_INF] * n
    best_parts = [None] * n
    for parts in compositions(n):
        vals = [seg_best(a, b, k == 0) for k, (a, b) in enumerate(parts)]
        total = 0.0
        for v, _, _ in vals:
            total = NEG_INF if v == NEG_INF else total + v
            if total == NEG_INF:
                break
        m = len(parts)
        if total > best_m[m - 1]:
            best_m[m - 1] = total
            best_parts[m - 1] = list(zip(parts, vals))
    target = math.log1p(-req.risk)
    m_min = next((m + 1 for m in range(n) if best_m[m] >= target), None)
    plan = None
    if m_min is not None:
        tours = []
        for k, ((a, b), (v, r, c)) in enumerate(best_parts[m_min - 1]):
            if k == 0 and req.separated:
                cp = seq[c]
                wps = (*(seq[i] for i in range(a, b + 1) if i != c), cp)
                tours.append(Tour(req.uav_start, cp, req.ugv_start, project_to_ground(cp), wps,
                                  partial=True, elapsed=req.initial_flight_time))
            else:
                tours.append(make_tour(seq[a:b + 1], r - a, c - a))
        lps = tuple(tour_logprob(t, req.budget, req.model) for t in tours)
        plan = Plan(tuple(tours), req.instance_ref, lps, math.fsum(lps))
    return OracleResult(best_m, plan, m_min)


def held_karp_path(points, start: Point3, final: Point3, model: TravelModel, max_n: int = 12) -> VisitOrder:
    """Exact cheapest Hamiltonian path with the same pinned endpoints as the
    heuristic sequencer (bitmask dynamic program)."""
    n = len(points)
    if n > max_n:
        raise SizeError(f"Held-Karp limited to {max_n} points, got {n}")
    first, last = pinned_endpoints(points, start, final, model)
    if n == 1:
        return VisitOrder((first,), 0.0)
    C = cost_matrix(points, model)
    mid = [i for i in range(n) if i not in (first, last)]
    k = len(mid)
    full = (1 << k) - 1
    dp = {(1 << i, i): (C[first][mid[i]], -1) for i in range(k)}
    for mask in range(1, full + 1):
        for i in range(k):
            if (mask, i) not in dp:
                continue
            cost, _ = dp[(mask, i)]
            for j in range(k):
                if mask >> j & 1:
                    continue
                key = (mask | 1 << j, j)
                cand = cost + C[mid[i]][mid[j]]
                if key not in dp or cand < dp[key][0]:
                    dp[key] = (cand, i)
    if k == 0:
        return VisitOrder((first, last), C[first][last])
    end = min(range(k), key=lambda i: (dp[(full, i)][0] + C[mid[i]][last], i))
    order, mask, i = [], full, end
    while i != -1:
        order.append(mid[i])
        _, prev = dp[(mask, i)]
        mask ^= 1 << i
        i = prev
    order = [first, *reversed(order), last]
    return VisitOrder(tuple(order), path_cost(order, C))


def margin_planner(inst: Instance, model: TravelModel, seed: int = 0, p_r: float | None = None) -> Plan:
    """Deterministic planner on a margin-shrunk budget: walk the visit order
    and grow each tour while both mean UAV and mean UGV times fit."""
    if not isinstance(model, UniformEdgeModel):
        raise ValueError("margin scaling needs the uniform edge model parameters")
    p_r = inst.risk_level if p_r is None else p_r
    b_a = margin_scaled_budget(inst.max_flight_time, model.mu_uav, model.sigma_uav, p_r)
    b_g = margin_scaled_budget(inst.max_flight_time, model.mu_ugv, model.sigma_ugv, p_r)
    order = solve_visit_order(inst.uav_points, inst.start, inst.final, model, seed=seed)
    seq = [inst.uav_points[i] for i in order.order]

    def fits(tour: Tour) -> bool:
        return (uav_path_moments(model, tour.uav_path()).mean <= b_a
                and model.ugv_edge(tour.release_ground, tour.collect_ground).mean <= b_g)

    tours, i = [], 0
    while i < len(seq):
        tour = make_tour(seq[i:i + 1], 0, 0, inst.env_bounds)
        if not fits(tour):
            raise Infeasible(f"point {tuple(seq[i])} unreachable within the margin budget")
        j = i + 1
        while j < len(seq):
            cand = make_tour(seq[i:j + 1], 0, j - i, inst.env_bounds)
            if not fits(cand):
                break
            tour, j = cand, j + 1
        tours.append(tour)
        i = j
    lps = tuple(tour_logprob(t, inst.max_flight_time, model) for t in tours)
    return Plan(tuple(tours), inst.fingerprint(), lps, math.fsum(lps))


# -- simulated annealing -----------------------------------------------------

def _normalize(segs: list[list[int]], rc: list[list[int]]) -> None:
    for k, seg in enumerate(segs):
        L = len(seg)
        r, c = (min(v, L - 1) for v in rc[k])
        if L > 1 and r == c:
            c = L - 1 if r != L - 1 else 0
        rc[k] = [r, c]


def _state_plan(segs, rc, pts, inst, model) -> Plan:
    tours = [make_tour([pts[i] for i in seg], r, c, inst.env_bounds) for seg, (r, c) in zip(segs, rc)]
    lps = tuple(tour_logprob(t, inst.max_flight_time, model) for t in tours)
    return Plan(tuple(tours), inst.fingerprint(), lps, math.fsum(lps))


def simulated_annealing_planner(inst: Instance, model: TravelModel,
                                schedule: tuple[float, float, int] = (1000.0, 0.01, 50_000),
                                seed: int = 0, initial: Plan | None = None) -> Plan:
    """Anneal over (visit order, cuts, release/collect choices) to minimize
    expected mission time.  States breaking the risk bound are rejected;
    temperature follows ``T_max / log(k + 2)`` floored at ``T_min``."""
    t_max, t_min, steps = schedule
    rng = np.random.default_rng(seed)
    start = plan_offline(inst, model, seed) if initial is None else initial
    index = {p: i for i, p in enumerate(inst.uav_points)}
    pts = inst.uav_points
    segs = [[index[p] for p in t.waypoints] for t in start.tours]
    rc = [[0, len(s) - 1] for s in segs]  # waypoint order already puts release first
    floor = math.log1p(-inst.risk_level)

    cur_plan = _state_plan(segs, rc, pts, inst, model)
    cur = expected_mission_time(cur_plan, inst, model)
    best_plan, best = cur_plan, cur
    for k in range(steps):
        T = max(t_max / math.log(k + 2), t_min)
        new_segs = [list(s) for s in segs]
        new_rc = [list(x) for x in rc]
        move = rng.integers(3)
        if move == 0:
            flat = [i for s in new_segs for i in s]
            if len(flat) < 2:
                continue
            a, b = rng.choice(len(flat), 2, replace=False)
            flat[a], flat[b] = flat[b], flat[a]
            it = iter(flat)
            new_segs = [[next(it) for _ in s] for s in new_segs]
        elif move == 1:
            flat = [i for s in new_segs for i in s]
            cuts = list(itertools.accumulate(len(s) for s in new_segs))[:-1]
            op = rng.integers(3)
            if op == 0 and cuts:
                cuts.pop(int(rng.integers(len(cuts))))
            elif op == 1 and len(cuts) < len(flat) - 1:
                free = [c for c in range(1, len(flat)) if c not in cuts]
                cuts.append(int(free[rng.integers(len(free))]))
            elif cuts:
                q = int(rng.integers(len(cuts)))
                cuts[q] += 1 if rng.random() < 0.5 else -1
                if cuts[q] <= 0 or cuts[q] >= len(flat) or len(set(cuts)) < len(cuts):
                    continue
            cuts.sort()
            bounds = [0, *cuts, len(flat)]
            new_segs = [flat[bounds[q]:bounds[q + 1]] for q in range(len(bounds) - 1)]
            new_rc = [[0, len(s) - 1] for s in new_segs]
        else:
            q = int(rng.integers(len(new_segs)))
            new_rc[q][int(rng.integers(2))] = int(rng.integers(len(new_segs[q])))
        _normalize(new_segs, new_rc)
        plan = _state_plan(new_segs, new_rc, pts, inst, model)
        if plan.planned_total_logprob < floor:
            continue
        val = expected_mission_time(plan, inst, model)
        if val < cur or rng.random() < math.exp(-(val - cur) / T):
            segs, rc, cur, cur_plan = new_segs, new_rc, val, plan
            if val < best:
                best, best_plan = val, plan
    return best_plan


def global_enumeration_oracle(inst: Instance, model: TravelModel, max_n: int = 5) -> tuple[Plan | None, float]:
    """Minimum mean mission time over every visit order, partition and
    release/collect choice that satisfies the risk bound (small ``n`` only)."""
    n = inst.n
    if n > max_n:
        raise SizeError(f"global enumeration limited to {max_n} points, got {n}")
    floor = math.log1p(-inst.risk_level)
    pts = inst.uav_points
    best_plan, best = None, math.inf
    for perm in itertools.permutations(range(n)):
        for parts in compositions(n):
            choices = []
            for a, b in parts:
                L = b - a + 1
                choices.append([(0, 0)] if L == 1 else
                               [(r, c) for r in range(L) for c in range(L) if r != c])
            for rcs in itertools.product(*choices):
                tours = [make_tour([pts[perm[i]] for i in range(a, b + 1)], r, c, inst.env_bounds)
                         for (a, b), (r, c) in zip(parts, rcs)]
                lps = [tour_logprob(t, inst.max_flight_time, model) for t in tours]
                if NEG_INF in lps or math.fsum(lps) < floor:
                    continue
                plan = Plan(tuple(tours), inst.fingerprint(), tuple(lps), math.fsum(lps))
                val = expected_mission_time(plan, inst, model)
                if val < best:
                    best, best_plan = val, plan
    return best_plan, best
