"""Partition of the visit order into tours by dynamic programming.

Tables are indexed by prefix length ``j`` (the first ``j`` points of the
visit order) and tour count ``m``.  Stored indices are 0-based positions in
the visit order: ``K[j, m]`` is where the last tour starts, ``R``/``C`` its
release and collect positions; ``-1`` marks "not applicable".
"""
from __future__ import annotations

import math
import time
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .instance import Instance, Plan, Point3, Tour, make_tour, project_to_ground
from .risk import NEG_INF, log_survival, tour_cost_f, tour_cost_f_prime, tour_logprob
from .sequencer import VisitOrder, solve_visit_order
from .travel import TravelModel, uav_path_moments


class Infeasible(Exception):
    """No partition of the visit order meets the risk bound."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class TableInconsistency(RuntimeError):
    pass


@dataclass(frozen=True)
class PlannerRequest:
    points: tuple[Point3, ...]
    n_full: int
    uav_start: Point3
    ugv_start: Point3
    final: Point3
    budget: float
    risk: float
    model: TravelModel
    initial_flight_time: float = 0.0
    seed: int = 0
    bounds: tuple[float, float, float] | None = None
    instance_ref: str = ""

    def __post_init__(self):
        if not 0 < self.risk < 1:
            raise ValueError(f"risk must lie in (0, 1), got {self.risk}")
        if self.initial_flight_time < 0:
            raise ValueError("initial flight time must be non-negative")

    @property
    def separated(self) -> bool:
        return self.uav_start != self.ugv_start

    @classmethod
    def offline(cls, inst: Instance, model: TravelModel, seed: int = 0) -> "PlannerRequest":
        return cls(points=inst.uav_points, n_full=inst.n, uav_start=inst.start,
                   ugv_start=inst.start, final=inst.final, budget=inst.max_flight_time,
                   risk=inst.risk_level, model=model, seed=seed, bounds=inst.env_bounds,
                   instance_ref=inst.fingerprint())


@dataclass
class DpTables:
    D: np.ndarray
    K: np.ndarray
    R: np.ndarray
    C: np.ndarray
    filled: int = 0

    @classmethod
    def empty(cls, n: int) -> "DpTables":
        shape = (n + 1, n + 1)
        return cls(np.full(shape, NEG_INF), np.full(shape, -1, dtype=np.int64),
                   np.full(shape, -1, dtype=np.int64), np.full(shape, -1, dtype=np.int64))

    def same_as(self, other: "DpTables") -> bool:
        return (self.filled == other.filled
                and all(np.array_equal(a, b) for a, b in
                        ((self.D, other.D), (self.K, other.K), (self.R, other.R), (self.C, other.C))))


class SegmentEvaluator:
    """Constant-time tour log-probabilities over one visit order.

    Edge moments are tabulated once; a segment's UAV path moments are
    assembled from prefix sums over runs of consecutive points.  Models with
    cross-edge covariance fall back to explicit path evaluation.
    """

    def __init__(self, seq: Sequence[Point3], req: PlannerRequest):
        self.seq = list(seq)
        self.budget = req.budget
        self.model = req.model
        self.fast = req.model.independent
        self.uav_start, self.ugv_start = req.uav_start, req.ugv_start
        self.tau0 = req.initial_flight_time
        S, m = self.seq, req.model
        n = len(S)
        ground = [project_to_ground(p) for p in S]
        self.ground = ground
        edges = [[m.uav_edge(u, v) for v in S] for u in S]
        self.Mh = [[e.mean for e in row] for row in edges]
        self.Vh = [[e.variance for e in row] for row in edges]
        self.PM = [0.0] * n
        self.PV = [0.0] * n
        for i in range(1, n):
            self.PM[i] = self.PM[i - 1] + self.Mh[i - 1][i]
            self.PV[i] = self.PV[i - 1] + self.Vh[i - 1][i]
        up = [m.uav_edge(g, p) for g, p in zip(ground, S)]
        down = [m.uav_edge(p, g) for p, g in zip(S, ground)]
        self.upM, self.upV = [e.mean for e in up], [e.variance for e in up]
        self.dnM, self.dnV = [e.mean for e in down], [e.variance for e in down]
        self.LG = [[log_survival(self.budget, *m.ugv_edge(gr, gc)) for gc in ground] for gr in ground]
        if req.separated:
            rem = self.budget - self.tau0
            self.rem_budget = rem
            u0 = [m.uav_edge(req.uav_start, p) for p in S]
            self.U0M, self.U0V = [e.mean for e in u0], [e.variance for e in u0]
            self.LW = [log_survival(rem, *m.ugv_edge(req.ugv_start, gc)) if rem > 0 else NEG_INF
                       for gc in ground]

    def f(self, a: int, b: int, r: int, c: int) -> float:
        if not self.fast:
            return tour_cost_f(self.seq, a, b, r, c, self.budget, self.model).log_prob
        lg = self.LG[r][c]
        if lg == NEG_INF:
            return NEG_INF
        if r == c:
            return log_survival(self.budget, self.upM[r] + self.dnM[r], self.upV[r] + self.dnV[r]) + lg
        Mh, Vh, PM, PV = self.Mh, self.Vh, self.PM, self.PV
        lo, hi = (r, c) if r < c else (c, r)
        mean = self.upM[r] + self.dnM[c]
        var = self.upV[r] + self.dnV[c]
        prev = r
        for s, e in ((a, lo - 1), (lo + 1, hi - 1), (hi + 1, b)):
            if s <= e:
                mean += Mh[prev][s] + PM[e] - PM[s]
                var += Vh[prev][s] + PV[e] - PV[s]
                prev = e
        mean += Mh[prev][c]
        var += Vh[prev][c]
        la = log_survival(self.budget, mean, var)
        return NEG_INF if la == NEG_INF else la + lg

    def f_prime(self, b: int, c: int) -> float:
        if not self.fast:
            return tour_cost_f_prime(self.seq, b, c, self.uav_start, self.ugv_start,
                                     self.tau0, self.budget, self.model).log_prob
        lw = self.LW[c]
        if lw == NEG_INF:
            return NEG_INF
        Mh, Vh, PM, PV = self.Mh, self.Vh, self.PM, self.PV
        mean, var = self.dnM[c], self.dnV[c]
        prev = -1
        for s, e in ((0, c - 1), (c + 1, b)):
            if s <= e:
                if prev < 0:
                    mean += self.U0M[s]
                    var += self.U0V[s]
                else:
                    mean += Mh[prev][s]
                    var += Vh[prev][s]
                mean += PM[e] - PM[s]
                var += PV[e] - PV[s]
                prev = e
        if prev < 0:
            mean += self.U0M[c]
            var += self.U0V[c]
        else:
            mean += Mh[prev][c]
            var += Vh[prev][c]
        la = log_survival(self.rem_budget, mean, var)
        return NEG_INF if la == NEG_INF else la + lw

    def best_segment(self, a: int, b: int) -> tuple[float, int, int]:
        """Best (log_prob, release, collect) for segment ``a..b``; ties go to
        the smallest release, then the smallest collect.

        Both orientations are searched even for symmetric edge models: the
        interior points keep their sequence order, so swapping release and
        collect does not mirror the path once a segment has four points.
        """
        if a == b:
            return self.f(a, a, a, a), a, a
        best, br, bc = NEG_INF, -1, -1
        f = self.f
        for r in range(a, b + 1):
            for c in range(a, b + 1):
                if c == r:
                    continue
                v = f(a, b, r, c)
                if v > best:
                    best, br, bc = v, r, c
        return best, br, bc

    def best_first_partial(self, b: int) -> tuple[float, int]:
        best, bc = NEG_INF, -1
        for c in range(b + 1):
            v = self.f_prime(b, c)
            if v > best:
                best, bc = v, c
        return best, bc

    def segment_row(self, a: int) -> list[tuple[float, int, int]]:
        return [self.best_segment(a, b) for b in range(a, len(self.seq))]


def _row_task(args):
    ev, a = args
    return ev.segment_row(a)


class DpSolver:
    """Holds the visit order, segment table and DP tables for one request."""

    def __init__(self, req: PlannerRequest, order: VisitOrder | None = None, workers: int = 1):
        self.req = req
        if order is None:
            order = solve_visit_order(req.points, req.uav_start, req.final, req.model, seed=req.seed)
        self.order = order
        self.seq = [req.points[i] for i in order.order]
        self.n = len(self.seq)
        self.workers = workers
        self.ev = SegmentEvaluator(self.seq, req)
        self._segments = None
        self._first = None
        self.tables = DpTables.empty(self.n)

    @property
    def segments(self):
        """``segments[a][b - a]`` = best (log_prob, r, c) for segment a..b."""
        if self._segments is None:
            starts = range(1 if self.req.separated else 0, self.n)
            if self.workers > 1:
                with ProcessPoolExecutor(self.workers) as pool:
                    rows = list(pool.map(_row_task, [(self.ev, a) for a in starts]))
            else:
                rows = [self.ev.segment_row(a) for a in starts]
            if self.req.separated:
                rows = [[]] + rows
            self._segments = rows
        return self._segments

    @property
    def first_partial(self):
        if self._first is None:
            self._first = [self.ev.best_first_partial(b) for b in range(self.n)]
        return self._first

    def cell(self, j: int, m: int) -> tuple[float, int, int, int]:
        """Value and argmax (k, r, c) of D[j, m]."""
        if m == 1:
            if self.req.separated:
                v, c = self.first_partial[j - 1]
                return (v, -1, -1, c) if v > NEG_INF else (NEG_INF, -1, -1, -1)
            v, r, c = self.segments[0][j - 1]
            return (v, -1, r, c) if v > NEG_INF else (NEG_INF, -1, -1, -1)
        D = self.tables.D
        best, arg = NEG_INF, (-1, -1, -1)
        segs = self.segments
        for k in range(m - 1, j):
            prev = D[k, m - 1]
            if prev == NEG_INF:
                continue
            v, r, c = segs[k][j - 1 - k]
            if v == NEG_INF:
                continue
            tot = prev + v
            if tot > best:
                best, arg = tot, (k, r, c)
        return (best, *arg)


def fill_layer(solver: DpSolver, m: int, executor: Executor | None = None) -> DpTables:
    """Fill column ``m`` of the DP tables (cells ``j = m..n``).  Cells of one
    layer are independent given layer ``m - 1``."""
    t = solver.tables
    if m > 1 and t.filled < m - 1:
        raise TableInconsistency(f"layer {m - 1} must be filled before layer {m}")
    js = range(m, solver.n + 1)
    if m > 1:
        solver.segments  # noqa: B018  build once, outside any worker threads
    elif solver.req.separated:
        solver.first_partial  # noqa: B018
    else:
        solver.segments  # noqa: B018
    cells = list(executor.map(lambda j: solver.cell(j, m), js)) if executor else [solver.cell(j, m) for j in js]
    for j, (v, k, r, c) in zip(js, cells):
        t.D[j, m], t.K[j, m], t.R[j, m], t.C[j, m] = v, k, r, c
    t.filled = m
    return t


def sweep_min_tours(solver: DpSolver, executor: Executor | None = None) -> int | None:
    """Fill layers until ``D[n, m] >= log(1 - risk)``; ``None`` if no m works."""
    target = math.log1p(-solver.req.risk)
    for m in range(1, solver.n + 1):
        fill_layer(solver, m, executor)
        if solver.tables.D[solver.n, m] >= target:
            return m
    return None


def backtrack_assemble(solver: DpSolver, m_min: int) -> Plan:
    req, t, S = solver.req, solver.tables, solver.seq
    tours = []
    j, m = solver.n, m_min
    while m > 1:
        k, r, c = int(t.K[j, m]), int(t.R[j, m]), int(t.C[j, m])
        if min(k, r, c) < 0 or t.D[j, m] == NEG_INF:
            raise TableInconsistency(f"dangling entry at D[{j}, {m}]")
        tours.append(make_tour(S[k:j], r - k, c - k, req.bounds))
        j, m = k, m - 1
    r, c = int(t.R[j, 1]), int(t.C[j, 1])
    if c < 0 or t.D[j, 1] == NEG_INF:
        raise TableInconsistency(f"dangling entry at D[{j}, 1]")
    if req.separated:
        cp = S[c]
        wps = (*(S[i] for i in range(j) if i != c), cp)
        tours.append(Tour(req.uav_start, cp, req.ugv_start, project_to_ground(cp, req.bounds),
                          wps, partial=True, elapsed=req.initial_flight_time))
    else:
        if r < 0:
            raise TableInconsistency(f"missing release at D[{j}, 1]")
        tours.append(make_tour(S[:j], r, c, req.bounds))
    tours.reverse()
    lps = tuple(tour_logprob(tr, req.budget, req.model) for tr in tours)
    return Plan(tuple(tours), req.instance_ref, lps, math.fsum(lps))


@dataclass
class PlannerResult:
    plan: Plan | None
    m_min: int | None
    layer_values: list[float]
    order: VisitOrder
    tables: DpTables
    wall_time: float = 0.0

    def diagnostics(self, timing: bool = True) -> dict:
        return {
            "feasible": self.plan is not None,
            "m_min": self.m_min,
            "layer_logprobs": self.layer_values,
            "visit_order": list(self.order.order),
            "visit_order_cost": self.order.total_mean_cost,
            "wall_time": self.wall_time if timing else 0.0,
        }


def solve(req: PlannerRequest, workers: int = 1, order: VisitOrder | None = None) -> PlannerResult:
    t0 = time.perf_counter()
    solver = DpSolver(req, order=order, workers=workers)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            m_min = sweep_min_tours(solver, ex)
    else:
        m_min = sweep_min_tours(solver)
    plan = backtrack_assemble(solver, m_min) if m_min is not None else None
    layers = [float(solver.tables.D[solver.n, m]) for m in range(1, solver.tables.filled + 1)]
    return PlannerResult(plan, m_min, layers, solver.order, solver.tables, time.perf_counter() - t0)


def plan_offline(inst: Instance, model: TravelModel, seed: int = 0, workers: int = 1) -> Plan:
    res = solve(PlannerRequest.offline(inst, model, seed), workers=workers)
    if res.plan is None:
        raise Infeasible("no partition meets the risk bound; the flight budget cannot "
                         "cover some point even as its own tour", res)
    return res.plan


def expected_mission_time(plan: Plan, inst: Instance, model: TravelModel,
                          start: Point3 | None = None) -> float:
    """Mission time with every random duration replaced by its mean."""
    start = inst.start if start is None else start
    if not plan.tours:
        return model.ugv_edge(start, inst.final).mean
    total = model.ugv_edge(start, plan.tours[0].release_ground).mean
    for i, t in enumerate(plan.tours):
        fly = max(uav_path_moments(model, t.uav_path()).mean,
                  model.ugv_edge(t.release_ground, t.collect_ground).mean)
        total += fly
        if i + 1 < plan.m:
            move = model.ugv_edge(t.collect_ground, plan.tours[i + 1].release_ground).mean
            total += max(move, inst.recharge_ratio * fly)
    total += model.ugv_edge(plan.tours[-1].collect_ground, inst.final).mean
    return total
