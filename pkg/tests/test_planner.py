import math
from functools import lru_cache

import numpy as np
import pytest

from prospect.baselines import exhaustive_partition_oracle
from prospect.instance import Instance, Plan, Point3, check_feasibility, make_tour
from prospect.planner import (DpSolver, Infeasible, PlannerRequest, TableInconsistency,
                              expected_mission_time, fill_layer, plan_offline, solve)
from prospect.risk import NEG_INF, tour_cost_f
from prospect.travel import UniformEdgeModel, WindBoundModel

from conftest import corpus_instance, line_instance

M = UniformEdgeModel()


def recursive_oracle(seq, budget, model):
    """Best joint log success per tour count, by recursion on the last cut."""
    n = len(seq)

    @lru_cache(maxsize=None)
    def seg(a, b):
        vals = [tour_cost_f(seq, a, b, r, c, budget, model).log_prob
                for r in range(a, b + 1) for c in range(a, b + 1) if r != c or a == b]
        return max(vals)

    @lru_cache(maxsize=None)
    def best(j, m):
        if m == 1:
            return seg(0, j - 1)
        out = NEG_INF
        for k in range(m - 1, j):
            left, right = best(k, m - 1), seg(k, j - 1)
            if left > NEG_INF and right > NEG_INF:
                out = max(out, left + right)
        return out

    return [best(n, m) for m in range(1, n + 1)]


def full_tables(req):
    solver = DpSolver(req)
    for m in range(1, solver.n + 1):
        fill_layer(solver, m)
    return solver


def test_single_point_layer():
    inst = Instance((100, 100, 100), ((50, 50, 20),), (50, 50, 0), (50, 50, 0), 600, 0.1)
    solver = full_tables(PlannerRequest.offline(inst, M))
    f = tour_cost_f(list(inst.uav_points), 0, 0, 0, 0, 600, M).log_prob
    assert solver.tables.D[1, 1] == f


@pytest.mark.parametrize("seed", range(6))
def test_four_points_against_recursion(seed):
    inst = corpus_instance(4, 500 + seed)
    req = PlannerRequest.offline(inst, M)
    solver = full_tables(req)
    ref = recursive_oracle(solver.seq, inst.max_flight_time, M)
    for m in range(1, 5):
        got = solver.tables.D[4, m]
        assert (got == ref[m - 1] == NEG_INF) or got == pytest.approx(ref[m - 1], abs=1e-9)
    orc = exhaustive_partition_oracle(solver.order, req)
    for m in range(1, 5):
        assert orc.best_logprob_per_m[m - 1] == pytest.approx(ref[m - 1], abs=1e-9)


def test_layer_order_enforced():
    solver = DpSolver(PlannerRequest.offline(corpus_instance(4, 1), M))
    with pytest.raises(TableInconsistency):
        fill_layer(solver, 2)


def test_separated_exhausted_budget():
    inst = corpus_instance(4, 2)
    req = PlannerRequest(inst.uav_points, inst.n, Point3(10, 10, 50), Point3(10, 10, 0), inst.final,
                         600.0, 0.1, M, initial_flight_time=600.0)
    solver = DpSolver(req)
    fill_layer(solver, 1)
    assert np.all(solver.tables.D[1:, 1] == NEG_INF)
    assert solve(req).plan is None


def test_generous_budget_single_tour():
    inst = corpus_instance(6, 3).to_dict()
    inst["max_flight_time"] = 1e6
    plan = plan_offline(Instance.from_dict(inst), M)
    assert plan.m == 1


def test_too_small_budget_infeasible():
    inst = corpus_instance(3, 4).to_dict()
    inst["max_flight_time"] = 10.0
    with pytest.raises(Infeasible):
        plan_offline(Instance.from_dict(inst), M)


def test_minimality_and_halting():
    for seed in range(5):
        inst = corpus_instance(7, 40 + seed)
        res = solve(PlannerRequest.offline(inst, M))
        target = math.log(0.9)
        assert res.m_min == len(res.layer_values)
        assert all(v < target for v in res.layer_values[:-1])
        assert res.layer_values[-1] >= target


def test_backtrack_concatenates_visit_order():
    inst = corpus_instance(9, 77)
    res = solve(PlannerRequest.offline(inst, M))
    seq = [inst.uav_points[i] for i in res.order.order]
    pos = 0
    for t in res.plan.tours:
        k = len(t.waypoints)
        assert set(t.waypoints) == set(seq[pos:pos + k])
        if k > 1:
            r, c = seq.index(t.release_air), seq.index(t.collect_air)
            if r > c:  # collect before release only when strictly better
                fwd = tour_cost_f(seq, pos, pos + k - 1, c, r, 600.0, M).log_prob
                rev = tour_cost_f(seq, pos, pos + k - 1, r, c, 600.0, M).log_prob
                assert rev > fwd
        pos += k
    assert pos == len(seq)
    assert math.fsum(res.plan.planned_success_logprobs) == pytest.approx(res.plan.planned_total_logprob)
    assert res.plan.planned_total_logprob == pytest.approx(res.layer_values[-1], abs=1e-9)


def test_separated_first_tour_is_partial():
    inst = corpus_instance(6, 8)
    uav = Point3(*inst.uav_points[0][:2], 100.0)
    ugv = Point3(1000.0, 1000.0, 0.0)
    req = PlannerRequest(inst.uav_points, inst.n, uav, ugv, inst.final, 600.0, 0.1, M,
                         initial_flight_time=50.0, bounds=inst.env_bounds)
    plan = solve(req).plan
    first = plan.tours[0]
    assert first.partial and first.release_ground == ugv and first.release_air == uav
    assert first.elapsed == 50.0
    assert sorted(plan.points()) == sorted(inst.uav_points)


@pytest.mark.parametrize("seed", range(4))
def test_plan_offline_feasible(seed):
    inst = corpus_instance(10, seed)
    plan = plan_offline(inst, M)
    assert plan.planned_total_logprob >= math.log(0.9)
    assert check_feasibility(plan, inst, M).ok


def test_one_point_plan():
    plan = plan_offline(corpus_instance(1, 5), M)
    assert plan.m == 1


def test_parallel_fill_matches_serial():
    req = PlannerRequest.offline(corpus_instance(15, 9), M)
    a, b = solve(req, workers=1), solve(req, workers=3)
    assert a.tables.same_as(b.tables)
    assert a.plan == b.plan


def test_covariance_path_matches_fast_path():
    inst = corpus_instance(6, 13)
    zero_cov = UniformEdgeModel(covariance=lambda u, v, w, x: 0.0)
    assert not zero_cov.independent
    a = solve(PlannerRequest.offline(inst, M))
    b = solve(PlannerRequest.offline(inst, zero_cov))
    np.testing.assert_allclose(a.tables.D, b.tables.D, rtol=0, atol=1e-9)
    assert a.m_min == b.m_min


def test_wind_model_small_environment():
    rng = np.random.default_rng(4)
    pts = [(float(x), float(y), 5.0) for x, y in rng.uniform(0, 40, (8, 2))]
    inst = Instance((40, 40, 5), pts, (0, 0, 0), (40, 40, 0), 60.0, 0.1)
    w = WindBoundModel()
    plan = plan_offline(inst, w)
    assert check_feasibility(plan, inst, w).ok


def test_expected_time_single_vertical_tour():
    inst = Instance((100, 100, 200), ((0, 0, 100),), (0, 0, 0), (0, 0, 0), 600, 0.1)
    plan = Plan((make_tour(inst.uav_points, 0, 0),))
    assert expected_mission_time(plan, inst, M) == pytest.approx(100.0, abs=1e-9)
    assert expected_mission_time(Plan(()), inst, M) == 0.0


def test_expected_time_two_tours():
    inst = line_instance([100, 300, 500], final=(1000.0, 0.0, 0.0))
    a, b, c = inst.uav_points
    plan = Plan((make_tour([a, b], 0, 1), make_tour([c], 0, 0)))
    # 40 (drive out) + 120 (tour 1) + max(80 drive, 120 recharge) + 100 (tour 2) + 200 (drive home)
    assert expected_mission_time(plan, inst, M) == pytest.approx(580.0, abs=1e-9)


def test_monotone_in_risk():
    for seed in range(4):
        inst = corpus_instance(10, 60 + seed)
        lo = plan_offline(inst.with_risk(0.01), M).m
        hi = plan_offline(inst.with_risk(0.5), M).m
        assert lo >= hi
