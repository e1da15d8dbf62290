import math

import pytest

from prospect.baselines import (SizeError, compositions, exhaustive_partition_oracle,
                                global_enumeration_oracle, margin_planner,
                                simulated_annealing_planner)
from prospect.instance import Instance, check_feasibility
from prospect.planner import (Infeasible, PlannerRequest, expected_mission_time, plan_offline,
                              solve)
from prospect.sequencer import solve_visit_order
from prospect.travel import UniformEdgeModel, WindBoundModel, uav_path_moments

from conftest import corpus_instance

M = UniformEdgeModel()


@pytest.mark.parametrize("n", range(1, 8))
def test_composition_count(n):
    parts = list(compositions(n))
    assert len(parts) == 2 ** (n - 1)
    for p in parts:
        assert p[0][0] == 0 and p[-1][1] == n - 1
        assert all(b + 1 == c for (_, b), (c, _) in zip(p, p[1:]))


def _oracle(inst):
    req = PlannerRequest.offline(inst, M)
    order = solve_visit_order(req.points, req.uav_start, req.final, M)
    return req, order, exhaustive_partition_oracle(order, req)


def test_oracle_single_point():
    req, order, res = _oracle(corpus_instance(1, 3))
    assert res.m_min == 1 and len(res.best_logprob_per_m) == 1
    assert res.best_plan.m == 1


def test_oracle_infeasible_budget():
    inst = Instance.from_dict({**corpus_instance(4, 3).to_dict(), "max_flight_time": 5.0})
    _, _, res = _oracle(inst)
    # the Gaussian tail stays finite, but no partition meets the bound
    assert all(v < math.log(0.9) for v in res.best_logprob_per_m)
    assert res.m_min is None and res.best_plan is None


def test_oracle_size_limit():
    inst = corpus_instance(9, 3)
    req = PlannerRequest.offline(inst, M)
    with pytest.raises(SizeError):
        exhaustive_partition_oracle(solve_visit_order(req.points, req.uav_start, req.final, M), req)


@pytest.mark.parametrize("seed", range(4))
def test_oracle_agrees_with_dp(seed):
    inst = corpus_instance(6, 70 + seed)
    req, order, res = _oracle(inst)
    dp = solve(req, order=order)
    assert dp.m_min == res.m_min
    assert dp.plan.planned_total_logprob == pytest.approx(res.best_logprob_per_m[res.m_min - 1], abs=1e-9)


def test_margin_neutral_at_half():
    inst = corpus_instance(12, 5).with_risk(0.5)
    plan = margin_planner(inst, M)
    # at p_r = 0.5 both scaled budgets equal the raw budget
    for t in plan.tours:
        assert uav_path_moments(M, t.uav_path()).mean <= inst.max_flight_time
        assert M.ugv_edge(t.release_ground, t.collect_ground).mean <= inst.max_flight_time
    assert sorted(plan.points()) == sorted(inst.uav_points)
    assert math.fsum(plan.planned_success_logprobs) == pytest.approx(plan.planned_total_logprob)


def test_margin_stricter_risk_needs_more_tours():
    inst = corpus_instance(20, 6)
    loose = margin_planner(inst.with_risk(0.5), M)
    tight = margin_planner(inst.with_risk(0.01), M)
    assert tight.m >= loose.m


def test_margin_requires_uniform_model():
    with pytest.raises(ValueError):
        margin_planner(corpus_instance(3, 1), WindBoundModel())


def test_margin_unreachable_point():
    inst = Instance.from_dict({**corpus_instance(3, 1).to_dict(), "max_flight_time": 5.0})
    with pytest.raises(Infeasible):
        margin_planner(inst, M)


@pytest.fixture(scope="module")
def sa_case():
    inst = corpus_instance(10, 12)
    return inst, plan_offline(inst, M)


def test_sa_zero_steps_returns_start(sa_case):
    inst, plan = sa_case
    out = simulated_annealing_planner(inst, M, schedule=(1000, 0.01, 0))
    assert out.tours == plan.tours


def test_sa_feasible_and_no_worse(sa_case):
    inst, plan = sa_case
    out = simulated_annealing_planner(inst, M, schedule=(1000, 0.01, 2000), seed=1)
    assert check_feasibility(out, inst, M).ok
    assert expected_mission_time(out, inst, M) <= expected_mission_time(plan, inst, M) + 1e-9
    again = simulated_annealing_planner(inst, M, schedule=(1000, 0.01, 2000), seed=1)
    assert again == out


@pytest.mark.parametrize("seed", range(3))
def test_global_enumeration_lower_bounds_dp(seed):
    inst = corpus_instance(4, 90 + seed)
    best, value = global_enumeration_oracle(inst, M)
    dp = plan_offline(inst, M)
    assert best is not None and check_feasibility(best, inst, M).ok
    assert value <= expected_mission_time(dp, inst, M) + 1e-9
    assert value == pytest.approx(expected_mission_time(best, inst, M))


def test_global_enumeration_limits():
    with pytest.raises(SizeError):
        global_enumeration_oracle(corpus_instance(6, 1), M)
    inst = Instance.from_dict({**corpus_instance(2, 1).to_dict(), "max_flight_time": 5.0})
    assert global_enumeration_oracle(inst, M) == (None, math.inf)
