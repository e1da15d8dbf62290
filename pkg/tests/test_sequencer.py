import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from prospect.baselines import SizeError, held_karp_path
from prospect.instance import Point3
from prospect.sequencer import cost_matrix, path_cost, pinned_endpoints, solve_visit_order
from prospect.travel import UniformEdgeModel

from conftest import corpus_instance

M = UniformEdgeModel()


def test_single_point():
    assert solve_visit_order([Point3(5, 5, 100)], Point3(0, 0, 0), Point3(9, 9, 0), M).order == (0,)


def test_collinear_left_to_right():
    pts = [Point3(300, 0, 100), Point3(100, 0, 100), Point3(200, 0, 100)]
    vo = solve_visit_order(pts, Point3(0, 0, 0), Point3(1000, 0, 0), M)
    assert vo.order == (1, 2, 0)
    # agrees with exhaustive enumeration of all 3! orders
    C = cost_matrix(pts, M)
    best = min(itertools.permutations(range(3)), key=lambda o: path_cost(o, C))
    assert vo.total_mean_cost == pytest.approx(path_cost(best, C))


def test_pin_collision_rule():
    # one point is nearest to both start and final
    pts = [Point3(10, 0, 100), Point3(500, 500, 100), Point3(900, 0, 100)]
    first, last = pinned_endpoints(pts, Point3(0, 0, 0), Point3(0, 0, 0), M)
    assert (first, last) == (0, 1)


@pytest.mark.parametrize("seed", range(8))
def test_within_held_karp_bound(seed):
    n = 4 + seed % 7  # 4..10
    inst = corpus_instance(n, 100 + seed)
    vo = solve_visit_order(inst.uav_points, inst.start, inst.final, M, seed=seed)
    hk = held_karp_path(inst.uav_points, inst.start, inst.final, M)
    assert sorted(vo.order) == list(range(n))
    assert vo.order[0] == hk.order[0] and vo.order[-1] == hk.order[-1]
    assert hk.total_mean_cost <= vo.total_mean_cost + 1e-9
    assert vo.total_mean_cost <= 1.5 * hk.total_mean_cost


def test_held_karp_small_cases():
    pts = [Point3(100, 0, 100), Point3(200, 0, 100)]
    assert held_karp_path(pts, Point3(0, 0, 0), Point3(1000, 0, 0), M).order == (0, 1)
    pts = [Point3(300, 0, 100), Point3(100, 0, 100), Point3(200, 0, 100)]
    assert held_karp_path(pts, Point3(0, 0, 0), Point3(1000, 0, 0), M).order == (1, 2, 0)
    with pytest.raises(SizeError):
        held_karp_path([Point3(i, 0, 100) for i in range(13)], Point3(0, 0, 0), Point3(0, 0, 0), M)


@given(st.lists(st.builds(Point3, st.floats(0, 4000), st.floats(0, 4000), st.just(100.0)),
                min_size=1, max_size=9, unique=True), st.integers(0, 5))
def test_order_is_permutation_and_deterministic(pts, seed):
    s, f = Point3(0, 0, 0), Point3(4000, 4000, 0)
    a = solve_visit_order(pts, s, f, M, seed=seed)
    b = solve_visit_order(pts, s, f, M, seed=seed)
    assert a == b
    assert sorted(a.order) == list(range(len(pts)))
    first, last = pinned_endpoints(pts, s, f, M)
    assert a.order[0] == first
    if len(pts) > 1:
        assert a.order[-1] == last
