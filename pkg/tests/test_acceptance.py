"""End-to-end acceptance runs.  Each test prints one PASS/FAIL line and the
collected lines are repeated in the terminal summary."""
import math
import time

import numpy as np
import pytest

from prospect.baselines import exhaustive_partition_oracle, margin_planner
from prospect.cli import generate_instance, main
from prospect.instance import Plan, check_feasibility, make_tour
from prospect.planner import (DpSolver, PlannerRequest, expected_mission_time, fill_layer,
                              plan_offline, solve)
from prospect.replanner import ReplanConfig
from prospect.risk import NEG_INF, gaussian_cdf
from prospect.simulator import (NoiseModel, execute_closed_loop, execute_open_loop, monte_carlo,
                                trial_seed)
from prospect.travel import UniformEdgeModel

from conftest import line_instance, record
from test_risk import PHI_REFERENCE, conservative_case, random_small_tours
from test_simulator import injected

M = UniformEdgeModel()
NOISE = NoiseModel.from_model(M)
TRIALS = 1000


def _instances(n, count, seed, risk):
    return [generate_instance(n, seed, k, risk=risk) for k in range(count)]


def _p_hat(plan, inst, seed, k):
    return monte_carlo(plan, inst, NOISE, TRIALS, trial_seed(seed, k)).p_hat


def test_criterion_1_dp_matches_oracle():
    t0 = time.perf_counter()
    worst, mismatches = 0.0, []
    for k in range(50):
        n = 3 + k % 5
        inst = generate_instance(n, 1001, k)
        req = PlannerRequest.offline(inst, M)
        solver = DpSolver(req)
        for m in range(1, n + 1):
            fill_layer(solver, m)
        oracle = exhaustive_partition_oracle(solver.order, req)
        for m in range(1, n + 1):
            got, ref = solver.tables.D[n, m], oracle.best_logprob_per_m[m - 1]
            if got == ref == NEG_INF:
                continue
            err = abs(got - ref)
            worst = max(worst, err)
            if not err <= 1e-9:
                mismatches.append((k, m))
        if solve(req).m_min != oracle.m_min:
            mismatches.append((k, "m_min"))
    wall = time.perf_counter() - t0
    ok = not mismatches and wall < 60
    record(1, ok, f"50 instances, max |D - oracle| = {worst:.2e}, {wall:.1f} s")
    assert ok, mismatches


@pytest.fixture(scope="module")
def risk_runs():
    """Offline plans and Monte-Carlo failure rates for n in {10, 25}, p_r in {0.1, 0.5}."""
    out = {}
    for n in (10, 25):
        for p_r in (0.1, 0.5):
            rows = []
            for k, inst in enumerate(_instances(n, 10, 2000 + n, p_r)):
                plan = plan_offline(inst, M)
                rows.append((inst, plan, _p_hat(plan, inst, 7000 + n, k)))
            out[n, p_r] = rows
    return out


def test_criterion_2_risk_bound(risk_runs):
    ok, parts = True, []
    for (n, p_r), rows in risk_runs.items():
        p = [r[2] for r in rows]
        slack = p_r + 2 * math.sqrt(p_r * (1 - p_r) / TRIALS)
        cell = np.mean(p) <= p_r and max(p) <= slack
        ok &= bool(cell)
        parts.append(f"n={n} p_r={p_r}: mean {np.mean(p):.4f} max {max(p):.3f}")
    record(2, ok, "; ".join(parts))
    assert ok


def test_criterion_3_feasibility(risk_runs):
    plans = [(inst, plan) for rows in risk_runs.values() for inst, plan, _ in rows]
    for k in range(50):
        inst = generate_instance(3 + k % 5, 1001, k)
        plans.append((inst, plan_offline(inst, M)))
    for inst in _instances(20, 10, 3000, 0.1):
        plans.append((inst, plan_offline(inst, M)))
    bad = [i for i, (inst, plan) in enumerate(plans) if not check_feasibility(plan, inst, M).ok]
    ok = not bad
    record(3, ok, f"{len(plans) - len(bad)}/{len(plans)} plans pass all four checks")
    assert ok, bad


def test_criterion_4_online_risk():
    bound = math.log(0.9)
    splices, violations, failures, trials = 0, 0, 0, 0

    def check(active):
        nonlocal splices, violations
        splices += 1
        if active.planned_total_logprob < bound:
            violations += 1

    config = ReplanConfig(horizon=2)
    for k, inst in enumerate(_instances(20, 10, 3000, 0.1)):
        plan = plan_offline(inst, M)
        for t in range(25):
            tr = execute_closed_loop(plan, inst, NOISE, M, config, trial_seed(8000 + k, t), check=check)
            failures += tr.failed
            trials += 1
    p_hat = failures / trials
    ok = violations == 0 and splices > 0 and p_hat <= 0.1
    record(4, ok, f"{splices} splices, {violations} below log 0.9, closed-loop p_hat {p_hat:.3f}")
    assert ok


def test_criterion_5_scaling():
    sizes, times = [10, 20, 30, 40], []
    for n in sizes:
        walls = []
        for inst in _instances(n, 3, 4000, 0.1):
            req = PlannerRequest.offline(inst, M)
            t0 = time.perf_counter()
            solve(req, workers=1)
            walls.append(time.perf_counter() - t0)
        times.append(float(np.mean(walls)))
    exponent = float(np.polyfit(np.log(sizes), np.log(times), 1)[0])
    req = PlannerRequest.offline(generate_instance(25, 4000, 7), M)
    same = solve(req, workers=1).tables.same_as(solve(req, workers=2).tables)
    ok = exponent <= 5 and same
    record(5, ok, f"fitted exponent {exponent:.2f}, parallel tables identical: {same}")
    assert ok


def test_criterion_6_margin_divergence(risk_runs):
    rows = risk_runs[25, 0.5]
    pro = float(np.mean([r[2] for r in rows]))
    mar = []
    for k, (inst, _, _) in enumerate(rows):
        plan = margin_planner(inst, M)
        mar.append(_p_hat(plan, inst, 7025, k))
    mar = float(np.mean(mar))
    ok = mar > pro and pro <= 0.5 and mar > 0.25
    record(6, ok, f"n=25 p_r=0.5: margin {mar:.3f} vs prospect {pro:.3f}")
    assert ok


def test_criterion_7_gaussian_surrogate():
    phi_err = max(abs(gaussian_cdf(x) - ref) for x, ref in PHI_REFERENCE)
    rng = np.random.default_rng(77)
    bad = []
    for i, (tour, z) in enumerate(random_small_tours(20, 78)):
        gauss, mc = conservative_case(M, tour, z, rng)
        if gauss > mc:
            bad.append((i, gauss, mc))
    ok = phi_err <= 1e-12 and not bad
    record(7, ok, f"max Phi error {phi_err:.1e} over 20 values, {20 - len(bad)}/20 tours conservative")
    assert ok, bad


def test_criterion_8_mission_time_fixture():
    inst = line_instance([100, 300, 500], final=(1000.0, 0.0, 0.0))
    a, b, c = inst.uav_points
    plan = Plan((make_tour([a, b], 0, 1), make_tour([c], 0, 0)))
    expected = expected_mission_time(plan, inst, M)
    sampled = execute_open_loop(plan, inst, NOISE, 0, edge_time=injected()).realized_mission_time
    hover = execute_open_loop(plan, inst, NOISE, 0, edge_time=injected(0.7)).realized_mission_time
    ok = abs(expected - 580.0) <= 1e-9 and abs(sampled - 618.0) <= 1e-9 and abs(hover - 800.0) <= 1e-9
    record(8, ok, f"expected {expected!r}, injected {sampled!r}, hovering {hover!r}")
    assert ok


def test_criterion_9_determinism(tmp_path, monkeypatch):
    def run(tag, parallel):
        d = tmp_path / tag
        d.mkdir()
        # relative paths, since the diagnostics record the instance path
        monkeypatch.chdir(d)
        main(["gen", "--n", "12", "--count", "3", "--seed", "9", "--out", "inst"])
        files = sorted(f"inst/{p.name}" for p in (d / "inst").glob("*.json"))
        for f in files:
            main(["plan", f, "--out", f"{f[5:-5]}.plan.json", "--no-timing"])
        main(["simulate", *files, "--seed", "9", "--trials", "200", "--parallel", str(parallel),
              "--no-timing", "--csv", "r.csv", "--json", "r.json"])
        return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*.json")) + [d / "r.csv"]}

    a, b = run("a", 1), run("b", 2)
    ok = a == b and len(a) == 11
    record(9, ok, f"{len(a)} files byte-identical across parallelism 1 and 2")
    assert ok
