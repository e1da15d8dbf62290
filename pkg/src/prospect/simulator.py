"""Sampled plan execution and Monte-Carlo estimation of the failure rate."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .instance import Instance, Plan, Point3, project_to_ground
from .replanner import MissionState, ReplanConfig, replan_between_tours, replan_mid_tour
from .travel import SQRT3, TravelModel, UniformEdgeModel, WindBoundModel
from .wind import WindField

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, trial: int) -> int:
    """Seed of trial ``trial``: ``splitmix64(splitmix64(master) ^ trial)``."""
    return splitmix64(splitmix64(master_seed & MASK64) ^ trial)


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "uniform_edge"  # uniform_edge | wind_field
    mu_uav: float = 0.1
    sigma_uav: float = 0.01
    mu_ugv: float = 0.4
    sigma_ugv: float = 0.04
    vertical_scale: float = 5.0
    uav_speed: tuple = (1.5, 2.0)
    ugv_speed: tuple = (0.15, 0.25)
    wind_bounds: tuple = (1.0, 1.0, 0.3)
    cells: int = 4
    octaves: int = 3

    @classmethod
    def from_model(cls, model: TravelModel) -> "NoiseModel":
        if isinstance(model, UniformEdgeModel):
            return cls("uniform_edge", model.mu_uav, model.sigma_uav, model.mu_ugv,
                       model.sigma_ugv, model.vertical_scale)
        if isinstance(model, WindBoundModel):
            return cls("wind_field", uav_speed=model.uav_speed, ugv_speed=model.ugv_speed,
                       wind_bounds=model.wind_bounds)
        raise ValueError(f"no matching noise model for {type(model).__name__}")

    def field(self, bounds, rng) -> WindField | None:
        if self.kind != "wind_field":
            return None
        return WindField(bounds, self.wind_bounds, rng, self.cells, self.octaves)


def sample_edge_time(noise: NoiseModel, agent: str, u: Point3, v: Point3,
                     rng: np.random.Generator, wind: WindField | None = None) -> float:
    if u == v:
        return 0.0
    if noise.kind == "uniform_edge":
        if agent == "uav":
            mu, sd = noise.mu_uav, noise.sigma_uav
            lh = math.hypot(v[0] - u[0], v[1] - u[1])
            lv = abs(v[2] - u[2]) * noise.vertical_scale
            t = 0.0
            for l in (lh, lv):
                if l > 0:
                    t += l * rng.uniform(mu - SQRT3 * sd, mu + SQRT3 * sd)
            return t
        mu, sd = noise.mu_ugv, noise.sigma_ugv
        return math.dist(u, v) * rng.uniform(mu - SQRT3 * sd, mu + SQRT3 * sd)
    if noise.kind == "wind_field":
        L = math.dist(u, v)
        if agent == "ugv":
            return L / rng.uniform(*noise.ugv_speed)
        v_cmd = rng.uniform(*noise.uav_speed)
        if wind is None:
            return L / v_cmd
        d = np.subtract(v, u) / L
        mid = 0.5 * (np.asarray(u) + np.asarray(v))
        return L / (v_cmd + float(d @ wind(mid)))
    raise ValueError(f"unknown noise kind {noise.kind!r}")


EdgeTimeFn = Callable[[str, Point3, Point3], float]


def _sampler(noise: NoiseModel, inst: Instance, trial_seed_: int,
             edge_time: Callable | None) -> EdgeTimeFn:
    rng = np.random.default_rng(trial_seed_)
    if edge_time is not None:
        return lambda agent, u, v: 0.0 if u == v else float(edge_time(agent, u, v, rng))
    wind = noise.field(inst.env_bounds, rng)
    return lambda agent, u, v: sample_edge_time(noise, agent, u, v, rng, wind)


@dataclass
class MissionTrace:
    realized_tour_flight_times: list[float]
    realized_mission_time: float
    failed: bool
    failed_tour: int | None
    replan_events: int = 0
    replan_fallbacks: int = 0
    uav_tour_times: list[float] = field(default_factory=list)
    ugv_tour_times: list[float] = field(default_factory=list)
    transfer_times: list[float] = field(default_factory=list)
    samples: list[tuple] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    final_plan: Plan | None = None

    @property
    def tours(self) -> int:
        return len(self.realized_tour_flight_times)


def mission_time_from_terms(flights, transfers, gamma: float) -> float:
    """Mission time from per-tour flight durations and UGV transfer legs
    (``transfers[0]`` start leg, ``transfers[-1]`` final leg)."""
    if not flights:
        return transfers[0] if transfers else 0.0
    total = transfers[0] + transfers[-1] + sum(flights)
    for i in range(len(flights) - 1):
        total += max(transfers[i + 1], gamma * flights[i])
    return total


class _Run:
    """Accumulates one execution's samples and time terms."""

    def __init__(self, inst: Instance, sample: EdgeTimeFn):
        self.inst, self.sample = inst, sample
        self.samples, self.uav, self.ugv, self.flights, self.transfers = [], [], [], [], []
        self.failed_tour = None

    def draw(self, phase, idx, agent, u, v):
        t = self.sample(agent, u, v)
        self.samples.append((phase, idx, agent, t))
        return t

    def close_tour(self, uav_t, ugv_t):
        fly = max(uav_t, ugv_t)
        self.uav.append(uav_t)
        self.ugv.append(ugv_t)
        self.flights.append(fly)
        if fly > self.inst.max_flight_time and self.failed_tour is None:
            self.failed_tour = len(self.flights) - 1

    def trace(self, **kw) -> MissionTrace:
        total = mission_time_from_terms(self.flights, self.transfers, self.inst.recharge_ratio)
        return MissionTrace(self.flights, total, self.failed_tour is not None, self.failed_tour,
                            uav_tour_times=self.uav, ugv_tour_times=self.ugv,
                            transfer_times=self.transfers, samples=self.samples, **kw)


def execute_open_loop(plan: Plan, inst: Instance, noise: NoiseModel, trial_seed: int,
                      edge_time: Callable | None = None) -> MissionTrace:
    """Fly ``plan`` once.  ``edge_time(agent, u, v, rng)`` overrides sampling."""
    run = _Run(inst, _sampler(noise, inst, trial_seed, edge_time))
    pos = inst.start
    for i, t in enumerate(plan.tours):
        run.transfers.append(run.draw("transfer", i, "ugv", pos, t.release_ground))
        ugv_t = run.draw("tour", i, "ugv", t.release_ground, t.collect_ground)
        path = t.uav_path()
        uav_t = sum(run.draw("tour", i, "uav", a, b) for a, b in zip(path[:-1], path[1:]))
        run.close_tour(uav_t, ugv_t)
        pos = t.collect_ground
    run.transfers.append(run.draw("transfer", plan.m, "ugv", pos, inst.final))
    return run.trace(final_plan=plan)


def _interp(a: Point3, b: Point3, frac: float) -> Point3:
    frac = min(max(frac, 0.0), 1.0)
    if frac >= 1.0:
        return b
    return Point3(a.x + (b.x - a.x) * frac, a.y + (b.y - a.y) * frac, 0.0)


def execute_closed_loop(plan: Plan, inst: Instance, noise: NoiseModel, model: TravelModel,
                        config: ReplanConfig, trial_seed: int,
                        edge_time: Callable | None = None,
                        check: Callable[[Plan], None] | None = None) -> MissionTrace:
    """Fly ``plan`` point by point, re-planning after each aerial point and
    between tours.  ``check`` is called with the active plan after every
    successful splice."""
    run = _Run(inst, _sampler(noise, inst, trial_seed, edge_time))
    active = plan
    pos = inst.start
    clock = 0.0
    events = []
    attempts = fallbacks = 0
    i = 0

    def attempt(fn, state, now):
        nonlocal attempts, fallbacks, active
        attempts += 1
        out = fn(state, config.horizon, model, inst, config.seed)
        events.append(out.event(now))
        if out.fallback:
            fallbacks += 1
            return False
        active = out.plan
        if check is not None:
            check(active)
        return True

    while active.m:
        if i > 0 and config.between_tours:
            attempt(replan_between_tours, MissionState(active, 0, 0, pos, pos), clock)
        tour = active.tours[0]
        leg = run.draw("transfer", i, "ugv", pos, tour.release_ground)
        run.transfers.append(leg)
        clock += leg if i == 0 else max(leg, inst.recharge_ratio * run.flights[-1])

        # current UGV leg (origin, target, start time, duration); earlier legs
        # of this tour are kept as the time spent on them
        origin, target = tour.release_ground, tour.collect_ground
        start, dur = 0.0, run.sample("ugv", origin, target)
        ugv_parts = []
        uav_pos = tour.release_ground
        t_uav = 0.0
        queue = list(tour.waypoints)
        collect = tour.collect_air
        while queue:
            w = queue.pop(0)
            t_uav += run.draw("tour", i, "uav", uav_pos, w)
            uav_pos = w
            if not queue or not config.mid_tour:
                continue
            ugv_pos = _interp(origin, target, (t_uav - start) / dur if dur > 0 else 1.0)
            nxt = len(active.tours[0].waypoints) - len(queue)
            state = MissionState(active, 0, nxt, uav_pos, ugv_pos, t_uav, "mid_tour")
            if attempt(replan_mid_tour, state, clock + t_uav):
                first = active.tours[0]
                queue = list(first.waypoints)
                collect = first.collect_air
                if first.collect_ground != target:
                    ugv_parts.append(t_uav - start)
                    origin, target, start = ugv_pos, first.collect_ground, t_uav
                    dur = run.sample("ugv", origin, target)
        ugv_parts.append(dur)
        for d in ugv_parts:
            run.samples.append(("tour", i, "ugv", d))
        t_uav += run.draw("tour", i, "uav", uav_pos, project_to_ground(collect))
        run.close_tour(t_uav, start + dur)
        clock += run.flights[-1]
        pos = project_to_ground(collect)
        rest = active.tours[1:]
        active = Plan(rest, active.instance_ref, active.planned_success_logprobs[1:],
                      math.fsum(active.planned_success_logprobs[1:]))
        i += 1
    run.transfers.append(run.draw("transfer", i, "ugv", pos, inst.final))
    return run.trace(replan_events=attempts, replan_fallbacks=fallbacks, events=events)


@dataclass
class MonteCarloReport:
    trials: int
    failures: int
    p_hat: float
    mean_success_time: float
    std_success_time: float
    mean_tours: float
    replan_events: int
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _run_trials(args):
    plan, inst, noise, model, config, master_seed, idx = args
    out = []
    for k in idx:
        s = trial_seed(master_seed, k)
        if config is None:
            tr = execute_open_loop(plan, inst, noise, s)
        else:
            tr = execute_closed_loop(plan, inst, noise, model, config, s)
        out.append((tr.failed, tr.realized_mission_time, tr.tours, tr.replan_events))
    return out


def monte_carlo(plan: Plan, inst: Instance, noise: NoiseModel, trials: int, master_seed: int,
                parallelism: int = 1, model: TravelModel | None = None,
                closed_loop: ReplanConfig | None = None) -> MonteCarloReport:
    """Execute ``plan`` over ``trials`` independent realizations.  The report
    depends only on the inputs and ``master_seed``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if closed_loop is not None and model is None:
        raise ValueError("closed-loop execution needs the planning model")
    t0 = time.perf_counter()
    if parallelism > 1:
        chunks = [list(c) for c in np.array_split(np.arange(trials), parallelism) if len(c)]
        with ProcessPoolExecutor(parallelism) as pool:
            parts = pool.map(_run_trials, [(plan, inst, noise, model, closed_loop, master_seed,
                                            [int(k) for k in c]) for c in chunks])
            rows = [r for part in parts for r in part]
    else:
        rows = _run_trials((plan, inst, noise, model, closed_loop, master_seed, range(trials)))
    failures = sum(r[0] for r in rows)
    ok = [r[1] for r in rows if not r[0]]
    if ok:
        mean = math.fsum(ok) / len(ok)
        std = math.sqrt(math.fsum((x - mean) ** 2 for x in ok) / (len(ok) - 1)) if len(ok) > 1 else 0.0
    else:
        mean = std = math.nan
    return MonteCarloReport(trials, failures, failures / trials, mean, std,
                            sum(r[2] for r in rows) / trials, sum(r[3] for r in rows),
                            time.perf_counter() - t0)
