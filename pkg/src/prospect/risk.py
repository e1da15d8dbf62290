"""Gaussian-surrogate survival probabilities and tour log-probabilities."""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

from .instance import InvalidInput, Point3, Tour, project_to_ground
from .travel import SQRT3, PathMoments, TravelModel, uav_path_moments

NEG_INF = -math.inf
TINY = 1e-300
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class SurvivalProb(NamedTuple):
    p: float
    log_p: float


class SegmentCost(NamedTuple):
    log_prob: float
    release_index: int
    collect_index: int


def gaussian_cdf(x: float) -> float:
    # erfc keeps full relative precision in the lower tail
    return 0.5 * math.erfc(-x * _INV_SQRT2)


def _log_cdf(z: float) -> tuple[float, float]:
    if z > 0:
        tail = 0.5 * math.erfc(z * _INV_SQRT2)
        return 1.0 - tail, math.log1p(-tail)
    p = 0.5 * math.erfc(-z * _INV_SQRT2)
    return p, (math.log(p) if p >= TINY else NEG_INF)


def survival_prob(budget: float, moments: PathMoments | tuple[float, float]) -> SurvivalProb:
    """P(T <= budget) for T ~ N(mean, variance); a step function at zero variance."""
    mean, var = moments
    if var < 0:
        raise InvalidInput(f"negative variance {var}")
    if var == 0:
        return SurvivalProb(1.0, 0.0) if budget >= mean else SurvivalProb(0.0, NEG_INF)
    return SurvivalProb(*_log_cdf((budget - mean) / math.sqrt(var)))


def log_survival(budget: float, mean: float, var: float) -> float:
    if var > 0:
        z = (budget - mean) / math.sqrt(var)
        if z > 0:
            return math.log1p(-0.5 * math.erfc(z * _INV_SQRT2))
        p = 0.5 * math.erfc(-z * _INV_SQRT2)
        return math.log(p) if p >= TINY else NEG_INF
    if var == 0:
        return 0.0 if budget >= mean else NEG_INF
    raise InvalidInput(f"negative variance {var}")


def _tour_logprob(uav_path, ugv_from, ugv_to, budget, model) -> float:
    ua = uav_path_moments(model, uav_path)
    ug = model.ugv_edge(ugv_from, ugv_to)
    la = survival_prob(budget, ua).log_p
    if la == NEG_INF:
        return NEG_INF
    return la + survival_prob(budget, ug).log_p


def tour_cost_f(seq: Sequence[Point3], a: int, b: int, r: int, c: int, budget: float,
                model: TravelModel) -> SegmentCost:
    """Log success probability of the tour covering ``seq[a..b]`` (inclusive,
    0-based) released at ``seq[r]`` and collected at ``seq[c]``."""
    if not (a <= r <= b and a <= c <= b):
        raise IndexError(f"release/collect ({r}, {c}) outside segment [{a}, {b}]")
    if r == c and a != b:
        raise IndexError("release and collect coincide in a multi-point segment")
    rp, cp = seq[r], seq[c]
    middle = [seq[i] for i in range(a, b + 1) if i != r and i != c]
    air = [rp, *middle, cp] if r != c else [rp]
    gr, gc = project_to_ground(rp), project_to_ground(cp)
    lp = _tour_logprob([gr, *air, gc], gr, gc, budget, model)
    return SegmentCost(lp, r, c)


def tour_cost_f_prime(seq: Sequence[Point3], b: int, c: int, uav_pos: Point3, ugv_pos: Point3,
                      elapsed: float, budget: float, model: TravelModel) -> SegmentCost:
    """Log success probability of finishing an in-progress tour: the UAV at
    ``uav_pos`` visits ``seq[0..b]`` ending at ``seq[c]``; the UGV drives from
    ``ugv_pos``.  ``elapsed`` flight time is deducted from the budget."""
    if not 0 <= c <= b:
        raise IndexError(f"collect {c} outside [0, {b}]")
    remaining = budget - elapsed
    if remaining <= 0:
        return SegmentCost(NEG_INF, -1, c)
    cp = seq[c]
    gc = project_to_ground(cp)
    path = [uav_pos, *(seq[i] for i in range(b + 1) if i != c), cp, gc]
    return SegmentCost(_tour_logprob(path, ugv_pos, gc, remaining, model), -1, c)


def tour_logprob(tour: Tour, budget: float, model: TravelModel) -> float:
    b = budget - tour.elapsed if tour.partial else budget
    if b <= 0:
        return NEG_INF
    return _tour_logprob(tour.uav_path(), tour.release_ground, tour.collect_ground, b, model)


def joint_log_success(costs: Sequence[SegmentCost | float]) -> float:
    total = 0.0
    for c in costs:
        lp = c.log_prob if isinstance(c, SegmentCost) else float(c)
        if lp == NEG_INF:
            return NEG_INF
        total += lp
    return total


def margin_scaled_budget(budget: float, mu: float, sigma: float, p_r: float) -> float:
    """Flight budget shrunk by a deterministic margin matched to risk ``p_r``
    under a uniform travel-time assumption."""
    denom = mu + SQRT3 * sigma * (1.0 - 2.0 * p_r)
    if denom <= 0:
        raise InvalidInput(f"margin scaling undefined: mu + sqrt(3) sigma (1 - 2 p_r) = {denom}")
    return budget * mu / denom
