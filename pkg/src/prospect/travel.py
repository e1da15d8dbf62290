"""Travel-time moment oracles for UAV and UGV edges."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

from .instance import InvalidInput, Point3

SQRT3 = math.sqrt(3.0)


class InfeasibleWind(ValueError):
    pass


class EdgeMoments(NamedTuple):
    mean: float
    variance: float


class PathMoments(NamedTuple):
    mean: float
    variance: float


ZERO = EdgeMoments(0.0, 0.0)


class TravelModel:
    """Mean/variance (and UAV cross-edge covariance) of edge travel times.

    Subclasses implement ``_uav_edge`` and ``_ugv_edge``.  Results depend on
    the endpoints only, so they are cached per ``(agent, u, v)``.
    """

    kind = "abstract"
    covariance: Callable | None = None

    def _uav_edge(self, u: Point3, v: Point3) -> EdgeMoments:
        raise NotImplementedError

    def _ugv_edge(self, u: Point3, v: Point3) -> EdgeMoments:
        raise NotImplementedError

    def _cache(self) -> dict:
        c = self.__dict__.get("_edge_cache")
        if c is None:
            c = {}
            object.__setattr__(self, "_edge_cache", c)
        return c

    def uav_edge(self, u: Point3, v: Point3) -> EdgeMoments:
        cache = self._cache()
        key = ("a", u, v)
        hit = cache.get(key)
        if hit is None:
            hit = ZERO if u == v else self._uav_edge(u, v)
            cache[key] = hit
        return hit

    def ugv_edge(self, u: Point3, v: Point3) -> EdgeMoments:
        if u[2] != 0 or v[2] != 0:
            raise InvalidInput(f"UGV edge endpoints must be on the ground: {tuple(u)}, {tuple(v)}")
        cache = self._cache()
        key = ("g", u, v)
        hit = cache.get(key)
        if hit is None:
            hit = ZERO if u == v else self._ugv_edge(u, v)
            cache[key] = hit
        return hit

    @property
    def independent(self) -> bool:
        return self.covariance is None

    def uav_cov(self, u: Point3, v: Point3, w: Point3, x: Point3) -> float:
        if self.covariance is None:
            return 0.0
        return float(self.covariance(u, v, w, x))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("_edge_cache", None)
        return state

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)


def _legs(u: Point3, v: Point3) -> tuple[float, float]:
    return math.hypot(v[0] - u[0], v[1] - u[1]), abs(v[2] - u[2])


@dataclass(frozen=True)
class UniformEdgeModel(TravelModel):
    """Edge time ``l * U(mu - sqrt(3) sigma, mu + sqrt(3) sigma)``.

    UAV edges split into a horizontal and a vertical leg; the vertical leg
    length is multiplied by ``vertical_scale``.  The legs are independent.
    """

    mu_uav: float = 0.1
    sigma_uav: float = 0.01
    mu_ugv: float = 0.4
    sigma_ugv: float = 0.04
    vertical_scale: float = 5.0
    covariance: Callable | None = field(default=None, compare=False, repr=False)

    kind = "uniform"

    def __post_init__(self):
        for mu, sigma in ((self.mu_uav, self.sigma_uav), (self.mu_ugv, self.sigma_ugv)):
            if not (mu > 0 and sigma >= 0 and mu > SQRT3 * sigma):
                raise InvalidInput(f"uniform edge model needs mu > sqrt(3) sigma >= 0, got {mu}, {sigma}")

    def _uav_edge(self, u, v):
        lh, lv = _legs(u, v)
        lv *= self.vertical_scale
        return EdgeMoments(self.mu_uav * (lh + lv), self.sigma_uav ** 2 * (lh * lh + lv * lv))

    def _ugv_edge(self, u, v):
        l = math.dist(u, v)
        return EdgeMoments(self.mu_ugv * l, (self.sigma_ugv * l) ** 2)

    def to_dict(self):
        return {"kind": "uniform", "mu_uav": self.mu_uav, "sigma_uav": self.sigma_uav,
                "mu_ugv": self.mu_ugv, "sigma_ugv": self.sigma_ugv,
                "vertical_scale": self.vertical_scale}


@dataclass(frozen=True)
class WindBoundModel(TravelModel):
    """Moments of a uniform distribution between the wind-bounded extreme
    edge times."""

    uav_speed: tuple[float, float] = (1.5, 2.0)
    ugv_speed: tuple[float, float] = (0.15, 0.25)
    wind_bounds: tuple[float, float, float] = (1.0, 1.0, 0.3)

    kind = "wind_bound"

    def __post_init__(self):
        object.__setattr__(self, "uav_speed", tuple(float(s) for s in self.uav_speed))
        object.__setattr__(self, "ugv_speed", tuple(float(s) for s in self.ugv_speed))
        object.__setattr__(self, "wind_bounds", tuple(float(w) for w in self.wind_bounds))
        for lo, hi in (self.uav_speed, self.ugv_speed):
            if not 0 < lo <= hi:
                raise InvalidInput(f"speed range must satisfy 0 < lo <= hi, got {lo}, {hi}")
        if min(self.wind_bounds) < 0:
            raise InvalidInput("wind bounds must be non-negative")

    def along_track_bound(self, u: Point3, v: Point3) -> float:
        L = math.dist(u, v)
        return sum(abs(b - a) / L * w for a, b, w in zip(u, v, self.wind_bounds))

    def uav_time_bounds(self, u: Point3, v: Point3) -> tuple[float, float]:
        if u == v:
            return 0.0, 0.0
        L = math.dist(u, v)
        w = self.along_track_bound(u, v)
        lo, hi = self.uav_speed
        if lo <= w:
            raise InfeasibleWind(f"along-track wind bound {w:.3g} m/s reaches the minimum speed {lo} m/s")
        return L / (hi + w), L / (lo - w)

    def ugv_time_bounds(self, u: Point3, v: Point3) -> tuple[float, float]:
        L = math.dist(u, v)
        lo, hi = self.ugv_speed
        return L / hi, L / lo

    @staticmethod
    def _uniform(t_min, t_max):
        return EdgeMoments(0.5 * (t_min + t_max), (t_max - t_min) ** 2 / 12.0)

    def _uav_edge(self, u, v):
        return self._uniform(*self.uav_time_bounds(u, v))

    def _ugv_edge(self, u, v):
        return self._uniform(*self.ugv_time_bounds(u, v))

    def to_dict(self):
        return {"kind": "wind_bound", "uav_speed": list(self.uav_speed),
                "ugv_speed": list(self.ugv_speed), "wind_bounds": list(self.wind_bounds)}


def model_from_dict(d: dict) -> TravelModel:
    kind = d.get("kind", "uniform")
    try:
        if kind == "uniform":
            return UniformEdgeModel(**{k: float(v) for k, v in d.items() if k != "kind"})
        if kind == "wind_bound":
            return WindBoundModel(tuple(d.get("uav_speed", (1.5, 2.0))),
                                  tuple(d.get("ugv_speed", (0.15, 0.25))),
                                  tuple(d.get("wind_bounds", (1.0, 1.0, 0.3))))
    except TypeError as exc:
        raise InvalidInput(f"bad model configuration: {exc}") from exc
    raise InvalidInput(f"unknown model kind {kind!r}")


def uniform_uav_edge(model: UniformEdgeModel, u: Point3, v: Point3) -> EdgeMoments:
    return model.uav_edge(u, v)


def wind_bound_uav_edge(model: WindBoundModel, u: Point3, v: Point3) -> EdgeMoments:
    return model.uav_edge(u, v)


def uav_path_moments(model: TravelModel, path: Sequence[Point3]) -> PathMoments:
    """Sum edge moments along ``path``; cross-edge covariances count both
    ordered pairs."""
    edges = list(zip(path[:-1], path[1:]))
    mean = var = 0.0
    for u, v in edges:
        e = model.uav_edge(u, v)
        mean += e.mean
        var += e.variance
    if not model.independent:
        for j, (u, v) in enumerate(edges):
            for k, (w, x) in enumerate(edges):
                if j != k and u != v and w != x:
                    var += model.uav_cov(u, v, w, x)
    return PathMoments(mean, var)


def ugv_edge_moments(model: TravelModel, u: Point3, v: Point3) -> PathMoments:
    e = model.ugv_edge(u, v)
    return PathMoments(e.mean, e.variance)
