"""Environment, mission instance and plan representation.

A plan is held as an ordered list of tours.  The padded ``n x (n+2)`` matrix
encoding is produced on demand by :func:`to_padded_matrix` and is used for the
formal constraint checks in :func:`check_feasibility`.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence


class InvalidInput(ValueError):
    """Raised when an instance, plan or point violates its contract."""


class PlanInconsistency(ValueError):
    pass


class Point3(NamedTuple):
    x: float
    y: float
    z: float

    @property
    def on_ground(self) -> bool:
        return self.z == 0.0


def as_point(p) -> Point3:
    x, y, z = (float(v) for v in p)
    if not all(math.isfinite(v) for v in (x, y, z)):
        raise InvalidInput(f"non-finite point {p!r}")
    return Point3(x, y, z)


def in_bounds(p: Point3, bounds: Sequence[float]) -> bool:
    return 0.0 <= p.x <= bounds[0] and 0.0 <= p.y <= bounds[1] and 0.0 <= p.z <= bounds[2]


def project_to_ground(p: Point3, bounds: Sequence[float] | None = None) -> Point3:
    """Closest feasible ground point; a vertical drop in an obstacle-free box."""
    if bounds is not None and not in_bounds(p, bounds):
        raise InvalidInput(f"point {tuple(p)} outside environment {tuple(bounds)}")
    return Point3(p.x, p.y, 0.0)


@dataclass(frozen=True)
class Instance:
    env_bounds: tuple[float, float, float]
    uav_points: tuple[Point3, ...]
    start: Point3
    final: Point3
    max_flight_time: float
    risk_level: float
    recharge_ratio: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "env_bounds", tuple(float(b) for b in self.env_bounds))
        object.__setattr__(self, "uav_points", tuple(as_point(p) for p in self.uav_points))
        object.__setattr__(self, "start", as_point(self.start))
        object.__setattr__(self, "final", as_point(self.final))
        b = self.env_bounds
        if len(b) != 3 or min(b) < 0:
            raise InvalidInput(f"bad env_bounds {b}")
        if not self.uav_points:
            raise InvalidInput("instance needs at least one aerial point")
        if len(set(self.uav_points)) != len(self.uav_points):
            raise InvalidInput("duplicate aerial points")
        for p in self.uav_points:
            if p.z <= 0 or not in_bounds(p, b):
                raise InvalidInput(f"aerial point {tuple(p)} must be above ground and inside bounds")
        for name, p in (("start", self.start), ("final", self.final)):
            if p.z != 0 or not in_bounds(p, b):
                raise InvalidInput(f"{name} point {tuple(p)} must lie on the ground inside bounds")
        if not 0 < self.risk_level < 1:
            raise InvalidInput("risk_level must lie in (0, 1)")
        if not self.max_flight_time > 0:
            raise InvalidInput("max_flight_time must be positive")
        if self.recharge_ratio < 0:
            raise InvalidInput("recharge_ratio must be non-negative")

    @property
    def n(self) -> int:
        return len(self.uav_points)

    def to_dict(self) -> dict:
        return {
            "env_bounds": list(self.env_bounds),
            "uav_points": [list(p) for p in self.uav_points],
            "start": list(self.start),
            "final": list(self.final),
            "max_flight_time": self.max_flight_time,
            "risk_level": self.risk_level,
            "recharge_ratio": self.recharge_ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        try:
            return cls(
                env_bounds=tuple(d["env_bounds"]),
                uav_points=tuple(tuple(p) for p in d["uav_points"]),
                start=tuple(d["start"]),
                final=tuple(d["final"]),
                max_flight_time=float(d["max_flight_time"]),
                risk_level=float(d["risk_level"]),
                recharge_ratio=float(d.get("recharge_ratio", 1.0)),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed instance document: {exc!r}") from exc

    def with_risk(self, risk_level: float) -> "Instance":
        d = self.to_dict()
        d["risk_level"] = risk_level
        return Instance.from_dict(d)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class Tour:
    """One UAV flight.

    For a regular tour ``waypoints`` starts with ``release_air`` and ends with
    ``collect_air``.  A *partial* tour is the remainder of a tour already in
    progress: ``release_air`` is the current UAV position, ``release_ground``
    the current UGV position, ``elapsed`` the flight time already spent, and
    ``waypoints`` holds only the points still to visit.
    """

    release_air: Point3
    collect_air: Point3
    release_ground: Point3
    collect_ground: Point3
    waypoints: tuple[Point3, ...]
    partial: bool = False
    elapsed: float = 0.0

    def __post_init__(self):
        if not self.waypoints:
            raise PlanInconsistency("tour without waypoints")
        if self.waypoints[-1] != self.collect_air:
            raise PlanInconsistency("collect point must be the last waypoint")
        if not self.partial and self.waypoints[0] != self.release_air:
            raise PlanInconsistency("release point must be the first waypoint")

    def uav_path(self) -> tuple[Point3, ...]:
        head = self.release_air if self.partial else self.release_ground
        return (head, *self.waypoints, self.collect_ground)

    def visited(self) -> tuple[Point3, ...]:
        """Aerial points this tour is responsible for covering."""
        return self.waypoints

    def to_dict(self) -> dict:
        d = {
            "release_air": list(self.release_air),
            "collect_air": list(self.collect_air),
            "release_ground": list(self.release_ground),
            "collect_ground": list(self.collect_ground),
            "waypoints": [list(p) for p in self.waypoints],
            "partial": self.partial,
        }
        if self.partial:
            d["elapsed"] = self.elapsed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Tour":
        return cls(
            release_air=as_point(d["release_air"]),
            collect_air=as_point(d["collect_air"]),
            release_ground=as_point(d["release_ground"]),
            collect_ground=as_point(d["collect_ground"]),
            waypoints=tuple(as_point(p) for p in d["waypoints"]),
            partial=bool(d.get("partial", False)),
            elapsed=float(d.get("elapsed", 0.0)),
        )


def make_tour(segment: Sequence[Point3], release: int, collect: int, bounds=None) -> Tour:
    """Build a regular tour from a segment of the visit order and the
    positions (within the segment) of its release and collect points."""
    r, c = segment[release], segment[collect]
    if release == collect and len(segment) > 1:
        raise PlanInconsistency("release and collect coincide in a multi-point segment")
    middle = [p for i, p in enumerate(segment) if i not in (release, collect)]
    waypoints = (r, *middle, c) if release != collect else (r,)
    return Tour(r, c, project_to_ground(r, bounds), project_to_ground(c, bounds), waypoints)


@dataclass(frozen=True)
class Plan:
    tours: tuple[Tour, ...]
    instance_ref: str = ""
    planned_success_logprobs: tuple[float, ...] = ()
    planned_total_logprob: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "tours", tuple(self.tours))
        object.__setattr__(self, "planned_success_logprobs", tuple(self.planned_success_logprobs))
        if self.planned_success_logprobs and len(self.planned_success_logprobs) != len(self.tours):
            raise PlanInconsistency("one log-probability per tour expected")

    @property
    def m(self) -> int:
        return len(self.tours)

    def points(self) -> list[Point3]:
        return [p for t in self.tours for p in t.visited()]

    def to_dict(self) -> dict:
        return {
            "instance_ref": self.instance_ref,
            "tours": [t.to_dict() for t in self.tours],
            "planned_success_logprobs": list(self.planned_success_logprobs),
            "planned_total_logprob": self.planned_total_logprob,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Plan":
        try:
            return cls(
                tours=tuple(Tour.from_dict(t) for t in d["tours"]),
                instance_ref=d.get("instance_ref", ""),
                planned_success_logprobs=tuple(float(v) for v in d.get("planned_success_logprobs", ())),
                planned_total_logprob=float(d.get("planned_total_logprob", 0.0)),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed plan document: {exc!r}") from exc


def dump_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=False)
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return Instance.from_dict(doc)


def load_plan(path) -> Plan:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return Plan.from_dict(doc)


# -- padded matrix view ------------------------------------------------------

def to_padded_matrix(plan: Plan, n: int, final: Point3) -> list[list[Point3]]:
    """Encode ``plan`` as ``n`` rows of ``n + 2`` points.

    Row ``i`` is ``(ground release, release, interior points, collect repeated,
    ground collect)``; rows past the last tour repeat ``final``.
    """
    if plan.m > n:
        raise PlanInconsistency(f"{plan.m} tours do not fit in {n} rows")
    rows = []
    for t in plan.tours:
        if t.partial:
            interior = list(t.waypoints[:-1])
            cols = [t.release_air, *interior]
        elif len(t.waypoints) == 1:
            cols = [t.release_air]
        else:
            cols = [t.release_air, *t.waypoints[1:-1]]
        fill = n - len(cols)
        if fill < 1 and not (len(t.waypoints) == 1 and not t.partial and fill == 0):
            raise PlanInconsistency("tour has more waypoints than the matrix can hold")
        cols += [t.collect_air] * fill
        rows.append([t.release_ground, *cols, t.collect_ground])
    rows += [[final] * (n + 2) for _ in range(n - plan.m)]
    return rows


def from_padded_matrix(matrix: Sequence[Sequence[Point3]], final: Point3) -> list[Tour]:
    """Inverse of :func:`to_padded_matrix` for plans without partial tours."""
    tours = []
    for row in matrix:
        if all(p == final for p in row):
            continue
        seq = []
        for p in row[1:-1]:
            if not seq or seq[-1] != p:
                seq.append(p)
        tours.append(Tour(seq[0], seq[-1], row[0], row[-1], tuple(seq)))
    return tours


# -- formal feasibility ------------------------------------------------------

@dataclass
class FeasibilityReport:
    coverage: bool
    ground: bool
    air_columns: bool
    risk: bool
    joint_logprob: float
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.coverage and self.ground and self.air_columns and self.risk


def check_feasibility(plan: Plan, inst: Instance, model, points: Sequence[Point3] | None = None,
                      risk_level: float | None = None) -> FeasibilityReport:
    """Check coverage, ground release/collect, air-column structure and the
    joint chance constraint.  Violations are reported, never raised."""
    from .risk import tour_logprob

    msgs = []
    targets = list(inst.uav_points if points is None else points)
    covered = plan.points()
    coverage = sorted(covered) == sorted(targets) and len(set(covered)) == len(covered)
    if not coverage:
        missing = set(targets) - set(covered)
        extra = set(covered) - set(targets)
        msgs.append(f"coverage: {len(missing)} missing, {len(extra)} extra, "
                    f"{len(covered) - len(set(covered))} repeated")

    ground = True
    for i, t in enumerate(plan.tours):
        for p in (t.release_ground, t.collect_ground):
            if p.z != 0 or not in_bounds(p, inst.env_bounds):
                ground = False
                msgs.append(f"ground: tour {i} endpoint {tuple(p)} is not on feasible ground")

    air = True
    n = max(inst.n, plan.m, max((len(t.waypoints) + 1 for t in plan.tours), default=0))
    try:
        matrix = to_padded_matrix(plan, n, inst.final)
    except PlanInconsistency as exc:
        air = False
        msgs.append(f"air: {exc}")
        matrix = []
    allowed = set(inst.uav_points)
    for i, row in enumerate(matrix[: plan.m]):
        for j in range(1, n + 1):
            if row[j] not in allowed and row[j] != row[j - 1]:
                air = False
                msgs.append(f"air: row {i} column {j + 1} holds {tuple(row[j])}")
                break

    p_r = inst.risk_level if risk_level is None else risk_level
    try:
        joint = sum(tour_logprob(t, inst.max_flight_time, model) for t in plan.tours)
    except InvalidInput as exc:
        joint = -math.inf
        msgs.append(f"risk: cannot evaluate ({exc})")
    risk = joint >= math.log1p(-p_r)
    if not risk and joint > -math.inf:
        msgs.append(f"risk: joint log success {joint:.6g} < log(1 - {p_r})")
    return FeasibilityReport(coverage, ground, air, risk, joint, msgs)
