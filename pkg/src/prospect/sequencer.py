"""Visit ordering: an endpoint-pinned Hamiltonian path over the aerial points
under expected UAV travel time."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instance import Point3
from .travel import TravelModel


@dataclass(frozen=True)
class VisitOrder:
    order: tuple[int, ...]
    total_mean_cost: float


def cost_matrix(points: Sequence[Point3], model: TravelModel) -> list[list[float]]:
    return [[model.uav_edge(u, v).mean for v in points] for u in points]


def pinned_endpoints(points: Sequence[Point3], start: Point3, final: Point3,
                     model: TravelModel) -> tuple[int, int]:
    """First point nearest the start, last point nearest the final position.

    Ties go to the lowest index.  If one point wins both, it stays first and
    the last slot goes to the best of the others.
    """
    n = len(points)
    to_start = [model.uav_edge(start, p).mean for p in points]
    to_final = [model.uav_edge(p, final).mean for p in points]
    first = min(range(n), key=lambda i: (to_start[i], i))
    if n == 1:
        return first, first
    last = min((i for i in range(n) if i != first), key=lambda i: (to_final[i], i))
    return first, last


def path_cost(order: Sequence[int], C) -> float:
    return sum(C[a][b] for a, b in zip(order[:-1], order[1:]))


def _nearest_neighbor(first: int, last: int, n: int, C) -> list[int]:
    path = [first]
    left = set(range(n)) - {first, last}
    while left:
        cur = path[-1]
        nxt = min(left, key=lambda j: (C[cur][j], j))
        path.append(nxt)
        left.remove(nxt)
    path.append(last)
    return path


def two_opt(path: list[int], C) -> list[int]:
    """Segment reversals with directed costs; first and last stay fixed."""
    n = len(path)
    if n < 4:
        return path
    path = list(path)
    improved = True
    while improved:
        improved = False
        fwd = [0.0] * n
        bwd = [0.0] * n
        for k in range(1, n):
            fwd[k] = fwd[k - 1] + C[path[k - 1]][path[k]]
            bwd[k] = bwd[k - 1] + C[path[k]][path[k - 1]]
        best, move = -1e-9, None
        for i in range(1, n - 2):
            a = path[i - 1]
            pi = path[i]
            for j in range(i + 1, n - 1):
                pj, b = path[j], path[j + 1]
                old = C[a][pi] + (fwd[j] - fwd[i]) + C[pj][b]
                new = C[a][pj] + (bwd[j] - bwd[i]) + C[pi][b]
                if new - old < best:
                    best, move = new - old, (i, j)
        if move is not None:
            i, j = move
            path[i:j + 1] = path[i:j + 1][::-1]
            improved = True
    return path


def solve_visit_order(points: Sequence[Point3], start: Point3, final: Point3,
                      model: TravelModel, seed: int = 0, restarts: int = 2) -> VisitOrder:
    """Nearest-neighbour construction followed by 2-opt, plus ``restarts``
    seeded random starts; the cheapest result wins (first found on ties)."""
    n = len(points)
    if n == 0:
        raise ValueError("no points to order")
    first, last = pinned_endpoints(points, start, final, model)
    if n == 1:
        return VisitOrder((first,), 0.0)
    C = cost_matrix(points, model)
    best = two_opt(_nearest_neighbor(first, last, n, C), C)
    best_cost = path_cost(best, C)
    rng = np.random.default_rng(seed)
    middle = [i for i in range(n) if i not in (first, last)]
    for _ in range(restarts if n > 3 else 0):
        perm = [middle[i] for i in rng.permutation(len(middle))]
        cand = two_opt([first, *perm, last], C)
        cost = path_cost(cand, C)
        if cost < best_cost:
            best, best_cost = cand, cost
    return VisitOrder(tuple(best), best_cost)
