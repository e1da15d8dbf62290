"""Smooth, component-bounded random wind fields (multi-octave value noise)."""
from __future__ import annotations

import numpy as np


def _fade(t):
    return t * t * (3.0 - 2.0 * t)


class WindField:
    """Frozen wind realization over the box ``[0, bounds]``.

    Each octave holds random lattice values in ``[-1, 1]`` blended with a
    smoothstep kernel, so every octave (and their normalized sum) stays in
    ``[-1, 1]`` before scaling by the per-axis bounds.
    """

    def __init__(self, bounds, wind_bounds, rng: np.random.Generator, cells: int = 4, octaves: int = 3):
        self.bounds = np.maximum(np.asarray(bounds, dtype=float), 1e-9)
        self.wind_bounds = np.asarray(wind_bounds, dtype=float)
        self.layers = []
        amp = 1.0
        for o in range(octaves):
            k = cells * 2 ** o
            self.layers.append((k, amp, rng.uniform(-1.0, 1.0, size=(3, k + 1, k + 1, k + 1))))
            amp *= 0.5
        self.norm = sum(a for _, a, _ in self.layers)

    def __call__(self, p) -> np.ndarray:
        q = np.clip(np.asarray(p, dtype=float) / self.bounds, 0.0, 1.0)
        total = np.zeros(3)
        for k, amp, lat in self.layers:
            g = q * k
            i0 = np.minimum(g.astype(int), k - 1)
            t = _fade(g - i0)
            x0, y0, z0 = i0
            c = lat[:, x0:x0 + 2, y0:y0 + 2, z0:z0 + 2]
            c = c[:, 0] * (1 - t[0]) + c[:, 1] * t[0]
            c = c[:, 0] * (1 - t[1]) + c[:, 1] * t[1]
            c = c[:, 0] * (1 - t[2]) + c[:, 1] * t[2]
            total += amp * c
        return np.clip(total / self.norm, -1.0, 1.0) * self.wind_bounds
