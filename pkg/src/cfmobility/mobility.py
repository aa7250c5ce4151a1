"""Random-waypoint style trajectories: straight segments with a fixed
speed, i.i.d. uniform headings and i.i.d. Rayleigh transition lengths.

Segments whose endpoint would leave the window are redrawn (heading and
length together), which preserves the i.i.d. segment law conditional on
staying inside; there is no pause time between moving periods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ParameterError
from .geometry import Rect

DEFAULT_RAYLEIGH_SCALE_KM = 0.5

_MAX_TRIES_PER_SEGMENT = 2000


@dataclass(frozen=True)
class Trajectory:
    """A polyline path: per-segment (start, heading, length) plus speed.

    vertices has n_segments + 1 rows; total_time is path length over speed
    (lengths km, speed m/s, time s).
    """

    vertices: np.ndarray    # (n+1, 2) km
    headings: np.ndarray    # (n,) rad
    lengths: np.ndarray     # (n,) km
    speed: float            # m/s

    @property
    def n_segments(self) -> int:
        return len(self.lengths)

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    @property
    def total_time(self) -> float:
        return self.total_length * 1000.0 / self.speed

    @property
    def segments(self) -> list:
        return [(tuple(self.vertices[i]), float(self.headings[i]),
                 float(self.lengths[i])) for i in range(self.n_segments)]

    def sample_arclength(self, step: float) -> np.ndarray:
        """Points along the path every ``step`` km (final vertex included)."""
        if step <= 0:
            raise ParameterError("step must be > 0")
        cum = np.concatenate(([0.0], np.cumsum(self.lengths)))
        total = cum[-1]
        if total == 0.0:
            return self.vertices[:1].copy()
        s = np.arange(0.0, total, step)
        if total - s[-1] > 1e-12:
            s = np.append(s, total)
        else:
            s[-1] = total
        out = np.empty((len(s), 2))
        out[:, 0] = np.interp(s, cum, self.vertices[:, 0])
        out[:, 1] = np.interp(s, cum, self.vertices[:, 1])
        return out


def generate_trajectory(v: float, n_segments: int, rayleigh_scale: float,
                        window: Rect, rng_seed) -> Trajectory:
    """Generate one random-waypoint trajectory confined to ``window``.

    Start point uniform in the window; each segment draws heading ~ U[0, 2pi)
    and length ~ Rayleigh(rayleigh_scale) and is redrawn while its endpoint
    falls outside. Raises ConfigurationError when the window is so small
    relative to the length scale that the redraw acceptance drops below ~1%.
    """
    if v <= 0:
        raise ParameterError("speed v must be > 0")
    if n_segments < 1:
        raise ParameterError("n_segments must be >= 1")
    if rayleigh_scale <= 0:
        raise ParameterError("rayleigh_scale must be > 0")
    rng = np.random.default_rng(rng_seed) if not isinstance(
        rng_seed, np.random.Generator) else rng_seed

    vertices = np.empty((n_segments + 1, 2))
    headings = np.empty(n_segments)
    lengths = np.empty(n_segments)
    x = window.x0 + rng.uniform() * window.width
    y = window.y0 + rng.uniform() * window.height
    vertices[0] = (x, y)
    for i in range(n_segments):
        for attempt in range(_MAX_TRIES_PER_SEGMENT):
            theta = rng.uniform(0.0, 2.0 * math.pi)
            ell = rng.rayleigh(rayleigh_scale)
            nx = x + ell * math.cos(theta)
            ny = y + ell * math.sin(theta)
            if window.x0 <= nx <= window.x1 and window.y0 <= ny <= window.y1:
                break
        else:
            raise ConfigurationError(
                f"segment redraw acceptance below {1.0 / _MAX_TRIES_PER_SEGMENT:.2%}:"
                f" window {window} too small for rayleigh_scale={rayleigh_scale}")
        x, y = nx, ny
        vertices[i + 1] = (x, y)
        headings[i] = theta
        lengths[i] = ell
    vertices.setflags(write=False)
    headings.setflags(write=False)
    lengths.setflags(write=False)
    return Trajectory(vertices=vertices, headings=headings,
                      lengths=lengths, speed=float(v))
