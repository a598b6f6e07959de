"""Piecewise user trajectories in the horizontal plane through the region centre."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("linear", "nonlinear")


@dataclass(frozen=True)
class Segment:
    """Constant-speed piece starting at ``t0``.

    Lines move along ``heading`` from ``start``; arcs rotate counter-clockwise
    around ``center`` with radius ``radius`` starting at angle ``angle0``.
    """

    t0: float
    t1: float
    kind: str
    start: tuple = (0.0, 0.0, 0.0)
    heading: tuple = (1.0, 0.0, 0.0)
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 0.0
    angle0: float = 0.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    kind: str
    speed: float
    center: tuple
    r1: float
    r2: float
    segments: tuple

    @property
    def duration(self) -> float:
        return self.segments[-1].t1

    @property
    def transitions(self) -> tuple:
        """Times of the non-smooth points between segments."""
        return tuple(s.t0 for s in self.segments[1:])

    def position(self, t) -> np.ndarray:
        """Positions at time(s) ``t``, shape ``(..., 3)``; times beyond the ends are clamped."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        starts = np.array([s.t0 for s in self.segments])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty(t.shape + (3,))
        for i, seg in enumerate(self.segments):
            sel = idx == i
            if not np.any(sel):
                continue
            dt = t[sel] - seg.t0
            if seg.kind == "line":
                out[sel] = np.asarray(seg.start) + np.multiply.outer(self.speed * dt, np.asarray(seg.heading))
            else:
                ang = seg.angle0 + self.speed * dt / seg.radius
                c = np.asarray(seg.center)
                out[sel] = c + seg.radius * np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=-1)
        return out


def _planar(angle) -> np.ndarray:
    return np.array([np.cos(angle), np.sin(angle), 0.0])


def generate_trajectory(kind: str, center, r1: float, r2: float, speed: float, rng: np.random.Generator) -> Trajectory:
    """Random trajectory through the disk of radius ``r1`` around ``center``.

    ``linear``: a chord entering at a uniform angle, heading towards the centre
    rotated by at most 45 degrees. ``nonlinear``: radially inwards to ``r2``,
    counter-clockwise along the circle of radius ``r2`` for a uniform angle in
    ``[pi/2, 3 pi/2]``, then radially outwards to ``r1``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown trajectory kind {kind!r}")
    if not 0 < r2 < r1:
        raise ValueError(f"radii must satisfy 0 < r2 < r1, got r1={r1}, r2={r2}")
    if not speed > 0:
        raise ValueError(f"speed must be positive, got {speed}")
    c = np.asarray(center, dtype=float)
    alpha = rng.uniform(0.0, 2.0 * np.pi)
    entry = c + r1 * _planar(alpha)
    if kind == "linear":
        delta = rng.uniform(-np.pi / 4, np.pi / 4)
        heading = _planar(alpha + np.pi + delta)
        length = 2.0 * r1 * np.cos(delta)
        seg = Segment(0.0, length / speed, "line", tuple(entry), tuple(heading))
        return Trajectory(kind, speed, tuple(c), r1, r2, (seg,))
    sweep = rng.uniform(0.5 * np.pi, 1.5 * np.pi)
    t_in = (r1 - r2) / speed
    t_arc = t_in + r2 * sweep / speed
    t_out = t_arc + (r1 - r2) / speed
    segs = (
        Segment(0.0, t_in, "line", tuple(entry), tuple(-_planar(alpha))),
        Segment(t_in, t_arc, "arc", center=tuple(c), radius=r2, angle0=alpha),
        Segment(t_arc, t_out, "line", tuple(c + r2 * _planar(alpha + sweep)), tuple(_planar(alpha + sweep))),
    )
    return Trajectory(kind, speed, tuple(c), r1, r2, segs)


def static_trajectory(position, duration: float) -> Trajectory:
    """A user that does not move (useful for fixed-point checks)."""
    seg = Segment(0.0, float(duration), "line", tuple(np.asarray(position, dtype=float)), (1.0, 0.0, 0.0))
    return Trajectory("linear", 0.0, tuple(np.asarray(position, dtype=float)), 1.0, 0.5, (seg,))
