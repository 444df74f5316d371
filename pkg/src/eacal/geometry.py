"""2-D geometry: positions, propagation delays, angles of arrival and the
synthetic circular anchor array.

All angles are radians, counter-clockwise positive, wrapped to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentPointsError

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def __iter__(self):
        yield self.x
        yield self.y

    def __add__(self, other):
        ox, oy = other
        return Point2(self.x + ox, self.y + oy)


def as_point(value) -> Point2:
    if isinstance(value, Point2):
        return value
    x, y = value
    return Point2(float(x), float(y))


def as_xy(points) -> np.ndarray:
    """Stack points (Point2, pairs or an (n, 2) array) into an (n, 2) float array."""
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
    else:
        arr = np.array([tuple(as_point(p)) for p in points], dtype=float)
    return arr.reshape(-1, 2)


def wrap_angle(phi):
    """Wrap angles to (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)
    # mod can round up to exactly 2 pi for tiny negative arguments
    wrapped = np.where(wrapped <= -np.pi, np.pi, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class FrameSpec:
    """Body frame anchored at the agent; ``heading`` is the phi = 0 direction."""

    origin: Point2
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "origin", as_point(self.origin))
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def to_world(self, forward, left) -> Point2:
        """Position given as (forward, left) offsets in the body frame."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        return Point2(
            self.origin.x + c * forward - s * left,
            self.origin.y + s * forward + c * left,
        )

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class AnchorSet:
    positions: np.ndarray  # (M, 2)
    aoas: np.ndarray  # (M,)

    def __post_init__(self):
        pos = as_xy(self.positions)
        aoas = np.asarray(self.aoas, dtype=float).reshape(-1)
        if len(pos) < 1:
            raise ValueError("anchor set must contain at least one anchor")
        if len(aoas) != len(pos):
            raise ValueError(f"{len(aoas)} aoas for {len(pos)} anchors")
        if np.any(aoas <= -np.pi) or np.any(aoas > np.pi):
            raise ValueError("aoas must lie in (-pi, pi]")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "aoas", aoas)

    def __len__(self):
        return len(self.positions)

    def points(self) -> list[Point2]:
        return [Point2(x, y) for x, y in self.positions]


def distance(u, v) -> float:
    u, v = as_point(u), as_point(v)
    # np.hypot, not math.hypot, so scalar and vectorised delays agree bitwise.
    return float(np.hypot(u.x - v.x, u.y - v.y))


def los_delay(p, a) -> float:
    """Direct-path delay from anchor ``a`` to agent ``p`` in seconds."""
    return distance(p, a) / SPEED_OF_LIGHT


def scatter_delay(a, q, p) -> float:
    """Two-hop delay anchor -> scatterer ``q`` -> agent."""
    return (distance(q, a) + distance(p, q)) / SPEED_OF_LIGHT


def scatter_delays(anchors: np.ndarray, q: np.ndarray, p) -> np.ndarray:
    """Vectorised two-hop delays.

    ``anchors`` is (M, 2) and ``q`` is (C, 2); returns a (C, M) array.
    """
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 2)
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    p = as_point(p)
    first = np.hypot(q[:, None, 0] - anchors[None, :, 0], q[:, None, 1] - anchors[None, :, 1])
    second = np.hypot(p.x - q[:, 0], p.y - q[:, 1])
    return (first + second[:, None]) / SPEED_OF_LIGHT


def los_delays(anchors: np.ndarray, p) -> np.ndarray:
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 2)
    p = as_point(p)
    return np.hypot(anchors[:, 0] - p.x, anchors[:, 1] - p.y) / SPEED_OF_LIGHT


def aoa(frame: FrameSpec, a) -> float:
    """Angle of the direction origin -> ``a``, measured from the frame heading."""
    a = as_point(a)
    dx, dy = a.x - frame.origin.x, a.y - frame.origin.y
    if dx == 0.0 and dy == 0.0:
        raise CoincidentPointsError("direction undefined: point coincides with frame origin")
    return wrap_angle(math.atan2(dy, dx) - frame.heading)


def synthetic_circle_anchors(frame: FrameSpec, radius: float, M: int) -> AnchorSet:
    """M anchors equally spaced counter-clockwise on a circle around the agent.

    Anchor 0 sits in the heading direction. This is the reversed geometry of a
    user turning on the spot in front of one fixed anchor.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if M < 1:
        raise ValueError("M must be at least 1")
    theta = frame.heading + 2 * np.pi * np.arange(M) / M
    pos = np.column_stack(
        [frame.origin.x + radius * np.cos(theta), frame.origin.y + radius * np.sin(theta)]
    )
    aoas = np.array([aoa(frame, xy) for xy in pos])
    return AnchorSet(pos, aoas)
