"""Reference paths parameterized by arc length, and formation slots."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "PathKind",
    "PathSpec",
    "FormationSpec",
    "path_position",
    "path_tangent",
    "formation_targets",
    "line_formation",
    "octahedron_formation",
    "lawnmower4",
    "helix6",
]


class PathKind(str, enum.Enum):
    LAWNMOWER = "lawnmower"
    HELIX = "helix"


@dataclass(frozen=True)
class PathSpec:
    """Lawnmower (``l``, ``r``) or helix (``radius``, ``nu_z``) path.

    The lawnmower starts at the origin heading along +x; straights advance
    along x and successive straights are stacked along +y, ``2 r`` apart.
    The helix starts at ``(radius, 0, 0)`` turning counter-clockwise and
    rising ``nu_z`` metres per revolution.
    """

    kind: PathKind = PathKind.LAWNMOWER
    l: float = 75.0
    r: float = 15.0
    radius: float = 20.0
    nu_z: float = 200.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PathKind(self.kind))
        if self.kind is PathKind.LAWNMOWER and not (self.l > 0 and self.r > 0):
            raise ConfigError("lawnmower needs l > 0 and r > 0")
        if self.kind is PathKind.HELIX and not self.radius > 0:
            raise ConfigError("helix needs radius > 0")

    @property
    def turn_length(self) -> float:
        return 2.0 * math.pi * math.hypot(self.radius, self.nu_z / (2.0 * math.pi))


def _lawnmower(spec: PathSpec, sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    l, r = spec.l, spec.r
    period = l + math.pi * r
    k = np.floor(sigma / period).astype(int)
    u = sigma - k * period
    direction = np.where(k % 2 == 0, 1.0, -1.0)
    x_start = np.where(k % 2 == 0, 0.0, l)
    y0 = 2.0 * r * k
    on_straight = u <= l
    # straight part
    xs = x_start + direction * np.minimum(u, l)
    ys = y0
    # half-circle around (x_start + direction*l, y0 + r)
    phi = np.maximum(u - l, 0.0) / r
    cx = x_start + direction * l
    xt = cx + direction * r * np.sin(phi)
    yt = y0 + r - r * np.cos(phi)
    x = np.where(on_straight, xs, xt)
    y = np.where(on_straight, ys, yt)
    tx = np.where(on_straight, direction, direction * np.cos(phi))
    ty = np.where(on_straight, 0.0, np.sin(phi))
    zeros = np.zeros_like(x)
    return np.stack([x, y, zeros], axis=-1), np.stack([tx, ty, zeros], axis=-1)


def _helix(spec: PathSpec, sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    R, c = spec.radius, spec.nu_z / (2.0 * math.pi)
    scale = math.hypot(R, c)
    phi = sigma / scale
    pos = np.stack([R * np.cos(phi), R * np.sin(phi), c * phi], axis=-1)
    tan = np.stack([-R * np.sin(phi), R * np.cos(phi), np.full_like(phi, c)], axis=-1) / scale
    return pos, tan


def _eval(spec: PathSpec, sigma) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(sigma, dtype=float)
    if spec.kind is PathKind.LAWNMOWER:
        return _lawnmower(spec, s)
    return _helix(spec, s)


def path_position(spec: PathSpec, sigma) -> np.ndarray:
    """Position(s) at arc length ``sigma``; shape ``(..., 3)``.

    Negative ``sigma`` continues the first piece backwards.
    """
    return _eval(spec, sigma)[0]


def path_tangent(spec: PathSpec, sigma) -> np.ndarray:
    """Unit tangent(s) at arc length ``sigma``."""
    return _eval(spec, sigma)[1]


@dataclass(frozen=True)
class FormationSpec:
    """World-frame slot offsets and the scale used for error thresholds."""

    slots: tuple[tuple[float, float, float], ...]
    radius: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.slots, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3 or len(arr) < 2:
            raise ConfigError("formation needs at least two 3-D slots")
        if np.abs(arr.mean(axis=0)).max() > 1e-9 * max(1.0, np.abs(arr).max()):
            raise ConfigError("formation slots must have zero mean")
        if not self.radius > 0:
            raise ConfigError("formation radius must be positive")

    @property
    def V(self) -> int:
        return len(self.slots)

    @property
    def offsets(self) -> np.ndarray:
        return np.asarray(self.slots, dtype=float)


def line_formation(V: int = 4, width: float = 20.0, axis=(0.0, 1.0, 0.0)) -> FormationSpec:
    """Evenly spaced line of total ``width`` along ``axis``, centred at zero."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    pos = np.linspace(-width / 2.0, width / 2.0, V)
    return FormationSpec(tuple(tuple(p * a) for p in pos), radius=width / 2.0)


def octahedron_formation(edge: float = 10.0, radius: float = 20.0) -> FormationSpec:
    """Regular octahedron with vertices on the coordinate axes."""
    h = edge / math.sqrt(2.0)
    verts = []
    for i in range(3):
        for sgn in (1.0, -1.0):
            v = [0.0, 0.0, 0.0]
            v[i] = sgn * h
            verts.append(tuple(v))
    return FormationSpec(tuple(verts), radius=radius)


def formation_targets(form: FormationSpec, path: PathSpec, sigma_bar: float) -> np.ndarray:
    """Slot positions, shape ``(V, 3)``: the path point plus fixed offsets."""
    return path_position(path, sigma_bar)[None, :] + form.offsets


def lawnmower4() -> tuple[PathSpec, FormationSpec]:
    # line perpendicular to the straights (which run along x)
    return PathSpec(PathKind.LAWNMOWER, l=75.0, r=15.0), line_formation(4, 20.0)


def helix6(edge: float = 10.0) -> tuple[PathSpec, FormationSpec]:
    return PathSpec(PathKind.HELIX, radius=20.0, nu_z=200.0), octahedron_formation(edge, 20.0)
