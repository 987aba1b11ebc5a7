"""Reconstruction of stale or missing neighbor forecasts.

A lost packet is replaced by the last received forecast, extended past its
horizon and shifted so it covers the current horizon again.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from .bspline import BSpline, fit_values, shift_domain
from .errors import ArgumentError, DegenerateError

__all__ = [
    "Extrapolation",
    "ExtrapolationMethod",
    "extrapolate_jerk",
    "extrapolate_velocity",
    "extrapolate",
    "impute_missing",
    "compensate_delay",
    "imputation_matrix",
]


class Extrapolation(str, enum.Enum):
    JERK = "jerk"
    VELOCITY = "velocity"


@dataclass(frozen=True)
class ExtrapolationMethod:
    kind: Extrapolation = Extrapolation.VELOCITY
    samples_per_interval: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Extrapolation(self.kind))
        if self.kind is Extrapolation.VELOCITY and self.samples_per_interval < 2:
            raise ArgumentError("velocity extrapolation needs >= 2 samples per interval")
        if self.samples_per_interval < 1:
            raise ArgumentError("samples_per_interval must be >= 1")


def extrapolate_jerk(spline: BSpline) -> BSpline:
    """Add one interval that continues the last polynomial piece.

    Coefficients ``0 .. n`` are kept; the remaining three are solved so the
    continued piece (constant jerk) is reproduced on the new interval.
    """
    if spline.degree != 3 or spline.n_intervals < 1:
        raise DegenerateError("jerk extrapolation needs a cubic spline")
    d = spline.interval_len
    n = spline.n_intervals
    out_t0 = spline.t0
    keep = np.asarray(spline.coeffs[: n + 1])
    # fit the free tail coefficients on the last old and the new interval
    t = spline.t_end + d * np.linspace(-1.0, 1.0, 9)
    target = spline.extended(t)
    probe = BSpline(out_t0, d, np.zeros(n + 4))
    B = probe.basis(t)
    rhs = target - B[:, : n + 1] @ keep
    tail, *_ = np.linalg.lstsq(B[:, n + 1 :], rhs, rcond=None)
    return BSpline(out_t0, d, np.concatenate([keep, tail]))


def extrapolate_velocity(spline: BSpline, method: ExtrapolationMethod | None = None) -> BSpline:
    """Add one interval at the left-derivative speed and refit.

    The original is sampled ``m`` times per interval, points on the line
    through the endpoint with slope equal to the left derivative are
    appended over the new interval, and a spline with one more interval is
    fitted by least squares.
    """
    m = (method or ExtrapolationMethod()).samples_per_interval
    if m < 2:
        raise ArgumentError("velocity extrapolation needs >= 2 samples per interval")
    d = spline.interval_len
    n = spline.n_intervals
    t_old = spline.t0 + np.arange(n * m + 1) * (d / m)
    y_old = spline(t_old)
    slope = float(spline.derivative(1)(spline.t_end))
    h = np.arange(1, m + 1) * (d / m)
    t_all = np.concatenate([t_old, spline.t_end + h])
    y_all = np.concatenate([y_old, y_old[-1] + slope * h])
    return fit_values(t_all, y_all, spline.t0, n + 1, d)


def extrapolate(spline: BSpline, method: ExtrapolationMethod) -> BSpline:
    if method.kind is Extrapolation.JERK:
        return extrapolate_jerk(spline)
    return extrapolate_velocity(spline, method)


def impute_missing(
    last_known: BSpline,
    age: float,
    method: ExtrapolationMethod | None = None,
    tau: float = 0.0,
    n_intervals: int | None = None,
) -> BSpline:
    """Bring ``last_known`` forward by ``age + tau`` seconds.

    The spline is extended one interval at a time, ``ceil((age + tau) / d)``
    times, and then shifted so the horizon length is preserved.
    """
    if age < 0 or tau < 0:
        raise ArgumentError("age and tau must be non-negative")
    method = method or ExtrapolationMethod()
    n = last_known.n_intervals if n_intervals is None else n_intervals
    total = age + tau
    if total == 0:
        return last_known
    d = last_known.interval_len
    steps = math.ceil(total / d - 1e-9)
    out = last_known
    for _ in range(steps):
        out = extrapolate(out, method)
    return shift_domain(out, total, n_intervals=n, samples_per_interval=method.samples_per_interval)


def compensate_delay(
    received: BSpline, latency: float, method: ExtrapolationMethod | None = None
) -> BSpline:
    """Advance a forecast that arrived ``latency`` seconds late."""
    return impute_missing(received, latency, method, tau=0.0)


@functools.lru_cache(maxsize=256)
def imputation_matrix(
    n: int, interval_len: float, age: float, method: ExtrapolationMethod | None = None
) -> np.ndarray:
    """Linear map of coefficients performed by :func:`impute_missing`.

    Extrapolation, shifting and refitting are all linear in the
    coefficients, so the map is assembled once from unit vectors and reused
    by the simulator.
    """
    eye = np.eye(n + 3)
    cols = [impute_missing(BSpline(0.0, interval_len, e), age, method).coeffs for e in eye]
    M = np.column_stack(cols)
    M.setflags(write=False)
    return M
