"""Formation and speed errors, windowed mean squares and threshold verdicts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .scenario import FormationSpec, PathSpec, path_position

__all__ = [
    "MetricsSeries",
    "errors_at",
    "error_series",
    "windowed_mse",
    "verdict",
    "default_thresholds",
]

SPEED_THRESHOLD = 0.05**2


def default_thresholds(form: FormationSpec) -> tuple[float, float]:
    """``((0.05 * radius)^2, 0.05^2)``: 5 % of the formation scale, 5 cm/s."""
    return ((0.05 * form.radius) ** 2, SPEED_THRESHOLD)


def errors_at(sigmas, sigma_dots, path: PathSpec, v_target: float, form: FormationSpec | None = None):
    """Per-agent ``(eps_y, eps_s)`` at one instant.

    ``eps_y`` is the distance from the agent to its slot around the path
    point at the mean path parameter. With world-frame offsets it reduces
    to the distance between path points; ``form`` is accepted for
    completeness and only checked for size.
    """
    sig = np.asarray(sigmas, dtype=float)
    if form is not None and form.V != len(sig):
        raise ArgumentError(f"{len(sig)} agents for a {form.V}-slot formation")
    p = path_position(path, sig)
    p_bar = path_position(path, sig.mean())
    eps_y = np.linalg.norm(p - p_bar[None, :], axis=-1)
    eps_s = np.abs(np.asarray(sigma_dots, dtype=float) - v_target)
    return eps_y, eps_s


def error_series(trace: np.ndarray, V: int, path: PathSpec, v_target: float) -> tuple[np.ndarray, np.ndarray]:
    """Errors for a trace with rows ``(t, sigma_0..V-1, sigma_dot_0..V-1)``."""
    trace = np.asarray(trace, dtype=float).reshape(-1, 1 + 2 * V)
    sig = trace[:, 1 : 1 + V]
    sd = trace[:, 1 + V :]
    p = path_position(path, sig)
    p_bar = path_position(path, sig.mean(axis=1))
    eps_y = np.linalg.norm(p - p_bar[:, None, :], axis=-1)
    eps_s = np.abs(sd - v_target)
    return eps_y, eps_s


@dataclass(frozen=True)
class MetricsSeries:
    """Windowed mean squares; ``*_agents`` keep the per-agent values.

    ``t`` marks window ends.
    """

    window_len: float
    t: np.ndarray
    mse_pos: np.ndarray
    mse_speed: np.ndarray
    mse_pos_agents: np.ndarray
    mse_speed_agents: np.ndarray
    thresholds: tuple[float, float]

    def __len__(self) -> int:
        return len(self.t)


def _window_means(values: np.ndarray, per_window: int) -> np.ndarray:
    n_win = values.shape[0] // per_window
    v = values[: n_win * per_window]
    return (v * v).reshape(n_win, per_window, *values.shape[1:]).mean(axis=1)


def windowed_mse(
    eps_y,
    eps_s,
    dt: float,
    window_len: float = 10.0,
    thresholds: tuple[float, float] = (0.25, SPEED_THRESHOLD),
    t0: float = 0.0,
) -> MetricsSeries:
    """Mean squares over contiguous windows of ``window_len`` seconds.

    ``eps_y`` and ``eps_s`` are ``(samples, agents)`` arrays sampled every
    ``dt`` from ``t0``; a trailing partial window is dropped.
    """
    per = window_len / dt
    if abs(per - round(per)) > 1e-9 or round(per) < 1:
        raise ArgumentError(f"dt={dt} does not divide window_len={window_len}")
    per = int(round(per))
    ey = np.asarray(eps_y, dtype=float)
    es = np.asarray(eps_s, dtype=float)
    if ey.ndim == 1:
        ey = ey[:, None]
    if es.ndim == 1:
        es = es[:, None]
    py = _window_means(ey, per)
    ps = _window_means(es, per)
    n_win = py.shape[0]
    t = t0 + window_len * np.arange(1, n_win + 1)
    agents = ey.shape[1]
    return MetricsSeries(
        window_len,
        t,
        py.max(axis=1) if n_win else np.zeros(0),
        ps.max(axis=1) if n_win else np.zeros(0),
        py.reshape(n_win, agents),
        ps.reshape(n_win, agents),
        tuple(thresholds),
    )


def verdict(series: MetricsSeries, transient: float = 100.0) -> dict[str, bool]:
    """Whether every window starting at or after ``transient`` is below threshold."""
    keep = series.t - series.window_len >= transient - 1e-9
    pos_ok = bool(np.all(series.mse_pos[keep] <= series.thresholds[0]))
    speed_ok = bool(np.all(series.mse_speed[keep] <= series.thresholds[1]))
    return {"pos": pos_ok, "speed": speed_ok, "both": pos_ok and speed_ok}
