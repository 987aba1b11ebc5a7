"""Uniform clamped B-splines over equally spaced break points.

Forecasts exchanged between agents are cubic splines of path distance
against time. The knot vector is implicitly open-uniform::

    (t0, t0, t0, t0, t0 + d, ..., t_end, t_end, t_end, t_end)

with ``d = interval_len``. Basis functions are evaluated with the
Cox--de Boor recursion; :data:`BASIS_TABLES` keeps the closed-form
polynomial coefficients of the four distinct cubic shapes on unit
intervals for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import ArgumentError, DegenerateError, DomainError, RankError

__all__ = [
    "BSpline",
    "BasisTables",
    "BASIS_TABLES",
    "basis_matrix",
    "evaluate",
    "derivative",
    "ideal_line_coeffs",
    "ideal_line_deltas",
    "fit_least_squares",
    "fit_values",
    "shift_domain",
]

# Relative slack when checking that an abscissa lies inside the domain.
_DOMAIN_RTOL = 1e-9


def _knots(n: int, degree: int) -> np.ndarray:
    """Normalized clamped knot vector for ``n`` unit intervals."""
    return np.concatenate([np.zeros(degree), np.arange(n + 1.0), np.full(degree, float(n))])


def _basis(u: np.ndarray, n: int, degree: int, span: np.ndarray | None = None) -> np.ndarray:
    """Cox--de Boor basis values, shape ``(len(u), n + degree)``.

    ``span`` selects the polynomial piece used for each abscissa. By default
    it is the interval containing ``u`` (the last interval for ``u == n``);
    passing it explicitly evaluates the analytic continuation of that piece.
    """
    u = np.asarray(u, dtype=float)
    t = _knots(n, degree)
    if span is None:
        span = np.clip(np.floor(u), 0, n - 1).astype(int)
    m = u.shape[0]
    nb = len(t) - 1
    N = np.zeros((m, nb))
    N[np.arange(m), span + degree] = 1.0
    uc = u[:, None]
    for d in range(1, degree + 1):
        j = np.arange(nb - d)
        ld = t[j + d] - t[j]
        rd = t[j + d + 1] - t[j + 1]
        left = np.where(ld > 0, (uc - t[j]) / np.where(ld > 0, ld, 1.0), 0.0)
        right = np.where(rd > 0, (t[j + d + 1] - uc) / np.where(rd > 0, rd, 1.0), 0.0)
        N = left * N[:, :-1] + right * N[:, 1:]
    return N


@dataclass(frozen=True, eq=False)
class BSpline:
    """Clamped uniform B-spline ``S(t) = sum_j coeffs[j] * S_j(t)``.

    Parameters
    ----------
    t0 : float
        Domain start in seconds.
    interval_len : float
        Spacing between break points, in seconds.
    coeffs : array_like
        Control coefficients; ``len(coeffs) - degree`` intervals.
    degree : int
        Polynomial degree. Forecasts are cubic; lower degrees arise only as
        derivatives.
    """

    t0: float
    interval_len: float
    coeffs: np.ndarray
    degree: int = 3

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float).ravel()
        if len(c) < self.degree + 1:
            raise DegenerateError(
                f"need at least {self.degree + 1} coefficients, got {len(c)}"
            )
        if not self.interval_len > 0:
            raise ArgumentError(f"interval_len must be positive, got {self.interval_len}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "interval_len", float(self.interval_len))

    @property
    def n_intervals(self) -> int:
        return len(self.coeffs) - self.degree

    @property
    def t_end(self) -> float:
        return self.t0 + self.n_intervals * self.interval_len

    @property
    def domain(self) -> tuple[float, float]:
        return (self.t0, self.t_end)

    def _to_u(self, t, extend: bool = False) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        u = (t - self.t0) / self.interval_len
        n = self.n_intervals
        tol = _DOMAIN_RTOL * max(1.0, n)
        bad = u < -tol
        if not extend:
            bad |= u > n + tol
        if np.any(bad):
            raise DomainError(f"t={t[bad][0]} outside domain [{self.t0}, {self.t_end}]")
        return np.clip(u, 0.0, None if extend else float(n))

    def basis(self, t) -> np.ndarray:
        """Basis matrix with one row per abscissa in ``t``."""
        return _basis(self._to_u(t), self.n_intervals, self.degree)

    def __call__(self, t):
        vals = self.basis(t) @ self.coeffs
        return vals if np.ndim(t) else float(vals[0])

    def extended(self, t):
        """Evaluate, continuing the last polynomial piece past ``t_end``."""
        u = self._to_u(t, extend=True)
        n = self.n_intervals
        span = np.clip(np.floor(u), 0, n - 1).astype(int)
        vals = _basis(u, n, self.degree, span) @ self.coeffs
        return vals if np.ndim(t) else float(vals[0])

    def derivative(self, order: int = 1) -> "BSpline":
        return derivative(self, order)

    def with_coeffs(self, coeffs) -> "BSpline":
        return BSpline(self.t0, self.interval_len, coeffs, self.degree)

    def __repr__(self) -> str:
        return (
            f"BSpline(t0={self.t0!r}, interval_len={self.interval_len!r}, "
            f"n_intervals={self.n_intervals}, degree={self.degree})"
        )


def basis_matrix(t, t0: float, n: int, interval_len: float, degree: int = 3) -> np.ndarray:
    """Basis matrix of the clamped uniform space with ``n`` intervals."""
    probe = BSpline(t0, interval_len, np.zeros(n + degree), degree)
    return probe.basis(t)


def evaluate(spline: BSpline, t):
    """Value of ``spline`` at ``t`` (scalar or array)."""
    return spline(t)


def derivative(spline: BSpline, order: int = 1) -> BSpline:
    """Derivative spline of degree ``spline.degree - order`` on the same domain."""
    if order < 0 or order > spline.degree:
        raise ArgumentError(f"derivative order must be in [0, {spline.degree}], got {order}")
    out = spline
    for _ in range(order):
        p = out.degree
        t = _knots(out.n_intervals, p)
        c = out.coeffs
        span = t[p + 1 : p + 1 + len(c) - 1] - t[1 : len(c)]
        d = p * np.diff(c) / (span * out.interval_len)
        out = BSpline(out.t0, out.interval_len, d, p - 1)
    return out


def ideal_line_coeffs(m: float, k: float, n: int) -> np.ndarray:
    """Coefficients of the spline equal to the line ``m + k * u``.

    ``u`` is time measured in intervals from the domain start, so ``k`` is
    the advance per interval. The pattern is
    ``m + k * [0, 1/3, 1, 2, ..., n - 1, n - 1/3, n]``.
    """
    if n < 3:
        raise ArgumentError(f"ideal line pattern needs n >= 3 intervals, got {n}")
    pattern = np.concatenate([[0.0, 1.0 / 3.0], np.arange(1.0, n), [n - 1.0 / 3.0, float(n)]])
    return m + k * pattern


def ideal_line_deltas(k: float, n: int) -> np.ndarray:
    """Telescoped ideal coefficients: ``k * [1/3, 2/3, 1, ..., 1, 2/3, 1/3]``."""
    if n < 3:
        raise ArgumentError(f"ideal line pattern needs n >= 3 intervals, got {n}")
    return k * np.concatenate([[1.0 / 3.0, 2.0 / 3.0], np.ones(n - 2), [2.0 / 3.0, 1.0 / 3.0]])


def fit_values(t, y, t0: float, n: int, interval_len: float) -> BSpline:
    """Least-squares cubic spline through ``(t, y)`` on ``n`` intervals."""
    t = np.asarray(t, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if t.shape != y.shape:
        raise ArgumentError("abscissae and ordinates differ in length")
    ncoef = n + 3
    if len(t) < ncoef:
        raise RankError(f"{len(t)} samples cannot determine {ncoef} coefficients")
    B = basis_matrix(t, t0, n, interval_len)
    coeffs, _, rank, _ = np.linalg.lstsq(B, y, rcond=None)
    if rank < ncoef:
        raise RankError(f"design matrix rank {rank} < {ncoef}")
    return BSpline(t0, interval_len, coeffs)


def fit_least_squares(samples, t0: float, n: int, interval_len: float) -> BSpline:
    """Least-squares fit to a sequence of ``(t, y)`` pairs."""
    arr = np.asarray(samples, dtype=float).reshape(-1, 2)
    return fit_values(arr[:, 0], arr[:, 1], t0, n, interval_len)


def _sample_grid(t0: float, n: int, interval_len: float, per_interval: int) -> np.ndarray:
    return t0 + np.arange(n * per_interval + 1) * (interval_len / per_interval)


def shift_domain(
    spline: BSpline,
    tau: float,
    n_intervals: int | None = None,
    samples_per_interval: int = 2,
) -> BSpline:
    """Re-express ``spline`` on ``[t0 + tau, t0 + tau + n_intervals * d]``.

    Past ``t_end`` the last polynomial piece is continued; callers that want
    a different tail extend the spline first (see :mod:`.imputation`).
    Shifts by whole intervals are exact: interior coefficients are
    reindexed and only the three coefficients at each clamped end are
    recomputed from the value and first two derivatives there. Other
    shifts resample at ``samples_per_interval`` points per interval and
    refit.
    """
    d = spline.interval_len
    n_in = spline.n_intervals
    n_out = n_in if n_intervals is None else int(n_intervals)
    if spline.degree != 3:
        raise ArgumentError("only cubic splines can be shifted")
    if tau < 0 or tau >= n_in * d:
        raise DomainError(f"shift {tau} outside [0, {n_in * d})")
    if tau == 0 and n_out == n_in:
        return spline
    t_new = spline.t0 + tau
    j = tau / d
    j_int = int(round(j))
    if abs(j - j_int) <= 1e-12 * max(1.0, j) and n_out >= 3:
        return _shift_whole(spline, j_int, n_out)
    grid = _sample_grid(t_new, n_out, d, samples_per_interval)
    return fit_values(grid, spline.extended(grid), t_new, n_out, d)


def _clamped_start(value: float, d1: float, d2: float, d: float) -> tuple[float, float, float]:
    """First three coefficients of a clamped cubic from end derivatives."""
    c0 = value
    c1 = c0 + d1 * d / 3.0
    # s''(t0) = (6 c0 - 9 c1 + 3 c2) / d^2
    c2 = (d2 * d * d - 6.0 * c0 + 9.0 * c1) / 3.0
    return c0, c1, c2


def _shift_whole(spline: BSpline, j: int, n_out: int) -> BSpline:
    d = spline.interval_len
    n_in = spline.n_intervals
    t_new = spline.t0 + j * d
    t_end_new = t_new + n_out * d
    ncoef = n_out + 3
    # new interior coefficient i maps to old interior coefficient i + j
    # when both are away from clamped ends (3 <= index <= n - 1).
    interior = [i for i in range(3, n_out) if 3 <= i + j <= n_in - 1]
    needed = set(range(3, n_out))
    if set(interior) != needed:
        grid = _sample_grid(t_new, n_out, d, 4)
        return fit_values(grid, spline.extended(grid), t_new, n_out, d)
    c = np.empty(ncoef)
    for i in interior:
        c[i] = spline.coeffs[i + j]
    s0, s1, s2 = spline, spline.derivative(1), spline.derivative(2)
    c[0:3] = _clamped_start(s0.extended(t_new), s1.extended(t_new), s2.extended(t_new), d)
    # mirrored formulas at the right end (time reversed, odd derivative flips)
    e0, e1, e2 = _clamped_start(
        s0.extended(t_end_new), -s1.extended(t_end_new), s2.extended(t_end_new), d
    )
    c[ncoef - 1], c[ncoef - 2], c[ncoef - 3] = e0, e1, e2
    return BSpline(t_new, d, c)


class BasisTables(NamedTuple):
    """Polynomial coefficient matrices of the first four cubic basis shapes.

    ``A[p][j][i]`` is the coefficient of ``x**p`` of basis ``S_{j+1,3}`` on the
    unit interval ``[i, i + 1]`` of the knot vector ``(0,0,0,0,1,2,...)``.
    """

    A0: tuple
    A1: tuple
    A2: tuple
    A3: tuple

    def as_arrays(self) -> list[np.ndarray]:
        return [np.array(a, dtype=float) for a in self]


_F = Fraction
BASIS_TABLES = BasisTables(
    A0=(
        (_F(1), _F(0), _F(0), _F(0)),
        (_F(0), _F(2), _F(0), _F(0)),
        (_F(0), _F(-3, 2), _F(9, 2), _F(0)),
        (_F(0), _F(2, 3), _F(-22, 3), _F(32, 3)),
    ),
    A1=(
        (_F(-3), _F(0), _F(0), _F(0)),
        (_F(3), _F(-3), _F(0), _F(0)),
        (_F(0), _F(9, 2), _F(-9, 2), _F(0)),
        (_F(0), _F(-2), _F(10), _F(-8)),
    ),
    A2=(
        (_F(3), _F(0), _F(0), _F(0)),
        (_F(-9, 2), _F(3, 2), _F(0), _F(0)),
        (_F(3, 2), _F(-3), _F(3, 2), _F(0)),
        (_F(0), _F(2), _F(-4), _F(2)),
    ),
    A3=(
        (_F(-1), _F(0), _F(0), _F(0)),
        (_F(7, 4), _F(-1, 4), _F(0), _F(0)),
        (_F(-11, 12), _F(7, 12), _F(-2, 12), _F(0)),
        (_F(1, 6), _F(-1, 2), _F(1, 2), _F(-1, 6)),
    ),
)
