"""Deterministic CSV writers. Every file starts with a ``# schema:`` line."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .metrics import MetricsSeries

__all__ = [
    "SCHEMA_VERSION",
    "format_value",
    "write_csv",
    "read_csv",
    "trace_table",
    "mse_table",
    "summary_table",
    "collate",
]

SCHEMA_VERSION = 1


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, schema: str, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# schema: {schema} v{SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path) -> tuple[str, list[str], list[list[str]]]:
    """Return ``(schema line, header, rows)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    schema = lines[0]
    rows = list(csv.reader(lines[1:]))
    return schema, rows[0] if rows else [], rows[1:]


def trace_table(trace: np.ndarray, eps_y: np.ndarray, eps_s: np.ndarray, V: int):
    header = ["time"]
    header += [f"sigma_{a}" for a in range(V)]
    header += [f"sigma_dot_{a}" for a in range(V)]
    header += [f"eps_y_{a}" for a in range(V)]
    header += [f"eps_s_{a}" for a in range(V)]
    data = np.hstack([trace, eps_y, eps_s]) if len(trace) else np.zeros((0, len(header)))
    return header, data.tolist()


def mse_table(series: MetricsSeries):
    V = series.mse_pos_agents.shape[1] if series.mse_pos_agents.ndim == 2 else 0
    header = ["window_end", "mse_pos_max", "mse_speed_max"]
    header += [f"mse_pos_{a}" for a in range(V)]
    header += [f"mse_speed_{a}" for a in range(V)]
    rows = []
    for i, t in enumerate(series.t):
        rows.append(
            [t, series.mse_pos[i], series.mse_speed[i]]
            + list(series.mse_pos_agents[i])
            + list(series.mse_speed_agents[i])
        )
    return header, rows


def summary_table(summary: dict):
    return ["key", "value"], [[k, summary[k]] for k in sorted(summary)]


def collate(columns: dict, key: str):
    """Figure layout: one time column and one column per swept value.

    ``columns`` maps a label to a :class:`MetricsSeries`; ``key`` is
    ``"mse_pos"`` or ``"mse_speed"``. Shorter series are padded with blanks.
    """
    labels = list(columns)
    if not labels:
        return ["window_end"], []
    longest = max(labels, key=lambda k: len(columns[k]))
    times = columns[longest].t
    rows = []
    for i, t in enumerate(times):
        row = [t]
        for k in labels:
            s = getattr(columns[k], key)
            row.append(s[i] if i < len(s) else "")
        rows.append(row)
    return ["window_end"] + [str(k) for k in labels], rows
