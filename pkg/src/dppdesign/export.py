"""CSV writers for solver tables, schedules and simulation output.

Floats are written with ``repr`` so files are byte-stable and round-trip.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dpp_solver import MinTimeTable, Schedule, ValueTableMaxD
from .experiment_sim import SummaryRow, Trajectory

MAX_D_COLUMNS = ("d", "t", "u", "t_next")
MIN_TIME_COLUMNS = ("d", "v", "dt")
SCHEDULE_COLUMNS = ("update", "time", "predicted_d", "stage_length")
TRAJECTORY_COLUMNS = (
    "replication",
    "stage",
    "start_time",
    "n_measurements",
    "x1",
    "x2",
    "a_hat",
    "b_hat",
    "observed_d",
    "cumulative_time",
)
SUMMARY_COLUMNS = ("cumulative_time", "median_d", "q25_d", "q75_d", "policy")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def _write(path: Path | str | None, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def max_d_table_rows(table: ValueTableMaxD, t_stride: int = 1):
    """Long format, one row per (grid D, time); ``t_next`` is empty when no update remains."""
    T = table.u.shape[1] - 1
    for i, d in enumerate(table.grid):
        for t in range(0, T + 1, t_stride):
            tn = int(table.policy[i, t])
            yield float(d), t, float(table.u[i, t]), (tn if tn >= 0 else None)


def write_max_d_table(table: ValueTableMaxD, path=None, t_stride: int = 1) -> str:
    return _write(path, MAX_D_COLUMNS, max_d_table_rows(table, t_stride))


def write_min_time_table(table: MinTimeTable, path=None) -> str:
    rows = (
        (float(d), int(v), (int(p) if p >= 0 else None))
        for d, v, p in zip(table.grid, table.v, table.policy)
    )
    return _write(path, MIN_TIME_COLUMNS, rows)


def write_schedule(schedule: Schedule, path=None) -> str:
    rows = (
        (k, t, float(d), n)
        for k, (t, d, n) in enumerate(zip(schedule.update_times, schedule.predicted_d, schedule.stage_lengths))
    )
    return _write(path, SCHEDULE_COLUMNS, rows)


def trajectory_rows(trajectories: Sequence[Trajectory]):
    for tr in trajectories:
        for k, (s, cum) in enumerate(zip(tr.stages, tr.cumulative_times())):
            a = s.mle_after.a if s.mle_after is not None else None
            b = s.mle_after.b if s.mle_after is not None else None
            yield (
                tr.replication_id,
                k,
                s.start_time,
                s.n_measurements,
                float(s.covariates[0]),
                float(s.covariates[1]),
                a,
                b,
                float(s.observed_d),
                cum,
            )


def write_trajectories(trajectories: Sequence[Trajectory], path=None) -> str:
    return _write(path, TRAJECTORY_COLUMNS, trajectory_rows(trajectories))


def write_summary(rows: Sequence[SummaryRow], path=None) -> str:
    return _write(
        path,
        SUMMARY_COLUMNS,
        ((r.cumulative_time, r.median_d, r.q25_d, r.q75_d, r.policy) for r in rows),
    )
