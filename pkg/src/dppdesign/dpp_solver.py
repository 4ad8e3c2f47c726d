"""Backward-induction solvers for the optimal update times.

Two problems on a grid of accumulated criterion values D:

* max-D: given horizon ``T`` and update cost ``Cs``, choose update times to
  maximise the D accumulated by ``T``. ``u(D, t)`` is the optimal future gain
  from state (D, t) when updating immediately.
* min-time: given a target ``D_final``, minimise the time needed to reach it.
  ``v(D)`` is the optimal remaining time when updating immediately.

Time is integer (one unit per measurement). A stage started at ``t`` pays
``Cs`` and then measures until the next update, moving D by ``h(D)`` per unit.
The continuation value is read at the nearest grid point (ties go up) while
the stage gain uses the unrounded D.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .accumulation_model import AccumulationModel

SPACINGS = ("geometric", "uniform")


class GridOverflowError(RuntimeError):
    """A reachable D left the top of the grid."""


class SearchSpaceError(RuntimeError):
    """A brute-force enumeration would exceed its size cap."""


def make_grid(d_min: float, d_max: float, n_d: int, spacing: str = "geometric") -> np.ndarray:
    if n_d < 2:
        raise ValueError("n_d must be at least 2")
    if not (0 < d_min < d_max):
        raise ValueError("need 0 < d_min < d_max")
    if spacing == "geometric":
        grid = np.geomspace(d_min, d_max, n_d)
    elif spacing == "uniform":
        grid = np.linspace(d_min, d_max, n_d)
    else:
        raise ValueError(f"spacing must be one of {SPACINGS}")
    grid[0], grid[-1] = d_min, d_max
    return grid


def nearest_index(grid: np.ndarray, D: float) -> int:
    """Index of the grid value nearest to ``D``; ties go to the upper point.

    Values outside the grid clamp to the end points.
    """
    k = bisect.bisect_right(grid, D) - 1
    if k < 0:
        return 0
    if k + 1 < len(grid) and (D - grid[k]) >= (grid[k + 1] - D):
        return k + 1
    return k


# -- max-D ------------------------------------------------------------------

@dataclass(frozen=True)
class MaxDConfig:
    T: int
    Cs: int
    D0: float
    d_min: float | None = None
    d_max: float | None = None
    n_d: int = 2000
    spacing: str = "geometric"

    def __post_init__(self):
        if int(self.T) != self.T or int(self.Cs) != self.Cs:
            raise ValueError("T and Cs must be integers")
        if not (0 <= self.Cs < self.T):
            raise ValueError(f"need 0 <= Cs < T, got Cs={self.Cs}, T={self.T}")
        if not self.D0 > 0:
            raise ValueError("D0 must be positive")
        if self.n_d < 2:
            raise ValueError("n_d must be at least 2")
        if self.spacing not in SPACINGS:
            raise ValueError(f"spacing must be one of {SPACINGS}")
        if self.d_min is not None and not (0 < self.d_min <= self.D0):
            raise ValueError("need 0 < d_min <= D0")

    def resolved_bounds(self, model: AccumulationModel) -> tuple[float, float]:
        d_min = self.D0 if self.d_min is None else self.d_min
        reach = self.D0 + model.h_star * self.T
        d_max = reach if self.d_max is None else self.d_max
        if d_max < reach:
            raise GridOverflowError(
                f"d_max={d_max:g} is below D0 + h_star*T = {reach:g}; reachable D would leave the grid"
            )
        return d_min, d_max

    def grid(self, model: AccumulationModel) -> np.ndarray:
        return make_grid(*self.resolved_bounds(model), self.n_d, self.spacing)


@dataclass(frozen=True)
class Schedule:
    """Update times with the model D at each update.

    ``final_d`` is the model D at the end (horizon or target). ``total_cost``
    is only set for min-time schedules.
    """

    update_times: list[int]
    predicted_d: list[float]
    final_d: float
    horizon: int
    Cs: int
    total_cost: int | None = None

    @property
    def stage_lengths(self) -> list[int]:
        ends = self.update_times[1:] + [self.horizon]
        return [e - s for s, e in zip(self.update_times, ends)]

    @property
    def n_updates(self) -> int:
        return len(self.update_times)


@dataclass(frozen=True)
class ValueTableMaxD:
    config: MaxDConfig
    model: AccumulationModel
    grid: np.ndarray
    h_grid: np.ndarray
    u: np.ndarray
    policy: np.ndarray = field(repr=False)

    def value(self, D: float, t: int = 0) -> float:
        return float(self.u[nearest_index(self.grid, D), t])


def solve_max_d(config: MaxDConfig, model: AccumulationModel | None = None) -> ValueTableMaxD:
    model = model or AccumulationModel()
    grid = config.grid(model)
    hg = np.asarray(model.h(grid), dtype=float)
    T, Cs = int(config.T), int(config.Cs)
    u = np.zeros((grid.size, T + 1))
    policy = np.full((grid.size, T + 1), -1, dtype=np.int32)
    _kernels.max_d_backward(grid, hg, T, Cs, u, policy)
    return ValueTableMaxD(config, model, grid, hg, u, policy)


def extract_schedule_max_d(table: ValueTableMaxD, D0: float | None = None) -> Schedule:
    cfg = table.config
    T, Cs = int(cfg.T), int(cfg.Cs)
    grid, hg = table.grid, table.h_grid
    i = nearest_index(grid, cfg.D0 if D0 is None else D0)
    start = float(grid[i])
    times, ds = [0], [start]
    t = 0
    while True:
        tn = int(table.policy[i, t])
        if tn < 0:
            break
        Dn = grid[i] + hg[i] * float(tn - t - Cs)
        if Dn > grid[-1]:
            raise GridOverflowError(f"schedule left the grid at t={tn} (D={Dn:g})")
        if tn >= T - Cs:
            break
        i, t = nearest_index(grid, Dn), tn
        times.append(t)
        ds.append(float(grid[i]))
    value = float(table.u[nearest_index(grid, cfg.D0 if D0 is None else D0), 0])
    return Schedule(times, ds, start + value, T, Cs)


def evaluate_max_d_schedule(
    update_times, D0: float, T: int, Cs: int, model: AccumulationModel, grid: np.ndarray | None = None
) -> float:
    """Gain accumulated by ``T`` under a fixed schedule.

    With ``grid`` the state is rounded after every stage exactly as in the
    solver; without it the dynamics are followed exactly.
    """
    times = list(update_times) + [T]
    if times[0] != 0:
        raise ValueError("schedules start at time 0")
    hg = None if grid is None else np.asarray(model.h(grid), dtype=float)
    D = D0 if grid is None else float(grid[nearest_index(grid, D0)])
    gains = []
    for t, tn in zip(times[:-1], times[1:]):
        if tn - t <= Cs:
            raise ValueError("gaps between updates must exceed Cs")
        hd = model.h(D) if hg is None else float(hg[nearest_index(grid, D)])
        Dn = D + hd * float(tn - t - Cs)
        gains.append(Dn - D)
        D = Dn if grid is None else float(grid[nearest_index(grid, Dn)])
    total = 0.0
    for g in reversed(gains):
        total = total + g
    return total


def count_max_d_schedules(T: int, Cs: int) -> int:
    """Number of admissible update sequences starting at 0 in [0, T]."""
    f = [0] * (T + 1)
    suffix = [0] * (T + 2)
    for t in range(T, -1, -1):
        f[t] = 1 if t >= T - Cs else suffix[t + Cs + 1]
        suffix[t] = suffix[t + 1] + f[t]
    return f[0]


def brute_force_max_d(
    T: int, Cs: int, D0: float, grid: np.ndarray, model: AccumulationModel | None = None, cap: int = 500_000
) -> tuple[float, list[int]]:
    """Exhaustive search over every admissible update sequence.

    Uses the solver's rounding rule, so the optimum agrees with
    ``solve_max_d`` to the last bit.
    """
    model = model or AccumulationModel()
    n = count_max_d_schedules(T, Cs)
    if n > cap:
        raise SearchSpaceError(f"{n} schedules exceed the cap of {cap}")
    hg = np.asarray(model.h(grid), dtype=float)
    g = [float(v) for v in grid]
    hl = [float(v) for v in hg]

    def rec(i: int, t: int) -> tuple[float, list[int]]:
        if t >= T - Cs:
            return 0.0, []
        best, best_tail = -math.inf, []
        for tn in range(t + Cs + 1, T + 1):
            Dn = g[i] + hl[i] * float(tn - t - Cs)
            rest, tail = rec(nearest_index(grid, Dn), tn)
            val = rest + (Dn - g[i])
            if val > best:
                best, best_tail = val, [tn] + tail
        return best, best_tail

    value, tail = rec(nearest_index(grid, D0), 0)
    return value, [0] + [s for s in tail if s < T - Cs]


# -- min-time ---------------------------------------------------------------

@dataclass(frozen=True)
class MinTimeConfig:
    D_final: float
    Cs: int
    D0: float
    d_min: float | None = None
    n_d: int = 2000
    spacing: str = "geometric"

    def __post_init__(self):
        if int(self.Cs) != self.Cs or self.Cs < 0:
            raise ValueError("Cs must be a nonnegative integer")
        if not (0 < self.D0 < self.D_final):
            raise ValueError("need 0 < D0 < D_final")
        if self.d_min is not None and not (0 < self.d_min <= self.D0):
            raise ValueError("need 0 < d_min <= D0")
        if self.n_d < 2:
            raise ValueError("n_d must be at least 2")
        if self.spacing not in SPACINGS:
            raise ValueError(f"spacing must be one of {SPACINGS}")

    def grid(self) -> np.ndarray:
        d_min = self.D0 if self.d_min is None else self.d_min
        return make_grid(d_min, self.D_final, self.n_d, self.spacing)


@dataclass(frozen=True)
class MinTimeTable:
    config: MinTimeConfig
    model: AccumulationModel
    grid: np.ndarray
    h_grid: np.ndarray
    v: np.ndarray
    policy: np.ndarray = field(repr=False)

    def value(self, D: float) -> int:
        if D >= self.config.D_final:
            return 0
        return int(self.v[nearest_index(self.grid, D)])


def min_time_cap(D: float, hd: float, D_final: float, Cs: int) -> int:
    """Longest stage worth considering: one stage that reaches the target."""
    return Cs + int(math.ceil((D_final - D) / hd))


def _min_time_next(grid, i: int, Dn: float, D_final: float) -> int | None:
    # None means the target is reached
    if Dn >= D_final:
        return None
    k = nearest_index(grid, Dn)
    return k if k > i else i + 1


def solve_min_time(config: MinTimeConfig, model: AccumulationModel | None = None) -> MinTimeTable:
    model = model or AccumulationModel()
    grid = config.grid()
    hg = np.asarray(model.h(grid), dtype=float)
    v = np.zeros(grid.size, dtype=np.int64)
    policy = np.full(grid.size, -1, dtype=np.int64)
    _kernels.min_time_descending(grid, hg, float(config.D_final), int(config.Cs), v, policy)
    return MinTimeTable(config, model, grid, hg, v, policy)


def extract_schedule_min_time(table: MinTimeTable, D0: float | None = None) -> Schedule:
    cfg = table.config
    D0 = cfg.D0 if D0 is None else D0
    Cs = int(cfg.Cs)
    if D0 >= cfg.D_final:
        return Schedule([], [], D0, 0, Cs, total_cost=0)
    grid, hg = table.grid, table.h_grid
    i = nearest_index(grid, D0)
    t = 0
    times, ds = [], []
    while True:
        dt = int(table.policy[i])
        times.append(t)
        ds.append(float(grid[i]))
        Dn = grid[i] + hg[i] * float(dt - Cs)
        t += dt
        nxt = _min_time_next(grid, i, Dn, cfg.D_final)
        if nxt is None:
            return Schedule(times, ds, float(Dn), t, Cs, total_cost=t)
        if grid[nxt] >= cfg.D_final:
            return Schedule(times, ds, float(grid[nxt]), t, Cs, total_cost=t)
        i = nxt


def brute_force_min_time(
    D_final: float,
    Cs: int,
    D0: float,
    grid: np.ndarray,
    model: AccumulationModel | None = None,
    cap: int = 2_000_000,
) -> tuple[int, list[int]]:
    """Depth-first search over stage lengths with cost bounding.

    Returns the minimal total time and its stage lengths. Paths are explored
    shortest-stage first and only strict improvements are kept, so ties
    resolve the same way as in the solver.
    """
    model = model or AccumulationModel()
    if D0 >= D_final:
        return 0, []
    hg = np.asarray(model.h(grid), dtype=float)
    g = [float(x) for x in grid]
    hl = [float(x) for x in hg]
    best = [math.inf, []]
    visited = [0]

    def rec(i: int, cost: int, path: list[int]) -> None:
        visited[0] += 1
        if visited[0] > cap:
            raise SearchSpaceError(f"search visited more than {cap} nodes")
        if g[i] >= D_final:
            if cost < best[0]:
                best[0], best[1] = cost, path
            return
        if cost + Cs + 1 >= best[0]:
            return
        for dt in range(Cs + 1, min_time_cap(g[i], hl[i], D_final, Cs) + 1):
            if cost + dt >= best[0]:
                break
            Dn = g[i] + hl[i] * float(dt - Cs)
            nxt = _min_time_next(grid, i, Dn, D_final)
            if nxt is None:
                best[0], best[1] = cost + dt, path + [dt]
                break
            rec(nxt, cost + dt, path + [dt])

    rec(nearest_index(grid, D0), 0, [])
    return int(best[0]), best[1]
