"""Acceptance sweep shared by ``dppdesign bench`` and the test suite.

Each check returns a :class:`CheckResult`; a check passes only if its
numerical condition holds and it finished inside its time budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.stats import binomtest

from .accumulation_model import (
    ETA,
    H_STAR,
    AccumulationModel,
    accumulation_convergence_check,
    max_d_continuous,
    min_time_closed_form,
)
from .cloglog_model import ModelParams, optimal_criterion, solve_optimal_design
from .dpp_solver import (
    MaxDConfig,
    MinTimeConfig,
    Schedule,
    ValueTableMaxD,
    brute_force_max_d,
    brute_force_min_time,
    count_max_d_schedules,
    extract_schedule_max_d,
    solve_max_d,
    solve_min_time,
)
from .experiment_sim import AdhocGrowth, DppMaxD, SimulationConfig, Trajectory, run_replications

Z_REFERENCE = (0.97963269129, -1.337736677)

# true parameters, horizon and cost of the laboratory benchmark; the guess is
# displaced so that the median observed D after initialization is near 0.1408
LAB_BENCHMARK = dict(
    true_params=ModelParams(0.24, -61.0),
    T=3500,
    Cs=228,
    init_stage=100,
    init_guess=ModelParams(240.0, -59860.0),
    n_reps=100,
    seed=0,
    D0_model=0.1408,
    D0_target=0.1408,
    D0_tolerance=0.03,
    adhoc_rate=0.10,
    n_d=2000,
)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number}. {self.name}: {self.detail} ({self.seconds:.1f}s / {self.budget:.0f}s)"


def _finish(number, name, budget, t0, ok, detail, **values) -> CheckResult:
    dt = time.perf_counter() - t0
    return CheckResult(number, name, bool(ok) and dt < budget, detail, dt, budget, values)


@lru_cache(maxsize=8)
def max_d_table(T: int, Cs: int, D0: float, n_d: int = 2000, spacing: str = "geometric") -> ValueTableMaxD:
    return solve_max_d(MaxDConfig(T, Cs, D0, n_d=n_d, spacing=spacing))


def check_design() -> CheckResult:
    t0 = time.perf_counter()
    solve_optimal_design.cache_clear()
    z1, z2 = solve_optimal_design()
    crit = optimal_criterion()
    err = max(abs(z1 - Z_REFERENCE[0]), abs(z2 - Z_REFERENCE[1]))
    ok = err < 1e-6 and abs(crit - H_STAR) < 1e-7
    return _finish(1, "optimal two-point design", 1.0, t0, ok,
                   f"z*=({z1:.11f}, {z2:.11f}) max err {err:.1e}; sqrt det J*={crit:.10f}",
                   z1=z1, z2=z2, criterion=crit)


def check_h() -> CheckResult:
    t0 = time.perf_counter()
    m = AccumulationModel()
    far = m.h(1e12)
    one = m.h(1.0)
    direct = H_STAR / (1.0 + math.exp(ETA))
    ok = abs(far - H_STAR) < 1e-6 and abs(one - direct) < 1e-10
    return _finish(2, "accumulation model h(D)", 1.0, t0, ok,
                   f"h(1e12)-h*={far - H_STAR:.1e}; h(1)={one:.12f} vs {direct:.12f}",
                   h_far=far, h_one=one)


def _largest_t(Cs: int, t_max: int, cap: int) -> int:
    T = t_max
    while count_max_d_schedules(T, Cs) > cap:
        T -= 1
    return T


def oracle_configs(n: int, seed: int, cap: int = 500_000):
    """Random small max-D and min-time instances that brute force can enumerate."""
    rng = np.random.default_rng(seed)
    max_d, min_time = [], []
    for _ in range(n):
        Cs = int(rng.integers(1, 4))
        T = int(rng.integers(Cs + 1, _largest_t(Cs, 40, cap) + 1))
        D0 = float(rng.uniform(0.1, 5.0))
        max_d.append(MaxDConfig(T, Cs, D0, n_d=int(rng.integers(2, 51)),
                                spacing=str(rng.choice(["geometric", "uniform"]))))
    for _ in range(n):
        Cs = int(rng.integers(1, 4))
        D0 = float(rng.uniform(0.3, 3.0))
        min_time.append(MinTimeConfig(D0 * float(rng.uniform(1.5, 6.0)), Cs, D0, n_d=int(rng.integers(2, 51)),
                                      spacing=str(rng.choice(["geometric", "uniform"]))))
    return max_d, min_time


def check_oracle(n_configs: int = 50, seed: int = 0) -> CheckResult:
    t0 = time.perf_counter()
    model = AccumulationModel()
    max_d, min_time = oracle_configs(n_configs, seed)
    bad = []
    for cfg in max_d:
        table = solve_max_d(cfg, model)
        value, _ = brute_force_max_d(cfg.T, cfg.Cs, cfg.D0, table.grid, model)
        if table.value(cfg.D0, 0) != value:
            bad.append(("max-d", cfg))
    for cfg in min_time:
        table = solve_min_time(cfg, model)
        cost, _ = brute_force_min_time(cfg.D_final, cfg.Cs, cfg.D0, table.grid, model)
        if table.value(cfg.D0) != cost:
            bad.append(("min-time", cfg))
    detail = f"{2 * n_configs - len(bad)}/{2 * n_configs} configs equal brute force"
    return _finish(3, "solver equals brute force", 30.0, t0, not bad, detail, mismatches=bad)


def cell_width(grid: np.ndarray) -> np.ndarray:
    gaps = np.diff(grid)
    left = np.concatenate([[gaps[0]], gaps])
    right = np.concatenate([gaps, [gaps[-1]]])
    return np.maximum(left, right)


def sandwich_excess(table: ValueTableMaxD, zero_cost: ValueTableMaxD) -> tuple[float, float, float]:
    """Largest violations of the lower, upper and boundedness inequalities.

    Lower and upper are measured beyond one cell width; boundedness has no slack.
    """
    cfg = table.config
    T, Cs = int(cfg.T), int(cfg.Cs)
    u, u0 = table.u, zero_cost.u
    slack = cell_width(table.grid)[:, None]
    t = np.arange(T + 1)[None, :]
    lower = table.h_grid[:, None] * np.maximum(T - t - Cs, 0)
    low_excess = float(np.max(lower - u - slack))
    span = T - Cs + 1
    up_excess = float(np.max(u[:, :span] - u0[:, Cs:Cs + span] - slack))
    bound_excess = float(np.max(u - table.model.h_star * (T - Cs)))
    return low_excess, up_excess, bound_excess


def check_sandwich(T: int = 1000, D0: float = 0.5, costs=(5, 30)) -> CheckResult:
    t0 = time.perf_counter()
    zero = max_d_table(T, 0, D0)
    parts, ok = [], True
    for Cs in costs:
        lo, up, bd = sandwich_excess(max_d_table(T, Cs, D0), zero)
        ok &= lo <= 0 and up <= 0 and bd <= 0
        parts.append(f"Cs={Cs}: excess lower {lo:.3g}, upper {up:.3g}, bound {bd:.3g}")
    return _finish(4, "sandwich and boundedness", 120.0, t0, ok, "; ".join(parts))


def check_continuum(T: int = 1000, D0: float = 0.5, D_final: float = 5.0, n_d: int = 4000) -> CheckResult:
    t0 = time.perf_counter()
    model = AccumulationModel()
    u = max_d_table(T, 0, D0, n_d).value(D0, 0)
    u_ref = max_d_continuous(model, D0, 0, T)
    v = solve_min_time(MinTimeConfig(D_final, 0, D0, n_d=n_d), model).value(D0)
    v_ref = min_time_closed_form(model, D0, D_final)
    ru, rv = abs(u - u_ref) / u_ref, abs(v - v_ref) / v_ref
    ok = ru < 0.01 and rv < 0.01
    return _finish(5, "zero-cost continuum limit", 120.0, t0, ok,
                   f"u={u:.4f} vs ODE {u_ref:.4f} ({ru:.2%}); v={v} vs integral {v_ref:.4f} ({rv:.2%})",
                   u=u, u_ref=u_ref, v=v, v_ref=v_ref)


def check_update_counts(T: int = 1000) -> CheckResult:
    t0 = time.perf_counter()
    n = {}
    for Cs, D0 in [(5, 0.5), (30, 0.5), (10, 0.5), (10, 5.0)]:
        n[Cs, D0] = extract_schedule_max_d(max_d_table(T, Cs, D0)).n_updates
    ok = n[30, 0.5] < n[5, 0.5] and n[10, 5.0] <= n[10, 0.5]
    detail = (f"updates Cs=5: {n[5, 0.5]}, Cs=30: {n[30, 0.5]}; "
              f"Cs=10 D0=0.5: {n[10, 0.5]}, D0=5: {n[10, 5.0]}")
    return _finish(6, "update count orderings", 120.0, t0, ok, detail)


@dataclass
class BenchmarkResult:
    schedule: Schedule
    dpp: list[Trajectory]
    adhoc: list[Trajectory]

    @property
    def d0_median(self) -> float:
        return float(np.median([tr.stages[0].observed_d for tr in self.dpp]))

    def finals(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([tr.final_d for tr in self.dpp]), np.array([tr.final_d for tr in self.adhoc]))

    def sign_test(self) -> tuple[int, int, float]:
        a, b = self.finals()
        wins, losses = int(np.sum(a > b)), int(np.sum(a < b))
        p = binomtest(wins, wins + losses, alternative="greater").pvalue if wins + losses else 1.0
        return wins, losses, float(p)


def benchmark_schedule(preset: dict = LAB_BENCHMARK) -> Schedule:
    return extract_schedule_max_d(max_d_table(preset["T"], preset["Cs"], preset["D0_model"], preset["n_d"]))


def run_benchmark(preset: dict = LAB_BENCHMARK, schedule: Schedule | None = None, d_at_truth: bool = False) -> BenchmarkResult:
    schedule = schedule or benchmark_schedule(preset)
    out = {}
    for policy in (DppMaxD(schedule), AdhocGrowth(preset["adhoc_rate"])):
        cfg = SimulationConfig(
            preset["true_params"], preset["T"], preset["Cs"], preset["init_stage"], preset["init_guess"],
            preset["n_reps"], preset["seed"], policy, d_at_truth,
        )
        out[policy.name] = run_replications(cfg)
    return BenchmarkResult(schedule, out["dpp-max-d"], out["adhoc-growth"])


def check_benchmark(preset: dict = LAB_BENCHMARK) -> CheckResult:
    t0 = time.perf_counter()
    res = run_benchmark(preset)
    a, b = res.finals()
    wins, losses, p = res.sign_test()
    d0 = res.d0_median
    calibrated = abs(d0 - preset["D0_target"]) <= preset["D0_tolerance"]
    ok = calibrated and np.median(a) > np.median(b) and p < 0.05
    detail = (f"schedule {res.schedule.update_times}; median D0 {d0:.4f}; "
              f"median final D dpp {np.median(a):.1f} vs adhoc {np.median(b):.1f}; "
              f"wins {wins}/{wins + losses}, p={p:.2g}")
    return _finish(7, "benchmark dominance over +10% growth", 600.0, t0, ok, detail,
                   d0_median=d0, p=p, wins=wins, losses=losses)


def check_convergence(n_max: int = 200, n_reps: int = 100, seed: int = 0, d_start: float = 1.0) -> CheckResult:
    t0 = time.perf_counter()
    seq = accumulation_convergence_check(n_max, d_start, n_reps, seed)
    # seq[0] is round 2
    early, late = float(np.mean(seq[:20])), float(np.mean(seq[-20:]))
    return _finish(8, "accumulation discrepancy shrinks", 120.0, t0, late < early,
                   f"mean rounds 2-21 {early:.4g}, rounds 181-200 {late:.4g}", early=early, late=late)


CHECKS: dict[int, Callable[[], CheckResult]] = {
    1: check_design,
    2: check_h,
    3: check_oracle,
    4: check_sandwich,
    5: check_continuum,
    6: check_update_counts,
    7: check_benchmark,
    8: check_convergence,
}


def run_all(selected=None, report: Callable[[str], None] | None = None) -> list[CheckResult]:
    results = []
    for k in sorted(selected or CHECKS):
        r = CHECKS[k]()
        results.append(r)
        if report:
            report(r.line())
    return results
