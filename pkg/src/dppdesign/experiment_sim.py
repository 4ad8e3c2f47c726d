"""Monte-Carlo simulation of a batch-sequential switching experiment.

Each replication draws Bernoulli responses from the true cloglog curve,
initializes from a (possibly poor) parameter guess, and then runs stages. A
stage pays the update cost, places its measurements alternately at the two
D-optimal covariates of the current MLE, and refits on all data collected.

Clock convention: the post-initialization clock starts at 0 and the horizon
``T`` covers every post-initialization update cost and measurement.
Initialization measurements are recorded as stage 0 and counted in the
trajectory's total time but not against ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .cloglog_model import (
    ConvergenceError,
    ModelParams,
    SeparationError,
    as_arrays,
    d_criterion,
    fisher_information,
    fit_mle,
    optimal_covariates,
    prob_response,
)
from .dpp_solver import MinTimeTable, Schedule, extract_schedule_min_time

MAX_ESCALATIONS = 5
# fresh initialization streams tried per replication before giving up
MAX_INIT_ATTEMPTS = 20


class InitializationError(RuntimeError):
    """No finite, increasing MLE after the allowed spread escalations."""


# -- policies -----------------------------------------------------------------

@dataclass(frozen=True)
class DppMaxD:
    schedule: Schedule
    name: str = "dpp-max-d"


@dataclass(frozen=True)
class DppMinTime:
    table: MinTimeTable
    name: str = "dpp-min-time"


@dataclass(frozen=True)
class AdhocGrowth:
    rate: float = 0.10
    name: str = "adhoc-growth"


@dataclass(frozen=True)
class FixedBatch:
    size: int
    name: str = "fixed-batch"


Policy = Union[DppMaxD, DppMinTime, AdhocGrowth, FixedBatch]


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def stage_sizes(policy: Policy, Cs: int, init_stage: int) -> Iterator[int]:
    """Nominal measurement counts of the post-initialization stages."""
    if isinstance(policy, DppMaxD):
        for length in policy.schedule.stage_lengths:
            yield length - policy.schedule.Cs
    elif isinstance(policy, DppMinTime):
        sched = extract_schedule_min_time(policy.table)
        for length in sched.stage_lengths:
            yield length - policy.table.config.Cs
    elif isinstance(policy, AdhocGrowth):
        k = 1
        while True:
            yield max(1, _round_half_up(init_stage * (1.0 + policy.rate) ** k))
            k += 1
    elif isinstance(policy, FixedBatch):
        while True:
            yield policy.size
    else:
        raise TypeError(f"unknown policy {policy!r}")


# -- configuration and records -----------------------------------------------

@dataclass(frozen=True)
class SimulationConfig:
    true_params: ModelParams
    T: int
    Cs: int
    init_stage: int
    init_guess: ModelParams
    n_reps: int
    seed: int
    policy: Policy
    # evaluate the observed criterion at the true parameters instead of the MLE
    d_at_truth: bool = False

    def __post_init__(self):
        if self.n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        if self.init_stage < 2:
            raise ValueError("init_stage must be at least 2")
        if self.Cs < 0 or self.T < 1:
            raise ValueError("need T >= 1 and Cs >= 0")
        if not (self.true_params.a > 0 and self.init_guess.a > 0):
            raise ValueError("slopes must be positive")

    @property
    def bounded(self) -> bool:
        """Max-D regimes stop at the horizon; min-time stops at the target."""
        return not isinstance(self.policy, DppMinTime)


@dataclass(frozen=True)
class StageRecord:
    start_time: int
    n_measurements: int
    covariates: tuple[float, float]
    mle_after: ModelParams | None
    observed_d: float
    fit_failed: bool = False


@dataclass
class Trajectory:
    stages: list[StageRecord]
    total_time: int
    replication_id: int
    seed_used: int
    policy: str
    Cs: int = 0
    init_attempts: int = 1

    @property
    def final_d(self) -> float:
        return self.stages[-1].observed_d

    @property
    def n_updates(self) -> int:
        return len(self.stages) - 1

    def cumulative_times(self) -> list[int]:
        out, t = [], 0
        for k, s in enumerate(self.stages):
            t += s.n_measurements + (self.Cs if k > 0 else 0)
            out.append(t)
        return out


# -- building blocks ------------------------------------------------------------

def simulate_response(true_params: ModelParams, x: float, rng: np.random.Generator) -> int:
    return int(rng.random() < prob_response(true_params, x))


def simulate_responses(true_params: ModelParams, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    p = np.atleast_1d(prob_response(true_params, xs))
    return (rng.random(p.size) < p).astype(float)


def alternating(x1: float, x2: float, n: int) -> np.ndarray:
    """x1, x2, x1, ...; an odd count puts the extra point at x1."""
    xs = np.empty(n)
    xs[0::2] = x1
    xs[1::2] = x2
    return xs


def observed_d(data, estimate: ModelParams) -> float:
    """sqrt(det J) of the covariates used so far, evaluated at ``estimate``."""
    x, _ = as_arrays(data)
    return d_criterion(fisher_information(estimate, x))


def _data_start(x: np.ndarray, y: np.ndarray) -> ModelParams:
    # weighted least squares of empirical cloglog on x, one point per level
    levels = np.unique(x)
    zs, ws = [], []
    for lv in levels:
        sel = x == lv
        n = sel.sum()
        p = (y[sel].sum() + 0.5) / (n + 1.0)
        zs.append(math.log(-math.log1p(-p)))
        ws.append(n)
    zs, ws = np.array(zs), np.array(ws, dtype=float)
    xm = np.average(levels, weights=ws)
    zm = np.average(zs, weights=ws)
    sxx = np.average((levels - xm) ** 2, weights=ws)
    a = np.average((levels - xm) * (zs - zm), weights=ws) / sxx if sxx > 0 else 0.0
    a = a if a > 0 else 1.0 / (math.sqrt(sxx) + 1e-12)
    return ModelParams(a, zm - a * xm)


def refit(x: np.ndarray, y: np.ndarray, start: ModelParams) -> ModelParams:
    """MLE from ``start``, retried once from a data-driven start.

    Raises SeparationError or ConvergenceError, or ValueError if the fitted
    slope is not positive.
    """
    try:
        est = fit_mle((x, y), start)
    except ConvergenceError:
        est = fit_mle((x, y), _data_start(x, y))
    if est.a <= 0:
        raise ValueError(f"fitted slope {est.a:g} is not positive")
    return est


@dataclass
class InitResult:
    x: np.ndarray
    y: np.ndarray
    D0_observed: float
    estimate: ModelParams
    escalations: int
    covariates: tuple[float, float] = field(default=(math.nan, math.nan))


def initialize(config: SimulationConfig, rng: np.random.Generator) -> InitResult:
    """First batch at the guess's optimal covariates, widening on failure.

    Each escalation doubles the spread of the two points about their centre
    and measures another ``init_stage`` batch.
    """
    design = optimal_covariates(config.init_guess)
    centre = 0.5 * (design.x1 + design.x2)
    half = 0.5 * (design.x1 - design.x2)
    xs, ys = [], []
    for esc in range(MAX_ESCALATIONS + 1):
        x1, x2 = centre + half * 2**esc, centre - half * 2**esc
        xb = alternating(x1, x2, config.init_stage)
        xs.append(xb)
        ys.append(simulate_responses(config.true_params, xb, rng))
        x, y = np.concatenate(xs), np.concatenate(ys)
        try:
            est = refit(x, y, config.init_guess)
        except (SeparationError, ConvergenceError, ValueError):
            continue
        at = config.true_params if config.d_at_truth else est
        return InitResult(x, y, observed_d((x, y), at), est, esc, (x1, x2))
    raise InitializationError(f"no usable MLE after {MAX_ESCALATIONS} escalations")


def replication_rngs(seed: int, replication: int, attempt: int = 0) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent streams for initialization and for the stages.

    Keyed by (seed, replication) so that policies compared under the same
    seed share their initialization and response draws. Retried
    initializations get their own stream; the stage stream does not move.
    """
    init_key = [seed, replication, 0] if attempt == 0 else [seed, replication, 0, attempt]
    return (
        np.random.default_rng(init_key),
        np.random.default_rng([seed, replication, 1]),
    )


def initialize_with_retry(config: SimulationConfig, replication: int) -> tuple[InitResult, int]:
    """Run :func:`initialize` on fresh streams until one succeeds.

    A failed initialization is treated as an aborted run that the
    experimenter restarts; the number of attempts is returned.
    """
    for attempt in range(MAX_INIT_ATTEMPTS):
        init_rng, _ = replication_rngs(config.seed, replication, attempt)
        try:
            return initialize(config, init_rng), attempt + 1
        except InitializationError:
            continue
    raise InitializationError(f"replication {replication}: {MAX_INIT_ATTEMPTS} initializations failed")


def run_policy(config: SimulationConfig, replication: int = 0) -> Trajectory:
    init, attempts = initialize_with_retry(config, replication)
    _, rng = replication_rngs(config.seed, replication)
    x, y, est = init.x, init.y, init.estimate
    stages = [StageRecord(0, int(x.size), init.covariates, est, init.D0_observed)]
    Cs = int(config.Cs)
    n_init = int(x.size)
    elapsed = 0
    for n in stage_sizes(config.policy, Cs, config.init_stage):
        if config.bounded:
            room = config.T - elapsed - Cs
            if room <= 0:
                break
            n = min(n, room)
        design = optimal_covariates(est)
        xb = alternating(design.x1, design.x2, n)
        yb = simulate_responses(config.true_params, xb, rng)
        x, y = np.concatenate([x, xb]), np.concatenate([y, yb])
        failed = False
        try:
            new = refit(x, y, est)
        except (SeparationError, ConvergenceError, ValueError):
            new, failed = None, True
        if new is not None:
            est = new
        at = config.true_params if config.d_at_truth else est
        stages.append(
            StageRecord(n_init + elapsed, int(n), (design.x1, design.x2), new, observed_d((x, y), at), failed)
        )
        elapsed += Cs + n
    total = n_init + elapsed
    return Trajectory(stages, total, replication, config.seed, config.policy.name, Cs, attempts)


def run_replications(config: SimulationConfig) -> list[Trajectory]:
    return [run_policy(config, r) for r in range(config.n_reps)]


# -- aggregation ---------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    stage: int
    cumulative_time: float
    median_d: float
    q25_d: float
    q75_d: float
    n: int
    policy: str


def aggregate(trajectories: Sequence[Trajectory]) -> list[SummaryRow]:
    """Per-stage median and interquartile band of the observed criterion."""
    if not trajectories:
        raise ValueError("nothing to aggregate")
    depth = max(len(tr.stages) for tr in trajectories)
    policy = trajectories[0].policy
    rows = []
    for k in range(depth):
        present = [tr for tr in trajectories if len(tr.stages) > k]
        d = np.array([tr.stages[k].observed_d for tr in present])
        times = np.array([tr.cumulative_times()[k] for tr in present], dtype=float)
        q25, med, q75 = np.percentile(d, [25, 50, 75])
        rows.append(SummaryRow(k, float(np.median(times)), float(med), float(q25), float(q75), len(present), policy))
    return rows
