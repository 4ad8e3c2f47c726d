"""Approximate accumulation of the D-criterion.

``h(D)`` is the expected gain in D from one more double measurement when the
design is computed from estimates carrying accumulated information D. This
module holds the logistic model for h, the Monte-Carlo procedure that
motivates it, and continuous-time (zero update cost) references used to check
the grid solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cloglog_model import (
    InformationMatrix,
    ModelParams,
    fisher_information,
    g_weight,
    solve_optimal_design,
)

H_STAR = 0.80940268
ETA = 1.88938
THETA = -1.51330


@dataclass(frozen=True)
class AccumulationModel:
    h_star: float = H_STAR
    eta: float = ETA
    theta: float = THETA

    def __post_init__(self):
        if not self.h_star > 0:
            raise ValueError("h_star must be positive")
        if not self.theta < 0:
            raise ValueError("theta must be negative so that h increases in D")

    def h(self, D):
        """Expected gain per double measurement at accumulated criterion ``D``."""
        D = np.asarray(D, dtype=float)
        if np.any(~(D > 0)):
            raise ValueError("h(D) needs D > 0")
        with np.errstate(over="ignore"):
            out = self.h_star / (1.0 + np.exp(self.eta + self.theta * np.log(D)))
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GainEstimate:
    mean: float
    stderr: float
    n_rejected: int


class RejectionRateError(RuntimeError):
    """Too many sampled slopes were non-positive for the normal approximation."""


@lru_cache(maxsize=1)
def optimal_information() -> InformationMatrix:
    """J* for (a, b) = (1, 0): the information of the two optimal points."""
    z1, z2 = solve_optimal_design()
    return fisher_information(ModelParams(1.0, 0.0), [z1, z2])


def information_at(D: float) -> InformationMatrix:
    """Scalar multiple of J* whose square-root determinant equals ``D``."""
    J = optimal_information()
    return J.scaled(D / math.sqrt(J.det))


def _cov_cholesky(D: float) -> np.ndarray:
    J = information_at(D).to_array()
    return np.linalg.cholesky(np.linalg.inv(J))


# rejection rate is only judged once this many draws exist
_MIN_RATE_DRAWS = 100


def draw_estimates(D: float, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, int]:
    """Draw ``n`` estimates from N((1, 0), J(D)^-1), rejecting slopes <= 0.

    Returns the accepted slopes, intercepts and the number of rejected draws.
    """
    if not D > 0:
        raise ValueError("D must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    L = _cov_cholesky(D)
    a_parts, b_parts = [], []
    accepted = rejected = 0
    while accepted < n:
        m = n - accepted
        eps = rng.standard_normal((m, 2))
        draws = eps @ L.T
        a = 1.0 + draws[:, 0]
        b = draws[:, 1]
        ok = a > 0
        a_parts.append(a[ok])
        b_parts.append(b[ok])
        accepted += int(ok.sum())
        rejected += int(m - ok.sum())
        if rejected + accepted >= _MIN_RATE_DRAWS and rejected > accepted:
            raise RejectionRateError(f"rejection rate above 50% at D={D:g}")
    return np.concatenate(a_parts), np.concatenate(b_parts), rejected


def design_gain(a_hat, b_hat):
    """sqrt(det) of the two-point information when the design uses (a_hat, b_hat).

    The truth is (1, 0), so the realised standardized points are the
    covariates ``(z* - b_hat) / a_hat``.
    """
    z1s, z2s = solve_optimal_design()
    a_hat = np.asarray(a_hat, dtype=float)
    b_hat = np.asarray(b_hat, dtype=float)
    z1 = (z1s - b_hat) / a_hat
    z2 = (z2s - b_hat) / a_hat
    return np.sqrt(g_weight(z1) * g_weight(z2)) * (z1 - z2)


def estimate_expected_change(D: float, n_samples: int, seed: int) -> GainEstimate:
    rng = np.random.default_rng(seed)
    a, b, rejected = draw_estimates(D, n_samples, rng)
    gains = np.atleast_1d(design_gain(a, b))
    se = float(gains.std(ddof=1) / math.sqrt(gains.size)) if gains.size > 1 else float("nan")
    return GainEstimate(float(gains.mean()), se, rejected)


# -- continuous-time references (no update cost) -------------------------------

def min_time_closed_form(model: AccumulationModel, D: float, D_final: float) -> float:
    """Time to grow D to ``D_final`` along D' = h(D): the integral of 1/h."""
    if not (0 < D <= D_final):
        raise ValueError("need 0 < D <= D_final")
    p = model.theta + 1.0
    tail = math.exp(model.eta) * (D_final**p - D**p) / p
    return ((D_final - D) + tail) / model.h_star


def _rk4(f, y: float, span: float, n: int) -> float:
    dt = span / n
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y += dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return y


def max_d_continuous(model: AccumulationModel, D: float, t: float, T: float, rtol: float = 1e-8) -> float:
    """D(T) - D for D' = h(D), D(t) = D, by RK4 with step halving."""
    if not (0 <= t <= T):
        raise ValueError("need 0 <= t <= T")
    if not D > 0:
        raise ValueError("D must be positive")
    if t == T:
        return 0.0
    hs, ee, th = model.h_star, math.exp(model.eta), model.theta

    def f(d):
        return hs / (1.0 + ee * d**th)

    n = 1000
    prev = _rk4(f, D, T - t, n)
    while True:
        n *= 2
        cur = _rk4(f, D, T - t, n)
        if abs(cur - prev) <= rtol * abs(cur - D) or n > 2**22:
            return cur - D
        prev = cur


# -- accumulation of sqrt(det) over rounds --------------------------------------

def discrepancy_sequence(matrices) -> np.ndarray:
    """|D(J_1+..+J_n) - D(J_1+..+J_{n-1}) - D(J_n)| for n = 2..N."""
    arr = np.array([[m.j11, m.j12, m.j22] for m in matrices], dtype=float)
    if arr.shape[0] < 2:
        raise ValueError("need at least two rounds")
    cum = np.cumsum(arr, axis=0)

    def dcrit(e):
        return np.sqrt(np.maximum(e[:, 0] * e[:, 2] - e[:, 1] ** 2, 0.0))

    total = dcrit(cum)
    single = dcrit(arr)
    return np.abs(total[1:] - total[:-1] - single[1:])


def round_informations(n_rounds: int, d_start: float, rng: np.random.Generator, model: AccumulationModel | None = None):
    """Per-round information matrices with the design drawn from growing information.

    Round i designs with an estimate drawn as in :func:`draw_estimates` at
    ``D = d_start + (i - 1) * h_star`` and contributes the two-point
    information of that design under the truth (1, 0).
    """
    model = model or AccumulationModel()
    truth = ModelParams(1.0, 0.0)
    z1s, z2s = solve_optimal_design()
    out = []
    for i in range(n_rounds):
        a, b, _ = draw_estimates(d_start + i * model.h_star, 1, rng)
        x = [(z1s - b[0]) / a[0], (z2s - b[0]) / a[0]]
        out.append(fisher_information(truth, x))
    return out


def accumulation_convergence_check(
    n_max: int, d_start: float, n_reps: int, seed: int, model: AccumulationModel | None = None
) -> np.ndarray:
    """Mean discrepancy over replications for rounds 2..n_max."""
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    seqs = [
        discrepancy_sequence(round_informations(n_max, d_start, np.random.default_rng([seed, rep]), model))
        for rep in range(n_reps)
    ]
    return np.mean(seqs, axis=0)
