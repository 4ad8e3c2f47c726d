"""Complementary log-log binary response model.

P(Y=1 | x) = 1 - exp(-exp(a*x + b)). Covers probabilities, the log-likelihood
and its derivatives, the maximum likelihood fit, Fisher information, the
D-criterion and the two-point locally D-optimal design.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

Z_CLAMP = 40.0


class SeparationError(ValueError):
    """The data are (quasi-)separated, so no finite MLE exists."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance."""


class InvalidMatrixError(ValueError):
    """An information matrix is not positive semidefinite."""


@dataclass(frozen=True)
class ModelParams:
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"parameters must be finite, got ({self.a}, {self.b})")

    @property
    def valid(self) -> bool:
        return self.a > 0

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b])


@dataclass(frozen=True)
class Observation:
    x: float
    y: int

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ValueError(f"response must be 0 or 1, got {self.y!r}")


@dataclass(frozen=True)
class InformationMatrix:
    """Symmetric 2x2 Fisher information, stored as its three distinct entries."""

    j11: float
    j12: float
    j22: float

    def __add__(self, other: "InformationMatrix") -> "InformationMatrix":
        return InformationMatrix(self.j11 + other.j11, self.j12 + other.j12, self.j22 + other.j22)

    def scaled(self, c: float) -> "InformationMatrix":
        return InformationMatrix(c * self.j11, c * self.j12, c * self.j22)

    @property
    def det(self) -> float:
        return self.j11 * self.j22 - self.j12 * self.j12

    def to_array(self) -> np.ndarray:
        return np.array([[self.j11, self.j12], [self.j12, self.j22]])

    @classmethod
    def zero(cls) -> "InformationMatrix":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class TwoPointDesign:
    z1: float
    z2: float
    x1: float
    x2: float


def as_arrays(data) -> tuple[np.ndarray, np.ndarray]:
    """Accept a sequence of Observation or an ``(x, y)`` pair of arrays."""
    if isinstance(data, tuple) and len(data) == 2 and not isinstance(data[0], Observation):
        x = np.asarray(data[0], dtype=float)
        y = np.asarray(data[1], dtype=float)
    else:
        data = list(data)
        x = np.array([o.x for o in data], dtype=float)
        y = np.array([o.y for o in data], dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    return x, y


def prob_response(params: ModelParams, x):
    z = np.clip(params.a * np.asarray(x, dtype=float) + params.b, -Z_CLAMP, Z_CLAMP)
    p = -np.expm1(-np.exp(z))
    return float(p) if np.ndim(p) == 0 else p


def _log_prob_one(z: np.ndarray) -> np.ndarray:
    # log(1 - exp(-w)), w = e^z; switch formulation at w = log 2
    w = np.exp(z)
    small = w < math.log(2.0)
    out = np.empty_like(w)
    out[small] = np.log(-np.expm1(-w[small]))
    out[~small] = np.log1p(-np.exp(-w[~small]))
    return out


def log_likelihood(params: ModelParams, data) -> float:
    x, y = as_arrays(data)
    if x.size == 0:
        return 0.0
    z = params.a * x + params.b
    with np.errstate(over="ignore", divide="ignore"):
        ll = np.where(y == 1, _log_prob_one(z), -np.exp(z))
    return float(np.sum(ll))


def log_g_weight(z):
    """log of :func:`g_weight`, finite wherever g does not underflow."""
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        w = np.exp(z)
        wc = np.minimum(w, 30.0)
        # log(expm1(w)) = z + log(expm1(w)/w) for small w; w + log(1 - e^-w) for large w
        ratio = np.where(wc > 0, np.expm1(wc) / np.where(wc > 0, wc, 1.0), 1.0)
        log_em1 = np.where(w < 30.0, z + np.log(ratio), w + np.log1p(-np.exp(-w)))
    return 2.0 * z - log_em1


def g_weight(z):
    """Fisher weight ``e^{2z} / (e^{e^z} - 1)`` of one observation at ``z``."""
    with np.errstate(under="ignore"):
        out = np.exp(log_g_weight(z))
    return float(out) if np.ndim(out) == 0 else out


def fisher_information(params: ModelParams, xs: Iterable[float]) -> InformationMatrix:
    x = np.asarray(list(xs) if not isinstance(xs, np.ndarray) else xs, dtype=float)
    if x.size == 0:
        return InformationMatrix.zero()
    w = g_weight(params.a * x + params.b)
    w = np.atleast_1d(w)
    return InformationMatrix(float(np.sum(w * x * x)), float(np.sum(w * x)), float(np.sum(w)))


def d_criterion(J: InformationMatrix) -> float:
    det = J.det
    if det < 0:
        if det < -1e-8 * (J.j11 * J.j22):
            raise InvalidMatrixError(f"determinant {det:g} is negative")
        return 0.0
    return math.sqrt(det)


def pairwise_determinant(params: ModelParams, xs: Sequence[float]) -> float:
    """det J written as the sum over pairs of g_i g_j (x_i - x_j)^2."""
    x = np.asarray(xs, dtype=float)
    w = np.atleast_1d(g_weight(params.a * x + params.b))
    i, j = np.triu_indices(x.size, k=1)
    return float(np.sum(w[i] * w[j] * (x[i] - x[j]) ** 2))


# -- two-point D-optimal design -------------------------------------------------

def design_objective(z1: float, z2: float) -> float:
    """g(z1) g(z2) (z1 - z2)^2, i.e. det J of a two-point design when a = 1."""
    return float(g_weight(z1) * g_weight(z2) * (z1 - z2) ** 2)


def _dlog_g(z: float) -> tuple[float, float]:
    # first and second derivative of log g at z
    w = math.exp(z)
    em = -math.expm1(-w)
    q = w / em
    dq = (em - w * math.exp(-w)) / (em * em)
    return 2.0 - q, -w * dq


def _newton_design(z1: float, z2: float, max_iter: int = 60, tol: float = 1e-13):
    for _ in range(max_iter):
        d = z1 - z2
        if d <= 1e-6:
            return None
        p1, dp1 = _dlog_g(z1)
        p2, dp2 = _dlog_g(z2)
        F = np.array([p1 + 2.0 / d, p2 - 2.0 / d])
        if np.max(np.abs(F)) < tol:
            return z1, z2
        c = 2.0 / (d * d)
        H = np.array([[dp1 - c, c], [c, dp2 - c]])
        try:
            step = np.linalg.solve(H, -F)
        except np.linalg.LinAlgError:
            return None
        scale = min(1.0, 0.5 / max(np.max(np.abs(step)), 1e-300))
        z1, z2 = z1 + scale * float(step[0]), z2 + scale * float(step[1])
        if not (-20 < z2 < z1 < 5):
            return None
    return None


@lru_cache(maxsize=1)
def solve_optimal_design() -> tuple[float, float]:
    """Standardized D-optimal two-point design ``(z1*, z2*)`` with ``z1* > z2*``.

    Newton's method on the stationarity equations of log g(z1) + log g(z2) +
    2 log(z1 - z2), started from a coarse grid over [-4, 3]^2. The best
    converged local maximum is returned.
    """
    starts = [(s1, s2) for s1, s2 in itertools.product(np.linspace(-4, 3, 8), repeat=2) if s1 > s2]
    best = None
    for s in starts:
        root = _newton_design(float(s[0]), float(s[1]))
        if root is None:
            continue
        _, dp1 = _dlog_g(root[0])
        _, dp2 = _dlog_g(root[1])
        c = 2.0 / (root[0] - root[1]) ** 2
        hess = np.array([[dp1 - c, c], [c, dp2 - c]])
        if np.any(np.linalg.eigvalsh(hess) >= 0):
            continue
        val = design_objective(*root)
        if best is None or val > best[0]:
            best = (val, root)
    if best is None:
        raise ConvergenceError("no multistart converged for the two-point design")
    return float(best[1][0]), float(best[1][1])


def optimal_criterion() -> float:
    """sqrt(det J*) of the standardized optimal design (about 0.80940268)."""
    z1, z2 = solve_optimal_design()
    return math.sqrt(design_objective(z1, z2))


def optimal_covariates(estimate: ModelParams) -> TwoPointDesign:
    if estimate.a <= 0:
        raise ValueError(f"slope estimate must be positive, got a={estimate.a}")
    z1, z2 = solve_optimal_design()
    return TwoPointDesign(z1, z2, (z1 - estimate.b) / estimate.a, (z2 - estimate.b) / estimate.a)


# -- maximum likelihood -------------------------------------------------------

def _z_derivatives(z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        w = np.exp(z)
        r = np.where(w > 0, w / np.expm1(w), 1.0)
        q = np.where(w > 0, w / -np.expm1(-w), 1.0)
        d1 = np.where(y == 1, r, -w)
        d2 = np.where(y == 1, r * (1.0 - q), -w)
    return np.nan_to_num(d1), np.nan_to_num(d2)


def score(params: ModelParams, data) -> np.ndarray:
    """Gradient of the log-likelihood with respect to (a, b)."""
    x, y = as_arrays(data)
    d1, _ = _z_derivatives(params.a * x + params.b, y)
    return np.array([np.sum(d1 * x), np.sum(d1)])


def observed_information(params: ModelParams, data) -> np.ndarray:
    """Negative Hessian of the log-likelihood at ``params``."""
    x, y = as_arrays(data)
    _, d2 = _z_derivatives(params.a * x + params.b, y)
    return -np.array([[np.sum(d2 * x * x), np.sum(d2 * x)], [np.sum(d2 * x), np.sum(d2)]])


def check_overlap(x: np.ndarray, y: np.ndarray) -> None:
    """Raise SeparationError unless both responses overlap in x."""
    ones, zeros = x[y == 1], x[y == 0]
    if ones.size == 0 or zeros.size == 0:
        raise SeparationError("data contain only one response value")
    if zeros.max() <= ones.min() or ones.max() <= zeros.min():
        raise SeparationError("responses are separated in x; the MLE is not finite")


def fit_mle(data, start: ModelParams, tol: float = 1e-8, max_iter: int = 100) -> ModelParams:
    """Maximum likelihood estimate of (a, b) by damped Newton.

    The iteration runs in centred and scaled covariates for conditioning;
    convergence is judged on the score in the original (a, b) coordinates,
    evaluated at the parameters actually returned.
    Steps are halved until the log-likelihood does not decrease.
    """
    x, y = as_arrays(data)
    check_overlap(x, y)
    c = float(np.mean(x))
    s = float(np.std(x)) or 1.0
    u = (x - c) / s
    # alpha = a*s, beta = b + a*c; z = alpha*u + beta
    theta = np.array([start.a * s, start.b + start.a * c])

    def ll(th):
        z = th[0] * u + th[1]
        with np.errstate(over="ignore", divide="ignore"):
            v = np.where(y == 1, _log_prob_one(z), -np.exp(z))
        return float(np.sum(v))

    def to_params(th):
        return ModelParams(th[0] / s, th[1] - th[0] * c / s)

    cur = ll(theta)
    for _ in range(max_iter + 1):
        d1, d2 = _z_derivatives(theta[0] * u + theta[1], y)
        with np.errstate(over="ignore", invalid="ignore"):
            grad = np.array([np.sum(d1 * u), np.sum(d1)])
            H = -np.array([[np.sum(d2 * u * u), np.sum(d2 * u)], [np.sum(d2 * u), np.sum(d2)]])
        if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(H))):
            raise ConvergenceError("score or Hessian overflowed; start is too far from the data")
        orig = np.array([grad[0] / s, grad[1] - grad[0] * c / s])
        if math.isfinite(cur) and np.linalg.norm(orig) < tol:
            # confirm on the score recomputed at the returned parameters
            est = to_params(theta)
            e1, _ = _z_derivatives(est.a * x + est.b, y)
            if np.linalg.norm([np.sum(e1 * x), np.sum(e1)]) < tol:
                return est
        ridge = 0.0
        while True:
            try:
                np.linalg.cholesky(H + ridge * np.eye(2))
                break
            except np.linalg.LinAlgError:
                ridge = max(2 * ridge, 1e-8 * (1 + np.trace(np.abs(H))))
        step = np.linalg.solve(H + ridge * np.eye(2), grad)
        predicted = 0.5 * float(grad @ step)
        if math.isfinite(cur) and predicted < 1e-13 * (1.0 + abs(cur)):
            theta = theta + step
            cur = ll(theta)
            continue
        t = 1.0
        for _ in range(60):
            cand = theta + t * step
            val = ll(cand)
            if math.isfinite(val) and (val >= cur or not math.isfinite(cur)):
                break
            t *= 0.5
        else:
            raise ConvergenceError("line search failed in fit_mle")
        theta, cur = cand, val
    raise ConvergenceError(f"fit_mle did not converge in {max_iter} iterations")
