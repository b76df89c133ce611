"""Empirical risk on a few data points for a one-neuron logistic network.

theta = (w, b, v, c) and N(x) = c + v sigma(w x + b).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import expit

from .activation import DomainError
from .network import ParamVector


@dataclass(frozen=True)
class DataSet:
    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        xs = tuple(float(x) for x in self.xs)
        ys = tuple(float(y) for y in self.ys)
        if len(xs) != len(ys) or len(xs) < 1:
            raise DomainError("xs and ys must be non-empty and of equal length")
        if not all(math.isfinite(t) for t in xs + ys):
            raise DomainError("data must be finite")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise DomainError("xs must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def M(self) -> int:
        return len(self.xs)

    @classmethod
    def from_csv(cls, path) -> "DataSet":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(tuple(float(r["x"]) for r in rows), tuple(float(r["y"]) for r in rows))


@dataclass(frozen=True)
class DataCase:
    """``tag`` is one of exact_fit_two, interior_three, monotone_three, constant, other.

    For monotone_three, j is the smallest index in {1, 3} maximizing |y_i - y_2| and k the other one.
    """

    tag: str
    j: int | None = None
    k: int | None = None


def classify_data(data: DataSet) -> DataCase:
    if data.M == 2:
        return DataCase("exact_fit_two")
    if data.M != 3:
        raise DomainError("classification covers M = 2 and M = 3")
    y1, y2, y3 = data.ys
    if y1 == y2 == y3:
        return DataCase("constant")
    if min(y1, y3) < y2 < max(y1, y3):
        return DataCase("interior_three")
    if (y1 - y2) * (y3 - y2) >= 0:
        j = 1 if abs(y1 - y2) >= abs(y3 - y2) else 3
        return DataCase("monotone_three", j, 4 - j)
    return DataCase("other")


def _check_h1(theta: ParamVector):
    if theta.h != 1:
        raise DomainError("the discrete regime uses a single hidden neuron (h = 1)")


def realize_logistic(theta: ParamVector, x):
    _check_h1(theta)
    return theta.c + theta.v[0] * expit(theta.w[0] * np.asarray(x, dtype=float) + theta.b[0])


def discrete_risk(theta: ParamVector, data: DataSet) -> float:
    """(1/M) sum_i (N(x_i) - y_i)^2."""
    r = realize_logistic(theta, data.xs) - np.asarray(data.ys)
    return float(np.mean(r * r))


def _from_wb(w: float, b: float, data: DataSet) -> ParamVector:
    # v, c put N through (x_1, y_1) and (x_2, y_2)
    (x1, x2), (y1, y2) = data.xs[:2], data.ys[:2]
    s1, s2 = expit(w * x1 + b), expit(w * x2 + b)
    v = (y2 - y1) / (s2 - s1) if y2 != y1 else 0.0
    return ParamVector.from_parts([w], [b], [v], y1 - v * s1)


def fit_two_points(data: DataSet) -> ParamVector:
    if data.M != 2:
        raise DomainError("fit_two_points needs exactly two data points")
    # w = 1/(x2 - x1) keeps the two pre-activations at 0 and 1 whatever the spacing
    x1, x2 = data.xs
    w = 1.0 / (x2 - x1)
    return _from_wb(w, -w * x1, data)


def _log_abs_expm1(t: float) -> float:
    # log |e^t - 1| for t != 0
    return t + math.log(-math.expm1(-t)) if t > 0 else math.log(-math.expm1(t))


def log_ratio(w: float, b: float, d2: float, d3: float) -> float:
    """log f(w, b) for nodes shifted to 0 < d2 < d3.

    f = [(1 - e^{-d3 w}) / (1 - e^{-d2 w})] * (1 + e^{-d2 w - b}) / (1 + e^{-d3 w - b}).
    """
    if abs(w) < 1e-12:
        first = math.log(d3 / d2)
    else:
        first = _log_abs_expm1(-d3 * w) - _log_abs_expm1(-d2 * w)
    return first + float(np.logaddexp(0.0, -d2 * w - b) - np.logaddexp(0.0, -d3 * w - b))


def _path_point(s: float, d3: float) -> tuple[float, float]:
    return s, -d3 * max(s, 0.0)


def _lm_polish(theta0: np.ndarray, data: DataSet, max_nfev: int):
    xs, ys = np.asarray(data.xs), np.asarray(data.ys)

    pad = [0.0] * max(0, 4 - len(xs))

    def res(p):
        # zero padding lets Levenberg-Marquardt run with fewer residuals than parameters
        return np.concatenate([p[3] + p[2] * expit(p[0] * xs + p[1]) - ys, pad])

    out = optimize.least_squares(res, theta0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    return ParamVector(1, out.x)


def fit_three_points_interior(data: DataSet, tol: float = 1e-6, starts: int = 16, budget: int = 10_000, seed: int = 0) -> ParamVector:
    """Exact fit of three interior data points; the returned theta has risk <= tol^2.

    The scalar equation f(w, b) = (y3 - y1)/(y2 - y1) is solved by bisection along the
    path (w, b) = (s, -x3' max(s, 0)) in coordinates x' = x - x1, where f runs from 1 to
    infinity.  Damped least squares polishes the result and, failing that, is restarted
    from ``starts`` random points.
    """
    case = classify_data(data)
    if case.tag != "interior_three":
        raise DomainError(f"data are {case.tag}, not interior_three")
    (x1, x2, x3), (y1, y2, y3) = data.xs, data.ys
    d2, d3 = x2 - x1, x3 - x1
    target = math.log((y3 - y1) / (y2 - y1))
    g = lambda s: log_ratio(*_path_point(s, d3), d2, d3) - target

    lo, hi = -1.0, 1.0
    steps = 0
    while g(lo) >= 0 and steps < 200:
        lo *= 2
        steps += 1
    while g(hi) <= 0 and steps < 400:
        hi *= 2
        steps += 1
    theta = None
    if g(lo) < 0 < g(hi):
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(1.0, abs(mid)):
                break
        w, bs = _path_point(0.5 * (lo + hi), d3)
        # undo the shift x' = x - x1
        theta = _from_wb(w, bs - w * x1, data)
    goal = tol * tol
    if theta is not None and discrete_risk(theta, data) <= goal:
        return theta
    if theta is not None:
        pol = _lm_polish(theta.values, data, budget)
        if discrete_risk(pol, data) <= goal:
            return pol
    rng = np.random.default_rng(seed)
    best = theta
    for _ in range(starts):
        pol = _lm_polish(rng.normal(0, 3, size=4), data, budget)
        if best is None or discrete_risk(pol, data) < discrete_risk(best, data):
            best = pol
        if discrete_risk(best, data) <= goal:
            return best
    raise RuntimeError(f"no exact fit found; best risk {discrete_risk(best, data):.3e}")


def infimum_sequence(data: DataSet, n: float, check_case: bool = True) -> ParamVector:
    """theta_n with w = (2 - j) n, b = (j - 2) n x_j, v = y2 + yk - 2 yj, c = 2 yj - (y2 + yk)/2."""
    if data.M != 3:
        raise DomainError("infimum_sequence needs three data points")
    y1, y2, y3 = data.ys
    if max(abs(y1 - y2), abs(y3 - y2)) == 0:
        raise DomainError("constant data have no infimum sequence")
    case = classify_data(data)
    if check_case and case.tag != "monotone_three":
        raise DomainError(f"data are {case.tag}, not monotone_three")
    j = 1 if abs(y1 - y2) >= abs(y3 - y2) else 3
    k = 4 - j
    xj, yj, yk = data.xs[j - 1], data.ys[j - 1], data.ys[k - 1]
    w = (2 - j) * n
    b = (j - 2) * n * xj
    return ParamVector.from_parts([w], [b], [y2 + yk - 2 * yj], 2 * yj - (y2 + yk) / 2)


def infimum_limit(data: DataSet) -> float:
    """lim L(theta_n) = (2/3) ((y2 - yk)/2)^2 with j, k as in infimum_sequence."""
    y1, y2, y3 = data.ys
    yk = y3 if abs(y1 - y2) >= abs(y3 - y2) else y1
    return (2.0 / 3.0) * ((y2 - yk) / 2) ** 2


def constant_floor(data: DataSet) -> float:
    """(2/3) ((y2 - yk)/2)^2 with |yk - y2| minimal; every constant realization has risk strictly above it."""
    if data.M != 3:
        raise DomainError("constant_floor needs three data points")
    y1, y2, y3 = data.ys
    if max(abs(y1 - y2), abs(y3 - y2)) == 0:
        raise DomainError("constant data have no positive floor")
    yk = y1 if abs(y1 - y2) <= abs(y3 - y2) else y3
    return (2.0 / 3.0) * ((y2 - yk) / 2) ** 2


def constant_realization_min(data: DataSet) -> float:
    """min over r of the risk of N = r, i.e. the variance of ys."""
    return float(np.var(data.ys))


@dataclass
class MinimizationRun:
    seed: int
    risk: float
    norm: float
    seed_norm: float
    theta: ParamVector


def multistart_minimize(data: DataSet, n_seeds: int = 50, seed: int = 0, scale: float = 1.0, max_nfev: int = 5000) -> list[MinimizationRun]:
    """Levenberg-Marquardt on the residuals from Gaussian starts."""
    runs = []
    for s in range(n_seeds):
        x0 = np.random.default_rng([seed, s]).normal(0, scale, size=4)
        th = _lm_polish(x0, data, max_nfev)
        runs.append(MinimizationRun(s, discrete_risk(th, data), th.norm(), float(np.linalg.norm(x0)), th))
    return runs
