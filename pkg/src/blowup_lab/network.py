"""Parameter layout, realization function and breakpoint geometry of a shallow network."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .activation import ActivationKind, DomainError, evaluate

Domain = tuple[float, float]


def check_domain(domain) -> Domain:
    a, b = (float(domain[0]), float(domain[1]))
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise DomainError(f"domain must satisfy a < b, got {domain!r}")
    return a, b


@dataclass
class ParamVector:
    """theta in R^{3h+1}, stored as [w_1..w_h, b_1..b_h, v_1..v_h, c]."""

    h: int
    values: np.ndarray

    def __post_init__(self):
        self.h = int(self.h)
        if self.h < 1:
            raise DomainError("hidden width h must be >= 1")
        self.values = np.array(self.values, dtype=float).reshape(-1)
        if self.values.size != 3 * self.h + 1:
            raise DomainError(f"expected {3 * self.h + 1} entries for h={self.h}, got {self.values.size}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("parameter vector has non-finite entries")

    @classmethod
    def from_parts(cls, w, b, v, c) -> "ParamVector":
        w, b, v = (np.atleast_1d(np.asarray(t, dtype=float)) for t in (w, b, v))
        if not (w.size == b.size == v.size):
            raise DomainError("w, b, v must have equal length")
        return cls(w.size, np.concatenate([w, b, v, [float(c)]]))

    @classmethod
    def zeros(cls, h: int) -> "ParamVector":
        return cls(h, np.zeros(3 * h + 1))

    @property
    def dim(self) -> int:
        return 3 * self.h + 1

    @property
    def w(self) -> np.ndarray:
        return self.values[: self.h]

    @property
    def b(self) -> np.ndarray:
        return self.values[self.h : 2 * self.h]

    @property
    def v(self) -> np.ndarray:
        return self.values[2 * self.h : 3 * self.h]

    @property
    def c(self) -> float:
        return float(self.values[3 * self.h])

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def copy(self) -> "ParamVector":
        return ParamVector(self.h, self.values.copy())

    def to_json(self) -> dict:
        return {"h": self.h, "theta": [float(t) for t in self.values]}

    @classmethod
    def from_json(cls, obj) -> "ParamVector":
        if isinstance(obj, dict):
            return cls(obj["h"], obj["theta"])
        vals = list(obj)
        if (len(vals) - 1) % 3:
            raise DomainError("flat theta must have length 3h+1")
        return cls((len(vals) - 1) // 3, vals)


def realize(theta: ParamVector, kind: ActivationKind, x):
    """N(x) = c + sum_i v_i A(w_i x + b_i), vectorized over x."""
    xs = np.asarray(x, dtype=float)
    z = np.multiply.outer(xs, theta.w) + theta.b
    out = theta.c + evaluate(kind, z) @ theta.v
    return float(out) if xs.ndim == 0 else out


def rescale_to_unit(theta: ParamVector, domain) -> ParamVector:
    """Reparametrize so that y in [0, 1] plays the role of x = a + (b - a) y."""
    a, b = check_domain(domain)
    w = theta.w * (b - a)
    bias = theta.b + theta.w * a
    return ParamVector.from_parts(w, bias, theta.v, theta.c)


def homogeneous_rescale(theta: ParamVector, lam: float, kind: ActivationKind) -> ParamVector:
    """(w, b, v, c) -> (lam w, lam b, v / lam^k, c); realization is unchanged for k >= 1."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if kind.k < 1:
        raise DomainError("homogeneous rescaling needs a positively homogeneous kind (k >= 1)")
    if kind.k > 1 and kind.gamma != 0:
        raise DomainError("max(x,0)^k + min(gamma x,0) is not homogeneous for k > 1 and gamma != 0")
    return ParamVector.from_parts(lam * theta.w, lam * theta.b, theta.v / lam**kind.k, theta.c)


@dataclass
class ActiveSet:
    """I_i = {x in [a, b]: w_i x + b_i > 0} described as an interval with open/closed ends."""

    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False
    empty: bool = False

    @property
    def length(self) -> float:
        return 0.0 if self.empty else max(self.hi - self.lo, 0.0)

    def contains(self, x: float) -> bool:
        if self.empty:
            return False
        left = x > self.lo if self.lo_open else x >= self.lo
        right = x < self.hi if self.hi_open else x <= self.hi
        return left and right


def _active_set(w: float, bias: float, a: float, b: float) -> ActiveSet:
    if w == 0:
        return ActiveSet(a, b) if bias > 0 else ActiveSet(a, a, empty=True)
    with np.errstate(over="ignore"):
        q = -bias / w
    if w > 0:
        if q >= b:
            return ActiveSet(b, b, empty=True)
        return ActiveSet(max(q, a), b, lo_open=q >= a)
    if q <= a:
        return ActiveSet(a, a, empty=True)
    return ActiveSet(a, min(q, b), hi_open=q <= b)


@dataclass
class Geometry:
    """Breakpoint structure of a k = 1 network, in unit-interval coordinates.

    Indices in ``M0``/``M1`` and the ``m`` values are 1-based; 0 and h+1 are the
    fallbacks used when a set is empty.  ``q`` holds ``math.inf`` for w_i = 0.
    """

    h: int
    q: list[float]
    active: list[ActiveSet]
    M0: list[int]
    M1: list[int]
    m01: int
    m02: int
    m11: int
    m12: int
    alpha: float | None
    beta: float | None
    domain: Domain = (0.0, 1.0)
    q_sentinels: tuple[float, float] = field(default=(0.0, 1.0))

    def to_json(self) -> dict:
        def enc(t):
            return "inf" if math.isinf(t) else t

        return {
            "h": self.h,
            "q": [enc(t) for t in self.q],
            "active": [None if s.empty else [s.lo, s.hi, s.lo_open, s.hi_open] for s in self.active],
            "M0": self.M0,
            "M1": self.M1,
            "m": [self.m01, self.m02, self.m11, self.m12],
            "alpha": self.alpha,
            "beta": self.beta,
            "domain": list(self.domain),
        }


def _m_pair(members: list[int], h: int) -> tuple[int, int]:
    return (min(members), max(members)) if members else (0, h + 1)


def _slope_right_of(theta: ParamVector, kind: ActivationKind, y: float) -> float:
    # exact slope of the piecewise affine realization on (y, y + eps)
    z = theta.w * y + theta.b
    side = np.where(z != 0, np.sign(z), np.sign(theta.w))
    g = kind.gamma
    pos_slope = 1.0 + min(g, 0.0)
    neg_slope = max(g, 0.0)
    d = np.where(side > 0, pos_slope, neg_slope)
    return float(np.sum(theta.v * theta.w * d))


def _slope_left_of(theta: ParamVector, kind: ActivationKind, y: float) -> float:
    mirrored = ParamVector.from_parts(-theta.w, theta.b, theta.v, theta.c)
    return -_slope_right_of(mirrored, kind, -y)


def geometry(theta: ParamVector, domain, kind: ActivationKind) -> Geometry:
    """q, I, M0/M1, m-indices and boundary slopes alpha/beta after mapping [a, b] to [0, 1]."""
    if kind.k != 1:
        raise DomainError("geometry is defined for the piecewise affine kinds (k = 1) only")
    dom = check_domain(domain)
    unit = rescale_to_unit(theta, dom)
    h = theta.h
    with np.errstate(over="ignore"):
        q = [float(-bb / ww) if ww != 0 else math.inf for ww, bb in zip(unit.w, unit.b)]
    active = [_active_set(ww, bb, 0.0, 1.0) for ww, bb in zip(unit.w, unit.b)]
    M0 = [i + 1 for i, t in enumerate(q) if 0.0 <= t <= 0.5]
    M1 = [i + 1 for i, t in enumerate(q) if 0.5 <= t <= 1.0]
    m01, m02 = _m_pair(M0, h)
    m11, m12 = _m_pair(M1, h)
    # slopes of the first and last affine piece; these coincide with the slope on
    # [0, q_{m01}] and [q_{m12}, 1] whenever no other kink sits inside those segments
    alpha = _slope_right_of(unit, kind, 0.0) if m01 != 0 else None
    beta = _slope_left_of(unit, kind, 1.0) if m12 != 0 else None
    return Geometry(h, q, active, M0, M1, m01, m02, m11, m12, alpha, beta, dom)
