"""L^2 risk over [a, b] and its (generalized) gradient.

Two independent evaluation routes are provided:

* ``risk_exact`` / exact gradient: for the piecewise polynomial kinds (k >= 1)
  the domain is cut at every kink and target discontinuity and the squared
  residual is integrated as a polynomial on each piece.
* ``risk_quadrature`` / quadrature gradient: adaptive Gauss-Kronrod on the
  pointwise integrand, valid for every kind.

For k = 1 the gradient is the limit of mollified gradients, which amounts to
integrating over the strict active sets {w_i x + b_i > 0}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.integrate import IntegrationWarning, quad_vec

from .activation import ActivationKind, DomainError, derivative, evaluate
from .network import ParamVector, check_domain, realize

DEFAULT_TOL = 1e-10
PANEL_BUDGET = 2**16


class QuadratureError(RuntimeError):
    """Adaptive quadrature missed the tolerance; ``estimate`` holds the best value."""

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


# --------------------------------------------------------------------------
# targets


def _bin_shift(coefs, m: float) -> np.ndarray:
    """Coefficients of P(m + t) in t, given ascending coefficients of P(x)."""
    coefs = np.asarray(coefs, dtype=float)
    out = np.zeros(max(len(coefs), 1))
    for j, cj in enumerate(coefs):
        if cj == 0:
            continue
        for i in range(j + 1):
            out[i] += cj * comb(j, i) * m ** (j - i)
    return out


@dataclass(frozen=True)
class Indicator:
    """1 on ((a + b)/2, b], 0 on [a, (a + b)/2]."""

    def __call__(self, x, domain):
        a, b = domain
        return np.where(np.asarray(x) > 0.5 * (a + b), 1.0, 0.0)

    def breaks(self, domain):
        return [0.5 * (domain[0] + domain[1])]

    def segment_poly(self, m, domain):
        return np.array([1.0 if m > 0.5 * (domain[0] + domain[1]) else 0.0])

    def rescaled(self, domain):
        return self

    def label(self):
        return "indicator"


@dataclass(frozen=True)
class Polynomial:
    """sum_j coefs[j] x^j."""

    coefs: tuple

    def __init__(self, coefs):
        object.__setattr__(self, "coefs", tuple(float(t) for t in coefs))

    def __call__(self, x, domain=None):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coefs)

    def breaks(self, domain):
        return []

    def segment_poly(self, m, domain):
        return _bin_shift(self.coefs, m)

    def rescaled(self, domain):
        a, b = domain
        return Polynomial(_compose_affine(self.coefs, a, b - a))

    def label(self):
        return "poly:" + ",".join(f"{t:g}" for t in self.coefs)


def _compose_affine(coefs, shift, scale):
    # P(shift + scale y) in powers of y
    base = _bin_shift(coefs, shift)
    return tuple(base[i] * scale**i for i in range(len(base)))


def Identity() -> Polynomial:
    return Polynomial((0.0, 1.0))


def Square() -> Polynomial:
    return Polynomial((0.0, 0.0, 1.0))


@dataclass(frozen=True)
class ShiftedReluPower:
    """scale * max(x - (a + b)/2, 0)^p."""

    p: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.p >= 1:
            raise DomainError("ShiftedReluPower needs p >= 1")

    def __call__(self, x, domain):
        mid = 0.5 * (domain[0] + domain[1])
        return self.scale * np.maximum(np.asarray(x, dtype=float) - mid, 0.0) ** self.p

    def breaks(self, domain):
        return [0.5 * (domain[0] + domain[1])]

    @property
    def polynomial(self) -> bool:
        return float(self.p).is_integer()

    def segment_poly(self, m, domain):
        mid = 0.5 * (domain[0] + domain[1])
        if m <= mid:
            return np.array([0.0])
        p = int(self.p)
        # (m - mid + t)^p
        return self.scale * np.array([comb(p, i) * (m - mid) ** (p - i) for i in range(p + 1)])

    def rescaled(self, domain):
        return ShiftedReluPower(self.p, self.scale * (domain[1] - domain[0]) ** self.p)

    def label(self):
        return f"relu_power:{self.p:g}"


Target = Indicator | Polynomial | ShiftedReluPower


def parse_target(text: str) -> Target:
    """``indicator``, ``identity``, ``square``, ``relu_power:<p>``, ``poly:c0,c1,...``."""
    t = text.strip().lower()
    if t == "indicator":
        return Indicator()
    if t == "identity":
        return Identity()
    if t == "square":
        return Square()
    if t.startswith("relu_power:"):
        return ShiftedReluPower(float(t.split(":", 1)[1]))
    if t.startswith("poly:"):
        return Polynomial([float(s) for s in t.split(":", 1)[1].split(",")])
    raise DomainError(f"unknown target {text!r}")


def _target_is_polynomial(target) -> bool:
    return not isinstance(target, ShiftedReluPower) or target.polynomial


# --------------------------------------------------------------------------
# reports


@dataclass
class RiskReport:
    value: float
    method: str
    est_abs_error: float
    segments: int

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "est_abs_error": self.est_abs_error,
            "segments": self.segments,
        }


# --------------------------------------------------------------------------
# exact piecewise polynomial route


def _pmul(p, q):
    """Product of coefficient arrays along the last axis (broadcast over the rest)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    shape = np.broadcast_shapes(p.shape[:-1], q.shape[:-1]) + (p.shape[-1] + q.shape[-1] - 1,)
    out = np.zeros(shape)
    for i in range(p.shape[-1]):
        out[..., i : i + q.shape[-1]] += p[..., i : i + 1] * q
    return out


def _pad(p, n):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] >= n:
        return p
    width = [(0, 0)] * (p.ndim - 1) + [(0, n - p.shape[-1])]
    return np.pad(p, width)


def _moments(half: float, n: int) -> np.ndarray:
    # int_{-H}^{H} t^p dt
    p = np.arange(n)
    mom = np.where(p % 2 == 0, 2.0 * half ** (p + 1) / (p + 1), 0.0)
    return mom


def _segments(theta: ParamVector, target, domain):
    a, b = domain
    cuts = {a, b}
    for ww, bb in zip(theta.w, theta.b):
        if ww != 0:
            # a subnormal w may overflow to +-inf, which lies outside the domain anyway
            with np.errstate(over="ignore"):
                q = -bb / ww
            if a < q < b:
                cuts.add(q)
    for t in target.breaks(domain):
        if a < t < b:
            cuts.add(t)
    pts = sorted(cuts)
    return [(lo, hi) for lo, hi in zip(pts[:-1], pts[1:]) if hi > lo]


def _neuron_polys(theta: ParamVector, kind: ActivationKind, m: float):
    """A(w_i(m+t)+b_i) and A'(...) as polynomials in t on a kink-free piece around m."""
    k, g = kind.k, kind.gamma
    w, bb = theta.w, theta.b
    zm = w * m + bb
    side = np.sign(zm)
    h = theta.h
    # powers z^j as polynomials in t: z = zm + w t
    zpow = np.zeros((k + 1, h, k + 1))
    for j in range(k + 1):
        for i in range(j + 1):
            zpow[j, :, i] = comb(j, i) * zm ** (j - i) * w**i
    A = np.zeros((h, k + 1))
    dA = np.zeros((h, k + 1))
    pos = side > 0
    neg = side < 0
    A[pos] = zpow[k][pos]
    dA[pos] = k * _pad(zpow[k - 1][pos], k + 1)
    if g < 0:
        A[pos] += g * _pad(zpow[1][pos], k + 1)
        dA[pos, 0] += g
    if g > 0:
        A[neg] += g * _pad(zpow[1][neg], k + 1)
        dA[neg, 0] += g
        # z identically 0 (w = b = 0): keep the left derivative, which is g
        flat = side == 0
        dA[flat, 0] += g
    return A, dA


def _exact_pieces(theta, kind, target, domain, want_grad):
    if kind.k < 1:
        raise DomainError("exact integration needs a piecewise polynomial kind (k >= 1)")
    if not _target_is_polynomial(target):
        raise DomainError("exact integration needs a piecewise polynomial target")
    segs = _segments(theta, target, domain)
    h = theta.h
    total = 0.0
    magnitude = 0.0
    grad = np.zeros(3 * h + 1)
    for lo, hi in segs:
        m = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        A, dA = _neuron_polys(theta, kind, m)
        N = theta.v @ A
        N[0] += theta.c
        f = np.asarray(target.segment_poly(m, domain), dtype=float)
        n = max(N.size, f.size)
        R = _pad(N, n) - _pad(f, n)
        RR = _pmul(R, R)
        mom = _moments(half, 2 * n + 2)
        piece = float(RR @ mom[: RR.size])
        total += piece
        magnitude += float(np.abs(RR) @ mom[: RR.size])
        if want_grad:
            x = np.array([m, 1.0])
            dAR = _pmul(dA, R)
            xdAR = _pmul(dAR, x)
            AR = _pmul(A, R)
            grad[:h] += 2.0 * theta.v * (xdAR @ mom[: xdAR.shape[-1]])
            grad[h : 2 * h] += 2.0 * theta.v * (dAR @ mom[: dAR.shape[-1]])
            grad[2 * h : 3 * h] += 2.0 * (AR @ mom[: AR.shape[-1]])
            grad[3 * h] += 2.0 * float(R @ mom[: R.size])
    return max(total, 0.0), magnitude, len(segs), grad


def risk_exact(theta: ParamVector, kind: ActivationKind, target, domain) -> RiskReport:
    dom = check_domain(domain)
    value, magnitude, nseg, _ = _exact_pieces(theta, kind, target, dom, want_grad=False)
    return RiskReport(value, "exact", 4 * np.finfo(float).eps * magnitude, nseg)


def gradient_exact(theta: ParamVector, kind: ActivationKind, target, domain) -> np.ndarray:
    dom = check_domain(domain)
    return _exact_pieces(theta, kind, target, dom, want_grad=True)[3]


# --------------------------------------------------------------------------
# quadrature route


def _quad(fun, domain, points, tol, rel_tol=0.0):
    if not (1e-13 <= tol <= 1e-3):
        raise DomainError("quadrature tolerance must lie in [1e-13, 1e-3]")
    a, b = domain
    pts = sorted({p for p in points if a < p < b})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        res, err, info = quad_vec(
            fun,
            a,
            b,
            epsabs=tol,
            epsrel=rel_tol,
            norm="max",
            limit=PANEL_BUDGET,
            points=pts or None,
            quadrature="gk21",
            full_output=True,
        )
    nint = int(getattr(info, "intervals", np.zeros((0, 2))).shape[0])
    if err > max(tol, rel_tol * float(np.max(np.abs(res)))):
        raise QuadratureError(f"quadrature error {err:.3g} above tolerance {tol:.3g}", res, err)
    return res, float(err), nint


def _quad_points(theta, target, domain, split_at_kinks):
    pts = list(target.breaks(domain))
    if split_at_kinks:
        with np.errstate(over="ignore"):
            pts += [-bb / ww for ww, bb in zip(theta.w, theta.b) if ww != 0]
    return pts


def risk_quadrature(
    theta: ParamVector,
    kind: ActivationKind,
    target,
    domain,
    tol: float = DEFAULT_TOL,
    split_at_kinks: bool = False,
    rel_tol: float = 0.0,
) -> RiskReport:
    """Adaptive Gauss-Kronrod estimate of int_a^b (N - f)^2, split a priori at target jumps."""
    dom = check_domain(domain)

    def integrand(x):
        r = realize(theta, kind, x) - float(target(x, dom))
        return r * r

    res, err, nint = _quad(integrand, dom, _quad_points(theta, target, dom, split_at_kinks), tol, rel_tol)
    return RiskReport(float(max(res, 0.0)), "quadrature", err, nint)


def gradient_quadrature(
    theta: ParamVector,
    kind: ActivationKind,
    target,
    domain,
    tol: float = DEFAULT_TOL,
    split_at_kinks: bool = False,
) -> np.ndarray:
    dom = check_domain(domain)
    w, bb, v = theta.w, theta.b, theta.v

    def integrand(x):
        z = w * x + bb
        r = theta.c + v @ evaluate(kind, z) - float(target(x, dom))
        d = derivative(kind, z)
        return 2.0 * r * np.concatenate([v * x * d, v * d, evaluate(kind, z), [1.0]])

    res, _, _ = _quad(integrand, dom, _quad_points(theta, target, dom, split_at_kinks), tol)
    return np.asarray(res, dtype=float)


# --------------------------------------------------------------------------
# dispatch


def can_integrate_exactly(kind: ActivationKind, target) -> bool:
    return kind.k >= 1 and _target_is_polynomial(target)


def risk(theta, kind, target, domain, method: str = "auto", tol: float = DEFAULT_TOL, split_at_kinks: bool = False) -> RiskReport:
    if method == "exact" or (method == "auto" and can_integrate_exactly(kind, target)):
        return risk_exact(theta, kind, target, domain)
    if method in ("auto", "quadrature"):
        return risk_quadrature(theta, kind, target, domain, tol, split_at_kinks)
    raise DomainError(f"unknown method {method!r}")


def risk_value(theta, kind, target, domain, method: str = "auto", tol: float = DEFAULT_TOL, split_at_kinks: bool = False) -> float:
    return risk(theta, kind, target, domain, method, tol, split_at_kinks).value


def gradient(theta, kind, target, domain, method: str = "auto", tol: float = DEFAULT_TOL, split_at_kinks: bool = False) -> np.ndarray:
    """Generalized gradient G(theta), length 3h+1."""
    if method == "exact" or (method == "auto" and can_integrate_exactly(kind, target)):
        return gradient_exact(theta, kind, target, domain)
    if method in ("auto", "quadrature"):
        return gradient_quadrature(theta, kind, target, domain, tol, split_at_kinks)
    raise DomainError(f"unknown method {method!r}")


def gradient_fd(
    theta: ParamVector,
    kind: ActivationKind,
    target,
    domain,
    scheme: str = "central",
    step: float = 1e-6,
    tol: float = 1e-13,
    split_at_kinks: bool = True,
) -> np.ndarray:
    """Finite-difference gradient of the quadrature risk.

    ``central`` uses (L(t+s) - L(t-s)) / 2s.  ``left`` only samples from below,
    using the second order backward stencil (3L(t) - 4L(t-s) + L(t-2s)) / 2s,
    so it approximates the componentwise left derivative.
    """
    if not (1e-9 <= step <= 1e-3):
        raise DomainError("finite difference step must lie in [1e-9, 1e-3]")
    if scheme not in ("central", "left"):
        raise DomainError(f"unknown scheme {scheme!r}")
    dom = check_domain(domain)

    def L(vals):
        report = risk_quadrature(ParamVector(theta.h, vals), kind, target, dom, tol, split_at_kinks, rel_tol=1e-13)
        return report.value

    base = theta.values
    out = np.zeros(base.size)
    f0 = L(base) if scheme == "left" else None
    for i in range(base.size):
        e = np.zeros(base.size)
        e[i] = step
        if scheme == "central":
            out[i] = (L(base + e) - L(base - e)) / (2 * step)
        else:
            out[i] = (3 * f0 - 4 * L(base - e) + L(base - 2 * e)) / (2 * step)
    return out


def affine_lower_bound(alpha: float, a: float, b: float) -> float:
    """min over beta of int_a^b (alpha x + beta)^2 dx = alpha^2 (b - a)^3 / 12."""
    return alpha * alpha * (b - a) ** 3 / 12.0


__all__ = [
    "Indicator",
    "Polynomial",
    "Identity",
    "Square",
    "ShiftedReluPower",
    "parse_target",
    "RiskReport",
    "QuadratureError",
    "risk",
    "risk_value",
    "risk_exact",
    "risk_quadrature",
    "gradient",
    "gradient_exact",
    "gradient_quadrature",
    "gradient_fd",
    "can_integrate_exactly",
    "affine_lower_bound",
]
