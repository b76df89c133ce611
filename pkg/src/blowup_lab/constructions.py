"""Explicit parameter sequences whose risk tends to zero, and their checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .activation import ActivationKind, DomainError
from .network import ParamVector, check_domain, realize
from .risk_gradient import (
    Identity,
    Indicator,
    ShiftedReluPower,
    Square,
    can_integrate_exactly,
    risk_exact,
    risk_quadrature,
)

E = math.e

FAMILY_NAMES = (
    "relu_indicator",
    "leaky_relu_indicator",
    "softplus_square",
    "softplus_relu_target",
    "softplus_identity_exact",
    "logistic_identity",
    "logistic_square",
    "tanh_square",
    "isru_identity",
    "isru_square",
    "arctan_identity",
    "arctan_square",
    "repu_power",
    "elu_square",
    "softsign_square",
)


@dataclass(frozen=True)
class Family:
    """A named construction plus its parameter.

    ``param`` is gamma for the two ReLU families, the sharpness multiplier for
    ``softplus_relu_target`` (sharpness r = param * n), xi for the ISRU
    families and the power k for ``repu_power``; it is ignored otherwise.
    """

    name: str
    param: float | None = None

    def __post_init__(self):
        if self.name not in FAMILY_NAMES:
            raise DomainError(f"unknown family {self.name!r}")
        p = self.resolved_param
        if self.name == "relu_indicator" and p > 0:
            raise DomainError("relu_indicator needs gamma <= 0")
        if self.name == "leaky_relu_indicator" and (p <= 0 or p == 1):
            raise DomainError("leaky_relu_indicator needs gamma in (0, inf) without 1")
        if self.name.startswith("isru") and not (0 < p < 3):
            raise DomainError("ISRU families need xi in (0, 3)")
        if self.name == "repu_power" and (p < 2 or not float(p).is_integer()):
            raise DomainError("repu_power needs an integer k >= 2")
        if self.name == "softplus_relu_target" and p <= 0:
            raise DomainError("softplus_relu_target needs r > 0")

    @property
    def resolved_param(self) -> float:
        if self.param is not None:
            return float(self.param)
        return {
            "leaky_relu_indicator": 0.5,
            "softplus_relu_target": 1.0,
            "isru_identity": 1.0,
            "isru_square": 1.0,
            "repu_power": 2.0,
        }.get(self.name, 0.0)

    @classmethod
    def parse(cls, text: str) -> "Family":
        name, _, arg = text.strip().lower().partition(":")
        return cls(name, float(arg) if arg else None)

    def label(self) -> str:
        return self.name if self.param is None else f"{self.name}:{self.param:g}"

    # --- static description ---------------------------------------------
    @property
    def kind(self) -> ActivationKind:
        p = self.resolved_param
        n = self.name
        if n in ("relu_indicator", "leaky_relu_indicator"):
            return ActivationKind(1, p)
        if n.startswith("softplus"):
            return ActivationKind(0)
        if n.startswith("logistic"):
            return ActivationKind(-1)
        if n.startswith("tanh"):
            return ActivationKind(-2)
        if n.startswith("isru"):
            return ActivationKind(-4, xi=p)
        if n.startswith("arctan"):
            return ActivationKind(-5)
        if n == "repu_power":
            return ActivationKind(int(p))
        if n == "elu_square":
            return ActivationKind(-3)
        return ActivationKind(-6)

    @property
    def target(self):
        n = self.name
        if n.endswith("indicator"):
            return Indicator()
        if n.endswith("square"):
            return Square()
        if n.endswith("identity") or n == "softplus_identity_exact":
            return Identity()
        if n == "softplus_relu_target":
            return ShiftedReluPower(1.0)
        return ShiftedReluPower(self.resolved_param - 1.0)

    @property
    def min_h(self) -> int:
        return 1 if self.name in ("softplus_relu_target", "logistic_identity", "isru_identity", "arctan_identity") else 2

    @property
    def exact_fit(self) -> bool:
        return self.name == "softplus_identity_exact"

    def min_n(self, domain) -> int:
        """Smallest n for which the construction's local expansion covers the domain."""
        a, b = check_domain(domain)
        reach = max(abs(a), abs(b))
        if self.name == "elu_square":
            if b == 0:
                raise DomainError("elu_square is undefined for domains with right end 0")
            return max(1, math.ceil(reach), math.ceil(reach / (2 * abs(b))))
        if self.name in ("relu_indicator", "leaky_relu_indicator", "softplus_relu_target", "repu_power", "softplus_identity_exact"):
            return 1
        return max(1, math.ceil(reach))


def all_families() -> list[Family]:
    return [Family(name) for name in FAMILY_NAMES]


def _first_neurons(f: Family, n: float, domain):
    a, b = domain
    mid = 0.5 * (a + b)
    p = f.resolved_param
    name = f.name
    if name in ("relu_indicator", "leaky_relu_indicator"):
        slope = (n + 3) / (2 * (b - a))
        w = [slope, slope]
        bias = [-(1 + n) / 4 - a * slope, -(5 + n) / 4 - a * slope]
        v = [1 / (1 - p), -1 / (1 - p)]
        c = 0.0 if name == "relu_indicator" else -p / (1 - p)
        return w, bias, v, c
    if name == "softplus_square":
        return [1 / n, -1 / n], [0.0, 0.0], [4 * n * n, 4 * n * n], -8 * n * n * math.log(2)
    if name == "softplus_relu_target":
        r = p * n
        return [r], [-r * mid], [1 / r], 0.0
    if name == "softplus_identity_exact":
        return [1.0, -1.0], [0.0, 0.0], [1.0, -1.0], 0.0
    if name == "logistic_identity":
        # 4n sigma(x/n) - 2n -> x
        return [1 / n], [0.0], [4 * n], -2 * n
    if name == "logistic_square":
        v = n * n * (1 + E) ** 3 / (E * (E - 1))
        c = -2 * n * n * (1 + E) ** 2 / (E * (E - 1))
        return [-1 / n, 1 / n], [-1.0, -1.0], [v, v], c
    if name == "tanh_square":
        e2 = E * E
        v = n * n * (1 + e2) ** 3 / (8 * e2 * (e2 - 1))
        c = n * n * (1 + e2) ** 2 / (4 * e2)
        return [1 / n, -1 / n], [-1.0, -1.0], [v, v], c
    if name == "isru_identity":
        return [1 / n], [0.0], [float(n)], 0.0
    if name == "isru_square":
        xi = p
        v = -((xi + 4) ** 2.5) * n * n / (48 * xi)
        c = (xi + 4) ** 2.5 * n * n / (48 * xi * math.sqrt(1 + xi / 4))
        return [1 / n, -1 / n], [0.5, 0.5], [v, v], c
    if name == "arctan_identity":
        return [1 / n], [0.0], [float(n)], 0.0
    if name == "arctan_square":
        return [1 / n, -1 / n], [1.0, 1.0], [-2 * n * n, -2 * n * n], math.pi * n * n
    if name == "repu_power":
        k = p
        return [1.0, 1.0], [1 / n - mid, -mid], [n / k, -n / k], 0.0
    if name == "elu_square":
        s = 2 * abs(b)
        v = n * n * math.exp(s)
        return [-1 / n, 1 / n], [-s, -s], [v, v], -2 * n * n * (1 - math.exp(s))
    if name == "softsign_square":
        cc = max(abs(a), abs(b))
        v = -((cc + 1) ** 3) * n * n / 2
        return [1 / n, -1 / n], [cc, cc], [v, v], cc * (cc + 1) ** 2 * n * n
    raise DomainError(name)


def sequence_theta(family: Family, n: float, domain=(0.0, 1.0), h: int | None = None) -> ParamVector:
    """theta_n of the family; neurons beyond the family's own are zero."""
    dom = check_domain(domain)
    if not n >= 1:
        raise DomainError("sequence index n must be >= 1")
    h = family.min_h if h is None else int(h)
    if h < family.min_h:
        raise DomainError(f"{family.name} needs h >= {family.min_h}")
    w0, b0, v0, c = _first_neurons(family, float(n), dom)
    w, b, v = (np.zeros(h) for _ in range(3))
    m = len(w0)
    w[:m], b[:m], v[:m] = w0, b0, v0
    return ParamVector.from_parts(w, b, v, c)


def sequence_risk_bound(family: Family, n: float, domain=(0.0, 1.0)) -> float | None:
    """Explicit risk bound where one with a known constant is available."""
    a, b = check_domain(domain)
    if family.name in ("relu_indicator", "leaky_relu_indicator"):
        return (b - a) / (2 * (n + 3))
    if family.name == "softplus_relu_target":
        # 0 <= N - target <= 1/r pointwise
        r = family.resolved_param * n
        return (b - a) / (r * r)
    if family.exact_fit:
        return 0.0
    return None


def family_risk(family: Family, theta: ParamVector, domain) -> float:
    dom = check_domain(domain)
    if can_integrate_exactly(family.kind, family.target):
        return risk_exact(theta, family.kind, family.target, dom).value
    # relative control keeps tiny risks meaningful
    return risk_quadrature(theta, family.kind, family.target, dom, tol=1e-13, rel_tol=1e-5).value


def default_n_list(family: Family, domain=(0.0, 1.0)) -> list[float]:
    if family.name in ("relu_indicator", "leaky_relu_indicator"):
        base = [1, 10, 100, 1000, 10000]
    elif family.exact_fit:
        base = [1]
    elif family.name == "arctan_square":
        # the quartic terms cancel, so the risk reaches rounding level by n ~ 30
        base = [1, 3, 10]
    elif family.name == "elu_square":
        # v and c grow like n^2 e^{2 reach}, so large n drowns the risk in cancellation
        base = [1, 5, 25]
    else:
        base = [10, 100, 1000]
    lo = family.min_n(domain)
    return [float(max(n, lo * n)) if lo > 1 else float(n) for n in base]


@dataclass
class SequenceReport:
    family: str
    domain: tuple
    h: int
    rows: list[dict] = field(default_factory=list)
    passed: bool = True
    messages: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "domain": list(self.domain),
            "h": self.h,
            "rows": self.rows,
            "pass": self.passed,
            "messages": self.messages,
        }


def verify_sequence(
    family: Family,
    n_list=None,
    domain=(0.0, 1.0),
    h: int | None = None,
    final_ratio: float = 1e-3,
    exact_tol: float = 1e-18,
) -> SequenceReport:
    """Risk along the sequence: tail decrease, final drop below ``final_ratio`` x first, bound."""
    dom = check_domain(domain)
    h = family.min_h if h is None else h
    ns = list(default_n_list(family, dom) if n_list is None else n_list)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError("n_list must be increasing")
    rep = SequenceReport(family.label(), dom, h)
    lo = family.min_n(dom)
    if ns[0] < lo:
        rep.messages.append(f"n below validity window ({lo}) included; such rows are informative only")
    risks = []
    for n in ns:
        th = sequence_theta(family, n, dom, h)
        r = family_risk(family, th, dom)
        bound = sequence_risk_bound(family, n, dom)
        ok = bound is None or r <= bound * (1 + 1e-12) + 1e-300
        if family.exact_fit:
            ok = r <= exact_tol
        rep.rows.append({"family": family.label(), "n": n, "risk": r, "bound": bound, "pass": bool(ok)})
        risks.append(r)
        if not ok:
            rep.passed = False
            rep.messages.append(f"n={n:g}: risk {r:.3e} violates bound/tolerance")
    if family.exact_fit:
        return rep
    drops = [b < a for a, b in zip(risks, risks[1:])]
    bad = [i for i, d in enumerate(drops) if not d]
    if bad:
        if bad == [0]:
            rep.messages.append("one pre-asymptotic increase between the first two n values")
        else:
            rep.passed = False
            rep.messages.append(f"risk not decreasing at positions {bad}")
    if len(risks) > 1 and not risks[-1] <= final_ratio * risks[0]:
        rep.passed = False
        rep.messages.append(f"final risk {risks[-1]:.3e} not below {final_ratio:g} x first {risks[0]:.3e}")
    return rep


def envelope_gap(family: Family, n: float, domain=(0.0, 1.0), points: int = 10_000) -> tuple[float, float]:
    """(min, max) of N - target on a uniform grid."""
    dom = check_domain(domain)
    th = sequence_theta(family, n, dom)
    xs = np.linspace(dom[0], dom[1], points)
    gap = realize(th, family.kind, xs) - family.target(xs, dom)
    return float(gap.min()), float(gap.max())
