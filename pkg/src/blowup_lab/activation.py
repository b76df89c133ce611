"""Activation family A_{k,gamma} and a smoothed (mollified) ReLU family.

Index map for ``k``::

    k < -5  softsign   x / (1 + |x|)
    k = -5  arctan
    k = -4  ISRU       x / sqrt(1 + xi x^2)
    k = -3  ELU        x for x > 0, exp(x) - 1 otherwise
    k = -2  tanh
    k = -1  logistic
    k =  0  softplus   ln(1 + exp(x))
    k >= 1  RePU       max(x, 0)^k + min(gamma x, 0)

All evaluators accept scalars or numpy arrays and return the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

# beyond this magnitude the exponential kinds use their asymptotic branch
SATURATION = 40.0

SOFTSIGN_K = -6
_NAMES = {
    -5: "arctan",
    -4: "isru",
    -3: "elu",
    -2: "tanh",
    -1: "logistic",
    0: "softplus",
}
_BY_NAME = {name: k for k, name in _NAMES.items()}
_BY_NAME["softsign"] = SOFTSIGN_K


class DomainError(ValueError):
    """Raised for non-finite inputs or parameters outside their admissible range."""


@dataclass(frozen=True)
class ActivationKind:
    """One member of the family, selected by ``k`` with leak ``gamma`` and ISRU ``xi``.

    ``gamma`` is kept for every kind but only used when ``k >= 1``.
    """

    k: int
    gamma: float = 0.0
    xi: float = 1.0

    def __post_init__(self):
        if int(self.k) != self.k:
            raise DomainError(f"k must be an integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        if not np.isfinite(self.gamma):
            raise DomainError("gamma must be finite")
        if self.k == -4 and not (0.0 < self.xi < 3.0):
            raise DomainError(f"ISRU requires xi in (0, 3), got {self.xi}")

    # --- classification -------------------------------------------------
    @property
    def name(self) -> str:
        if self.k < -5:
            return "softsign"
        if self.k <= 0:
            return _NAMES[self.k]
        if self.k == 1:
            return "relu" if self.gamma == 0 else "leaky_relu"
        return "repu"

    @property
    def is_smooth(self) -> bool:
        return self.k <= 0

    @property
    def is_piecewise_polynomial(self) -> bool:
        return self.k >= 1

    @property
    def smoothness(self) -> str:
        if self.k <= 0:
            return "smooth"
        if self.k == 1:
            return "kinked"
        return f"C^{self.k - 2}"

    # --- string encoding ------------------------------------------------
    @classmethod
    def parse(cls, text: str) -> "ActivationKind":
        """Parse the config encoding, e.g. ``"tanh"``, ``"isru:0.5"``, ``"repu:2:0"``."""
        parts = text.strip().lower().split(":")
        head, args = parts[0], parts[1:]
        try:
            if head == "relu" and not args:
                return cls(1, 0.0)
            if head == "leaky_relu" and len(args) == 1:
                return cls(1, float(args[0]))
            if head == "repu" and len(args) in (1, 2):
                k = int(args[0])
                if k < 1:
                    raise DomainError("repu needs k >= 1")
                return cls(k, float(args[1]) if len(args) == 2 else 0.0)
            if head == "isru" and len(args) <= 1:
                return cls(-4, xi=float(args[0]) if args else 1.0)
            if head in _BY_NAME and not args:
                return cls(_BY_NAME[head])
        except ValueError as exc:
            raise DomainError(f"bad activation string {text!r}: {exc}") from exc
        raise DomainError(f"unknown activation string {text!r}")

    def to_string(self) -> str:
        if self.k < -5:
            return "softsign"
        if self.k == -4:
            return f"isru:{self.xi:g}"
        if self.k <= 0:
            return _NAMES[self.k]
        if self.k == 1 and self.gamma == 0:
            return "relu"
        return f"repu:{self.k}:{self.gamma:g}"

    def __str__(self) -> str:
        return self.to_string()

    # --- evaluation -----------------------------------------------------
    def __call__(self, x):
        return evaluate(self, x)


def _as_finite(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("activation input must be finite")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _repu_parts(k: int, gamma: float, x):
    pos = np.maximum(x, 0.0)
    return pos**k + np.minimum(gamma * x, 0.0)


def evaluate(kind: ActivationKind, x):
    """A_{k,gamma}(x)."""
    z = _as_finite(x)
    k = kind.k
    if k < -5:
        y = z / (1.0 + np.abs(z))
    elif k == -5:
        y = np.arctan(z)
    elif k == -4:
        y = z / np.sqrt(1.0 + kind.xi * z * z)
    elif k == -3:
        y = np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))
    elif k == -2:
        y = np.where(np.abs(z) > SATURATION, np.sign(z), np.tanh(z))
    elif k == -1:
        y = expit(z)
    elif k == 0:
        # logaddexp(0, z) is ln(1 + e^z) without overflow; for z > 40 it is z + e^-z
        y = np.where(z > SATURATION, z + np.exp(-np.abs(z)), np.logaddexp(0.0, z))
    else:
        y = _repu_parts(k, kind.gamma, z)
    return _out(y, x)


def _leak_left_derivative(gamma: float, z):
    # left derivative of min(gamma z, 0); at z = 0 the value from below is kept
    if gamma > 0:
        return np.where(z <= 0, gamma, 0.0)
    if gamma < 0:
        return np.where(z > 0, gamma, 0.0)
    return np.zeros_like(z)


def derivative(kind: ActivationKind, x):
    """Derivative of A_{k,gamma}; for k = 1 the left derivative (so 0 at x = 0 for ReLU)."""
    z = _as_finite(x)
    k = kind.k
    if k < -5:
        d = 1.0 / (1.0 + np.abs(z)) ** 2
    elif k == -5:
        d = 1.0 / (1.0 + z * z)
    elif k == -4:
        d = (1.0 + kind.xi * z * z) ** -1.5
    elif k == -3:
        d = np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))
    elif k == -2:
        t = np.where(np.abs(z) > SATURATION, np.sign(z), np.tanh(z))
        d = np.where(np.abs(z) > SATURATION, 4.0 * np.exp(-2.0 * np.abs(z)), 1.0 - t * t)
    elif k == -1:
        s = expit(z)
        d = s * (1.0 - s)
    elif k == 0:
        d = expit(z)
    elif k == 1:
        d = np.where(z > 0, 1.0, 0.0) + _leak_left_derivative(kind.gamma, z)
    else:
        d = k * np.maximum(z, 0.0) ** (k - 1) + _leak_left_derivative(kind.gamma, z)
    return _out(d, x)


@dataclass(frozen=True)
class Mollifier:
    """C^1 approximation A^r of a base activation.

    For k = 1 bases the ReLU part is replaced by the sharp softplus
    ln(1 + e^{r x}) / r and the leak is smoothed the same way.  Other bases
    are already C^1 and are returned unchanged.
    """

    r: float
    base: ActivationKind

    def __post_init__(self):
        if not (self.r > 0 and np.isfinite(self.r)):
            raise DomainError("mollifier sharpness r must be a positive finite number")


def _soft_r(r: float, z):
    return np.logaddexp(0.0, r * z) / r


def mollified_eval(m: Mollifier, x):
    if m.base.k != 1:
        return evaluate(m.base, x)
    z = _as_finite(x)
    g = m.base.gamma
    y = _soft_r(m.r, z)
    if g > 0:
        # min(g z, 0) = -g max(-z, 0)
        y = y - g * _soft_r(m.r, -z)
    elif g < 0:
        # min(g z, 0) = g max(z, 0)
        y = y + g * _soft_r(m.r, z)
    return _out(y, x)


def mollified_derivative(m: Mollifier, x):
    if m.base.k != 1:
        return derivative(m.base, x)
    z = _as_finite(x)
    g = m.base.gamma
    s = expit(m.r * z)
    if g > 0:
        d = s + g * (1.0 - s)
    elif g < 0:
        d = (1.0 + g) * s
    else:
        d = s
    return _out(d, x)


RELU = ActivationKind(1, 0.0)
