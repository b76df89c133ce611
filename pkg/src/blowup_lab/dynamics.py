"""Gradient-flow and gradient-descent trajectories and their diagnostics."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import DOP853, RK45, Radau

from .activation import ActivationKind, DomainError
from .network import ParamVector, check_domain
from .risk_gradient import gradient, risk_value


class UnsupportedTrajectory(ValueError):
    pass


# RK45 is Dormand-Prince 5(4); Radau (implicit, order 5) is for stiff runs such as
# sharply ramped ReLU networks, where explicit steps are stability-limited
_SOLVERS = {"RK45": RK45, "DOP853": DOP853, "Radau": Radau}


@dataclass
class FlowConfig:
    t_end: float = 10.0
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 200_000
    norm_cap: float = 1e6
    record_stride: int = 1
    grad_tol: float = 1e-10
    disp_tol: float = 1e-9
    quad_tol: float = 1e-12
    method: str = "RK45"

    def __post_init__(self):
        if self.method not in _SOLVERS:
            raise DomainError(f"method must be one of {sorted(_SOLVERS)}")
        if not self.t_end > 0:
            raise DomainError("t_end must be positive")
        for name in ("rtol", "atol"):
            val = getattr(self, name)
            if not 1e-12 <= val <= 1e-3:
                raise DomainError(f"{name} must lie in [1e-12, 1e-3], got {val}")
        if not self.norm_cap > 0:
            raise DomainError("norm_cap must be positive")
        if self.max_steps < 1 or self.record_stride < 1:
            raise DomainError("max_steps and record_stride must be >= 1")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Trajectory:
    """Recorded samples of a run; ``energy`` holds int_0^t |G|^2 for flows and is None for GD."""

    t: np.ndarray
    theta: np.ndarray
    risk: np.ndarray
    grad_norm: np.ndarray
    param_norm: np.ndarray
    energy: np.ndarray | None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def mode(self) -> str:
        return self.meta.get("mode", "gf")

    def final_theta(self) -> ParamVector:
        return ParamVector(self.meta["h"], self.theta[-1])

    def write_csv(self, path, with_theta: bool = True) -> None:
        header = ["t", "risk", "grad_norm", "param_norm"]
        d = self.theta.shape[1]
        if with_theta:
            header += [f"theta_{i}" for i in range(d)]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for i in range(len(self)):
                row = [repr(float(self.t[i])), repr(float(self.risk[i])), repr(float(self.grad_norm[i])), repr(float(self.param_norm[i]))]
                if with_theta:
                    row += [repr(float(x)) for x in self.theta[i]]
                wr.writerow(row)


class _Recorder:
    def __init__(self, h, with_energy):
        self.h = h
        self.rows = {k: [] for k in ("t", "theta", "risk", "grad_norm", "param_norm", "energy")}
        self.with_energy = with_energy

    def add(self, t, vals, L, g, energy=None):
        if not math.isfinite(L):
            raise DomainError(f"non-finite risk at t={t}")
        r = self.rows
        r["t"].append(t)
        r["theta"].append(np.array(vals, dtype=float))
        r["risk"].append(L)
        r["grad_norm"].append(float(np.linalg.norm(g)))
        r["param_norm"].append(float(np.linalg.norm(vals)))
        r["energy"].append(energy)

    @property
    def last_t(self):
        return self.rows["t"][-1]

    def build(self, meta) -> Trajectory:
        r = self.rows
        return Trajectory(
            np.array(r["t"], dtype=float),
            np.array(r["theta"]),
            np.array(r["risk"]),
            np.array(r["grad_norm"]),
            np.array(r["param_norm"]),
            np.array(r["energy"], dtype=float) if self.with_energy else None,
            meta,
        )


def _meta(mode, theta0, kind, target, domain, digest):
    return {
        "mode": mode,
        "h": theta0.h,
        "kind": kind.to_string(),
        "target": target.label(),
        "domain": list(domain),
        "config_hash": digest,
        "status": "completed",
        "message": "",
    }


def gf_integrate(theta0: ParamVector, kind: ActivationKind, target, domain, cfg: FlowConfig | None = None) -> Trajectory:
    """Integrate Theta' = -G(Theta) with an adaptive embedded Runge-Kutta scheme (``cfg.method``).

    The state is augmented by E(t) = int_0^t |G|^2 ds so the energy identity can be checked
    against the very same integrator.  A partial trajectory is returned when the norm cap is
    reached, the step size underflows or max_steps is exhausted; ``meta['status']`` says which.
    """
    cfg = cfg or FlowConfig()
    dom = check_domain(domain)
    h, d = theta0.h, theta0.dim

    def G(vals):
        return gradient(ParamVector(h, vals), kind, target, dom, tol=cfg.quad_tol, split_at_kinks=True)

    def L(vals):
        return risk_value(ParamVector(h, vals), kind, target, dom, tol=cfg.quad_tol, split_at_kinks=True)

    def rhs(_t, y):
        g = G(y[:d])
        return np.concatenate([-g, [g @ g]])

    rec = _Recorder(h, True)
    meta = _meta("gf", theta0, kind, target, dom, cfg.digest())
    y0 = np.concatenate([theta0.values, [0.0]])
    rec.add(0.0, y0[:d], L(y0[:d]), G(y0[:d]), 0.0)
    if theta0.norm() > cfg.norm_cap:
        meta.update(status="norm_cap", message="initial norm above cap")
        return rec.build(meta)

    solver = _SOLVERS[cfg.method](rhs, 0.0, y0, cfg.t_end, rtol=cfg.rtol, atol=cfg.atol)
    # Radau's finite-difference Jacobian grows its probe factors until they overflow; harmless
    with np.errstate(over="ignore"):
        steps = _drive(solver, cfg, rec, meta, d, L, G)
    meta["steps"] = steps
    return rec.build(meta)


def _drive(solver, cfg, rec, meta, d, L, G) -> int:
    steps = 0
    while solver.status == "running":
        if steps >= cfg.max_steps:
            meta.update(status="max_steps", message=f"stopped after {steps} steps")
            break
        msg = solver.step()
        steps += 1
        if solver.status == "failed":
            meta.update(status="step_underflow", message=str(msg))
            break
        y = solver.y
        capped = np.linalg.norm(y[:d]) > cfg.norm_cap
        if steps % cfg.record_stride == 0 or solver.status == "finished" or capped:
            rec.add(float(solver.t), y[:d], L(y[:d]), G(y[:d]), float(y[d]))
        if capped:
            meta.update(status="norm_cap", message=f"|theta| exceeded {cfg.norm_cap:g} at t={solver.t:.6g}")
            break
    return steps


@dataclass(frozen=True)
class ConstantStep:
    lr: float

    def __post_init__(self):
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise DomainError("learning rate must be finite and >= 0")


@dataclass(frozen=True)
class Armijo:
    """Backtracking line search: shrink lr until L(theta - lr G) <= L(theta) - c1 lr |G|^2."""

    lr0: float = 1.0
    c1: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 40
    lr_min: float = 1e-12
    grow: float = 2.0

    def __post_init__(self):
        if not (self.lr0 > 0 and 0 < self.c1 < 1 and 0 < self.shrink < 1 and self.grow >= 1):
            raise DomainError("invalid Armijo parameters")


def gd_iterate(
    theta0: ParamVector,
    kind: ActivationKind,
    target,
    domain,
    schedule,
    n_steps: int,
    record_stride: int = 1,
    quad_tol: float = 1e-10,
    norm_cap: float = 1e6,
) -> Trajectory:
    """theta_{n+1} = theta_n - lr_n G(theta_n); the time axis is the step index."""
    dom = check_domain(domain)
    if n_steps < 0 or record_stride < 1:
        raise DomainError("n_steps must be >= 0 and record_stride >= 1")
    h = theta0.h

    def G(vals):
        return gradient(ParamVector(h, vals), kind, target, dom, tol=quad_tol, split_at_kinks=True)

    def L(vals):
        return risk_value(ParamVector(h, vals), kind, target, dom, tol=quad_tol, split_at_kinks=True)

    rec = _Recorder(h, False)
    digest = hashlib.sha256(repr(schedule).encode()).hexdigest()[:16]
    meta = _meta("gd", theta0, kind, target, dom, digest)
    meta["line_search_failures"] = []
    vals = theta0.values.copy()
    Lc = L(vals)
    g = G(vals)
    rec.add(0.0, vals, Lc, g)
    lr_prev = schedule.lr0 if isinstance(schedule, Armijo) else None
    for step in range(1, n_steps + 1):
        if isinstance(schedule, ConstantStep):
            vals = vals - schedule.lr * g
            Lc = L(vals)
        elif isinstance(schedule, Armijo):
            gg = float(g @ g)
            lr = min(schedule.lr0, lr_prev * schedule.grow)
            for _ in range(schedule.max_backtracks):
                cand = vals - lr * g
                Lnew = L(cand)
                if Lnew <= Lc - schedule.c1 * lr * gg:
                    break
                lr *= schedule.shrink
            else:
                meta["line_search_failures"].append(step)
                lr = schedule.lr_min
                cand = vals - lr * g
                Lnew = L(cand)
            lr_prev = max(lr, schedule.lr_min)
            vals, Lc = cand, Lnew
        else:
            raise DomainError(f"unknown schedule {schedule!r}")
        g = G(vals)
        capped = np.linalg.norm(vals) > norm_cap
        if step % record_stride == 0 or step == n_steps or capped:
            rec.add(float(step), vals, Lc, g)
        if capped:
            meta.update(status="norm_cap", message=f"|theta| exceeded {norm_cap:g} at step {step}")
            break
    return rec.build(meta)


@dataclass
class Verdict:
    verdict: str  # "diverging" | "converged" | "undecided"
    evidence: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, **self.evidence}


def norm_trend(tr: Trajectory, start_fraction: float = 0.0) -> float:
    """Least-squares slope of |theta| against time over the samples after ``start_fraction``."""
    n = len(tr)
    i0 = min(int(n * start_fraction), n - 2) if n > 1 else 0
    t, y = tr.t[i0:], tr.param_norm[i0:]
    if len(t) < 2:
        return 0.0
    tc = t - t.mean()
    den = float(tc @ tc)
    return float(tc @ (y - y.mean()) / den) if den > 0 else 0.0


def classify(
    tr: Trajectory,
    eps_floor: float = 0.0,
    grad_tol: float = 1e-10,
    disp_tol: float = 1e-9,
    window: float = 0.1,
) -> Verdict:
    """Evidence-based verdict; a Diverging label never claims an observed infinity."""
    if len(tr) == 0:
        raise DomainError("empty trajectory")
    if tr.meta.get("status") == "norm_cap":
        return Verdict("diverging", {"reason": "norm_cap", "max_param_norm": float(tr.param_norm.max())})
    n = len(tr)
    w0 = max(0, n - max(2, math.ceil(window * n)))
    tail = tr.theta[w0:]
    disp = float(np.max(np.linalg.norm(tail - tr.theta[-1], axis=1)))
    g_last = float(tr.grad_norm[-1])
    if g_last <= grad_tol and disp <= disp_tol:
        return Verdict("converged", {"theta": tr.theta[-1].tolist(), "grad_norm": g_last, "risk": float(tr.risk[-1]), "displacement": disp})
    half = tr.risk[n // 2 :]
    slope = norm_trend(tr, 0.5)
    below = bool(np.all(half < eps_floor))
    if below and slope > 0:
        return Verdict("diverging", {"reason": "risk below floor with increasing norm", "eps_floor": eps_floor, "norm_slope": slope})
    if g_last > grad_tol:
        reason = f"gradient norm {g_last:.3e} above grad_tol"
    elif disp > disp_tol:
        reason = f"trailing displacement {disp:.3e} above disp_tol"
    else:
        reason = "no criterion met"
    if not below and eps_floor > 0:
        reason += "; risk not below floor throughout trailing half"
    elif slope <= 0:
        reason += "; norm trend not increasing"
    return Verdict("undecided", {"reason": reason, "norm_slope": slope, "grad_norm": g_last, "displacement": disp})


def check_energy_identity(tr: Trajectory) -> float:
    """max_t |L(Theta_0) - L(Theta_t) - int_0^t |G|^2 ds|."""
    if tr.mode != "gf" or tr.energy is None:
        raise UnsupportedTrajectory("energy identity applies to gradient-flow trajectories only")
    return float(np.max(np.abs(tr.risk[0] - tr.risk - tr.energy)))


def norm_bound_slack(tr: Trajectory) -> float:
    """max_t (|Theta_t| - |Theta_0| - sqrt(t L(Theta_0))); non-positive when the bound holds."""
    bound = tr.param_norm[0] + np.sqrt(np.maximum(tr.t, 0.0) * tr.risk[0])
    return float(np.max(tr.param_norm - bound))


def risk_increase(tr: Trajectory) -> float:
    """Largest increase of the recorded risk between consecutive samples (0 if monotone)."""
    if len(tr) < 2:
        return 0.0
    return float(max(0.0, np.max(np.diff(tr.risk))))
