"""Command line runner: ``blowup-lab <mode> --config cfg.json [--out DIR] [--profile quick|full] [--seed N]``.

Exit status 0 when every enabled assertion passes, 1 on an assertion failure, 2 for a
configuration error and 3 for a numerical failure.  Errors are also written as JSON.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import constructions as cons
from . import discrete as disc
from . import dynamics as dyn
from . import verification as ver
from .activation import ActivationKind, DomainError
from .network import ParamVector, check_domain, homogeneous_rescale, rescale_to_unit
from .risk_gradient import (
    Indicator,
    QuadratureError,
    Square,
    gradient,
    gradient_exact,
    gradient_fd,
    parse_target,
    risk_exact,
    risk_quadrature,
    risk_value,
)

MODES = ("simulate-gf", "simulate-gd", "sequence", "critical", "bounds", "discrete", "verify-all")

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class AssertionFailure(RuntimeError):
    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload or {}


# --------------------------------------------------------------------------
# artifact writing


def _canon(obj):
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _canon(obj.tolist())
    return obj


def write_json(path: Path, obj: dict, required: tuple[str, ...] = ()) -> None:
    missing = [k for k in required if k not in obj]
    if missing:
        raise RuntimeError(f"refusing to write {path.name}: missing keys {missing}")
    path.write_text(json.dumps(_canon(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    for r in rows:
        if len(r) != len(header):
            raise RuntimeError(f"refusing to write {path.name}: row of length {len(r)} for {len(header)} columns")
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    path.write_text(buf.getvalue())


# --------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    mode: str
    kind: ActivationKind = field(default_factory=lambda: ActivationKind(1))
    target: object = field(default_factory=Indicator)
    domain: tuple = (0.0, 1.0)
    h: int = 2
    init: object = "random:0"
    flow: dict = field(default_factory=dict)
    gd: dict = field(default_factory=dict)
    sequence: dict = field(default_factory=dict)
    critical: dict = field(default_factory=dict)
    discrete: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    floors: dict = field(default_factory=dict)
    seed: int = 0
    profile: str = "quick"


def load_config(mode: str, raw: dict, seed: int | None = None, profile: str | None = None) -> ExperimentConfig:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if not raw:
        raise ConfigError("config is empty")
    if "mode" in raw and raw["mode"] != mode:
        raise ConfigError(f"config mode {raw['mode']!r} disagrees with command line mode {mode!r}")
    known = {"mode", "kind", "target", "domain", "h", "init", "flow", "gd", "sequence", "critical", "discrete", "tolerances", "floors", "seed", "profile"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    try:
        cfg = ExperimentConfig(
            mode=mode,
            kind=ActivationKind.parse(raw.get("kind", "relu")),
            target=parse_target(raw.get("target", "indicator")),
            domain=check_domain(raw.get("domain", [0.0, 1.0])),
            h=int(raw.get("h", 2)),
            init=raw.get("init", "random:0"),
            flow=dict(raw.get("flow", {})),
            gd=dict(raw.get("gd", {})),
            sequence=dict(raw.get("sequence", {})),
            critical=dict(raw.get("critical", {})),
            discrete=dict(raw.get("discrete", {})),
            tolerances=dict(raw.get("tolerances", {})),
            floors={int(k): float(v) for k, v in dict(raw.get("floors", {})).items()},
            seed=int(raw.get("seed", 0) if seed is None else seed),
            profile=profile or raw.get("profile", "quick"),
        )
    except (DomainError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.h < 1:
        raise ConfigError("h must be >= 1")
    if cfg.profile not in ("quick", "full"):
        raise ConfigError("profile must be quick or full")
    return cfg


def initial_theta(cfg: ExperimentConfig) -> ParamVector:
    init = cfg.init
    try:
        if isinstance(init, (list, dict)):
            th = ParamVector.from_json(init)
            if th.h != cfg.h:
                raise ConfigError(f"explicit theta has h={th.h}, config h={cfg.h}")
            return th
        head, _, rest = str(init).partition(":")
        if head == "random":
            rng = np.random.default_rng(int(rest or cfg.seed))
            return ParamVector(cfg.h, rng.normal(size=3 * cfg.h + 1))
        if head == "family":
            fam_text, _, n = rest.rpartition(":")
            fam = cons.Family.parse(fam_text)
            if cfg.h < fam.min_h:
                raise ConfigError(f"h={cfg.h} below the minimum {fam.min_h} of {fam.name}")
            return cons.sequence_theta(fam, float(n), cfg.domain, cfg.h)
    except (DomainError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad init {init!r}: {exc}") from exc
    raise ConfigError(f"bad init {init!r}")


def _flow_config(d: dict) -> dyn.FlowConfig:
    try:
        return dyn.FlowConfig(**d)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"bad flow parameters: {exc}") from exc


# --------------------------------------------------------------------------
# modes


def run_simulate_gf(cfg: ExperimentConfig, out: Path) -> dict:
    th0 = initial_theta(cfg)
    fc = _flow_config(cfg.flow)
    tr = dyn.gf_integrate(th0, cfg.kind, cfg.target, cfg.domain, fc)
    tol = cfg.tolerances
    floor = cfg.floors.get(cfg.h, ver.FLOORS.get(cfg.h, 0.0)) if cfg.kind.k == 1 and isinstance(cfg.target, Indicator) else 0.0
    verdict = dyn.classify(tr, floor, fc.grad_tol, fc.disp_tol)
    checks = {
        "risk_increase": dyn.risk_increase(tr),
        "norm_bound_slack": dyn.norm_bound_slack(tr),
        "energy_residual": dyn.check_energy_identity(tr),
    }
    ok = (
        checks["risk_increase"] <= tol.get("risk_increase", 1e-8)
        and checks["norm_bound_slack"] <= tol.get("norm_slack", 1e-6) * (1 + th0.norm())
        and checks["energy_residual"] <= tol.get("energy", 1e-5)
    )
    tr.write_csv(out / "trajectory.csv")
    report = {"verdict": verdict.to_json(), "checks": checks, "meta": tr.meta, "pass": ok,
              "note": "a diverging verdict is evidence (norm trend with risk below the floor), not an observed blow-up"}
    write_json(out / "verdict.json", report, ("verdict", "checks", "pass"))
    return report


def run_simulate_gd(cfg: ExperimentConfig, out: Path) -> dict:
    th0 = initial_theta(cfg)
    g = dict(cfg.gd)
    try:
        n_steps = int(g.pop("n_steps", 100))
        stride = int(g.pop("record_stride", 1))
        quad_tol = float(g.pop("quad_tol", 1e-10))
        kind = g.pop("schedule", "armijo")
        sched = dyn.Armijo(**g) if kind == "armijo" else dyn.ConstantStep(**g)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"bad gd parameters: {exc}") from exc
    tr = dyn.gd_iterate(th0, cfg.kind, cfg.target, cfg.domain, sched, n_steps, stride, quad_tol)
    floor = 0.0
    verdict = dyn.classify(tr, floor)
    inc = dyn.risk_increase(tr)
    ok = True
    if isinstance(sched, dyn.Armijo) and not tr.meta["line_search_failures"]:
        ok = inc <= 0.0
    tr.write_csv(out / "trajectory.csv")
    report = {"verdict": verdict.to_json(), "checks": {"risk_increase": inc}, "meta": tr.meta, "pass": ok}
    write_json(out / "verdict.json", report, ("verdict", "checks", "pass"))
    return report


def run_sequence(cfg: ExperimentConfig, out: Path) -> dict:
    s = cfg.sequence
    try:
        fam = cons.Family.parse(s["family"])
        n_list = s.get("n_list")
        h = int(s.get("h", fam.min_h))
        ratio = float(s.get("final_ratio", 1e-3))
    except (KeyError, DomainError, ValueError) as exc:
        raise ConfigError(f"bad sequence section: {exc}") from exc
    rep = cons.verify_sequence(fam, n_list, cfg.domain, h, final_ratio=ratio)
    rows = [[r["family"], r["n"], r["risk"], "" if r["bound"] is None else r["bound"], str(r["pass"]).lower()] for r in rep.rows]
    write_csv(out / "sequence.csv", ["family", "n", "risk", "bound", "pass"], rows)
    report = rep.to_json()
    write_json(out / "sequence.json", report, ("family", "rows", "pass"))
    return report


def run_critical(cfg: ExperimentConfig, out: Path) -> dict:
    c = cfg.critical
    h = int(c.get("h", cfg.h))
    n_seeds = int(c.get("n_seeds", 100 if h == 1 else 200))
    crit_tol = float(c.get("crit_tol", 1e-8))
    res = ver.find_critical_points(h, n_seeds, crit_tol, seed=cfg.seed, domain=cfg.domain)
    floors = {**ver.FLOORS, **cfg.floors}
    rows = [p.to_row() for p in res.points]
    d = 3 * h + 1
    write_csv(out / "critical.csv", ["seed", "risk", "grad_norm", *[f"theta_{i}" for i in range(d)]], rows)
    report = {"h": h, "n_seeds": n_seeds, "found": len(res.points), "dropped": res.dropped, "duplicates": res.duplicates}
    if res.points:
        m, floor, ok = ver.critical_risk_floor(res.points, h, floors)
        report.update(min_risk=m, floor=floor, empirical_pass=ok)
        if h in (1, 2):
            cert = ver.certified_floor(h)
            report.update(certified_floor=cert, floor_certified=floor <= cert + 1e-12)
            ok = ok and floor <= cert + 1e-12
        report["pass"] = ok
        report["failing"] = [k for k in ("empirical_pass", "floor_certified") if report.get(k) is False]
    else:
        report["pass"] = False
        report["reason"] = "no critical points found"
    write_json(out / "critical.json", report, ("h", "found", "pass"))
    return report


def run_bounds(cfg: ExperimentConfig, out: Path) -> dict:
    checks = ver.standard_lemma_checks()
    items = [c.to_json() for c in checks]
    report = {"checks": items, "pass": all(c.passed for c in checks)}
    write_json(out / "bounds.json", report, ("checks", "pass"))
    return report


def run_discrete(cfg: ExperimentConfig, out: Path) -> dict:
    dd = cfg.discrete
    try:
        data = disc.DataSet.from_csv(dd["data_file"]) if "data_file" in dd else disc.DataSet(dd["xs"], dd["ys"])
    except (KeyError, DomainError, OSError, ValueError) as exc:
        raise ConfigError(f"bad discrete section: {exc}") from exc
    case = disc.classify_data(data)
    report: dict = {"case": case.tag, "j": case.j, "k": case.k}
    ok = True
    if case.tag == "exact_fit_two":
        th = disc.fit_two_points(data)
        report.update(theta=th.values, risk=disc.discrete_risk(th, data), floor=0.0)
        ok = report["risk"] <= 1e-20
    elif case.tag == "interior_three":
        th = disc.fit_three_points_interior(data)
        report.update(theta=th.values, risk=disc.discrete_risk(th, data), floor=0.0)
        ok = report["risk"] <= 1e-12
    elif case.tag == "monotone_three":
        floor = disc.constant_floor(data)
        ns = dd.get("n_list", [10, 20, 50, 100, 200])
        seq = [[n, disc.discrete_risk(disc.infimum_sequence(data, n), data)] for n in ns]
        runs = disc.multistart_minimize(data, int(dd.get("n_seeds", 50)), cfg.seed)
        best = min(runs, key=lambda r: r.risk)
        report.update(theta=disc.infimum_sequence(data, ns[-1]).values, risk=seq[-1][1], floor=floor,
                      limit=disc.infimum_limit(data), sequence=seq, best_minimized_risk=best.risk, best_minimized_norm=best.norm)
        ok = best.risk >= floor - 1e-8 and disc.constant_realization_min(data) > floor
        write_csv(out / "infimum_sequence.csv", ["n", "risk"], seq)
    else:
        report.update(theta=None, risk=None, floor=None, note="no construction for this case")
    report["pass"] = bool(ok)
    write_json(out / "discrete.json", report, ("case", "theta", "risk", "floor", "pass"))
    return report


# --------------------------------------------------------------------------
# verification suite


@dataclass
class Check:
    id: str
    passed: bool
    detail: dict
    seconds: float


def _timed(cid, fn) -> Check:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except (DomainError, QuadratureError, RuntimeError, ValueError, ArithmeticError) as exc:
        ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
    return Check(cid, bool(ok), _canon(detail), time.perf_counter() - t0)


def _rel_err(g, fd):
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(g)), 1e-300))


SMOOTH_KINDS = ("softsign", "arctan", "isru:1", "elu", "tanh", "logistic", "softplus")


def suite(profile: str = "quick", seed: int = 0, floors: dict | None = None) -> list[tuple[str, object]]:
    full = profile == "full"
    floors = {**ver.FLOORS, **(floors or {})}
    unit = (0.0, 1.0)
    checks: list[tuple[str, object]] = []

    for lc in ver.standard_lemma_checks():
        checks.append((f"bounds.{lc.lemma}", lambda lc=lc: (lc.passed, lc.to_json())))

    def zero_moments():
        rng = np.random.default_rng([seed, 1])
        worst = 0.0
        for _ in range(20):
            a, b = rng.uniform(0, 0.5), rng.uniform(0.5, 1)
            al, be = ver.zero_mean_affine_solution(a, b)
            worst = max(worst, *map(abs, ver.affine_moments(al, be, a, b)))
        return worst <= 1e-12, {"worst_moment": worst}

    checks.append(("bounds.zero_moment_random", zero_moments))

    def relu_sequence():
        fam = cons.Family("relu_indicator", 0.0)
        rep = cons.verify_sequence(fam, [1, 10, 100, 1000, 10000], unit)
        r1 = rep.rows[0]["risk"]
        return rep.passed and abs(r1 - 1 / 24) <= 1e-12, {"rows": rep.rows}

    checks.append(("sequence.relu_bound", relu_sequence))
    for fam in cons.all_families():
        def one(fam=fam):
            rep = cons.verify_sequence(fam, domain=unit)
            return rep.passed, rep.to_json()

        checks.append((f"sequence.{fam.name}", one))

    def envelope():
        fam = cons.Family("softplus_relu_target")
        worst = []
        for n in (1, 10, 100):
            lo, hi = cons.envelope_gap(fam, n)
            worst.append([n, lo, hi])
        return all(lo >= -1e-15 and hi <= 1 / n for n, lo, hi in worst), {"gaps": worst}

    checks.append(("sequence.softplus_relu_envelope", envelope))

    def critical(h, n_seeds):
        def run():
            res = ver.find_critical_points(h, n_seeds, 1e-8, seed=seed)
            if not res.points:
                return False, {"reason": "none found"}
            m, floor, ok = ver.critical_risk_floor(res.points, h, floors)
            cert = ver.certified_floor(h)
            detail = {"min_risk": m, "floor": floor, "certified_floor": cert, "found": len(res.points)}
            if h == 1:
                detail["found_affine_1_16"] = any(abs(p.risk - 1 / 16) <= 1e-6 for p in res.points)
                ok = ok and detail["found_affine_1_16"]
            return ok and floor <= cert + 1e-12, detail

        return run

    checks.append(("critical.floor_h1", critical(1, 100 if full else 25)))
    checks.append(("critical.floor_h2", critical(2, 200 if full else 30)))

    def affine_point():
        th = ver.affine_critical_point()
        g = np.linalg.norm(gradient(th, ActivationKind(1), Indicator(), unit))
        r = risk_value(th, ActivationKind(1), Indicator(), unit)
        return g <= 1e-12 and abs(r - 1 / 16) <= 1e-12, {"grad_norm": g, "risk": r}

    checks.append(("critical.affine_point", affine_point))

    def grad_smooth():
        rng = np.random.default_rng([seed, 2])
        per = 50 if full else 5
        worst = {}
        for ks in SMOOTH_KINDS:
            kind = ActivationKind.parse(ks)
            e = 0.0
            for _ in range(per):
                th = ParamVector(2, rng.normal(size=7))
                g = gradient(th, kind, Square(), unit, tol=1e-11, split_at_kinks=True)
                e = max(e, _rel_err(g, gradient_fd(th, kind, Square(), unit, "central", 1e-5)))
            worst[ks] = e
        return max(worst.values()) <= 1e-5, worst

    checks.append(("gradient.smooth_vs_central_fd", grad_smooth))

    def grad_relu():
        rng = np.random.default_rng([seed, 3])
        kind, e, used = ActivationKind(1), 0.0, 0
        while used < (50 if full else 10):
            th = ParamVector(2, rng.normal(size=7))
            q = -th.b / np.where(th.w == 0, np.nan, th.w)
            if np.any(np.abs(q - 0.5) < 1e-3) or np.any(np.abs(q) < 1e-3) or np.any(np.abs(q - 1) < 1e-3) or abs(q[0] - q[1]) < 1e-3:
                continue
            used += 1
            g = gradient_exact(th, kind, Indicator(), unit)
            e = max(e, _rel_err(g, gradient_fd(th, kind, Indicator(), unit, "left", 1e-6)))
        return e <= 1e-5, {"worst_rel_err": e, "samples": used}

    checks.append(("gradient.relu_vs_left_fd", grad_relu))

    def grad_zero():
        g = gradient(ParamVector.zeros(2), ActivationKind(1), Indicator(), unit)
        return bool(np.array_equal(g, np.array([0, 0, 0, 0, 0, 0, -1.0]))), {"gradient": g}

    checks.append(("gradient.theta_zero", grad_zero))

    def gf_diag():
        rng = np.random.default_rng([seed, 4])
        kinds = ["relu", "leaky_relu:0.3", "repu:2", "softplus", "tanh"] if not full else \
                ["relu", "relu", "leaky_relu:0.3", "leaky_relu:-0.5", "repu:2", "repu:3", "softplus", "logistic",
                 "tanh", "arctan", "isru:1", "elu", "softsign", "relu", "repu:2", "softplus", "tanh", "logistic", "arctan", "elu"]
        rows = []
        ok = True
        for ks in kinds:
            kind = ActivationKind.parse(ks)
            tgt = Indicator() if kind.k == 1 else Square()
            th = ParamVector(2, rng.normal(size=7))
            tr = dyn.gf_integrate(th, kind, tgt, unit, dyn.FlowConfig(t_end=2.0))
            inc, slack, en = dyn.risk_increase(tr), dyn.norm_bound_slack(tr), dyn.check_energy_identity(tr)
            ok = ok and inc <= 1e-8 and slack <= 1e-6 * (1 + th.norm()) and en <= 1e-5
            rows.append({"kind": ks, "risk_increase": inc, "norm_slack": slack, "energy": en, "status": tr.meta["status"]})
        return ok, {"runs": rows}

    checks.append(("dynamics.gf_diagnostics", gf_diag))

    def gf_fixed():
        th = ver.affine_critical_point()
        tr = dyn.gf_integrate(th, ActivationKind(1), Indicator(), unit, dyn.FlowConfig(t_end=10.0))
        dev = float(np.max(np.abs(tr.theta - th.values)))
        return dev <= 1e-9, {"max_deviation": dev}

    checks.append(("dynamics.fixed_point", gf_fixed))

    def divergence():
        th = cons.sequence_theta(cons.Family("relu_indicator", 0.0), 1000, unit, 2)
        tr = dyn.gf_integrate(th, ActivationKind(1), Indicator(), unit, dyn.FlowConfig(t_end=100.0 if full else 10.0, method="Radau"))
        v = dyn.classify(tr, floors[2])
        slope = dyn.norm_trend(tr)
        below = bool(np.all(tr.risk < floors[2]))
        return v.verdict != "converged" and slope >= 0 and below, {"verdict": v.to_json(), "norm_slope": slope, "max_risk": float(tr.risk.max())}

    checks.append(("dynamics.divergence_evidence", divergence))

    def disc_two():
        rng = np.random.default_rng([seed, 5])
        worst = 0.0
        for _ in range(100):
            d = disc.DataSet(np.sort(rng.uniform(-5, 5, 2)), rng.normal(size=2))
            worst = max(worst, disc.discrete_risk(disc.fit_two_points(d), d))
        return worst <= 1e-20, {"worst_risk": worst}

    checks.append(("discrete.fit_two", disc_two))

    def disc_three():
        rng = np.random.default_rng([seed, 6])
        worst, cnt = 0.0, 0
        while cnt < 50:
            d = disc.DataSet(np.sort(rng.uniform(-5, 5, 3)), rng.normal(size=3))
            if disc.classify_data(d).tag != "interior_three":
                continue
            cnt += 1
            worst = max(worst, disc.discrete_risk(disc.fit_three_points_interior(d), d))
        return worst <= 1e-12, {"worst_risk": worst}

    checks.append(("discrete.fit_three_interior", disc_three))

    def disc_inf():
        d = disc.DataSet((0, 1, 2), (0, 1, 3))
        r = disc.discrete_risk(disc.infimum_sequence(d, 200, check_case=False), d)
        return abs(r - 1 / 6) <= 1e-5 and disc.constant_realization_min(d) > 1 / 6, {"risk_200": r, "constant_min": disc.constant_realization_min(d)}

    checks.append(("discrete.infimum_sequence", disc_inf))

    def disc_witness():
        d = disc.DataSet((0, 1, 2), (0, 2, 1))
        floor = disc.constant_floor(d)
        runs = disc.multistart_minimize(d, 50, seed)
        best = min(r.risk for r in runs)
        return best >= floor - 1e-8, {"floor": floor, "best": best, "case": disc.classify_data(d).tag}

    checks.append(("discrete.monotone_witness", disc_witness))

    def cross_oracle():
        rng = np.random.default_rng([seed, 7])
        worst = 0.0
        kinds = [ActivationKind(1), ActivationKind(1, 0.3), ActivationKind(2), ActivationKind(3)]
        for i in range(100 if full else 20):
            kind = kinds[i % 4]
            tgt = Indicator() if kind.k == 1 else Square()
            th = ParamVector(2, rng.normal(size=7))
            e = risk_exact(th, kind, tgt, unit).value
            q = risk_quadrature(th, kind, tgt, unit, tol=1e-12, split_at_kinks=True, rel_tol=1e-12).value
            worst = max(worst, abs(e - q))
        return worst <= 1e-9, {"worst_abs_diff": worst}

    checks.append(("cross.exact_vs_quadrature", cross_oracle))

    def rescale():
        rng = np.random.default_rng([seed, 8])
        worst = 0.0
        for _ in range(20):
            a = rng.uniform(-2, 1)
            b = a + rng.uniform(0.5, 3)
            th = ParamVector(2, rng.normal(size=7))
            kind = ActivationKind(1)
            # a target given on [a, b] becomes its rescaled version on [0, 1]
            r_ab = risk_exact(th, kind, Square(), (a, b)).value
            unit_target = Square().rescaled((a, b))
            r_01 = risk_exact(rescale_to_unit(th, (a, b)), kind, unit_target, unit).value * (b - a)
            worst = max(worst, abs(r_ab - r_01) / max(1.0, r_ab))
        return worst <= 1e-10, {"worst_rel_diff": worst}

    checks.append(("cross.domain_rescale", rescale))

    def homog():
        rng = np.random.default_rng([seed, 9])
        worst = 0.0
        for _ in range(20):
            th = ParamVector(2, rng.normal(size=7))
            k = int(rng.integers(1, 4))
            kind = ActivationKind(k, float(rng.choice([0.0, 0.3])) if k == 1 else 0.0)
            lam = float(rng.uniform(0.2, 5))
            tgt = Indicator() if kind.k == 1 else Square()
            r0 = risk_exact(th, kind, tgt, unit).value
            r1 = risk_exact(homogeneous_rescale(th, lam, kind), kind, tgt, unit).value
            worst = max(worst, abs(r0 - r1))
        return worst <= 1e-12, {"worst_abs_diff": worst}

    checks.append(("cross.homogeneous_rescale", homog))
    return checks


def verify_all(profile: str = "quick", seed: int = 0, floors: dict | None = None) -> list[Check]:
    return [_timed(cid, fn) for cid, fn in suite(profile, seed, floors)]


def run_verify_all(cfg: ExperimentConfig, out: Path) -> dict:
    results = verify_all(cfg.profile, cfg.seed, cfg.floors)
    rows = [[c.id, str(c.passed).lower(), round(c.seconds, 3)] for c in results]
    write_csv(out / "verify_all.csv", ["check", "pass", "seconds"], rows)
    failing = [c.id for c in results if not c.passed]
    report = {
        "profile": cfg.profile,
        "checks": [{"id": c.id, "pass": c.passed, "detail": c.detail} for c in results],
        "failing": failing,
        "pass": not failing,
        "meta": {"seconds": {c.id: round(c.seconds, 3) for c in results}},
    }
    write_json(out / "verify_all.json", report, ("checks", "failing", "pass"))
    width = max(len(c.id) for c in results)
    for c in results:
        print(f"{c.id:<{width}}  {'PASS' if c.passed else 'FAIL'}  {c.seconds:7.2f}s")
    return report


RUNNERS = {
    "simulate-gf": run_simulate_gf,
    "simulate-gd": run_simulate_gd,
    "sequence": run_sequence,
    "critical": run_critical,
    "bounds": run_bounds,
    "discrete": run_discrete,
    "verify-all": run_verify_all,
}


def run(cfg: ExperimentConfig, out: Path) -> tuple[int, dict]:
    out.mkdir(parents=True, exist_ok=True)
    report = RUNNERS[cfg.mode](cfg, out)
    if not report.get("pass", False):
        raise AssertionFailure(f"{cfg.mode}: assertions failed", {"failing": report.get("failing")})
    return EXIT_OK, report


def _error(out: Path | None, status: int, kind: str, message: str, payload=None) -> int:
    err = {"status": status, "error": kind, "message": message, **(payload or {})}
    sys.stderr.write(json.dumps(_canon(err), sort_keys=True) + "\n")
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "error.json", err)
        except OSError:
            pass
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blowup-lab", description=__doc__.splitlines()[0])
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", help="JSON config file (optional for bounds and verify-all)")
    p.add_argument("--out", default="out", help="artifact directory")
    p.add_argument("--profile", choices=("quick", "full"), default=None)
    p.add_argument("--seed", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.config is None:
            if args.mode not in ("bounds", "verify-all"):
                raise ConfigError(f"mode {args.mode} needs --config")
            raw = {"mode": args.mode}
        else:
            try:
                raw = json.loads(Path(args.config).read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        cfg = load_config(args.mode, raw, args.seed, args.profile)
        status, _ = run(cfg, out)
        return status
    except ConfigError as exc:
        return _error(out, EXIT_CONFIG, "config", str(exc))
    except AssertionFailure as exc:
        return _error(out, EXIT_ASSERT, "assertion", str(exc), exc.payload)
    except (QuadratureError, DomainError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        return _error(out, EXIT_NUMERIC, "numerical", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
