import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab.activation import ActivationKind, DomainError
from blowup_lab.constructions import Family, sequence_theta
from blowup_lab.dynamics import (
    Armijo,
    ConstantStep,
    FlowConfig,
    UnsupportedTrajectory,
    check_energy_identity,
    classify,
    gd_iterate,
    gf_integrate,
    norm_bound_slack,
    norm_trend,
    risk_increase,
)
from blowup_lab.network import ParamVector
from blowup_lab.risk_gradient import Indicator, Polynomial, Square
from blowup_lab.verification import affine_critical_point

RELU = ActivationKind(1)
UNIT = (0.0, 1.0)


def test_flow_config_validation():
    with pytest.raises(DomainError):
        FlowConfig(rtol=1e-14)
    with pytest.raises(DomainError):
        FlowConfig(method="Euler")
    assert FlowConfig().digest() == FlowConfig().digest()


def test_fixed_point_stays_put():
    th = affine_critical_point()
    tr = gf_integrate(th, RELU, Indicator(), UNIT, FlowConfig(t_end=10.0))
    assert np.max(np.abs(tr.theta - th.values)) <= 1e-9
    assert classify(tr).verdict == "converged"
    assert check_energy_identity(tr) <= 1e-12


def test_relu_sequence_flow_is_monotone_and_never_converges():
    th = sequence_theta(Family("relu_indicator"), 1000, UNIT, 2)
    tr = gf_integrate(th, RELU, Indicator(), UNIT, FlowConfig(t_end=20.0, method="Radau"))
    assert risk_increase(tr) <= 1e-8
    assert np.all(tr.risk < 1 / 864)
    assert classify(tr, 1 / 864).verdict != "converged"


@pytest.mark.parametrize("text", ["softplus", "tanh", "logistic", "repu:2", "leaky_relu:0.3"])
def test_gf_diagnostics(text):
    kind = ActivationKind.parse(text)
    tgt = Indicator() if kind.k == 1 else Square()
    th = ParamVector(2, np.random.default_rng(4).normal(size=7))
    tr = gf_integrate(th, kind, tgt, UNIT, FlowConfig(t_end=2.0))
    assert risk_increase(tr) <= 1e-8
    assert norm_bound_slack(tr) <= 1e-6 * (1 + th.norm())
    assert check_energy_identity(tr) <= 1e-6
    assert tr.meta["status"] == "completed"


def test_norm_cap_gives_diverging():
    th = ParamVector(1, [0.5, 0.2, 1.0, 0.0])
    tr = gf_integrate(th, ActivationKind(-2), Square(), UNIT, FlowConfig(t_end=50.0, norm_cap=1.2))
    assert tr.meta["status"] == "norm_cap"
    assert classify(tr).verdict == "diverging"


def test_trajectory_csv(tmp_path):
    tr = gf_integrate(affine_critical_point(), RELU, Indicator(), UNIT, FlowConfig(t_end=1.0))
    p = tmp_path / "t.csv"
    tr.write_csv(p)
    rows = list(csv.reader(open(p)))
    assert rows[0][:4] == ["t", "risk", "grad_norm", "param_norm"]
    assert len(rows[0]) == 4 + 4 and len(rows) == len(tr) + 1


def test_gd_zero_rate_is_constant():
    th = ParamVector(2, np.random.default_rng(1).normal(size=7))
    tr = gd_iterate(th, RELU, Indicator(), UNIT, ConstantStep(0.0), 5)
    assert np.all(tr.theta == th.values)
    with pytest.raises(UnsupportedTrajectory):
        check_energy_identity(tr)


def test_gd_on_convex_surrogate_converges():
    # only c is free to matter: v = 0 and the target is a constant, so the landscape in c is a parabola
    th = ParamVector(1, [0.0, 0.0, 0.0, 3.0])
    tr = gd_iterate(th, RELU, Polynomial([1.0]), UNIT, ConstantStep(0.25), 60)
    assert tr.grad_norm[-1] <= 1e-10
    assert tr.theta[-1][3] == pytest.approx(1.0, abs=1e-10)


def test_armijo_is_monotone():
    th = ParamVector(2, np.random.default_rng(7).normal(size=7))
    tr = gd_iterate(th, ActivationKind(-2), Square(), UNIT, Armijo(), 50)
    assert not tr.meta["line_search_failures"]
    assert risk_increase(tr) == 0.0


@pytest.mark.slow
def test_softplus_armijo_descends_along_the_valley():
    f = Family("softplus_square")
    th = sequence_theta(f, 4)
    tr = gd_iterate(th, f.kind, f.target, UNIT, Armijo(), 10_000, record_stride=100, quad_tol=1e-10)
    assert tr.risk[-1] < tr.risk[0]
    assert tr.param_norm[-1] > tr.param_norm[0]


def test_classify_undecided_reason():
    th = ParamVector(2, np.random.default_rng(2).normal(size=7))
    tr = gf_integrate(th, ActivationKind(0), Square(), UNIT, FlowConfig(t_end=0.5))
    v = classify(tr)
    assert v.verdict == "undecided" and "reason" in v.evidence


@settings(max_examples=10, deadline=None)
@given(vals=st.lists(st.floats(-2, 2), min_size=7, max_size=7))
def test_flow_invariants_random_start(vals):
    th = ParamVector(2, vals)
    tr = gf_integrate(th, ActivationKind(-1), Square(), UNIT, FlowConfig(t_end=1.0))
    assert risk_increase(tr) <= 1e-8
    assert norm_bound_slack(tr) <= 1e-6 * (1 + th.norm())
    assert check_energy_identity(tr) <= 1e-6
    assert np.isfinite(norm_trend(tr))
