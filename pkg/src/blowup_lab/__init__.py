"""Numerical laboratory for shallow-network risk landscapes, gradient flows and their divergence."""

from .activation import ActivationKind, DomainError, Mollifier, RELU, derivative, evaluate
from .constructions import Family, all_families, family_risk, sequence_theta, verify_sequence
from .discrete import DataSet, classify_data, fit_three_points_interior, fit_two_points, infimum_sequence
from .dynamics import FlowConfig, Trajectory, classify, gd_iterate, gf_integrate
from .network import ParamVector, geometry, realize
from .risk_gradient import Indicator, Identity, Polynomial, ShiftedReluPower, Square, gradient, risk, risk_value
from .verification import find_critical_points, standard_lemma_checks

__all__ = [
    "ActivationKind", "DomainError", "Mollifier", "RELU", "derivative", "evaluate",
    "Family", "all_families", "family_risk", "sequence_theta", "verify_sequence",
    "DataSet", "classify_data", "fit_three_points_interior", "fit_two_points", "infimum_sequence",
    "FlowConfig", "Trajectory", "classify", "gd_iterate", "gf_integrate",
    "ParamVector", "geometry", "realize",
    "Indicator", "Identity", "Polynomial", "ShiftedReluPower", "Square", "gradient", "risk", "risk_value",
    "find_critical_points", "standard_lemma_checks",
]
