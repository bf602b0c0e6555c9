"""Kaehler-Einstein metrics on cohomogeneity-one K-manifolds: root data,
exact sign integrals, a shooting solver for the Einstein ODE, and metric
reconstruction with boundary checks."""

from .case_catalog import (
    Admissibility,
    CaseSpec,
    Fiber,
    Status,
    classify,
    enumerate_cases,
    make_case,
)
from .exact_quadrature import Sign, SignIntegralResult, sign_integral
from .ke_ode import (
    ConditionDViolated,
    DomainError,
    NoBracket,
    OdeParams,
    SolutionProfile,
    SolverFailure,
    Tolerances,
    make_params,
    solve_bvp,
)
from .metric_reconstruction import MetricProfile, reconstruct, verify_metric_conditions
from .root_pairing import condition_d_holds, kappa_ratios

__version__ = "0.1.0"

__all__ = [
    "Admissibility",
    "CaseSpec",
    "ConditionDViolated",
    "DomainError",
    "Fiber",
    "MetricProfile",
    "NoBracket",
    "OdeParams",
    "Sign",
    "SignIntegralResult",
    "SolutionProfile",
    "SolverFailure",
    "Status",
    "Tolerances",
    "classify",
    "condition_d_holds",
    "enumerate_cases",
    "kappa_ratios",
    "make_case",
    "make_params",
    "reconstruct",
    "sign_integral",
    "solve_bvp",
    "verify_metric_conditions",
]
