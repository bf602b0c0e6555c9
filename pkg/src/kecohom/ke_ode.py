"""The singular Einstein ODE for V(theta) on ]0, 1[ and its shooting solver.

V(theta) = f(t)^2 with theta = tanh^2(eps_F t).  The boundary problem is
V(0) = 0, V(1) = V_c with finite positive slopes at both ends.

Two coordinates are used for integration.  Near theta = 0 the independent
variable is x = log(theta) and the state is (V, log V'), which turns the
regular singular point into a smooth, nearly autonomous flow.  Past
theta_switch the variable is s = -log(1 - theta) with state (V_c - V, log dV/ds);
keeping the gap V_c - V as a state component preserves its relative accuracy
when it is far below machine epsilon relative to V_c.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.interpolate import make_interp_spline

from . import _dopri
from .case_catalog import CaseSpec, closed_form_integrand
from .root_pairing import kappa_ratios

__all__ = [
    "OdeParams",
    "Tolerances",
    "SolutionProfile",
    "ShootOutcome",
    "ConditionDViolated",
    "ConditionDWarning",
    "NoBracket",
    "DomainError",
    "SolverFailure",
    "make_params",
    "rhs_theta",
    "rhs_theta_dot",
    "log_form_sides",
    "series_coefficients",
    "series_start",
    "shoot",
    "solve_bvp",
    "evaluate_profile",
    "node_jet",
    "numerical_R",
    "Jet",
    "residual_theta",
    "verify_two_sided_bound",
    "verify_endpoint_slope",
    "PROFILE_SCHEMA_VERSION",
]

PROFILE_SCHEMA_VERSION = "1.0"


class ConditionDViolated(RuntimeError):
    pass


class ConditionDWarning(UserWarning):
    pass


class NoBracket(RuntimeError):
    pass


class DomainError(ValueError):
    pass


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class _Floats:
    alpha: float
    ap: float
    chat: float
    Vc: float
    K: float  # 2(1 + alpha') = chat * sqrt(Vc)
    sqrtVc: float
    a2: tuple[tuple[float, int], ...]  # (abar^2, multiplicity), multiplicity > 0
    S: float  # sum m / abar^2
    amin2: float
    eps: int
    N: int


@dataclass(frozen=True)
class OdeParams:
    label: str
    N_F: int
    epsilon_F: int
    alpha: Fraction
    alpha_prime: Fraction
    c_hat: Fraction
    V_ceiling: Fraction
    a_bars: tuple[tuple[Fraction, int], ...]
    theta_D_norm_sq: Fraction
    einstein_constant: Fraction
    condition_d: bool

    @property
    def c_tilde(self) -> Fraction:
        return 2 * self.epsilon_F * self.c_hat

    @property
    def sqrt_V_ceiling(self) -> Fraction:
        return 2 * (self.alpha_prime + 1) / self.c_hat

    def condition_d_normalized(self) -> bool:
        """Every abar^2 above the ceiling (the normalized form of condition d)."""
        return all(a * a > self.V_ceiling for a, _ in self.a_bars)

    @cached_property
    def floats(self) -> _Floats:
        a2 = tuple((float(a * a), m) for a, m in self.a_bars if m > 0)
        return _Floats(
            alpha=float(self.alpha),
            ap=float(self.alpha_prime),
            chat=float(self.c_hat),
            Vc=float(self.V_ceiling),
            K=float(2 * (1 + self.alpha_prime)),
            sqrtVc=float(self.sqrt_V_ceiling),
            a2=a2,
            S=sum(m / x for x, m in a2),
            amin2=min((x for x, _ in a2), default=math.inf),
            eps=self.epsilon_F,
            N=self.N_F,
        )

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "N_F": self.N_F,
            "epsilon_F": self.epsilon_F,
            "alpha": str(self.alpha),
            "alpha_prime": str(self.alpha_prime),
            "c_hat": str(self.c_hat),
            "V_ceiling": str(self.V_ceiling),
            "a_bars": [{"a_bar": str(a), "multiplicity": m} for a, m in self.a_bars],
            "theta_D_norm_sq": str(self.theta_D_norm_sq),
            "einstein_constant": str(self.einstein_constant),
            "c_tilde": str(self.c_tilde),
            "condition_d": self.condition_d,
        }


def make_params(case: CaseSpec, c_hat: Fraction | int | str | None = None) -> OdeParams:
    """Normalized ODE coefficients for a catalog case.

    With the default c_hat = 2(1 + alpha') the ceiling is 1 and the abar values
    are checked against the closed-form sign integrals of the row.
    """
    rep = kappa_ratios(case)
    eps = case.epsilon_F
    alpha = Fraction(case.N_F - 1, 2)
    ap = (Fraction(case.N_F, eps) - 1) / 2
    default = 2 * (1 + ap)
    chat = default if c_hat is None else Fraction(c_hat)
    if chat <= 0:
        raise ValueError("c_hat must be positive")
    Vc = 4 * ((ap + 1) / chat) ** 2
    pos = [(k, m) for k, m in rep.kappa_values if k > 0]
    neg = sorted(((-k, m) for k, m in rep.kappa_values if k < 0))
    if sorted(pos) != neg:
        raise ValueError(f"{case.label}: kappa values are not in +- pairs")
    a_bars = tuple((k * rep.theta_D_norm_sq / (chat * eps), m) for k, m in pos)
    params = OdeParams(
        label=case.label,
        N_F=case.N_F,
        epsilon_F=eps,
        alpha=alpha,
        alpha_prime=ap,
        c_hat=chat,
        V_ceiling=Vc,
        a_bars=a_bars,
        theta_D_norm_sq=rep.theta_D_norm_sq,
        einstein_constant=chat * eps / rep.theta_D_norm_sq,
        condition_d=rep.condition_d,
    )
    if params.condition_d_normalized() != rep.condition_d:
        raise AssertionError("normalized and Lie-theoretic condition d disagree")
    if chat == default:
        _check_against_closed_form(case, params)
    if not rep.condition_d:
        warnings.warn(f"{case.label}: condition d fails", ConditionDWarning, stacklevel=2)
    return params


def _check_against_closed_form(case: CaseSpec, params: OdeParams) -> None:
    ref = closed_form_integrand(case)
    mine: dict[Fraction, int] = {}
    for a, m in params.a_bars:
        if m:
            mine[a * a] = mine.get(a * a, 0) + m
    k, m = ref.linear
    ratio = (1 + 2 * params.alpha_prime) / k
    ok = (
        mine == ref.normalized_factors()
        and ref.x_power == params.alpha
        and params.c_hat == ratio * m
        and params.V_ceiling == 1
    )
    if not ok:
        raise AssertionError(f"{case.label}: parameters disagree with the closed-form integrand")


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-12
    hit_tol: float = 1e-10
    boundary_tol: float = 1e-6
    residual_tol: float = 1e-8
    theta0: float = 1e-6
    theta_switch: float = 0.9
    s_end: float = 32.0
    grid_inner: int = 400
    grid_outer: int = 400
    v1_min: float = 1e-8
    v1_max: float = 1e8
    max_iter: int = 200

    def __post_init__(self) -> None:
        for name in ("rtol", "hit_tol", "boundary_tol", "residual_tol", "theta0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.theta0 < self.theta_switch < 1:
            raise ValueError("need 0 < theta0 < theta_switch < 1")
        if self.s_end <= -math.log1p(-self.theta_switch):
            raise ValueError("s_end must lie past the switch point")
        if self.grid_inner < 16 or self.grid_outer < 16:
            raise ValueError("grids need at least 16 points per phase")

    def halved(self) -> "Tolerances":
        return replace(
            self, rtol=self.rtol / 2, hit_tol=self.hit_tol / 2, boundary_tol=self.boundary_tol / 2
        )

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------------------
# right-hand sides


def _check_state(fp: _Floats, theta: float, V: float) -> None:
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta={theta} outside ]0,1[")
    if not V > 0.0 or not math.isfinite(V):
        raise DomainError(f"V={V} must be positive")
    if V >= fp.amin2:
        raise DomainError(f"V={V} reached a singular value abar^2={fp.amin2}")


def _sum_pairs(fp: _Floats, V: float) -> float:
    """sum over l of m_l / (abar_l^2 - V); the +- pair of 1/(sqrt V + a_m) collapsed."""
    return sum(m / (a2 - V) for a2, m in fp.a2)


def rhs_theta(params: OdeParams, theta: float, V: float, V_dot: float) -> float:
    """V'' solving the Einstein ODE in theta.  Each term of the original sum
    over a_m = +-abar_l is kept separately."""
    fp = params.floats
    _check_state(fp, theta, V)
    r = math.sqrt(V)
    pair = 0.0
    for a2, m in fp.a2:
        a = math.sqrt(a2)
        pair += m * (1.0 / (r + a) + 1.0 / (r - a))
    first = V_dot * V_dot / (2.0 * r) * ((fp.N - 1) / r + pair)
    N_over_eps = fp.N / fp.eps
    second = V_dot * ((fp.chat * math.sqrt(V / theta) - N_over_eps - 1.0) / (1.0 - theta) - (fp.N - 1) / (2.0 * theta))
    return -first - second


def _rhs_parts(fp: _Floats, theta: float, V: float, P: float):
    h = fp.alpha / V - _sum_pairs(fp, V)
    Q = fp.chat * math.sqrt(V / theta) - fp.K
    return h, Q


def rhs_theta_dot(params: OdeParams, theta: float, V: float, V_dot: float) -> float:
    """Third derivative of V along a solution, from the analytic derivative of the ODE."""
    fp = params.floats
    _check_state(fp, theta, V)
    P = V_dot
    h, Q = _rhs_parts(fp, theta, V, P)
    u = 1.0 - theta
    F = -P * P * h - P * (Q / u - fp.alpha / theta)
    h_V = -fp.alpha / V**2 - sum(m / (a2 - V) ** 2 for a2, m in fp.a2)
    Q_V = fp.chat / (2.0 * math.sqrt(V * theta))
    Q_t = -fp.chat * math.sqrt(V) / (2.0 * theta**1.5)
    dF_dP = -2.0 * P * h - (Q / u - fp.alpha / theta)
    dF_dV = -P * P * h_V - P * Q_V / u
    dF_dt = -P * (Q_t / u + Q / u**2 + fp.alpha / theta**2)
    return dF_dt + dF_dV * P + dF_dP * F


def log_form_sides(params: OdeParams, theta: float, V: float, V_dot: float, V_ddot: float):
    """Both sides of d/dtheta log(V' V^alpha prod|sqrt V + a_m|) = (2(1+alpha') - c sqrt(V/theta))/(1-theta) + alpha/theta."""
    fp = params.floats
    r = math.sqrt(V)
    lhs = V_ddot / V_dot + fp.alpha * V_dot / V
    for a2, m in fp.a2:
        a = math.sqrt(a2)
        lhs += m * V_dot / (2 * r) * (1 / (r + a) + 1 / (r - a))
    rhs = (fp.K - fp.chat * math.sqrt(V / theta)) / (1 - theta) + fp.alpha / theta
    return lhs, rhs


def _f_inner(fp: _Floats, L0: float = 0.0):
    """(V, L - L0) as functions of x = log theta, L = log V'.

    Carrying the offset L0 = L(theta0) out of the state lets relative error
    control act on the small variation of L near theta = 0.
    """
    alpha, chat, K = fp.alpha, fp.chat, fp.K
    a2s = fp.a2

    def f(x: float, y: Sequence[float]):
        V, L = y[0], y[1]
        theta = math.exp(x)
        if not (V > 0.0) or V >= fp.amin2 or theta >= 1.0:
            return (math.nan, math.nan)
        P = math.exp(L0 + L)
        sp = 0.0
        for a2, m in a2s:
            sp += m / (a2 - V)
        dL = theta * (-P * (alpha / V - sp) - (chat * math.sqrt(V / theta) - K) / (1.0 - theta)) + alpha
        return (theta * P, dL)

    return f


def _f_outer(fp: _Floats):
    """(D = V_c - V, M = log dV/ds) as functions of s = -log(1 - theta)."""
    alpha, chat, Vc, sqrtVc = fp.alpha, fp.chat, fp.Vc, fp.sqrtVc
    a2s = fp.a2

    def f(s: float, y: Sequence[float]):
        D, M = y[0], y[1]
        V = Vc - D
        if not (V > 0.0) or V >= fp.amin2:
            return (math.nan, math.nan)
        u = math.exp(-s)
        theta = -math.expm1(-s)
        W = V / theta
        sp = 0.0
        for a2, m in a2s:
            sp += m / (a2 - V)
        Vs = math.exp(M)
        gap = (D - Vc * u) / theta  # V_c - V/theta
        dM = Vs * (sp - alpha / V) + alpha * u / theta - 1.0 + chat * gap / (sqrtVc + math.sqrt(W))
        return (-Vs, dM)

    return f


# ---------------------------------------------------------------------------
# series start


def series_coefficients(params: OdeParams, v1: float) -> tuple[float, float]:
    """(v1, v2) of V = v1 theta + v2 theta^2 + O(theta^3) for the solution with V(0) = 0."""
    if not v1 > 0:
        raise ValueError("v1 must be positive")
    fp = params.floats
    v2 = (v1 * v1 * fp.S + v1 * (fp.K - fp.chat * math.sqrt(v1))) / (2.0 + fp.alpha)
    return v1, v2


def series_start(params: OdeParams, v1: float, theta0: float) -> tuple[float, float]:
    v1, v2 = series_coefficients(params, v1)
    return v1 * theta0 + v2 * theta0 * theta0, v1 + 2.0 * v2 * theta0


# ---------------------------------------------------------------------------
# shooting


@dataclass
class ShootOutcome:
    kind: str  # "HitCeiling", "Undershoot" or "DomainError"
    v1: float
    theta_hit: float | None = None
    s_hit: float | None = None
    V_end: float | None = None
    gap_end: float | None = None  # V_c - V at the last point reached
    detail: str = ""
    steps: int = 0
    max_local_error: float = 0.0
    sum_local_error: float = 0.0

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _phase_bounds(tol: Tolerances, theta_end: float | None):
    x0 = math.log(tol.theta0)
    x1 = math.log(tol.theta_switch)
    s1 = -math.log1p(-tol.theta_switch)
    s_end = tol.s_end if theta_end is None else -math.log1p(-theta_end)
    return x0, x1, s1, s_end


def _run(params: OdeParams, v1: float, tol: Tolerances, *, theta_end: float | None, stop_at_ceiling: bool, grids: bool):
    """Integrate both phases; returns (outcome, inner trajectory, outer trajectory or None)."""
    fp = params.floats
    x0, x1, s1, s_end = _phase_bounds(tol, theta_end)
    if s_end <= s1:
        raise ValueError("theta_end must exceed theta_switch")
    V0, P0 = series_start(params, v1, tol.theta0)
    out = ShootOutcome("Undershoot", v1)
    hit_level = fp.Vc - tol.hit_tol

    def stop_inner(x, y):
        V = y[0]
        if not math.isfinite(V) or not math.isfinite(y[1]):
            return "DomainError"
        if stop_at_ceiling and V >= hit_level:
            return "HitCeiling"
        if V >= fp.amin2 or V <= 0:
            return "DomainError"
        return ""

    def stop_outer(s, y):
        D = y[0]
        if not math.isfinite(D) or not math.isfinite(y[1]):
            return "DomainError"
        if stop_at_ceiling and D <= tol.hit_tol:
            return "HitCeiling"
        V = fp.Vc - D
        if V >= fp.amin2 or V <= 0:
            return "DomainError"
        return ""

    # with alpha = 0 every term of the L equation is O(theta) near theta0, so
    # L needs absolute accuracy well below rtol there
    atol_inner = (1e-30, tol.rtol * max(fp.alpha, 1e-3))
    outputs_in = _inner_nodes(x0, x1, tol.grid_inner + _LEAD_IN)[1:] if grids else None
    try:
        tin = _dopri.integrate(
            _f_inner(fp, math.log(P0)), x0, (V0, 0.0), x1, rtol=tol.rtol, atol=atol_inner,
            outputs=outputs_in, stop=stop_inner, h0=1e-3,
        )
    except _dopri.StepSizeUnderflow as exc:
        out.kind, out.detail = "DomainError", str(exc)
        return out, None, None
    out.steps, out.max_local_error, out.sum_local_error = tin.steps, tin.max_local_error, tin.sum_local_error
    if tin.stopped:
        x, (V, L) = tin.t[-1], tin.y[-1]
        out.kind = tin.stop_reason
        out.V_end, out.gap_end = V, fp.Vc - V
        if out.kind == "HitCeiling":
            theta_hit = _locate_inner(tin, hit_level)
            out.theta_hit = theta_hit
            out.s_hit = -math.log1p(-theta_hit)
        return out, tin, None
    V, L = tin.y[-1]
    L += math.log(P0)
    theta = math.exp(tin.t[-1])
    D0 = fp.Vc - V
    M0 = L + math.log1p(-theta)
    outputs_out = np.linspace(s1, s_end, tol.grid_outer)[1:] if grids else None
    try:
        tout = _dopri.integrate(
            _f_outer(fp), s1, (D0, M0), s_end, rtol=tol.rtol, atol=(1e-300, tol.rtol),
            outputs=outputs_out, stop=stop_outer, h0=1e-2,
        )
    except _dopri.StepSizeUnderflow as exc:
        out.kind, out.detail = "DomainError", str(exc)
        return out, tin, None
    out.steps += tout.steps
    out.max_local_error = max(out.max_local_error, tout.max_local_error)
    out.sum_local_error += tout.sum_local_error
    D, M = tout.y[-1]
    out.V_end, out.gap_end = fp.Vc - D, D
    if tout.stopped:
        out.kind = tout.stop_reason
        if out.kind == "HitCeiling":
            s_hit = _locate_outer(tout, tol.hit_tol)
            out.s_hit = s_hit
            out.theta_hit = -math.expm1(-s_hit)
    else:
        out.kind = "Undershoot" if D > tol.hit_tol else "HitCeiling"
        if out.kind == "HitCeiling":
            out.s_hit, out.theta_hit = s_end, -math.expm1(-s_end)
    return out, tin, tout


# inner nodes are uniform in z = log(theta) + k s, fine near theta_switch and
# coarse near theta0 where the solution is nearly linear
_GRID_STRETCH = 10.0
# the first nodes after theta0 are kept off the grid so that spline
# derivatives at the first grid node are not endpoint derivatives
_LEAD_IN = 4


def _z_of_x(x):
    return x - _GRID_STRETCH * np.log1p(-np.exp(x))


def _inner_nodes(x0: float, x1: float, n: int) -> np.ndarray:
    z = np.linspace(_z_of_x(x0), _z_of_x(x1), n)
    x = np.minimum(z, x1)
    for _ in range(100):
        th = np.exp(x)
        step = (_z_of_x(x) - z) / (1.0 + _GRID_STRETCH * th / (1.0 - th))
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    x[0], x[-1] = x0, x1
    return x


def _bisect_hermite(t0, y0, d0, t1, y1, d1, level, increasing=True):
    lo, hi = t0, t1
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        val = _dopri.hermite(t0, y0, d0, t1, y1, d1, mid)
        if (val >= level) == increasing:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _locate_inner(tr: _dopri.Trajectory, level: float) -> float:
    t0, t1 = tr.t[-2], tr.t[-1]
    x = _bisect_hermite(t0, tr.y[-2][0], tr.dy[-2][0], t1, tr.y[-1][0], tr.dy[-1][0], level)
    return math.exp(x)


def _locate_outer(tr: _dopri.Trajectory, level: float) -> float:
    t0, t1 = tr.t[-2], tr.t[-1]
    return _bisect_hermite(t0, tr.y[-2][0], tr.dy[-2][0], t1, tr.y[-1][0], tr.dy[-1][0], level, increasing=False)


def shoot(
    params: OdeParams,
    v1: float,
    tolerances: Tolerances = Tolerances(),
    *,
    theta_end: float | None = None,
    stop_at_ceiling: bool = True,
) -> ShootOutcome:
    """Integrate the initial value problem with slope v1 at theta = 0.

    ``theta_end`` defaults to 1 - exp(-s_end).  With ``stop_at_ceiling=False``
    the trajectory is followed past the ceiling, and ``gap_end`` is the signed
    miss distance V_c - V(theta_end) used by the root finder.
    """
    if not v1 > 0:
        raise ValueError("v1 must be positive")
    if theta_end is not None and not tolerances.theta_switch < theta_end < 1:
        raise ValueError("theta_end must lie in ]theta_switch, 1[")
    out, _, _ = _run(params, v1, tolerances, theta_end=theta_end, stop_at_ceiling=stop_at_ceiling, grids=False)
    return out


# ---------------------------------------------------------------------------
# solution profile


@dataclass
class SolutionProfile:
    label: str
    theta_grid: np.ndarray
    s_grid: np.ndarray
    one_minus_theta: np.ndarray
    V: np.ndarray
    gap: np.ndarray  # V_c - V
    V_dot: np.ndarray
    V_s: np.ndarray  # dV/ds = V_dot (1 - theta)
    n_inner: int  # nodes [0, n_inner) were integrated in log(theta)
    v1: float
    v2: float
    V_dot_at_1: float
    V_ceiling: float
    solver_meta: dict = field(default_factory=dict)
    lead_theta: np.ndarray = field(default_factory=lambda: np.empty(0))
    lead_V_dot: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "one_minus_theta", "s", "V", "V_dot"])
        for row in zip(self.theta_grid, self.one_minus_theta, self.s_grid, self.V, self.V_dot):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self, params: OdeParams | None = None) -> str:
        doc = {
            "schema_version": PROFILE_SCHEMA_VERSION,
            "label": self.label,
            "v1": self.v1,
            "v2": self.v2,
            "V_dot_at_1": self.V_dot_at_1,
            "V_ceiling": self.V_ceiling,
            "n_inner": self.n_inner,
            "solver_meta": self.solver_meta,
            "theta": self.theta_grid.tolist(),
            "one_minus_theta": self.one_minus_theta.tolist(),
            "s": self.s_grid.tolist(),
            "V": self.V.tolist(),
            "V_dot": self.V_dot.tolist(),
        }
        if params is not None:
            doc["params"] = params.to_json()
        return json.dumps(doc, indent=1, sort_keys=True)


def _profile_from(params: OdeParams, v1: float, tin, tout, meta: dict) -> SolutionProfile:
    fp = params.floats
    _, P0 = series_start(params, v1, math.exp(tin.t[0]))
    L_all = math.log(P0) + np.array([y[1] for y in tin.y])
    lead = slice(0, _LEAD_IN)
    x = np.array(tin.t[_LEAD_IN:])
    Vin = np.array([y[0] for y in tin.y[_LEAD_IN:]])
    Lin = L_all[_LEAD_IN:]
    th_in = np.exp(x)
    u_in = -np.expm1(x)
    s_in = -np.log1p(-th_in)
    s_out = np.array(tout.t[1:])
    D_out = np.array([y[0] for y in tout.y[1:]])
    M_out = np.array([y[1] for y in tout.y[1:]])
    u_out = np.exp(-s_out)
    th_out = -np.expm1(-s_out)
    theta = np.concatenate([th_in, th_out])
    V = np.concatenate([Vin, fp.Vc - D_out])
    gap = np.concatenate([fp.Vc - Vin, D_out])
    Vdot = np.concatenate([np.exp(Lin), np.exp(M_out + s_out)])
    Vs = np.concatenate([np.exp(Lin) * u_in, np.exp(M_out)])
    # V_dot at 1: first-order extrapolation V_dot(1) = V_dot + V_ddot (1 - theta)
    s_last, D_last, M_last = tout.t[-1], tout.y[-1][0], tout.y[-1][1]
    _, dM = _f_outer(fp)(s_last, (D_last, M_last))
    vd_last = math.exp(M_last + s_last)
    vd1 = vd_last * (1.0 + (1.0 + dM))
    _, v2 = series_coefficients(params, v1)
    return SolutionProfile(
        label=params.label,
        theta_grid=theta,
        s_grid=np.concatenate([s_in, s_out]),
        one_minus_theta=np.concatenate([u_in, u_out]),
        V=V,
        gap=gap,
        V_dot=Vdot,
        V_s=Vs,
        n_inner=len(x),
        v1=v1,
        v2=v2,
        V_dot_at_1=vd1,
        V_ceiling=fp.Vc,
        solver_meta=meta,
        lead_theta=np.exp(np.array(tin.t[lead])),
        lead_V_dot=np.exp(L_all[lead]),
    )


def _miss(params: OdeParams, v1: float, tol: Tolerances) -> float:
    """Signed miss distance V(theta_end) - V_c of the trajectory run past the ceiling."""
    out = shoot(params, v1, tol, stop_at_ceiling=False)
    if out.kind == "DomainError":
        # V ran into a singular value, so it is certainly above the ceiling
        return params.floats.amin2 - params.floats.Vc
    return -out.gap_end


def solve_bvp(params: OdeParams, tolerances: Tolerances = Tolerances(), *, force: bool = False) -> SolutionProfile:
    """Shoot on v1 until the trajectory lands on the ceiling at theta = 1.

    A log-scale scan from v1 = 1 finds an Undershoot and a HitCeiling witness.
    Between them the signed miss V(theta_end) - V_c is driven to zero by
    regula falsi (Illinois variant), with geometric bisection while the
    bracket is wide.  The profile follows the low end of the final bracket,
    so 0 < V < V_c on the whole grid.
    """
    tol = tolerances
    if not params.condition_d and not force:
        raise ConditionDViolated(f"{params.label}: condition d fails (some abar^2 <= V_c); refusing to solve")
    evaluations = 0

    def classify(v1):
        nonlocal evaluations
        evaluations += 1
        return shoot(params, v1, tol).kind

    def miss(v1):
        nonlocal evaluations
        evaluations += 1
        return _miss(params, v1, tol)

    lo = hi = None
    v = 1.0
    if classify(v) == "Undershoot":
        lo = v
        while hi is None and v * 4.0 <= tol.v1_max:
            v *= 4.0
            if classify(v) == "Undershoot":
                lo = v
            else:
                hi = v
    else:
        hi = v
        while lo is None and v / 4.0 >= tol.v1_min:
            v /= 4.0
            if classify(v) == "Undershoot":
                lo = v
            else:
                hi = v
    if lo is None or hi is None:
        if not params.condition_d:
            raise ConditionDViolated(f"{params.label}: no shooting bracket under violated condition d")
        missing = "Undershoot" if lo is None else "HitCeiling"
        raise NoBracket(f"{params.label}: no {missing} witness in [{tol.v1_min}, {tol.v1_max}]")
    g_lo, g_hi = miss(lo), miss(hi)
    # a HitCeiling witness may end within hit_tol below the ceiling
    nudges = 0
    while g_hi <= 0.0 and hi < tol.v1_max and nudges < 200:
        hi *= 1.01
        nudges += 1
        g_hi = miss(hi)
    if not g_lo < 0.0 < g_hi:
        if not params.condition_d:
            # with abar^2 <= V_c the ceiling cannot be crossed and the refinement degenerates
            raise ConditionDViolated(f"{params.label}: miss distance never turns positive under violated condition d")
        raise SolverFailure(f"{params.label}: miss distance has no sign change on [{lo}, {hi}]")
    f_lo, f_hi = g_lo, g_hi  # Illinois-weighted copies
    iters = 0
    last = 0
    while iters < tol.max_iter and hi - lo > 4e-16 * hi:
        iters += 1
        if hi / lo < 2.0:
            cand = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            if not lo < cand < hi:
                cand = 0.5 * (lo + hi)
        else:
            cand = math.sqrt(lo * hi)
        g = miss(cand)
        if g < 0.0:
            lo, g_lo, f_lo = cand, g, g
            if last == -1:
                f_hi *= 0.5
            last = -1
        elif g > 0.0:
            hi, g_hi, f_hi = cand, g, g
            if last == 1:
                f_lo *= 0.5
            last = 1
        else:
            lo = cand
            break
    hit = shoot(params, hi, tol)
    theta_star = hit.theta_hit if hit.kind == "HitCeiling" else None
    if theta_star is None or theta_star < 1.0 - tol.boundary_tol:
        raise SolverFailure(
            f"{params.label}: shooting stalled with theta*={theta_star} after {iters} iterations"
        )
    out, tin, tout = _run(params, lo, tol, theta_end=None, stop_at_ceiling=False, grids=True)
    if out.kind == "DomainError" or tout is None or len(tout.t) < tol.grid_outer:
        raise SolverFailure(f"{params.label}: final trajectory failed ({out.kind}: {out.detail})")
    meta = {
        "iterations": iters,
        "evaluations": evaluations,
        "bracket": [lo, hi],
        "bracket_width": hi - lo,
        "theta_star": theta_star,
        "s_star": hit.s_hit,
        "miss_lo": g_lo,
        "miss_hi": g_hi,
        "max_local_error": out.max_local_error,
        "sum_local_error": out.sum_local_error,
        "steps": out.steps,
        "tolerances": tol.to_json(),
    }
    prof = _profile_from(params, lo, tin, tout, meta)
    res = residual_theta(prof, params)
    meta["max_residual"] = res.max_relative
    if res.max_relative > tol.residual_tol:
        raise SolverFailure(
            f"{params.label}: residual {res.max_relative:.3e} exceeds residual_tol {tol.residual_tol:.1e}"
        )
    return prof


# ---------------------------------------------------------------------------
# evaluation between grid nodes


@dataclass
class Jet:
    """State of the solution at points given by s = -log(1 - theta)."""

    s: np.ndarray
    theta: np.ndarray
    u: np.ndarray  # 1 - theta
    V: np.ndarray
    gap: np.ndarray  # V_c - V
    V_s: np.ndarray  # dV/ds
    R: np.ndarray  # d log(V_s)/ds
    R1: np.ndarray  # 1 + R, without cancellation as theta -> 1
    R_s: np.ndarray  # dR/ds

    @property
    def V_dot(self) -> np.ndarray:
        return self.V_s / self.u


def _jet_point(fp: _Floats, s: float, theta: float, u: float, V: float, gap: float, Vs: float, R: float | None = None):
    """(R, 1 + R, dR/ds) from the s-form of the ODE at one state.

    If R is given (from numerical differentiation) it replaces the ODE value;
    R_s is always the analytic derivative.
    """
    sp = sum(m / (a2 - V) for a2, m in fp.a2)
    sp2 = sum(m / (a2 - V) ** 2 for a2, m in fp.a2)
    h = sp - fp.alpha / V
    W = V / theta
    sqW = math.sqrt(W)
    gapW = (gap - fp.Vc * u) / theta  # V_c - V/theta
    R1 = Vs * h + fp.alpha * u / theta + fp.chat * gapW / (fp.sqrtVc + sqW)
    if R is None:
        R = R1 - 1.0
    else:
        R1 = 1.0 + R
    h_V = sp2 + fp.alpha / V**2
    Vss = R * Vs
    dW = Vs / theta - V * u / theta**2
    R_s = Vss * h + Vs * Vs * h_V - fp.alpha * u / theta**2 - fp.chat * dW / (2.0 * sqW)
    return R, R1, R_s


def _series_point(params: OdeParams, v1: float, s: float):
    fp = params.floats
    _, v2 = series_coefficients(params, v1)
    theta = -math.expm1(-s)
    u = math.exp(-s)
    V = v1 * theta + v2 * theta * theta
    Vdot = v1 + 2.0 * v2 * theta
    return theta, u, V, fp.Vc - V, Vdot * u


def evaluate_profile(profile: SolutionProfile, params: OdeParams, s_values: Sequence[float], rtol: float = 1e-13) -> Jet:
    """Solution state at arbitrary s, by short integrations from the nearest node.

    Points before the first node use the two-term series.
    """
    fp = params.floats
    s_values = np.asarray(s_values, dtype=float)
    if np.any(s_values <= 0) or np.any(s_values > profile.s_grid[-1] * (1 + 1e-12)):
        raise ValueError("s outside the profile range")
    n_in = profile.n_inner
    f_in, f_out = _f_inner(fp), _f_outer(fp)
    names = ("theta", "u", "V", "gap", "Vs", "R", "R1", "Rs")
    cols = {k: np.empty(len(s_values)) for k in names}
    s_nodes = profile.s_grid
    x_nodes = np.log(profile.theta_grid[:n_in])
    for i, s in enumerate(s_values):
        if s <= s_nodes[0]:
            theta, u, V, gap, Vs = _series_point(params, profile.v1, s)
        elif s <= s_nodes[n_in - 1]:
            theta = -math.expm1(-s)
            x = math.log(theta)
            j = int(np.searchsorted(x_nodes, x, side="right")) - 1
            j = min(max(j, 0), n_in - 1)
            V, L = profile.V[j], math.log(profile.V_dot[j])
            if x > x_nodes[j]:
                tr = _dopri.integrate(f_in, x_nodes[j], (V, L), x, rtol=rtol, atol=(1e-30, rtol), h0=(x - x_nodes[j]))
                V, L = tr.y[-1]
            u = -math.expm1(x)
            gap = fp.Vc - V
            Vs = math.exp(L) * u
        else:
            j = int(np.searchsorted(s_nodes, s, side="right")) - 1
            j = min(max(j, n_in - 1), len(s_nodes) - 1)
            D, M = profile.gap[j], math.log(profile.V_s[j])
            if s > s_nodes[j]:
                tr = _dopri.integrate(f_out, s_nodes[j], (D, M), s, rtol=rtol, atol=(1e-300, rtol), h0=(s - s_nodes[j]))
                D, M = tr.y[-1]
            theta, u = -math.expm1(-s), math.exp(-s)
            V, gap, Vs = fp.Vc - D, D, math.exp(M)
        R, R1, Rs = _jet_point(fp, s, theta, u, V, gap, Vs)
        for k, v in zip(names, (theta, u, V, gap, Vs, R, R1, Rs)):
            cols[k][i] = v
    return Jet(s_values, *(cols[k] for k in names))


def node_jet(profile: SolutionProfile, params: OdeParams, numeric: bool = False) -> Jet:
    """The jet at the grid nodes.  With ``numeric=True`` the second derivative
    comes from differentiating the stored first derivatives (degree-7 splines
    per integration phase) instead of from the ODE."""
    fp = params.floats
    n = len(profile.s_grid)
    R, R1, Rs = np.empty(n), np.empty(n), np.empty(n)
    R_num = numerical_R(profile) if numeric else None
    for i in range(n):
        R[i], R1[i], Rs[i] = _jet_point(
            fp, profile.s_grid[i], profile.theta_grid[i], profile.one_minus_theta[i], profile.V[i],
            profile.gap[i], profile.V_s[i], None if R_num is None else R_num[i],
        )
    return Jet(
        profile.s_grid, profile.theta_grid, profile.one_minus_theta, profile.V, profile.gap, profile.V_s, R, R1, Rs
    )


def numerical_R(profile: SolutionProfile) -> np.ndarray:
    """d log(dV/ds)/ds at the nodes by spline differentiation of the stored data."""
    n_in = profile.n_inner
    k = len(profile.lead_theta)
    theta = np.concatenate([profile.lead_theta, profile.theta_grid[:n_in]])
    u = -np.expm1(np.log(theta))
    u[k:] = profile.one_minus_theta[:n_in]
    z = np.log(theta) - _GRID_STRETCH * np.log(u)
    L = np.log(np.concatenate([profile.lead_V_dot, profile.V_dot[:n_in]]))
    dLdx = make_interp_spline(z, L, k=7).derivative()(z) * (1.0 + _GRID_STRETCH * theta / u)
    theta, u, dLdx = theta[k:], u[k:], dLdx[k:]
    # log V_s = log V_dot + log u;  d/ds = (u/theta) d/dx
    R_in = (u / theta) * dLdx - 1.0
    s = profile.s_grid[n_in:]
    M = np.log(profile.V_s[n_in:])
    R_out = make_interp_spline(s, M, k=7).derivative()(s)
    return np.concatenate([R_in, R_out])


# ---------------------------------------------------------------------------
# verification


@dataclass
class ResidualReport:
    relative: np.ndarray  # |sum of terms| / sum |terms| per node
    t_units: np.ndarray  # residual converted to the t-equation's units
    max_relative: float

    def to_json(self) -> dict:
        return {"max_relative": self.max_relative, "max_t_units": float(np.max(np.abs(self.t_units)))}


def residual_theta(profile: SolutionProfile, params: OdeParams) -> ResidualReport:
    """Residual of the theta-ODE at the nodes with V'' from numerical differentiation.

    Terms are those of the ODE multiplied by (1 - theta)^2 and written with
    s-derivatives, which is exact algebra and keeps all terms O(V_s).
    """
    fp = params.floats
    R = numerical_R(profile)
    n = len(R)
    rel = np.empty(n)
    tun = np.empty(n)
    for i in range(n):
        theta, u, V, gap, Vs = (
            profile.theta_grid[i], profile.one_minus_theta[i], profile.V[i], profile.gap[i], profile.V_s[i],
        )
        sp = sum(m / (a2 - V) for a2, m in fp.a2)
        sqW = math.sqrt(V / theta)
        gapW = (gap - fp.Vc * u) / theta
        Q = -fp.chat * gapW / (fp.sqrtVc + sqW)  # chat sqrt(V/theta) - K, cancellation-free
        terms = (
            Vs * R[i],
            Vs,
            Vs * Vs * fp.alpha / V,
            -Vs * Vs * sp,
            Vs * Q,
            -Vs * fp.alpha * u / theta,
        )
        total = Vs * (1.0 + R[i]) + terms[2] + terms[3] + terms[4] + terms[5]
        scale = abs(Vs * R[i]) + abs(Vs) + sum(abs(t) for t in terms[2:]) + abs(Vs * fp.chat * sqW) + abs(Vs * fp.K)
        rel[i] = abs(total) / scale
        tun[i] = 2.0 * fp.eps * math.sqrt(theta) * total / Vs
    return ResidualReport(rel, tun, float(rel.max()))


@dataclass
class TwoSidedBoundReport:
    pairs: int
    worst_lower_margin: float  # log(middle) - log(lower)
    worst_upper_margin: float  # log(upper) - log(middle)
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {**{k: getattr(self, k) for k in self.__dataclass_fields__}, "passed": self.passed}


def two_sided_bound_logs(params: OdeParams, theta1, s1, V1, Vdot1, theta2, s2, V2, Vdot2):
    """(log lower, log middle, log upper) of the two-sided bound for theta1 < theta2."""
    fp = params.floats
    a, K = fp.alpha, fp.K
    mid = math.log(Vdot2 / Vdot1)
    if a:
        mid += a * math.log(V2 / V1)
    for a2, m in fp.a2:
        mid += m * math.log((a2 - V2) / (a2 - V1))
    base = a * math.log(theta2 / theta1) if a else 0.0
    lower = base + 2.0 * K * math.log((1 + math.sqrt(theta1)) / (1 + math.sqrt(theta2)))
    upper = base + K * (s2 - s1)
    return lower, mid, upper


def verify_two_sided_bound(profile: SolutionProfile, params: OdeParams, n_pairs: int = 100, seed: int = 0) -> TwoSidedBoundReport:
    rng = np.random.default_rng(seed)
    n = len(profile.theta_grid)
    lo_m = up_m = math.inf
    bad = 0
    for _ in range(n_pairs):
        i, j = sorted(rng.choice(n, size=2, replace=False))
        lower, mid, upper = two_sided_bound_logs(
            params,
            profile.theta_grid[i], profile.s_grid[i], profile.V[i], profile.V_dot[i],
            profile.theta_grid[j], profile.s_grid[j], profile.V[j], profile.V_dot[j],
        )
        lo_m = min(lo_m, mid - lower)
        up_m = min(up_m, upper - mid)
        if not (lower < mid < upper):
            bad += 1
    return TwoSidedBoundReport(n_pairs, lo_m, up_m, bad)


@dataclass
class EndpointSlopeReport:
    eps: float
    M_eps: float
    tail_slope: float  # d log(V_dot (1-theta)^{2 eps}) / ds on the tail
    V_dot_at_1: float
    bounded: bool

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def verify_endpoint_slope(profile: SolutionProfile, params: OdeParams, eps: float = 0.1, tail_from: float | None = None) -> EndpointSlopeReport:
    """Fit M_eps = sup V_dot (1-theta)^{2 eps} on the tail; bounded if that
    quantity is non-increasing in s to within a small slope tolerance."""
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in ]0, 1/2[")
    s = profile.s_grid
    start = s[profile.n_inner] if tail_from is None else tail_from
    mask = s >= start
    g = np.log(profile.V_dot[mask]) - 2.0 * eps * s[mask]
    slope = float(np.polyfit(s[mask], g, 1)[0])
    # second half of the tail must not exceed the first half's supremum
    half = len(g) // 2
    bounded = slope < 1e-3 and g[half:].max() <= g[:half].max() + 1e-9
    vd1 = profile.V_dot_at_1
    return EndpointSlopeReport(eps, float(np.exp(g.max())), slope, vd1, bool(bounded and math.isfinite(vd1) and vd1 > 0))
