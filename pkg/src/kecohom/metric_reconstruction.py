"""Metric data f(t) from a solved V(theta), and the boundary checks on f.

theta = tanh^2(eps t) and f(t) = sqrt(V(theta)).  Everything is computed
from the solution jet in s = -log(1 - theta) = 2 log cosh(eps t):
f = phi(s) with phi = sqrt(V), and

    s' = 2 eps sigma,  s'' = 2 eps^2 u,  s''' = -4 eps^3 sigma u,

where sigma = tanh(eps t) and u = 1 - theta = e^{-s}.  Second and third
derivatives of V come from the ODE and its analytic derivative.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ke_ode import (
    DomainError,
    Jet,
    OdeParams,
    SolutionProfile,
    evaluate_profile,
    node_jet,
    residual_theta,
)

__all__ = [
    "MetricProfile",
    "Check",
    "MetricConditionsReport",
    "TResidual",
    "LimitTolerances",
    "s_of_t",
    "t_of_s",
    "default_t_grid",
    "reconstruct",
    "metric_from_f",
    "verify_metric_conditions",
    "einstein_residual_t",
    "potential_lambda",
    "ResidualConsistency",
    "residual_consistency",
    "METRIC_SCHEMA_VERSION",
]

METRIC_SCHEMA_VERSION = "1.0"


def s_of_t(t, eps: int):
    """s = 2 log cosh(eps t), accurate for small t."""
    t = np.asarray(t, dtype=float)
    return 2.0 * np.log1p(2.0 * np.sinh(eps * t / 2.0) ** 2)


def t_of_s(s, eps: int):
    """Inverse of s_of_t."""
    s = np.asarray(s, dtype=float)
    return 2.0 * np.arcsinh(np.sqrt(np.expm1(s / 2.0) / 2.0)) / eps


@dataclass
class MetricProfile:
    label: str
    epsilon: int
    theta_D_norm_sq: float
    v1: float
    v2: float
    V_ceiling: float
    a_bars: tuple[tuple[float, int], ...]
    t_grid: np.ndarray
    s_grid: np.ndarray
    theta: np.ndarray
    V: np.ndarray
    f: np.ndarray
    f_prime: np.ndarray
    f_second: np.ndarray
    f_third: np.ndarray
    # a_bar -+ f for each pair, shape (pairs, 2, n)
    fiber_components: np.ndarray
    # coth(t) f(t), the fiber direction of the transversal circle
    fiber_circle_component: np.ndarray
    # a_bar^2 - V, shape (pairs, n)
    base_components: np.ndarray
    transversal_component: np.ndarray
    # e^{2 eps t} f', e^{eps t}(1 + f''/(2 eps f')), and the C4 expression
    c3_expr: np.ndarray
    half_expr: np.ndarray
    c4_expr: np.ndarray
    numeric_jet: bool = False
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["t", "f", "f_prime", "f_second", "f_third", "transversal", "fiber_circle"]
        for k, (a, _) in enumerate(self.a_bars):
            head += [f"fiber_minus_{k}", f"fiber_plus_{k}", f"base_{k}"]
        w.writerow(head)
        for i in range(len(self.t_grid)):
            row = [
                self.t_grid[i], self.f[i], self.f_prime[i], self.f_second[i], self.f_third[i],
                self.transversal_component[i], self.fiber_circle_component[i],
            ]
            for k in range(len(self.a_bars)):
                row += [self.fiber_components[k, 0, i], self.fiber_components[k, 1, i], self.base_components[k, i]]
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "schema_version": METRIC_SCHEMA_VERSION,
            "label": self.label,
            "epsilon": self.epsilon,
            "theta_D_norm_sq": self.theta_D_norm_sq,
            "a_bars": [{"a_bar": a, "multiplicity": m} for a, m in self.a_bars],
            "t": self.t_grid.tolist(),
            "f": self.f.tolist(),
            "f_prime": self.f_prime.tolist(),
            "f_second": self.f_second.tolist(),
            "f_third": self.f_third.tolist(),
            "transversal": self.transversal_component.tolist(),
            "fiber_circle": self.fiber_circle_component.tolist(),
            "fiber": self.fiber_components.tolist(),
            "base": self.base_components.tolist(),
            "meta": self.meta,
        }
        return json.dumps(doc, indent=1, sort_keys=True)


# Past s = 22 the gap V_c - V (about e^{-s}) approaches its absolute rounding
# floor of a few 1e-14, and quantities of relative size e^{-s} such as the C4
# bracket lose their digits.
S_METRIC_MAX = 22.0


def default_t_grid(
    profile: SolutionProfile, eps: int, n_near: int = 200, n_far: int = 600, s_max: float = S_METRIC_MAX
) -> np.ndarray:
    """Geometric from t = 1e-4 to 1/eps, then uniform up to s = s_max."""
    t_end = float(t_of_s(min(profile.s_grid[-1], s_max), eps))
    near = np.geomspace(1e-4, 1.0 / eps, n_near, endpoint=False)
    far = np.linspace(1.0 / eps, t_end, n_far)
    return np.concatenate([near, far])


def _from_jet(jet: Jet, params: OdeParams, t: np.ndarray, profile: SolutionProfile, numeric: bool) -> MetricProfile:
    fp = params.floats
    eps = fp.eps
    e2 = eps * eps
    theta, u, V, Vs, R, R1, Rs = jet.theta, jet.u, jet.V, jet.V_s, jet.R, jet.R1, jet.R_s
    sigma = np.sqrt(theta)
    sqV = np.sqrt(V)
    f = sqV
    fp_ = eps * sigma * Vs / sqV
    q = Vs / (2.0 * V)
    rho = R - q
    Phi = rho * rho + Rs - R * q + 2.0 * q * q
    # 1 + f''/(2 eps f') and the C4 bracket, written so that the O(1) parts
    # cancel analytically; rho = -1 + delta with delta = O(u) as t -> inf
    w = u / (1.0 + sigma)  # 1 - sigma
    delta = R1 - q
    half = w + u / (2.0 * sigma) + sigma * delta
    psi = Rs + (1.0 - R1) * q + 2.0 * q * q
    c4_bracket = (
        delta * (5.0 / 3.0 - 4.0 / 3.0 * (1.0 - u) - 5.0 / 3.0 * w + u)
        + 2.0 / 3.0 * (1.0 - u) * (delta * delta + psi)
        + 5.0 / 3.0 * w
        + 5.0 * u / (6.0 * sigma)
        - 2.0 * u
    )
    near = sigma < 0.5
    ratio2 = np.where(near, 2.0 * eps * (sigma * rho + u / (2.0 * sigma)), 2.0 * eps * (half - 1.0))
    f2 = fp_ * ratio2
    f3 = fp_ * (4.0 * e2 * theta * Phi + 6.0 * e2 * u * rho - 2.0 * e2 * u)
    e2t = (1.0 + sigma) ** 2 / u  # e^{2 eps t}
    c3 = eps * (1.0 + sigma) ** 2 * sigma * (Vs / u) / sqV
    a = [(math.sqrt(a2), m) for a2, m in fp.a2]
    fiber = np.array([[ab - f, ab + f] for ab, _ in a]).reshape(len(a), 2, len(f))
    base = np.array([ab * ab - V for ab, _ in a]).reshape(len(a), len(f))
    n = float(params.theta_D_norm_sq)
    return MetricProfile(
        label=params.label,
        epsilon=eps,
        theta_D_norm_sq=n,
        v1=profile.v1,
        v2=profile.v2,
        V_ceiling=fp.Vc,
        a_bars=tuple(a),
        t_grid=t,
        s_grid=jet.s,
        theta=theta,
        V=V,
        f=f,
        f_prime=fp_,
        f_second=f2,
        f_third=f3,
        fiber_components=fiber,
        fiber_circle_component=f / np.tanh(t),
        base_components=base,
        transversal_component=n * fp_,
        c3_expr=c3,
        half_expr=(1.0 + sigma) / np.sqrt(u) * half,
        c4_expr=e2t * c4_bracket,
        numeric_jet=numeric,
    )


def metric_from_f(
    params: OdeParams,
    t: Sequence[float],
    f: Sequence[float],
    f_prime: Sequence[float],
    f_second: Sequence[float],
    f_third: Sequence[float],
    *,
    v1: float,
    v2: float = 0.0,
    label: str | None = None,
) -> MetricProfile:
    """A metric profile from any f and its derivatives, with the limit
    expressions evaluated directly from their definitions.

    Used for synthetic profiles; for solved profiles ``reconstruct`` evaluates
    the same expressions without cancellation at large t.
    """
    fp = params.floats
    eps = fp.eps
    t, f, f1, f2, f3 = (np.asarray(x, dtype=float) for x in (t, f, f_prime, f_second, f_third))
    a = [(math.sqrt(a2), m) for a2, m in fp.a2]
    n = float(params.theta_D_norm_sq)
    ratio = f2 / (2.0 * eps * f1)
    return MetricProfile(
        label=params.label if label is None else label,
        epsilon=eps,
        theta_D_norm_sq=n,
        v1=v1,
        v2=v2,
        V_ceiling=fp.Vc,
        a_bars=tuple(a),
        t_grid=t,
        s_grid=s_of_t(t, eps),
        theta=np.tanh(eps * t) ** 2,
        V=f * f,
        f=f,
        f_prime=f1,
        f_second=f2,
        f_third=f3,
        fiber_components=np.array([[ab - f, ab + f] for ab, _ in a]).reshape(len(a), 2, len(f)),
        fiber_circle_component=f / np.tanh(t),
        base_components=np.array([ab * ab - f * f for ab, _ in a]).reshape(len(a), len(f)),
        transversal_component=n * f1,
        c3_expr=np.exp(2.0 * eps * t) * f1,
        half_expr=np.exp(eps * t) * (1.0 + ratio),
        c4_expr=np.exp(2.0 * eps * t) * (1.0 + 5.0 * f2 / (6.0 * eps * f1) + f3 / (6.0 * eps * eps * f1)),
    )


def reconstruct(
    profile: SolutionProfile,
    params: OdeParams,
    t_grid: Sequence[float] | None = None,
    *,
    numeric: bool = False,
) -> MetricProfile:
    """f and its derivatives on a t grid.

    With ``numeric=True`` the grid is the profile's own node set and V'' comes
    from differentiating the stored V' instead of from the ODE; this is the
    form used to compare residuals across the change of variables.
    """
    eps = params.epsilon_F
    if numeric:
        if t_grid is not None:
            raise ValueError("numeric reconstruction uses the profile nodes")
        jet = node_jet(profile, params, numeric=True)
        t = np.asarray(t_of_s(jet.s, eps))
    else:
        t = np.asarray(default_t_grid(profile, eps) if t_grid is None else t_grid, dtype=float)
        if t.ndim != 1 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be positive and strictly increasing")
        s = s_of_t(t, eps)
        if s[-1] > profile.s_grid[-1] * (1 + 1e-12):
            raise ValueError(f"t = {t[-1]} lies beyond the solved range t <= {t_of_s(profile.s_grid[-1], eps)}")
        if np.any(s <= 0):
            raise ValueError("t too small to represent")
        jet = evaluate_profile(profile, params, s)
    return _from_jet(jet, params, t, profile, numeric)


# ---------------------------------------------------------------------------
# residual of the t-equation


@dataclass
class TResidual:
    values: np.ndarray  # signed left-hand side per point
    scale: np.ndarray  # sum of absolute values of its terms
    max_abs: float

    def to_json(self) -> dict:
        return {"max_abs": self.max_abs, "max_relative": float(np.max(np.abs(self.values) / self.scale))}


def einstein_residual_t(metric: MetricProfile, params: OdeParams) -> TResidual:
    """f''/f' + f'(N_F/f + sum_m 1/(f + a_m)) + c~ f - N_F (tanh t + coth t), a_m = +-abar."""
    fp = params.floats
    f, f1, f2, t = metric.f, metric.f_prime, metric.f_second, metric.t_grid
    if np.any(~np.isfinite(f)) or np.any(f <= 0) or np.any(f1 <= 0):
        raise DomainError("f and f' must be positive for the t-equation")
    c_tilde = float(params.c_tilde)
    N = fp.N
    pair = np.zeros_like(f)
    pair_abs = np.zeros_like(f)
    for ab, m in metric.a_bars:
        pair += m * (1.0 / (f + ab) + 1.0 / (f - ab))
        pair_abs += m * (1.0 / (f + ab) + 1.0 / np.abs(f - ab))
    terms = [f2 / f1, f1 * N / f, f1 * pair, c_tilde * f, -N * np.tanh(t), -N / np.tanh(t)]
    values = sum(terms)
    scale = sum(np.abs(x) for x in terms[:2]) + f1 * pair_abs + sum(np.abs(x) for x in terms[3:])
    return TResidual(values, scale, float(np.max(np.abs(values))))


@dataclass
class ResidualConsistency:
    ratio: np.ndarray  # max(|r_t|, |r_theta|) / max(min(|r_t|, |r_theta|), floor) per node
    floor: np.ndarray
    max_ratio: float
    factor: float

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.factor

    def to_json(self) -> dict:
        return {"max_ratio": self.max_ratio, "factor": self.factor, "passed": self.passed}


def residual_consistency(
    profile: SolutionProfile, params: OdeParams, factor: float = 10.0, floor_rel: float = 1e-13
) -> ResidualConsistency:
    """Compare the t-equation residual with the theta-equation residual at the same nodes.

    Both use V'' from numerical differentiation of the stored profile.  Where
    both residuals sit at rounding level their ratio is meaningless, so each
    is floored at ``floor_rel`` times the sum of absolute t-equation terms.
    """
    metric = reconstruct(profile, params, numeric=True)
    rt = einstein_residual_t(metric, params)
    rth = residual_theta(profile, params)
    a, b = np.abs(rt.values), np.abs(rth.t_units)
    floor = floor_rel * rt.scale
    ratio = np.maximum(a, b) / np.maximum(np.minimum(a, b), floor)
    return ResidualConsistency(ratio, floor, float(ratio.max()), factor)


# ---------------------------------------------------------------------------
# boundary behaviour


@dataclass(frozen=True)
class LimitTolerances:
    small_t: float = 1e-4
    small_value: float = 1e-5
    limit_tol: float = 1e-5
    c3_stability: float = 1e-2
    c4_stability: float = 1e-2
    zero_limit: float = 1e-3
    residual_t: float = 1e-7
    c1_rel: float = 1e-6
    c2_rel: float = 1e-4

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class Check:
    name: str
    passed: bool
    measured: object
    expected: object = None
    detail: str = ""
    # non-gating checks are reported but do not decide the verdict
    gating: bool = True

    def to_json(self) -> dict:
        def conv(x):
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            if isinstance(x, (list, tuple)):
                return [conv(y) for y in x]
            return x

        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": conv(self.measured),
            "expected": conv(self.expected),
            "detail": self.detail,
            "gating": self.gating,
        }


@dataclass
class MetricConditionsReport:
    label: str
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.gating)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if c.gating and not c.passed]

    def by_name(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "schema_version": METRIC_SCHEMA_VERSION,
            "label": self.label,
            "passed": self.passed,
            "failed": self.failed,
            "checks": [c.to_json() for c in self.checks],
        }


def _last_decade(metric: MetricProfile) -> np.ndarray:
    """Points where e^{-2 eps t} lies within a factor 10 of its final value."""
    t = metric.t_grid
    return t >= t[-1] - math.log(10.0) / (2.0 * metric.epsilon)


def _spread(x: np.ndarray) -> float:
    return float((x.max() - x.min()) / abs(x[-1]))


def verify_metric_conditions(
    metric: MetricProfile,
    params: OdeParams,
    tolerances: LimitTolerances = LimitTolerances(),
    *,
    near: MetricProfile | None = None,
) -> MetricConditionsReport:
    """Positivity, the Einstein equation in t, and the limits at t = 0 and t -> infinity.

    ``near`` holds the metric at ``tolerances.small_t``; by default the first
    point of ``metric`` is used, which must then be that value.
    """
    tol = tolerances
    eps = metric.epsilon
    checks: list[Check] = []

    # positivity
    comps = {
        "f": metric.f,
        "f_prime": metric.f_prime,
        "transversal": metric.transversal_component,
        "fiber_circle": metric.fiber_circle_component,
        "fiber": metric.fiber_components.reshape(-1, len(metric.t_grid)),
        "base": metric.base_components,
    }
    for name, arr in comps.items():
        arr = np.atleast_2d(arr)
        lo = float(arr.min()) if arr.size else math.inf
        checks.append(Check(f"positive_{name}", bool(lo > 0), lo, "> 0"))

    # the Einstein equation in t
    res = einstein_residual_t(metric, params)
    checks.append(Check("residual_t", res.max_abs <= tol.residual_t, res.max_abs, tol.residual_t))

    # behaviour at t = 0
    if near is None:
        near = metric
    if not math.isclose(near.t_grid[0], tol.small_t, rel_tol=1e-12):
        raise ValueError("the near-zero metric must start at small_t")
    t0 = float(near.t_grid[0])
    f0, f1, f2, f3 = (float(x[0]) for x in (near.f, near.f_prime, near.f_second, near.f_third))
    # f ~ C1 t and f'' ~ C2 t near 0, so |f(t0)| < small_value needs C1 t0 < small_value;
    # these literal readings are kept for information and the limits are judged
    # by the extrapolations below
    note = f"t = {t0}, C1 t = {f1 * t0:.2e}, informational"
    checks.append(Check("f_at_small_t", abs(f0) < tol.small_value, f0, tol.small_value, note, gating=False))
    checks.append(Check("f_second_at_small_t", abs(f2) < tol.small_value, f2, tol.small_value, note, gating=False))
    # first-order extrapolations to t = 0
    f_at_0 = f0 - t0 * f1 + 0.5 * t0 * t0 * f2
    f2_at_0 = f2 - t0 * f3
    checks.append(
        Check("f_extrapolated_to_0", abs(f_at_0) < tol.small_value * t0, f_at_0, tol.small_value * t0, "f - t f' + t^2 f''/2")
    )
    checks.append(
        Check("f_second_extrapolated_to_0", abs(f2_at_0) < tol.small_value * t0, f2_at_0, tol.small_value * t0, "f'' - t f'''")
    )
    c1_expected = eps * math.sqrt(near.v1)
    checks.append(
        Check(
            "C1",
            math.isfinite(f1) and f1 > 0 and abs(f1 / c1_expected - 1) < tol.c1_rel + 2 * (eps * t0) ** 2,
            f1,
            c1_expected,
            "lim f'(t) at t -> 0 against eps sqrt(v1)",
        )
    )
    c2_expected = eps**3 * math.sqrt(near.v1) * (3.0 * near.v2 / near.v1 - 2.0)
    c2_ok = math.isfinite(f3) and abs(f3 - c2_expected) <= tol.c2_rel * max(1.0, abs(c2_expected)) + 50 * (eps * t0) ** 2 * max(1.0, abs(c2_expected))
    checks.append(Check("C2", c2_ok, f3, c2_expected, "lim f'''(t) at t -> 0 against the series value"))
    a_min = min(a for a, _ in metric.a_bars) if metric.a_bars else math.inf
    checks.append(Check("root_coefficients_positive", a_min > 0, a_min, "> 0", "a_bar components at t = 0"))

    # behaviour at t -> infinity
    last = _last_decade(metric)
    if last.sum() < 5:
        raise ValueError("too few points in the last decade of t")
    sqVc = math.sqrt(metric.V_ceiling)
    f_inf = float(metric.f[-1])
    checks.append(Check("f_limit", abs(f_inf - sqVc) < tol.limit_tol and f_inf > 0, f_inf, sqVc))
    for k, (ab, _) in enumerate(metric.a_bars):
        b = float(metric.base_components[k, -1])
        checks.append(Check(f"base_limit_{k}", abs(b - (ab * ab - metric.V_ceiling)) < tol.limit_tol and b > 0, b, ab * ab - metric.V_ceiling))
        for j, sgn in enumerate((-1.0, 1.0)):
            v = float(metric.fiber_components[k, j, -1])
            exp_v = ab + sgn * sqVc
            checks.append(Check(f"fiber_limit_{k}_{'minus' if sgn < 0 else 'plus'}", abs(v - exp_v) < tol.limit_tol and v > 0, v, exp_v))
    c3 = metric.c3_expr[last]
    checks.append(
        Check("C3", bool(np.all(np.isfinite(c3)) and c3[-1] > 0 and _spread(c3) < tol.c3_stability), float(c3[-1]), "> 0", f"relative spread {_spread(c3):.2e} over the last decade")
    )
    h = metric.half_expr[last]
    checks.append(
        Check(
            "half_limit_zero",
            bool(abs(h[-1]) < tol.zero_limit and abs(h[-1]) <= 0.5 * abs(h[0])),
            float(h[-1]),
            0.0,
            f"e^{{eps t}}(1 + f''/(2 eps f')), decays by {abs(h[0] / h[-1]):.2f} over the last decade",
        )
    )
    c4 = metric.c4_expr[last]
    checks.append(
        Check("C4", bool(np.all(np.isfinite(c4)) and _spread(c4) < tol.c4_stability), float(c4[-1]), "finite", f"relative spread {_spread(c4):.2e} over the last decade")
    )
    return MetricConditionsReport(metric.label, checks)


# ---------------------------------------------------------------------------
# Kaehler potential primitive


def potential_lambda(profile: SolutionProfile, params: OdeParams, t, n_nodes: int = 1001):
    """Lambda(t) = <theta_D, theta_D> int_0^t f, by the trapezoid rule with
    the endpoint-derivative correction (exact for cubics)."""
    eps = params.epsilon_F
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    t_end = float(t_of_s(profile.s_grid[-1], eps))
    T = float(t_arr.max())
    if T > t_end * (1 + 1e-12):
        raise ValueError(f"t = {T} lies beyond the solved range t <= {t_end}")
    if T == 0:
        out = np.zeros_like(t_arr)
        return out if np.ndim(t) else float(out[0])
    nodes = np.union1d(np.linspace(0.0, T, n_nodes), t_arr)
    pos = nodes[nodes > 0]
    m = reconstruct(profile, params, pos)
    f = np.concatenate([[0.0], m.f]) if nodes[0] == 0 else m.f
    f1 = np.concatenate([[eps * math.sqrt(profile.v1)], m.f_prime]) if nodes[0] == 0 else m.f_prime
    h = np.diff(nodes)
    pieces = h / 2.0 * (f[:-1] + f[1:]) + h * h / 12.0 * (f1[:-1] - f1[1:])
    cum = np.concatenate([[0.0], np.cumsum(pieces)]) * float(params.theta_D_norm_sq)
    out = cum[np.searchsorted(nodes, t_arr)]
    return out if np.ndim(t) else float(out[0])
