import json
import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kecohom import make_case, make_params, solve_bvp
from kecohom.ke_ode import DomainError
from kecohom.metric_reconstruction import (
    METRIC_SCHEMA_VERSION,
    LimitTolerances,
    einstein_residual_t,
    metric_from_f,
    potential_lambda,
    reconstruct,
    residual_consistency,
    s_of_t,
    t_of_s,
    verify_metric_conditions,
)

from conftest import params_for


@settings(max_examples=200)
@given(st.floats(1e-6, 30.0), st.sampled_from([1, 2]))
def test_s_and_t_are_inverse(t, eps):
    s = float(s_of_t(t, eps))
    ref = float(2 * mpmath.log(mpmath.cosh(mpmath.mpf(eps) * t)))
    assert s == pytest.approx(ref, rel=1e-12)
    assert float(t_of_s(s, eps)) == pytest.approx(t, rel=1e-10)


@pytest.fixture(scope="module")
def gc(solved):
    _, params, prof = solved("case1(2)-Q")
    return params, prof, reconstruct(prof, params)


def test_limits_at_both_ends(gc):
    params, prof, m = gc
    assert m.f[-1] == pytest.approx(1.0, abs=1e-8)
    assert m.f[0] / m.t_grid[0] == pytest.approx(params.epsilon_F * math.sqrt(prof.v1), rel=1e-7)
    small = reconstruct(prof, params, [1e-5, 1e-4, 1e-3])
    assert abs(small.f_second[0]) < abs(small.f_second[1]) / 5 < abs(small.f_second[2]) / 25


def test_components_and_far_limits(gc):
    params, prof, m = gc
    (ab, _), = m.a_bars
    assert np.all(m.base_components > 0) and np.all(m.fiber_components > 0)
    assert m.base_components[0, -1] == pytest.approx(ab * ab - 1.0, abs=1e-8)
    assert m.fiber_components[0, 0, -1] == pytest.approx(ab - 1.0, abs=1e-8)
    assert m.fiber_components[0, 1, -1] == pytest.approx(ab + 1.0, abs=1e-8)


def test_all_checks_pass_case1_rank3_quadric():
    params = make_params(make_case(1, (3,), "Q"))
    m = reconstruct(solve_bvp(params), params)
    rep = verify_metric_conditions(m, params)
    assert rep.passed, rep.failed


def test_report_flags_the_literal_small_t_readings(gc):
    params, _, m = gc
    rep = verify_metric_conditions(m, params)
    assert not rep.by_name("f_at_small_t").gating
    assert rep.by_name("f_extrapolated_to_0").gating and rep.by_name("f_extrapolated_to_0").passed
    doc = rep.to_json()
    assert doc["schema_version"] == METRIC_SCHEMA_VERSION and doc["passed"] is True
    with pytest.raises(KeyError):
        rep.by_name("nonexistent")


def _tanh_metric(params):
    t = np.concatenate([np.geomspace(1e-4, 1.0, 100, endpoint=False), np.linspace(1.0, 8.0, 400)])
    th, sech2 = np.tanh(t), 1.0 / np.cosh(t) ** 2
    return metric_from_f(
        params, t, th, sech2, -2.0 * sech2 * th, 4.0 * sech2 * th * th - 2.0 * sech2 * sech2, v1=1.0
    )


def test_tanh_fails_decay_rate_check_for_projective_fiber():
    params = params_for(4, (), "CP")
    assert not verify_metric_conditions(_tanh_metric(params), params).by_name("C3").passed


def test_tanh_decay_rate_matches_quadric_fiber():
    params = params_for(1, (2,), "Q")
    assert verify_metric_conditions(_tanh_metric(params), params).by_name("C3").passed


def test_direct_limit_formulas_agree_at_moderate_t(gc):
    params, prof, m = gc
    keep = m.s_grid <= 10.0
    direct = metric_from_f(
        params, m.t_grid[keep], m.f[keep], m.f_prime[keep], m.f_second[keep], m.f_third[keep], v1=prof.v1
    )
    far = m.t_grid[keep] > 1.0
    for name in ("c3_expr", "half_expr", "c4_expr"):
        a, b = getattr(m, name)[keep][far], getattr(direct, name)[far]
        assert np.allclose(a, b, rtol=1e-6, atol=1e-8), name


def test_residual_t_on_converged_solutions(solved):
    for label in ("case1(2)-Q", "case4-CP"):
        _, params, prof = solved(label)
        assert einstein_residual_t(reconstruct(prof, params), params).max_abs <= 1e-7


def test_residual_t_rejects_vanishing_f(gc):
    params, _, m = gc
    with pytest.raises(DomainError):
        einstein_residual_t(replace(m, f=np.zeros_like(m.f)), params)


def test_residual_t_sensitive_to_perturbation(gc):
    params, _, m = gc
    base = einstein_residual_t(m, params).max_abs
    bumped = einstein_residual_t(replace(m, f=m.f + 1e-3), params).max_abs
    assert bumped >= base + 1e-4


def test_residuals_agree_across_coordinates(solved):
    _, params, prof = solved("case4-CP")
    assert residual_consistency(prof, params).max_ratio <= 10.0


def test_derivatives_match_differences(gc):
    params, prof, _ = gc
    h = 1e-3
    t = np.arange(0.2, 3.0, h)
    m = reconstruct(prof, params, t)
    for lo, hi in ((m.f, m.f_prime), (m.f_prime, m.f_second), (m.f_second, m.f_third)):
        fd = (lo[2:] - lo[:-2]) / (2 * h)
        assert np.max(np.abs(fd - hi[1:-1])) < 1e-5 * max(1.0, np.max(np.abs(hi)))


def test_odd_extension_is_smooth(gc):
    # one-sided Taylor fits at 0: f has only odd powers and f' only even ones
    params, prof, _ = gc
    t = np.linspace(1e-3, 0.05, 60)
    m = reconstruct(prof, params, t)
    cf = np.polynomial.polynomial.polyfit(t, m.f, 6)
    cd = np.polynomial.polynomial.polyfit(t, m.f_prime, 6)
    assert max(abs(cf[0]), abs(cf[2]) * 1e-2, abs(cf[4]) * 1e-4) < 1e-9 * abs(cf[1])
    assert max(abs(cd[1]), abs(cd[3]) * 1e-2) < 1e-7 * abs(cd[0])


def test_potential(gc):
    params, prof, _ = gc
    n = float(params.theta_D_norm_sq)
    assert potential_lambda(prof, params, 0.0) == 0.0
    t = np.linspace(0.0, 4.0, 401)
    lam = potential_lambda(prof, params, t)
    assert np.all(np.diff(lam) > 0)
    mid = 0.5 * (t[1:] + t[:-1])
    fd = np.diff(lam) / np.diff(t)
    f_mid = reconstruct(prof, params, mid).f
    # the difference quotient matches f at the midpoint up to h^2 f''/24
    assert np.max(np.abs(fd - n * f_mid)) < 1e-6 + np.diff(t)[0] ** 2 / 24 * n * 4
    t_far = float(t_of_s(20.0, params.epsilon_F))
    l1, l2 = potential_lambda(prof, params, [t_far - 1.0, t_far])
    assert l2 - l1 == pytest.approx(n * 1.0, rel=1e-6)
    with pytest.raises(ValueError):
        potential_lambda(prof, params, -1.0)


def test_reconstruct_rejects_bad_grids(gc):
    params, prof, _ = gc
    with pytest.raises(ValueError):
        reconstruct(prof, params, [0.5, 0.4])
    with pytest.raises(ValueError):
        reconstruct(prof, params, [1.0, 100.0])
    with pytest.raises(ValueError):
        reconstruct(prof, params, [0.5], numeric=True)


def test_metric_export(gc):
    _, _, m = gc
    doc = json.loads(m.to_json())
    assert doc["schema_version"] == METRIC_SCHEMA_VERSION and len(doc["t"]) == len(m.t_grid)
    lines = m.to_csv().splitlines()
    assert lines[0].startswith("t,f,f_prime") and len(lines) == len(m.t_grid) + 1
    assert float(lines[1].split(",")[1]) == m.f[0]


def test_limit_tolerances_json():
    assert LimitTolerances().to_json()["small_t"] == 1e-4
