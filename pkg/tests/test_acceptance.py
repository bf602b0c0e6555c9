"""Acceptance criteria, each at its stated tolerance and runtime.

Every test prints one line "criterion N: PASS|FAIL ..." to the terminal.
"""

import io
import time
import warnings

import mpmath
import numpy as np
import pytest

from kecohom import ConditionDViolated, Sign, Tolerances, make_case, solve_bvp
from kecohom.case_catalog import Fiber
from kecohom.cli_reporting import EXIT_REFUSED, existence_table, main
from kecohom.case_catalog import enumerate_cases
from kecohom.exact_quadrature import sign_integral
from kecohom.ke_ode import ConditionDWarning, residual_theta, verify_two_sided_bound
from kecohom.metric_reconstruction import reconstruct, residual_consistency, verify_metric_conditions
from kecohom.root_pairing import kappa_ratios

from conftest import SOLVED_CASES, params_for


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def _magnitudes(case):
    return sorted({abs(k) for k, m in kappa_ratios(case).kappa_values})


def test_criterion_1_kappa_column(report):
    start = time.perf_counter()
    bad = []
    for l in range(2, 31):
        if _magnitudes(make_case(1, (l,))) != [2 * (l + 1)]:
            bad.append(f"case1({l})")
    for p in range(1, 16):
        for q in range(1, 16):
            if p + q > 2 and _magnitudes(make_case(2, (p, q))) != sorted({2 * (p + 1), 2 * (q + 1)}):
                bad.append(f"case2({p},{q})")
    for l in range(4, 21):
        if _magnitudes(make_case(3, (l,))) != [2 * (l + 3)]:
            bad.append(f"case3({l})")
    for fiber in Fiber:
        if _magnitudes(make_case(4, (), fiber)) != [16]:
            bad.append(f"case4-{fiber.short}")
    elapsed = time.perf_counter() - start
    ok = report(1, not bad and elapsed < 1.0, f"mismatches={bad} runtime={elapsed:.3f}s")
    assert ok


def _sign(case_id, ranks, fiber):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditionDWarning)
        return sign_integral(params_for(case_id, ranks, fiber)).sign


def test_criterion_2_sign_table(report):
    start = time.perf_counter()
    expected = []
    expected += [((1, (l,), "Q"), Sign.NEGATIVE) for l in range(2, 31)]
    expected += [((1, (l,), "CP"), Sign.NEGATIVE) for l in range(3, 31)]
    expected += [((2, (p, q), "CP"), Sign.NEGATIVE) for p in range(2, 16) for q in range(2, 16)]
    expected += [((3, (l,), "CP"), Sign.NEGATIVE) for l in range(4, 21)]
    expected += [((4, (), "CP"), Sign.NEGATIVE), ((5, (), "CP"), Sign.NEGATIVE)]
    expected += [((4, (), "Q"), Sign.POSITIVE), ((5, (), "Q"), Sign.POSITIVE)]
    bad = [key for key, sign in expected if _sign(*key) is not sign]
    elapsed = time.perf_counter() - start
    ok = report(2, not bad and elapsed < 30.0, f"{len(expected)} cases, mismatches={bad} runtime={elapsed:.2f}s")
    assert ok


FIXED_INTEGRALS = [(4, (), "Q"), (4, (), "CP"), (5, (), "Q"), (5, (), "CP"), (1, (2,), "Q")]


def _float_quadrature(params):
    # int_0^{V_c} (1 + 2 alpha' - c sqrt x) x^alpha prod (abar^2 - x)^m dx, adaptively in x
    mp = lambda q: mpmath.mpf(q.numerator) / q.denominator
    k, c, alpha, Vc = mp(1 + 2 * params.alpha_prime), mp(params.c_hat), mp(params.alpha), mp(params.V_ceiling)
    pairs = [(mp(a) ** 2, m) for a, m in params.a_bars]

    def g(x):
        val = (k - c * mpmath.sqrt(x)) * x**alpha
        for a2, m in pairs:
            val *= (a2 - x) ** m
        return val

    return mpmath.quad(g, [0, (k / c) ** 2, Vc])


def test_criterion_3_exact_vs_float(report):
    mpmath.mp.dps = 30
    worst = 0.0
    for key in FIXED_INTEGRALS:
        params = params_for(*key)
        exact = sign_integral(params).value
        ref = _float_quadrature(params)
        worst = max(worst, float(abs(mpmath.mpf(exact.numerator) / exact.denominator / ref - 1)))
    ok = report(3, worst < 1e-10, f"worst relative difference {worst:.2e} over {len(FIXED_INTEGRALS)} integrals")
    assert ok


@pytest.mark.parametrize("label", sorted(SOLVED_CASES))
def test_criterion_4_bvp(report, label):
    params = params_for(*SOLVED_CASES[label])
    start = time.perf_counter()
    prof = solve_bvp(params)
    elapsed = time.perf_counter() - start
    res = residual_theta(prof, params).max_relative
    mono = bool(np.all(np.diff(prof.gap) < 0) and np.all(prof.V_dot > 0))
    lem = verify_two_sided_bound(prof, params, n_pairs=100)
    end_gap = abs(prof.gap[-1])
    ok = res <= 1e-7 and mono and lem.violations == 0 and end_gap <= 1e-6 and elapsed < 60.0
    report(
        "4" + f" [{label}]",
        ok,
        f"(a) residual={res:.2e} (b) monotone={mono} (c) violations={lem.violations}/100 "
        f"(d) |V_c - V_end|={end_gap:.2e} runtime={elapsed:.2f}s",
    )
    assert ok


@pytest.mark.parametrize("label", sorted(SOLVED_CASES))
def test_criterion_5_metric_checks(report, solved, label):
    _, params, prof = solved(label)
    rep = verify_metric_conditions(reconstruct(prof, params), params)
    c3 = rep.by_name("C3")
    base = [c for c in rep.checks if c.name.startswith("base_limit")]
    worst_base = max(abs(c.measured - c.expected) for c in base)
    report(
        "5" + f" [{label}]",
        rep.passed,
        f"failed={rep.failed} C1={rep.by_name('C1').measured:.6g} C3={c3.measured:.6g} ({c3.detail}) "
        f"f(0)~{rep.by_name('f_extrapolated_to_0').measured:.1e} f''(0)~{rep.by_name('f_second_extrapolated_to_0').measured:.1e} "
        f"base limit error={worst_base:.1e}",
    )
    assert rep.passed


@pytest.mark.xfail(
    strict=True,
    reason="f(t) ~ C1 t with C1 = eps sqrt(v1) near 1, so |f(1e-4)| is near 1e-4 and cannot be below 1e-5",
)
@pytest.mark.parametrize("label", sorted(SOLVED_CASES))
def test_criterion_5_literal_small_t_values(report, solved, label):
    _, params, prof = solved(label)
    rep = verify_metric_conditions(reconstruct(prof, params), params)
    f0, f2 = rep.by_name("f_at_small_t"), rep.by_name("f_second_at_small_t")
    ok = f0.passed and f2.passed
    report(
        "5 literal" + f" [{label}]",
        ok,
        f"|f(1e-4)|={abs(f0.measured):.2e} |f''(1e-4)|={abs(f2.measured):.2e} against 1e-5 (expected to fail)",
    )
    assert ok


@pytest.mark.parametrize("label", sorted(SOLVED_CASES))
def test_criterion_6_residual_consistency(report, solved, label):
    _, params, prof = solved(label)
    rc = residual_consistency(prof, params, factor=10.0)
    report("6" + f" [{label}]", rc.passed, f"max ratio {rc.max_ratio:.3f} (within 10x both ways)")
    assert rc.passed and rc.max_ratio <= 10.0


def test_criterion_7_exclusions(report, tmp_path):
    raised = []
    for key in ((2, (3, 1), "CP"), (1, (2,), "CP")):
        try:
            solve_bvp(params_for(*key))
        except ConditionDViolated:
            raised.append(True)
        else:
            raised.append(False)
    codes = [
        main(["solve", "--case", "2", "--p", "3", "--q", "1", "--out-dir", str(tmp_path)], stream=io.StringIO()),
        main(["solve", "--case", "1", "--rank", "2", "--fiber", "CP", "--out-dir", str(tmp_path)], stream=io.StringIO()),
    ]
    families = existence_table(enumerate_cases(10))["excluded_families"]
    expected = ["case1(2)-CP", "case2(1,q)-CP", "case4-Q", "case5-Q"]
    ok = all(raised) and codes == [EXIT_REFUSED, EXIT_REFUSED] and families == expected
    report(7, ok, f"ConditionDViolated raised={raised} exit codes={codes} excluded families={families}")
    assert ok


def test_criterion_8_grid_refinement(report):
    params = params_for(*SOLVED_CASES["case1(2)-Q"])
    a = solve_bvp(params)
    b = solve_bvp(params, Tolerances().halved())
    d0 = abs(a.v1 - b.v1) / abs(a.v1)
    d1 = abs(a.V_dot_at_1 - b.V_dot_at_1) / abs(a.V_dot_at_1)
    ok = d0 < 1e-4 and d1 < 1e-4
    report(8, ok, f"relative change V_dot_0 {d0:.2e}, V_dot_1 {d1:.2e}")
    assert ok
