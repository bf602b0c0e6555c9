from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kecohom.case_catalog import RootVector, enumerate_cases, make_case
from kecohom.root_pairing import MalformedCatalogError, condition_d_holds, kappa_ratios, pairing


def _eps(n, i):
    return RootVector([1 if k == i else 0 for k in range(n)])


def test_pairing_case1_hand_value():
    theta_D = Fraction(-1, 2) * (_eps(3, 0) - _eps(3, 1))
    assert pairing(theta_D, _eps(3, 0) - _eps(3, 2)) == Fraction(-1, 2)


def test_pairing_case4_hand_value():
    e = [_eps(5, i) for i in range(5)]
    theta_D = Fraction(1, 2) * (e[1] + e[2] + e[3] + e[4])
    assert pairing(theta_D, e[0] + e[1]) == Fraction(1, 2)


def test_pairing_zero_vector():
    z = RootVector((0, 0, 0))
    assert pairing(z, z) == 0


def test_pairing_length_mismatch():
    with pytest.raises(ValueError):
        pairing(RootVector((1, 2)), RootVector((1, 2, 3)))


fractions = st.fractions(min_value=-10, max_value=10, max_denominator=12)
vec = st.lists(fractions, min_size=4, max_size=4).map(RootVector)


@settings(max_examples=100)
@given(vec, vec, vec, fractions)
def test_pairing_symmetric_bilinear(a, b, c, k):
    assert pairing(a, b) == pairing(b, a)
    assert pairing(a + k * b, c) == pairing(a, c) + k * pairing(b, c)
    assert pairing(a, a) >= 0


def test_kappa_examples():
    assert kappa_ratios(make_case(1, (3,), "Q")).kappa_multiset() == {8: 2, -8: 2}
    rep4 = kappa_ratios(make_case(4, (), "CP"))
    assert rep4.kappa_multiset() == {16: 4, -16: 4} and rep4.theta_D_norm_sq == 1
    assert kappa_ratios(make_case(3, (4,))).kappa_multiset() == {14: 2, -14: 2}
    rep5 = kappa_ratios(make_case(5, (), "Q"))
    assert rep5.kappa_multiset() == {24: 8, -24: 8} and rep5.theta_D_norm_sq == 1


def test_theta_kappa_orthogonal_to_theta_D():
    for c in enumerate_cases(10):
        assert pairing(c.theta_kappa, c.theta_D) == 0, c.label


def test_condition_d_examples():
    assert condition_d_holds(make_case(1, (2,), "CP")) is False
    assert condition_d_holds(make_case(1, (3,), "Q")) is True
    assert condition_d_holds(make_case(2, (3, 1))) is False
    assert condition_d_holds(make_case(2, (1, 3))) is False


def test_condition_d_boundary_values():
    # |kappa| <theta_D, theta_D> against N_F + eps_F
    rep = kappa_ratios(make_case(1, (2,), "CP"))
    assert rep.theta_D_norm_sq * 6 == 3
    rep = kappa_ratios(make_case(2, (3, 1)))
    assert min(abs(k) for k, _ in rep.kappa_values) * rep.theta_D_norm_sq == 4


def test_malformed_root_rejected():
    c = make_case(1, (3,), "Q")
    bad = type(c)(c.case_id, c.rank_params, c.fiber, c.N_F, c.theta_D, c.theta_kappa, ((RootVector((0, 0, 1, -1)), 1),))
    with pytest.raises(MalformedCatalogError):
        kappa_ratios(bad)


def test_report_json():
    doc = kappa_ratios(make_case(4, (), "Q")).to_json()
    assert doc["theta_D_norm_sq"] == "1" and doc["condition_d"] is True
    assert {e["kappa"] for e in doc["kappa_values"]} == {"16", "-16"}
