import json
from fractions import Fraction

import mpmath
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from hartogs_szego.errors import StructureViolation, UnsupportedParams
from hartogs_szego.precision import PrecCtx
from hartogs_szego.symbolic import (
    ExpPolyElem,
    RadicalExpr,
    RatPoly,
    derivative,
    dz_certify,
    exp_neg_upper,
    limit_check,
    nth_derivative,
    nu_expr,
    radicand_nonnegative,
    tail_sign_threshold,
    verify_structure,
)
from hartogs_szego.weights import RadialWeightProfile, WeightParams

F = Fraction
S = sp.symbols("s", positive=True)
MP = PrecCtx(256).mp


def poly(d):
    return RatPoly({k: F(v) for k, v in d.items()})


def to_sympy(p: RatPoly):
    return sum(sp.Rational(c.numerator, c.denominator) * S**d for d, c in p.coeffs.items())


def elem_to_sympy(e: ExpPolyElem):
    E = sp.exp(-2 * sp.Rational(e.B.numerator, e.B.denominator) * S**e.alpha)
    return sum(E**k * to_sympy(p) for k, p in e.terms.items())


coeff_maps = st.dictionaries(st.integers(-3, 6), st.fractions(min_value=-20, max_value=20, max_denominator=7),
                             max_size=5)


@settings(max_examples=40, deadline=None)
@given(coeff_maps, coeff_maps)
def test_ratpoly_ring_ops_match_sympy(a, b):
    pa, pb = poly(a), poly(b)
    assert sp.expand(to_sympy(pa * pb) - to_sympy(pa) * to_sympy(pb)) == 0
    assert sp.expand(to_sympy(pa + pb) - to_sympy(pa) - to_sympy(pb)) == 0
    assert sp.expand(to_sympy(pa.deriv()) - sp.diff(to_sympy(pa), S)) == 0


@settings(max_examples=25, deadline=None)
@given(st.dictionaries(st.integers(0, 3), coeff_maps, max_size=3), st.integers(1, 2))
def test_exppoly_derivative_matches_sympy(terms, alpha):
    e = ExpPolyElem({k: poly(v) for k, v in terms.items()}, F(1), alpha)
    assert sp.simplify(elem_to_sympy(e.deriv()) - sp.diff(elem_to_sympy(e), S)) == 0


def test_ratpoly_interval_encloses():
    p = poly({3: 1, 1: -2, -1: F(1, 2)})
    lo, hi = p.interval(F(2), F(3))
    for k in range(11):
        x = F(2) + F(k, 10)
        assert lo <= p(x) <= hi


def test_first_derivative_numerator():
    d1 = derivative(nu_expr())
    assert d1.numerator.part(0) == RatPoly.const(-1)
    assert d1.numerator.part(1) == poly({4: -4, 3: 8, 2: -3})
    assert d1.half_exponent == 1
    # R' = e^{-2s}(-4s^4 + 12s^3 - 6s^2)
    assert nu_expr().radicand.deriv().part(1) == poly({4: -4, 3: 12, 2: -6})


def test_bare_exponential():
    expr = RadicalExpr(F(1), ExpPolyElem({0: RatPoly.const(1)}), ExpPolyElem({0: RatPoly.const(1)}), 0)
    d = derivative(expr)
    assert d.numerator == ExpPolyElem({0: RatPoly.const(-1)})


def nu_numeric(s):
    return mpmath.exp(-s) * mpmath.sqrt(1 + 2 * mpmath.exp(-2 * s) * s**3 * (s - 1))


@pytest.mark.parametrize("n", range(9))
def test_derivatives_match_finite_differences(n):
    expr = nth_derivative(WeightParams(), n)
    f = expr.numeric(MP)
    for s in ["3", "1.5", "7.25", "40"]:
        with mpmath.workdps(60):
            oracle = mpmath.diff(nu_numeric, mpmath.mpf(s), n)
        assert abs(f(MP.mpf(s)) - oracle) <= 1e-15 * abs(oracle)


def test_general_params_match_weight_profile():
    params = WeightParams(1, 2, 2)
    ctx = PrecCtx(256)
    prof = RadialWeightProfile(params, 0)
    expr = nth_derivative(params, 0)
    f = expr.numeric(ctx.mp)
    for s in [1, 1.3, 2, 3.5]:
        s = ctx.mp.mpf(s)
        assert abs(f(s) - prof.evaluator_s(s, ctx)) <= 1e-60 * prof.evaluator_s(s, ctx)


@pytest.mark.parametrize("n,expected", [(0, 1), (1, -1), (2, 1), (5, -1), (8, 1)])
def test_structure_leading_constant(n, expected):
    rep = verify_structure(nth_derivative(WeightParams(), n), n)
    assert rep.leading_part == RatPoly.const(expected)
    assert rep.leading_is_constant
    if n == 0:
        assert rep.P == {}
    if n == 1:
        assert rep.P[1] == poly({4: -4, 3: 8, 2: -3})


def test_structure_violation_detected():
    bad = RadicalExpr(F(1), ExpPolyElem({0: poly({1: 1, 0: -1})}), nu_expr().radicand, 1)
    with pytest.raises(StructureViolation):
        verify_structure(bad, 1)


def test_tail_thresholds():
    assert tail_sign_threshold(nth_derivative(WeightParams(), 0), 0).s_n == 1
    cert1 = tail_sign_threshold(nth_derivative(WeightParams(), 1), 1)
    assert cert1.s_n == 1
    for n in range(2, 9):
        s_n = tail_sign_threshold(nth_derivative(WeightParams(), n), n).s_n
        assert 1 <= s_n <= 50


def test_limit_check():
    for n in range(9):
        assert limit_check(nth_derivative(WeightParams(), n))
    flat_prefactor = RadicalExpr(F(0), ExpPolyElem({0: poly({2: 1})}), ExpPolyElem({0: RatPoly.const(1)}), 0)
    assert not limit_check(flat_prefactor)
    d1 = nth_derivative(WeightParams(), 1).numeric(MP)
    assert abs(d1(30)) < 1e-12


def test_radicand_positivity():
    assert radicand_nonnegative(nu_expr())
    assert nu_expr().radicand.part(1) == poly({4: 2, 3: -2})
    assert all(c >= 0 for c in nu_expr().radicand.part(1).shifted(1).coeffs.values())


@settings(max_examples=30, deadline=None)
@given(st.fractions(min_value=0, max_value=400, max_denominator=64))
def test_exp_upper_bound(x):
    u = Fraction(exp_neg_upper(x))
    with mpmath.workprec(400):
        true = mpmath.exp(-mpmath.mpf(x.numerator) / x.denominator)
        assert mpmath.mpf(u.numerator) / u.denominator >= true
        assert mpmath.mpf(u.numerator) / u.denominator <= true * (1 + float(x * x) * 2.0**-20 + 2.0**-100)  # (1+x/N)^N vs e^x: x^2/(2N)


@pytest.fixture(scope="module")
def cert8():
    return dz_certify(WeightParams(), 8)


def test_certificate_order_8(cert8):
    assert cert8.valid
    assert [r.order for r in cert8.records] == list(range(9))
    assert all(r.structure_ok and r.limit_zero_ok and r.sign_ok and r.numeric_sign_ok for r in cert8.records)
    assert cert8.records[1].s_n == 1
    data = json.loads(json.dumps(cert8.to_json()))
    assert data["valid"] is True
    assert data["orders"][1]["P"]["1"] == {"2": "-3/1", "3": "8/1", "4": "-4/1"}
    assert "s = 1/(1 - r^2)" in data["chain_rule_note"]


def test_certificate_order_0():
    assert dz_certify(WeightParams(), 0).valid


@pytest.mark.parametrize("params", [WeightParams(1, 2, 1), WeightParams(0, 1, 2)])
def test_certificate_integer_ring(params):
    assert dz_certify(params, 4).valid


@pytest.mark.parametrize("params", [WeightParams(0.5, 1, 1.5), WeightParams(0, 1, 0.5)])
def test_unsupported(params):
    with pytest.raises(UnsupportedParams):
        dz_certify(params, 2)


def test_order_cap():
    with pytest.raises(ValueError):
        nth_derivative(WeightParams(), 9)
