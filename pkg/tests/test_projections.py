import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from hartogs_szego.errors import TableUnderflow
from hartogs_szego.moments import MomentStore, bergman_kernel_eval, boundary_monomial_norm_sq, moment
from hartogs_szego.precision import PrecCtx
from hartogs_szego.projections import (
    BoundaryFunction,
    MonomialExpansion,
    Verdict,
    _verdict,
    as_exponent,
    bergman_project,
    conjugate_exponent,
    duality_symmetry_check,
    irregularity_scan,
    lift,
    lift_norm_identity,
    lift_projection_identity,
    lower_bound,
    lp_monomial_norm,
    predicted_slope,
    szego_project,
)
from hartogs_szego.weights import PolynomialWeight, RadialWeightProfile, WeightParams, grad_norm_sq, phi


def rel(a, b):
    return abs(a - b) / abs(b)


def expansion(*triples):
    return MonomialExpansion.from_triples(triples)


@pytest.fixture(scope="module")
def store():
    return MomentStore(WeightParams(), PrecCtx())


def test_exponent_parsing():
    assert as_exponent("4/3") == Fraction(4, 3)
    assert as_exponent(2.5) == Fraction(5, 2)
    assert conjugate_exponent(4) == Fraction(4, 3)
    with pytest.raises(ValueError):
        conjugate_exponent(1)


def test_expansion_merges_duplicates():
    e = expansion((1, 0, 2), (1, 0, 3))
    assert e.terms == {(1, 0): 5}
    with pytest.raises(ValueError):
        expansion((-1, 0, 1))


def test_bergman_project_basic(store):
    params = WeightParams()
    t = store.table(0, 5)
    out = bergman_project(params, 0, expansion((5, 0, 1)), t)
    assert out.terms == {(5, 0): 1}
    assert bergman_project(params, 0, expansion((0, 1, 1)), t).terms == {}
    out = bergman_project(params, 0, expansion((4, 1, 1)), t)
    assert set(out.terms) == {(3, 0)} and out.is_holomorphic
    assert out.terms[(3, 0)] == t[4] / t[3]


def test_bergman_project_brute_force(store):
    """Compare with 2 pi * int B_0(z, t) t^4 conj(t) w_0(|t|) dA(t) by 2D quadrature."""
    params = WeightParams()
    ctx = PrecCtx(128, 1e-24)
    kt = MomentStore(params, ctx).table(0, 80)
    closed = bergman_project(params, 0, expansion((4, 1, 1)), store.table(0, 4))
    prof = RadialWeightProfile(params, 0)
    z = mpmath.mpc(0.3, 0.2)
    M = 32

    def radial(r):
        total = 0
        for i in range(M):
            t = r * mpmath.expjpi(mpmath.mpf(2 * i) / M)
            total += bergman_kernel_eval(kt, z, t, 1e-16).value * t**4 * mpmath.conj(t)
        return 2 * mpmath.pi * total / M * mpmath.mpf(prof.evaluator_r(r, ctx)) * r

    with mpmath.workdps(25):
        brute = 2 * mpmath.pi * mpmath.quad(radial, [0, 0.5, 0.9, 1])
        want = mpmath.mpc(closed.terms[(3, 0)]) * z**3
        assert abs(brute - want) <= 1e-10 * abs(want)


def test_bergman_project_underflow(store):
    with pytest.raises(TableUnderflow):
        bergman_project(WeightParams(), 0, expansion((30, 2, 1)), store.table(0, 5))
    with pytest.raises(ValueError):
        bergman_project(WeightParams(), 1, expansion((1, 0, 1)), store.table(0, 5))


terms_strategy = st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(-5, 5)), max_size=6)


@settings(max_examples=30, deadline=None)
@given(terms_strategy)
def test_bergman_project_idempotent(triples):
    if "t" not in _SHARED:
        _SHARED["t"] = MomentStore(WeightParams(), PrecCtx(128, 1e-24)).table(0, 6)
    table = _SHARED["t"]
    f = expansion(*triples)
    once = bergman_project(WeightParams(), 0, f, table)
    twice = bergman_project(WeightParams(), 0, once, table)
    assert once.is_holomorphic
    assert once.terms == twice.terms


_SHARED = {}


def test_szego_project_slices(store):
    params, ctx = WeightParams(), store.ctx
    out = szego_project(params, lift(expansion((3, 0, 1))), store, ctx)
    assert set(out) == {0} and out[0].terms == {(3, 0): 1}
    assert out.z2_dependence() == 0
    neg = szego_project(params, BoundaryFunction({(-1, 0, 0): 1}), store, ctx)
    assert dict(neg) == {}


def test_szego_project_frequency_one(store):
    """e^{i theta} -> z2 * G_1(0) / m[1, 0], checked against independent routes."""
    params, ctx = WeightParams(), store.ctx
    out = szego_project(params, BoundaryFunction({(1, 0, 0): 1}), store, ctx)
    assert set(out) == {1} and set(out[1].terms) == {(0, 0)}
    with mpmath.workdps(40):
        def integrand(r):
            if r >= 1:
                return mpmath.mpf(0)
            return r * mpmath.mpf(phi(params, r, ctx)) ** 2 * mpmath.sqrt(1 + mpmath.mpf(grad_norm_sq(params, r, ctx)))

        g1 = (2 * mpmath.pi) ** 2 * mpmath.quad(integrand, [0, 0.5, 0.9, 0.99, 1])
        m10 = mpmath.mpf(boundary_monomial_norm_sq(params, 0, 1, ctx))
        assert abs(out[1].terms[(0, 0)] - g1 / m10) <= 1e-8 * g1 / m10


def test_lift_norm_constant(ctx, flat):
    res = lift_norm_identity(flat, expansion((0, 0, 1)), 2, ctx)
    m00 = moment(flat, 0, 0, ctx)
    assert rel(res.boundary_side, m00) <= 1e-25
    assert rel(res.disc_side, m00) <= 1e-25


def test_lift_norm_monomial(ctx, flat):
    res = lift_norm_identity(flat, expansion((3, 0, 1)), 2, ctx)
    assert rel(res.disc_side, moment(flat, 0, 6, ctx)) <= 1e-25
    assert res.rel_diff <= 1e-25


def test_lift_norm_p4(ctx, flat):
    assert lift_norm_identity(flat, expansion((2, 0, 1), (0, 1, 1)), 4, ctx).rel_diff <= 1e-12


def test_lift_norm_fractional_p(fast_ctx, flat):
    # zero-free on the closed disc, so |f|**p stays smooth in r
    assert lift_norm_identity(flat, expansion((1, 0, 1), (0, 0, 2j)), Fraction(5, 2), fast_ctx).rel_diff <= 1e-12


def test_lift_projection_identity(store):
    params, ctx = WeightParams(), store.ctx
    r = lift_projection_identity(params, expansion((4, 0, 1)), store, ctx)
    assert r.coefficient_rel_err == 0 and r.passed
    r = lift_projection_identity(params, expansion((2, 1, 1)), store, ctx)
    assert r.coefficient_rel_err <= 1e-10 and r.z2_dependence == 0
    r = lift_projection_identity(params, expansion((0, 2, 1)), store, ctx)
    assert r.szego_side.get(0, MonomialExpansion()).terms == {} and r.bergman_side.terms == {}
    assert "2*pi" in r.convention_note


def test_lp_norm_basics(ctx, flat):
    m = moment(flat, 0, 10, ctx)
    assert rel(lp_monomial_norm(flat, 0, 5, 2, ctx), ctx.mp.sqrt(m)) <= 1e-28
    a = lp_monomial_norm(flat, 0, 0, 4, ctx) ** 4
    b = lp_monomial_norm(flat, 0, 0, 2, ctx) ** 2
    assert rel(a, b) <= 1e-28


@pytest.mark.parametrize("n", [1, 8, 40])
def test_lp_norm_log_convex_in_inverse_p(n, ctx, flat):
    # 1/3 = (1/3)(1/2) + (2/3)(1/4)
    l2, l3, l4 = (mpmath.log(lp_monomial_norm(flat, 0, n, p, ctx)) for p in (2, 3, 4))
    assert l3 <= l2 / 3 + 2 * l4 / 3 + 1e-25


@pytest.mark.parametrize("n", [1, 16, 300])
def test_holder_equality_and_inequality(n, ctx, flat):
    assert abs(lower_bound(flat, n, 2, ctx) - 1) <= 1e-20
    for p in ("3/2", 3, 6):
        assert lower_bound(flat, n, p, ctx) >= 1 - 1e-20


def test_duality(ctx, flat):
    assert duality_symmetry_check(flat, 4, 64, ctx)
    assert duality_symmetry_check(flat, 2, 64, ctx)
    assert duality_symmetry_check(flat, 3, 256, ctx)
    assert rel(lower_bound(flat, 256, 3, ctx), lower_bound(flat, 256, "1.5", ctx)) <= 1e-15


def test_scan_validation(ctx, flat):
    with pytest.raises(ValueError):
        irregularity_scan(flat, 4, [], ctx)
    with pytest.raises(ValueError):
        irregularity_scan(flat, 4, [4, 2], ctx)
    with pytest.raises(ValueError):
        irregularity_scan(flat, 1, [4], ctx)


def test_verdict_rules():
    assert _verdict([1.2, 2, 6], 5, 0.01) is Verdict.UNBOUNDED_TREND
    assert _verdict([1.2, 2, 4], 5, 0.01) is Verdict.INCONCLUSIVE
    assert _verdict([1.4, 1.47, 1.472, 1.474], 5, 0.01) is Verdict.BOUNDED_PLATEAU
    assert _verdict([7, 6, 6.01, 6.02], 5, 0.01) is Verdict.BOUNDED_PLATEAU


def test_scan_p2_all_ones(ctx, flat):
    rep = irregularity_scan(flat, 2, [1, 4, 16], ctx)
    assert all(abs(R - 1) <= 1e-20 for R in rep.R_values)
    assert rep.holder_ok


def test_contrast_scan_plateaus(ctx):
    rep = irregularity_scan(WeightParams(), 4, [16, 64, 256, 1024, 4096], ctx, weight=PolynomialWeight(2))
    assert rep.verdict is Verdict.BOUNDED_PLATEAU
    assert rep.weight_label == "poly2" and rep.predicted_slope is None
    lines = rep.to_csv().splitlines()
    assert lines[0] == "n,R_n,log_R_n,sqrt_n" and len(lines) == 6
    assert rep.to_json()["verdict"] == "BOUNDED_PLATEAU"


def test_contrast_closed_form(ctx):
    # G(beta) = (2 pi)^2 / ((beta/2+1)(beta/2+2)(beta/2+3)) for (1 - r^2)^2
    mp = ctx.mp

    def G(beta):
        h = mp.mpf(beta) / 2
        return (2 * mp.pi) ** 2 / ((h + 1) * (h + 2) * (h + 3))

    n = 100
    want = G(4 * n) ** mp.mpf(0.25) * G(mp.mpf(4 * n) / 3) ** mp.mpf(0.75) / G(2 * n)
    assert rel(lower_bound(WeightParams(), n, 4, ctx, weight=PolynomialWeight(2)), want) <= 1e-28


def test_predicted_slope():
    assert math.isclose(predicted_slope(WeightParams(), 4),
                        math.sqrt(2) * (math.sqrt(2) - 0.5 - math.sqrt(3) / 2), rel_tol=1e-12)
    assert predicted_slope(WeightParams(0, 1, 2), 4) is None
    assert predicted_slope(WeightParams(), 2) == pytest.approx(0, abs=1e-15)
