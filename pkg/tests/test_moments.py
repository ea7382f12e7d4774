import json
import math
import random

import mpmath
import pytest

from hartogs_szego.errors import CacheIntegrityError, DivergenceRisk, TruncationFailure
from hartogs_szego.moments import (
    MomentStore,
    bergman_kernel_eval,
    boundary_monomial_norm_sq,
    inflation_consistency_check,
    moment,
    moment_quad,
    moment_table,
    szego_kernel_eval,
)
from hartogs_szego.precision import PrecCtx
from hartogs_szego.weights import PolynomialWeight, RadialWeightProfile, WeightParams, phi


def rel(a, b):
    return abs(a - b) / abs(b)


def r_form_oracle(params, j, beta, dps=45):
    """(2 pi)^2 int_0^1 r^(beta+1) w_j(r) dr with mpmath's own quadrature in r."""
    ctx = PrecCtx(256)
    prof = RadialWeightProfile(params, j)
    with mpmath.workdps(dps):
        val = mpmath.quad(lambda r: r ** (beta + 1) * mpmath.mpf(prof.evaluator_r(r, ctx)),
                          [0, 0.5, 0.9, 0.99, 1])
        return (2 * mpmath.pi) ** 2 * val


@pytest.mark.parametrize("beta", [0, 2, 7.5, 40])
def test_moment_matches_r_form(beta, ctx, flat):
    got = moment(flat, 0, beta, ctx)
    assert got > 0
    assert rel(got, r_form_oracle(flat, 0, beta)) <= 1e-20


def test_unit_weight_hook(ctx):
    mp = ctx.mp
    for n in [0, 1, 5, 50]:
        got = moment_quad(PolynomialWeight(0), 2 * n, ctx)[0]
        assert rel(got, (2 * mp.pi) ** 2 / (2 * n + 2)) <= 1e-28


@pytest.mark.parametrize("k,beta", [(2, 0), (2, 9), (3, 100), (1, 4096)])
def test_polynomial_weight_beta_function(k, beta, ctx):
    mp = ctx.mp
    exact = (2 * mp.pi) ** 2 * mp.beta(mp.mpf(beta) / 2 + 1, k + 1) / 2
    assert rel(moment_quad(PolynomialWeight(k), beta, ctx)[0], exact) <= 1e-28


def test_laplace_growth_of_moments(ctx, flat):
    for n in (1024, 4096):
        slope = -mpmath.log(moment(flat, 0, 2 * n, ctx)) / math.sqrt(n)
        assert abs(slope - 2) <= 0.15 * 2


def test_negative_beta_rejected(ctx, flat):
    with pytest.raises(ValueError):
        moment(flat, 0, -1, ctx)


@pytest.mark.parametrize("bits", range(128, 513, 32))
def test_moments_at_every_precision(bits, flat):
    # regression: the level-0 walk must always reach a negligible node
    ctx = PrecCtx(bits, 1e-24)
    for n in (0, 1, 2):
        assert rel(moment(flat, 0, 2 * n, ctx), moment(flat, 0, 2 * n, PrecCtx(512, 1e-40))) <= 1e-24


@pytest.fixture(scope="module")
def tables():
    ctx = PrecCtx()
    p = WeightParams()
    return moment_table(p, 0, 16, ctx), moment_table(p, 1, 16, ctx)


@pytest.fixture(scope="module")
def long_table():
    return MomentStore(WeightParams(), PrecCtx(128, 1e-24)).table(0, 80)


def test_table_shape_and_convexity(tables):
    t0, t1 = tables
    assert len(t0) == 17 and t0.n_max == 16
    assert all(m > 0 for m in t0.entries)
    assert t0.log_convexity_defects() == [] and t1.log_convexity_defects() == []
    ratios = t0.ratios()
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))
    assert all(r < 1 for r in ratios)
    assert all(b < a for a, b in zip(t0.entries, t1.entries))


def test_table_single_entry(fast_ctx, flat):
    t = moment_table(flat, 0, 0, fast_ctx)
    assert len(t) == 1


def test_csv_export(tables):
    lines = tables[0].to_csv().splitlines()
    assert lines[0] == "n,m,err_bound"
    assert len(lines) == 18


def test_cache_round_trip_and_integrity(tmp_path, fast_ctx, flat):
    store = MomentStore(flat, fast_ctx, tmp_path / "cache")
    t = store.table(0, 5)
    files = list((tmp_path / "cache").glob("moments-*.json"))
    assert len(files) == 1
    again = MomentStore(flat, fast_ctx, tmp_path / "cache").table(0, 5)
    assert all(rel(a, b) <= 1e-30 for a, b in zip(t.entries, again.entries))
    # a different precision must not reuse the file
    MomentStore(flat, PrecCtx(160, 1e-24), tmp_path / "cache").table(0, 2)
    assert len(list((tmp_path / "cache").glob("moments-*.json"))) == 2
    # extension keeps earlier entries
    longer = MomentStore(flat, fast_ctx, tmp_path / "cache").table(0, 7)
    assert longer.n_max == 7 and longer.entries[:6] == again.entries
    data = json.loads(files[0].read_text())
    data["entries"][2] = "1.0"
    files[0].write_text(json.dumps(data))
    with pytest.raises(CacheIntegrityError):
        MomentStore(flat, fast_ctx, tmp_path / "cache").table(0, 3)
    files[0].write_text("{not json")
    with pytest.raises(CacheIntegrityError):
        MomentStore(flat, fast_ctx, tmp_path / "cache").table(0, 3)


# ---------------------------------------------------------------- kernels


def test_kernel_at_origin(tables):
    t0 = tables[0]
    k = bergman_kernel_eval(t0, 0, 0.7 + 0.1j)
    assert k.value == 1 / t0[0] and k.tail_bound == 0


def test_kernel_hermitian(long_table):
    t0 = long_table
    mp = t0.ctx.mp
    rng = random.Random(7)
    for _ in range(10):
        z = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4))
        t = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4))
        a = bergman_kernel_eval(t0, z, t, 1e-12).value
        b = bergman_kernel_eval(t0, t, z, 1e-12).value
        assert a == mp.conj(b)


def test_kernel_errors(tables):
    t0 = tables[0]
    with pytest.raises(DivergenceRisk):
        bergman_kernel_eval(t0, 1, 1)
    with pytest.raises(TruncationFailure):
        bergman_kernel_eval(t0, 0.99, 0.99, 1e-30)


def test_tail_bound_is_honest(long_table):
    t0 = long_table
    prev = bergman_kernel_eval(t0, 0.5, 0.5j, 1e-6)
    for tol in [1e-7, 1e-8, 1e-10, 1e-12]:
        cur = bergman_kernel_eval(t0, 0.5, 0.5j, tol)
        assert abs(cur.value - prev.value) <= prev.tail_bound
        prev = cur


def test_reproducing_property(long_table):
    """2 pi * int B_0(z, t) t^5 w_0(|t|) dA(t) = z^5 (the weight of B_0 is 2 pi w_0)."""
    ctx = long_table.ctx
    params = WeightParams()
    table = long_table
    prof = RadialWeightProfile(params, 0)
    z = mpmath.mpc(0.3, 0.2)
    M = 32  # trapezoid in t's angle: aliases n = 5 + 32k, below 1e-15 here

    def radial(r):
        total = 0
        for i in range(M):
            t = r * mpmath.expjpi(mpmath.mpf(2 * i) / M)
            total += bergman_kernel_eval(table, z, t, 1e-16).value * t**5
        return 2 * mpmath.pi * total / M * mpmath.mpf(prof.evaluator_r(r, ctx)) * r

    with mpmath.workdps(30):
        val = 2 * mpmath.pi * mpmath.quad(radial, [0, 0.5, 0.9, 1])
    assert abs(val - z**5) <= 1e-10 * abs(z**5)


# ---------------------------------------------------------------- Szego


@pytest.fixture(scope="module")
def szego_store():
    return MomentStore(WeightParams(), PrecCtx(128, 1e-24))


def test_szego_reduces_to_b0(szego_store):
    p, ctx = WeightParams(), szego_store.ctx
    s = szego_kernel_eval(p, (0.3, 0), (0.2j, 0.1), 1e-15, ctx, szego_store)
    b = bergman_kernel_eval(szego_store.table(0, 16), 0.3, 0.2j, 1e-15)
    assert abs(s.value - b.value) <= 2e-15 * abs(b.value)


def test_szego_diagonal_positive_and_hermitian(szego_store):
    p, ctx = WeightParams(), szego_store.ctx
    rng = random.Random(11)
    for _ in range(10):
        r1, r2 = rng.uniform(0, 0.3), rng.uniform(0, 0.3)
        z = (r1 * mpmath.expjpi(rng.random()), 0.15 * float(phi(p, r1, ctx)) * mpmath.expjpi(rng.random()))
        t = (r2 * mpmath.expjpi(rng.random()), 0.15 * float(phi(p, r2, ctx)) * mpmath.expjpi(rng.random()))
        a = szego_kernel_eval(p, z, t, 1e-15, ctx, szego_store)
        b = szego_kernel_eval(p, t, z, 1e-15, ctx, szego_store)
        assert abs(a.value - ctx.mp.conj(b.value)) <= 1e-30 * abs(a.value)
        assert a.tail_bound >= 0
        d = szego_kernel_eval(p, z, z, 1e-15, ctx, szego_store).value
        assert d.real > 0 and abs(d.imag) <= 1e-25 * d.real


def test_szego_rejects_exterior(szego_store):
    p = WeightParams()
    with pytest.raises(DivergenceRisk):
        szego_kernel_eval(p, (0.3, 0.5), (0.1, 0.1), ctx=szego_store.ctx, store=szego_store)
    with pytest.raises(DivergenceRisk):
        szego_kernel_eval(p, (0.3, 0.1), (1.0, 0), ctx=szego_store.ctx, store=szego_store)


# ------------------------------------------------- boundary cross-checks


def test_boundary_norms(ctx, flat, tables):
    b00 = boundary_monomial_norm_sq(flat, 0, 0, ctx)
    assert b00 > 0
    vals = [boundary_monomial_norm_sq(flat, 3, j, ctx) for j in range(4)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert rel(boundary_monomial_norm_sq(flat, 7, 1, ctx), tables[1][7]) <= 1e-10


def test_consistency_small_grid(ctx, flat):
    rep = inflation_consistency_check(flat, [(0, 0), (3, 1), (8, 4)], ctx)
    assert rep.passed and len(rep.rows) == 3
    assert rep.as_dict()["verdict"] == "PASS"


def test_consistency_empty_grid(ctx, flat):
    rep = inflation_consistency_check(flat, [], ctx)
    assert rep.passed and rep.rows == []


def test_consistency_wrong_constant(ctx, flat):
    rep = inflation_consistency_check(flat, [(0, 0), (2, 1), (4, 2)], ctx, c_j=1)
    assert not any(r.passed for r in rep.rows)
    for r in rep.rows:
        assert rel(r.boundary / r.moment, 2 * ctx.mp.pi) <= 1e-20
