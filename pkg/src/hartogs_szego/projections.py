"""Weighted Bergman and Szego projections on finite expansions, the lift
identities behind the reduction of the Szego projection to the weighted
Bergman projection B_0, and lower bounds for the L^p norm of B_0.

For radial weights the n-th Fourier-mode projection

    P_n f = <f, z**n> / ||z**n||_2**2 * z**n

is an L^p contraction of B_0 (rotation averaging), and its norm is

    R_n(p) = ||z**n||_p ||z**n||_p' / ||z**n||_2**2 <= ||B_0||_{p -> p}.

For exponentially flat weights R_n(p) grows like exp(c_p sqrt(n)) when
p != 2, so no finite operator norm exists.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .errors import TableUnderflow
from .moments import MomentStore, MomentTable, moment_quad
from .precision import PrecCtx, integrate_finite, integrate_semi_infinite
from .weights import DEFAULT_CTX, RadialWeightProfile, WeightParams, grad_norm_sq, phi, to_mpf

__all__ = [
    "MonomialExpansion",
    "BoundaryFunction",
    "SzegoProjection",
    "Verdict",
    "IrregularityReport",
    "LiftNormResult",
    "LiftProjectionReport",
    "bergman_project",
    "szego_project",
    "lift",
    "lift_norm_identity",
    "lift_projection_identity",
    "lp_monomial_norm",
    "lower_bound",
    "irregularity_scan",
    "duality_symmetry_check",
    "predicted_slope",
    "as_exponent",
]


def as_exponent(p) -> Fraction:
    """Exact rational exponent from an int, Fraction, decimal string or 'a/b' string."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        return Fraction(p)
    return Fraction(str(p).strip())


def conjugate_exponent(p) -> Fraction:
    p = as_exponent(p)
    if p <= 1:
        raise ValueError("exponent must exceed 1")
    return p / (p - 1)


# ------------------------------------------------------------ expansions


class MonomialExpansion:
    """``sum coeff * z**a * conj(z)**b`` on the disc, keyed by (a, b)."""

    def __init__(self, terms=None):
        self.terms: dict[tuple[int, int], object] = {}
        for (a, b), c in (terms or {}).items():
            self.add(a, b, c)

    @classmethod
    def from_triples(cls, triples):
        """Build from ``(a, b, coeff)`` triples."""
        out = cls()
        for a, b, c in triples:
            out.add(a, b, c)
        return out

    def add(self, a: int, b: int, c):
        if a < 0 or b < 0:
            raise ValueError("exponents must be nonnegative")
        key = (int(a), int(b))
        self.terms[key] = self.terms.get(key, 0) + c
        return self

    @property
    def is_holomorphic(self):
        return all(b == 0 for (_, b), c in self.terms.items() if c != 0)

    def coefficient(self, a, b=0):
        return self.terms.get((a, b), 0)

    def max_degree(self):
        return max((a + b for a, b in self.terms), default=0)

    def max_frequency(self):
        return max((abs(a - b) for a, b in self.terms), default=0)

    def __call__(self, z, mp=mpmath.mp):
        z = mp.mpc(z)
        zc = mp.conj(z)
        return mp.fsum(mp.mpc(c) * z**a * zc**b for (a, b), c in self.terms.items())

    def nonzero(self, tol=0):
        return {k: c for k, c in self.terms.items() if abs(c) > tol}

    def __repr__(self):
        parts = [f"({c})*z^{a}*zbar^{b}" for (a, b), c in sorted(self.terms.items())]
        return "MonomialExpansion(" + " + ".join(parts) + ")"


class BoundaryFunction:
    """``sum coeff * exp(i k theta) * z1**a * conj(z1)**b`` on the boundary.

    The boundary is parametrized by ``z2 = exp(i theta) * phi(|z1|)``.
    """

    def __init__(self, terms=None):
        self.terms: dict[tuple[int, int, int], object] = {}
        for (k, a, b), c in (terms or {}).items():
            self.add(k, a, b, c)

    def add(self, k: int, a: int, b: int, c):
        if a < 0 or b < 0:
            raise ValueError("exponents must be nonnegative")
        key = (int(k), int(a), int(b))
        self.terms[key] = self.terms.get(key, 0) + c
        return self


def lift(f: MonomialExpansion) -> BoundaryFunction:
    """``F(z1, z2) = f(z1)``: every term sits in the k = 0 Fourier slice."""
    return BoundaryFunction({(0, a, b): c for (a, b), c in f.terms.items()})


# ------------------------------------------------------------ projections


def _entry(table: MomentTable, n: int):
    if n > table.n_max:
        raise TableUnderflow(f"moment m[{table.j}, {n}] needed but table stops at n={table.n_max}")
    return table[n]


def bergman_project(params: WeightParams, j: int, f: MonomialExpansion,
                    table: MomentTable) -> MonomialExpansion:
    """Closed-form weighted Bergman projection ``B_j`` of a finite expansion.

    ``z**a conj(z)**b`` maps to ``(m[j, a] / m[j, a-b]) z**(a-b)`` for
    ``a >= b`` and to 0 otherwise (only the diagonal term ``n = a - b`` of the
    kernel survives the angular integral).
    """
    if table.j != j:
        raise ValueError(f"table is for j={table.j}, not j={j}")
    out = MonomialExpansion()
    for (a, b), c in f.terms.items():
        if a < b:
            continue
        if b == 0:
            out.add(a, 0, c)
            continue
        out.add(a - b, 0, c * _entry(table, a) / _entry(table, a - b))
    return out


class SzegoProjection(dict):
    """``{j: holomorphic expansion in z1}``, meaning ``sum_j z2**j * expansion_j(z1)``."""

    def z2_dependence(self):
        """Largest coefficient modulus in any slot j >= 1."""
        vals = [abs(c) for j, e in self.items() if j >= 1 for c in e.terms.values()]
        return max(vals, default=0)

    def __call__(self, z1, z2, mp=mpmath.mp):
        z2 = mp.mpc(z2)
        return mp.fsum(z2**j * e(z1, mp) for j, e in self.items())


@functools.lru_cache(maxsize=4096)
def _slice_moment(params, k, a, ctx):
    weight = RadialWeightProfile(params, k, phi_power=k + 1)
    return moment_quad(weight, 2 * a, ctx)[0]


def szego_project(params: WeightParams, F: BoundaryFunction, store: MomentStore,
                  ctx: PrecCtx = DEFAULT_CTX) -> SzegoProjection:
    """Szego projection of a boundary function, slice by slice.

    The theta-integral against ``conj(t2)**j = exp(-i j theta) phi**j`` keeps
    only the ``k = j`` slice; with the surface factor ``phi sqrt(1+|grad phi|**2)``
    the term ``exp(i k theta) t**a conj(t)**b`` (a >= b) maps to
    ``z2**k * G_k(2a) / m[k, a-b] * z1**(a-b)`` where
    ``G_k(beta) = (2 pi)**2 int r**(beta+1) phi**(k+1) sqrt(1+|grad phi|**2) dr``.
    Negative frequencies are annihilated.
    """
    out = SzegoProjection()
    for (k, a, b), c in F.terms.items():
        if k < 0 or a < b:
            continue
        table = store.table(k, a - b)
        numer = _slice_moment(params, k, a, ctx)
        out.setdefault(k, MonomialExpansion()).add(a - b, 0, c * numer / _entry(table, a - b))
    return out


# ------------------------------------------------------------ lift identities


@dataclass(frozen=True)
class LiftNormResult:
    p: Fraction
    boundary_side: object
    disc_side: object
    rel_diff: object


def _angular_average(f: MonomialExpansion, r, p, mp, points: int):
    """Trapezoid mean of |f(r e^{i theta})|**p; exact for even p with enough points."""
    total = mp.zero
    for i in range(points):
        z = r * mp.expjpi(mp.mpf(2 * i) / points)
        total += abs(f(z, mp)) ** p
    return total / points


def _expand_abs_power(f: MonomialExpansion, half_p: int, mp) -> dict:
    """Diagonal part ``{a: c_aa}`` of ``(f * conj f)**half_p``."""
    base: dict[tuple[int, int], object] = {}
    for (a, b), c in f.terms.items():
        for (a2, b2), c2 in f.terms.items():
            # z^a zbar^b * conj(z^a2 zbar^b2)
            key = (a + b2, b + a2)
            base[key] = base.get(key, 0) + mp.mpc(c) * mp.conj(mp.mpc(c2))
    acc: dict[tuple[int, int], object] = {(0, 0): 1}
    for _ in range(half_p):
        nxt: dict[tuple[int, int], object] = {}
        for (a, b), c in acc.items():
            for (a2, b2), c2 in base.items():
                key = (a + a2, b + b2)
                nxt[key] = nxt.get(key, 0) + c * c2
        acc = nxt
    return {a: c for (a, b), c in acc.items() if a == b}


def lift_norm_identity(params: WeightParams, f: MonomialExpansion, p,
                       ctx: PrecCtx = DEFAULT_CTX) -> LiftNormResult:
    """Both sides of ``||F||_{L^p(bOmega)}**p = 2 pi ||f||**p_{L^p(disc, mu_0)}``.

    ``mu_0 = phi sqrt(1 + |grad phi|**2)`` (no constant).  The boundary side
    integrates the parametrized surface measure in r with trapezoid rules in
    both angles; the disc side expands ``|f|**p`` into monomials for even p
    and uses s-coordinate moments, otherwise it integrates in s with the same
    angular rule, so for odd or fractional p the angular discretization error
    (from the kinks of |f|**p at zeros of f) is common to both sides.
    """
    mp = ctx.mp
    p = as_exponent(p)
    p_mp = to_mpf(mp, p)
    deg = max(f.max_degree(), 1)
    even = p.denominator == 1 and p % 2 == 0
    points = 4 * math.ceil(p) * (deg + 1) if even else max(32, 4 * math.ceil(p) * (deg + 1))

    def boundary_radial(r):
        if r >= 1:
            return mp.zero
        surface = phi(params, r, ctx) * mp.sqrt(1 + grad_norm_sq(params, r, ctx))
        inner = _angular_average(f, r, p_mp, mp, points) * 2 * mp.pi
        outer = 2 * mp.pi  # theta integral of a theta-independent integrand
        return outer * inner * surface * r

    lhs = integrate_finite(boundary_radial, 0, 1, ctx).value

    w0 = RadialWeightProfile(params, 0)
    if even:
        diag = _expand_abs_power(f, int(p) // 2, mp)
        # moment_quad carries (2 pi)**2: one factor is the angular integral,
        # the other the 2 pi in front of the disc norm
        rhs = mp.fsum(c.real * moment_quad(w0, 2 * a, ctx)[0] for a, c in diag.items())
    else:
        def disc_s(s):
            r = mp.sqrt(1 - 1 / s)
            return _angular_average(f, r, p_mp, mp, points) * w0.evaluator_s(s, ctx) / (2 * s * s)

        rhs = 2 * mp.pi * 2 * mp.pi * integrate_semi_infinite(disc_s, 1, ctx).value
    rel = abs(lhs - rhs) / abs(rhs)
    return LiftNormResult(p, lhs, rhs, rel)


@dataclass
class LiftProjectionReport:
    coefficient_rel_err: object
    z2_dependence: object
    szego_side: SzegoProjection
    bergman_side: MonomialExpansion
    tolerance: float = 1e-10
    convention_note: str = (
        "Stated with the constant 2*pi in front of B_0 f; weighted Bergman projections are "
        "invariant under constant rescaling of the weight, so the coefficientwise comparison "
        "is independent of the normalizing constants c_j."
    )

    @property
    def passed(self):
        return self.coefficient_rel_err <= self.tolerance and self.z2_dependence <= 1e-20


def lift_projection_identity(params: WeightParams, f: MonomialExpansion, store: MomentStore,
                             ctx: PrecCtx = DEFAULT_CTX, tolerance=1e-10) -> LiftProjectionReport:
    """Compare the Szego projection of the lift of f with ``B_0 f``."""
    mp = ctx.mp
    n_need = max((a for a, b in f.terms), default=0)
    table = store.table(0, n_need)
    via_szego = szego_project(params, lift(f), store, ctx)
    via_bergman = bergman_project(params, 0, f, table)
    left = via_szego.get(0, MonomialExpansion())
    keys = set(left.terms) | set(via_bergman.terms)
    worst = mp.zero
    for key in keys:
        x, y = mp.mpc(left.terms.get(key, 0)), mp.mpc(via_bergman.terms.get(key, 0))
        scale = max(abs(x), abs(y))
        if scale:
            worst = max(worst, abs(x - y) / scale)
    return LiftProjectionReport(worst, mp.mpf(via_szego.z2_dependence()), via_szego, via_bergman,
                                tolerance)


# ------------------------------------------------------------ lower bounds


@functools.lru_cache(maxsize=4096)
def _moment_cached(weight, beta: Fraction, ctx: PrecCtx):
    return moment_quad(weight, beta, ctx)[0]


def _moment(weight, beta, ctx, cached=True):
    beta = Fraction(beta)
    return _moment_cached(weight, beta, ctx) if cached else moment_quad(weight, beta, ctx)[0]


def lp_monomial_norm(params: WeightParams, j: int, n: int, p, ctx: PrecCtx = DEFAULT_CTX, *,
                     weight=None, cached=True):
    """``||z**n||_{L^p(disc, 2 pi w_j)} = (m-type moment at beta = n p)**(1/p)``."""
    mp = ctx.mp
    p = as_exponent(p)
    if p < 1 or n < 0:
        raise ValueError("need p >= 1 and n >= 0")
    weight = weight or RadialWeightProfile(params, j)
    return _moment(weight, n * p, ctx, cached) ** (1 / to_mpf(mp, p))


def lower_bound(params: WeightParams, n: int, p, ctx: PrecCtx = DEFAULT_CTX, *, weight=None,
                cached=True):
    """``R_n(p) = ||z**n||_p ||z**n||_p' / ||z**n||_2**2`` for the weight of B_0.

    Moments are memoized per (weight, beta, precision) so scans at p and p'
    share their integrals; ``cached=False`` recomputes everything.
    """
    p = as_exponent(p)
    q = conjugate_exponent(p)
    weight = weight or RadialWeightProfile(params, 0)
    a = lp_monomial_norm(params, 0, n, p, ctx, weight=weight, cached=cached)
    b = lp_monomial_norm(params, 0, n, q, ctx, weight=weight, cached=cached)
    m = _moment(weight, 2 * n, ctx, cached)
    return a * b / m


def predicted_slope(params: WeightParams, p):
    """Laplace-method growth rate of log R_n(p) per sqrt(n) (alpha = 1 only).

    For w_0 ~ s**-A exp(-B s) the moment integrand in s is dominated by
    ``exp(-B s - beta/(2s))``, so ``log G(beta) ~ -sqrt(2 B beta)``; with
    ``beta = n p``, ``n p'`` and ``2n`` this gives
    ``sqrt(2B) (sqrt(2) - p**-1/2 - p'**-1/2)``.  For alpha != 1 the growth is
    in a different power of n and None is returned.
    """
    if params.alpha != 1:
        return None
    p = as_exponent(p)
    q = conjugate_exponent(p)
    return math.sqrt(2 * float(params.B)) * (math.sqrt(2) - float(p) ** -0.5 - float(q) ** -0.5)


class Verdict(str, enum.Enum):
    UNBOUNDED_TREND = "UNBOUNDED_TREND"
    INCONCLUSIVE = "INCONCLUSIVE"
    BOUNDED_PLATEAU = "BOUNDED_PLATEAU"


@dataclass
class IrregularityReport:
    p: Fraction
    n_list: list
    R_values: list
    fitted_slope: float
    final_ratio: float
    predicted_slope: float | None
    verdict: Verdict
    weight_label: str = "flat"
    holder_ok: bool = True

    @property
    def p_conjugate(self):
        return conjugate_exponent(self.p)

    def rows(self):
        for n, R in zip(self.n_list, self.R_values):
            yield n, R, mpmath.log(R), math.sqrt(n)

    def to_json(self, digits=30):
        return {
            "p": str(self.p),
            "p_conjugate": str(self.p_conjugate),
            "weight": self.weight_label,
            "n": list(self.n_list),
            "R_n": [mpmath.nstr(R, digits) for R in self.R_values],
            "log_R_n": [mpmath.nstr(mpmath.log(R), 20) for R in self.R_values],
            "fitted_slope": self.fitted_slope,
            "final_log_R_over_sqrt_n": self.final_ratio,
            "predicted_slope": self.predicted_slope,
            "holder_ok": self.holder_ok,
            "verdict": self.verdict.value,
        }

    def to_csv(self):
        lines = ["n,R_n,log_R_n,sqrt_n"]
        for n, R, logR, sq in self.rows():
            lines.append(f"{n},{mpmath.nstr(R, 30)},{mpmath.nstr(logR, 20)},{sq!r}")
        return "\n".join(lines) + "\n"


def _verdict(values, final_min, plateau_rel):
    increasing = all(b > a for a, b in zip(values, values[1:]))
    if len(values) >= 2 and increasing and values[-1] > final_min:
        return Verdict.UNBOUNDED_TREND
    last = values[-3:]
    if len(last) == 3 and (max(last) - min(last)) / min(last) < plateau_rel:
        return Verdict.BOUNDED_PLATEAU
    return Verdict.INCONCLUSIVE


def irregularity_scan(params: WeightParams, p, n_list, ctx: PrecCtx = DEFAULT_CTX, *,
                      weight=None, final_min=5.0, plateau_rel=0.01,
                      holder_tol=1e-20) -> IrregularityReport:
    """R_n(p) over ``n_list`` with a slope fit of log R_n against sqrt(n) and a verdict.

    ``UNBOUNDED_TREND``: strictly increasing and the last value above
    ``final_min``; ``BOUNDED_PLATEAU``: the last three values within
    ``plateau_rel`` of each other; otherwise ``INCONCLUSIVE``.
    """
    p = as_exponent(p)
    conjugate_exponent(p)
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list must not be empty")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly ascending")
    values = [lower_bound(params, n, p, ctx, weight=weight) for n in n_list]
    logs = np.array([float(mpmath.log(R)) for R in values])
    roots = np.sqrt(np.array(n_list, dtype=float))
    slope = float(np.polyfit(roots, logs, 1)[0]) if len(n_list) >= 2 else float("nan")
    final_ratio = float(logs[-1] / roots[-1]) if roots[-1] else float("nan")
    holder_ok = all(R >= 1 - holder_tol for R in values)
    label = "flat" if weight is None else getattr(weight, "kind", "custom")
    if weight is not None and getattr(weight, "kind", None) == "poly":
        label = f"poly{weight.k}"
    pred = predicted_slope(params, p) if weight is None else None
    return IrregularityReport(p, n_list, values, slope, final_ratio, pred,
                              _verdict(values, final_min, plateau_rel), label, holder_ok)


def duality_symmetry_check(params: WeightParams, p, n: int, ctx: PrecCtx = DEFAULT_CTX, *,
                           tol=1e-15, weight=None) -> bool:
    """``R_n(p) == R_n(p')`` to relative ``tol`` (two independent evaluations)."""
    p = as_exponent(p)
    a = lower_bound(params, n, p, ctx, weight=weight, cached=False)
    b = lower_bound(params, n, conjugate_exponent(p), ctx, weight=weight, cached=False)
    return bool(abs(a - b) <= tol * abs(a))
