"""Exact derivatives of the boundary weight nu(s) and a sign certificate.

With ``s = 1/(1 - r**2)`` the weight ``phi * sqrt(1 + |grad phi|**2)``
becomes

    nu(s) = s**-A * exp(-B s**alpha) * sqrt(R(s)),
    R(s)  = 1 + 2 E s**(1-2A) (A + B alpha s**alpha)**2 (s - 1),
    E     = exp(-2 B s**alpha).

For integer A >= 0, rational B > 0 and integer alpha >= 1 every derivative
has the closed form ``s**-A exp(-B s**alpha) N_n(s) R(s)**(1/2 - n)`` where
``N_n = sum_k E**k Q_k(s)`` with Laurent polynomials ``Q_k`` over the
rationals, generated by

    N_{n+1} = N_n' R + (1/2 - n) N_n R' + L N_n R,   L = -A/s - B alpha s**(alpha-1).

Everything here is exact ``Fraction`` arithmetic except the numeric
evaluation helpers.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import StructureViolation, ThresholdNotFound, UnsupportedParams
from .weights import WeightParams

__all__ = [
    "RatPoly",
    "ExpPolyElem",
    "RadicalExpr",
    "StructureReport",
    "TailCertificate",
    "OrderRecord",
    "DzCertificate",
    "nu_expr",
    "derivative",
    "nth_derivative",
    "verify_structure",
    "tail_sign_threshold",
    "limit_check",
    "numeric_sign_check",
    "dz_certify",
    "exp_neg_upper",
    "symbolic_params",
]

CHAIN_RULE_NOTE = (
    "Hypotheses are certified for nu(s) = mu_0(r) with s = 1/(1 - r^2). "
    "Vanishing of all derivatives at r = 1 and the eventual sign pattern "
    "(-1)^n on (a_n, 1) are transferred from s-space to r-space through "
    "the increasing substitution, with a_n = sqrt(1 - 1/s_n); the transfer "
    "itself is not machine-checked."
)


# ------------------------------------------------------------ polynomials


class RatPoly:
    """Laurent polynomial in s with rational coefficients (immutable)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=None):
        items = coeffs.items() if isinstance(coeffs, dict) else enumerate(coeffs or ())
        self.coeffs = {int(d): Fraction(c) for d, c in items if c != 0}

    @classmethod
    def const(cls, c):
        return cls({0: c})

    @classmethod
    def monomial(cls, d, c=1):
        return cls({d: c})

    def is_zero(self):
        return not self.coeffs

    def degree(self):
        return max(self.coeffs) if self.coeffs else None

    def low_degree(self):
        return min(self.coeffs) if self.coeffs else None

    def leading(self):
        return self.coeffs[self.degree()] if self.coeffs else Fraction(0)

    def is_constant(self):
        return not self.coeffs or set(self.coeffs) == {0}

    def __eq__(self, other):
        if not isinstance(other, RatPoly):
            other = RatPoly.const(other)
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(tuple(sorted(self.coeffs.items())))

    def __add__(self, other):
        if not isinstance(other, RatPoly):
            other = RatPoly.const(other)
        out = dict(self.coeffs)
        for d, c in other.coeffs.items():
            out[d] = out.get(d, 0) + c
        return RatPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return RatPoly({d: -c for d, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, RatPoly) else -Fraction(other))

    def __mul__(self, other):
        if not isinstance(other, RatPoly):
            other = Fraction(other)
            return RatPoly({d: c * other for d, c in self.coeffs.items()})
        out: dict[int, Fraction] = {}
        for d1, c1 in self.coeffs.items():
            for d2, c2 in other.coeffs.items():
                out[d1 + d2] = out.get(d1 + d2, 0) + c1 * c2
        return RatPoly(out)

    __rmul__ = __mul__

    def deriv(self):
        return RatPoly({d - 1: c * d for d, c in self.coeffs.items() if d != 0})

    def __call__(self, s):
        return sum((c * s**d for d, c in self.coeffs.items()), 0 * s)

    def abs_coeffs(self):
        return RatPoly({d: abs(c) for d, c in self.coeffs.items()})

    def interval(self, lo: Fraction, hi: Fraction):
        """Exact enclosure of the values on ``[lo, hi]`` with ``0 < lo``, monomial by monomial."""
        low = high = Fraction(0)
        for d, c in self.coeffs.items():
            a, b = c * lo**d, c * hi**d
            low += min(a, b)
            high += max(a, b)
        return low, high

    def shifted(self, origin):
        """Coefficients of ``p(origin + u)`` in u (ordinary polynomials only)."""
        if self.coeffs and self.low_degree() < 0:
            raise ValueError("shift requires a polynomial without negative powers")
        out: dict[int, Fraction] = {}
        for d, c in self.coeffs.items():
            for i in range(d + 1):
                out[i] = out.get(i, 0) + c * math.comb(d, i) * Fraction(origin) ** (d - i)
        return RatPoly(out)

    def to_json(self):
        return {str(d): f"{c.numerator}/{c.denominator}" for d, c in sorted(self.coeffs.items())}

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for d in sorted(self.coeffs, reverse=True):
            c = self.coeffs[d]
            parts.append(f"{c}" if d == 0 else f"{c}*s^{d}" if d != 1 else f"{c}*s")
        return " + ".join(parts).replace("+ -", "- ")


class ExpPolyElem:
    """``sum_k E**k Q_k(s)`` with ``E = exp(-2 B s**alpha)``."""

    __slots__ = ("terms", "B", "alpha")

    def __init__(self, terms, B=Fraction(1), alpha=1):
        self.B = Fraction(B)
        self.alpha = int(alpha)
        self.terms = {int(k): p for k, p in terms.items() if not p.is_zero()}

    def _same_ring(self, other):
        if (self.B, self.alpha) != (other.B, other.alpha):
            raise ValueError("elements of different exponential rings")

    def part(self, k) -> RatPoly:
        return self.terms.get(k, RatPoly())

    def __add__(self, other):
        self._same_ring(other)
        out = dict(self.terms)
        for k, p in other.terms.items():
            out[k] = out.get(k, RatPoly()) + p
        return ExpPolyElem(out, self.B, self.alpha)

    def __mul__(self, other):
        if isinstance(other, ExpPolyElem):
            self._same_ring(other)
            out: dict[int, RatPoly] = {}
            for k1, p1 in self.terms.items():
                for k2, p2 in other.terms.items():
                    out[k1 + k2] = out.get(k1 + k2, RatPoly()) + p1 * p2
            return ExpPolyElem(out, self.B, self.alpha)
        return ExpPolyElem({k: p * other for k, p in self.terms.items()}, self.B, self.alpha)

    __rmul__ = __mul__

    def __eq__(self, other):
        return (isinstance(other, ExpPolyElem) and (self.B, self.alpha) == (other.B, other.alpha)
                and self.terms == other.terms)

    def deriv(self):
        # d/ds E**k = -2 k B alpha s**(alpha-1) E**k
        rate = RatPoly.monomial(self.alpha - 1, -2 * self.B * self.alpha)
        out = {k: p.deriv() + rate * p * k for k, p in self.terms.items()}
        return ExpPolyElem(out, self.B, self.alpha)

    def evaluate(self, s, mp):
        E = mp.exp(-2 * _mpq(mp, self.B) * s**self.alpha)
        total = mp.zero
        for k, p in self.terms.items():
            total += E**k * _eval_poly(p, s, mp)
        return total

    def to_json(self):
        return {str(k): p.to_json() for k, p in sorted(self.terms.items())}


def _mpq(mp, q: Fraction):
    return mp.mpf(q.numerator) / q.denominator


def _eval_poly(p: RatPoly, s, mp):
    return mp.fsum(_mpq(mp, c) * s**d for d, c in p.coeffs.items())


# ------------------------------------------------------------ expressions


def symbolic_params(params: WeightParams):
    """Exact (A, B, alpha) if the triple lies in the supported ring, else raise."""
    try:
        A = Fraction(str(params.A)) if isinstance(params.A, float) else Fraction(params.A)
        B = Fraction(str(params.B)) if isinstance(params.B, float) else Fraction(params.B)
        alpha = Fraction(str(params.alpha)) if isinstance(params.alpha, float) else Fraction(params.alpha)
    except (TypeError, ValueError) as exc:
        raise UnsupportedParams(str(exc)) from exc
    if A.denominator != 1 or alpha.denominator != 1 or alpha < 1:
        raise UnsupportedParams(
            f"symbolic certification needs A a nonnegative integer, B rational and alpha a "
            f"positive integer (got A={params.A}, B={params.B}, alpha={params.alpha}); the ring "
            f"sum_k exp(-2kBs^alpha) * Laurent(s) is not closed under d/ds otherwise"
        )
    return int(A), B, int(alpha)


@dataclass(frozen=True)
class RadicalExpr:
    """``s**(-A) * exp(-rate * s**alpha) * numerator * radicand**(1/2 - half_exponent)``."""

    prefactor_rate: Fraction
    numerator: ExpPolyElem
    radicand: ExpPolyElem
    half_exponent: int
    prefactor_power: int = 0
    alpha: int = 1

    def log_derivative(self) -> RatPoly:
        """Derivative of the prefactor divided by the prefactor."""
        out = RatPoly.monomial(self.alpha - 1, -self.prefactor_rate * self.alpha)
        if self.prefactor_power:
            out = out + RatPoly.monomial(-1, self.prefactor_power)
        return out

    def evaluate(self, s, mp):
        return self.numeric(mp)(s)

    def numeric(self, mp):
        """A fast evaluator with the rational coefficients converted once."""
        rate = _mpq(mp, Fraction(self.prefactor_rate))
        half = mp.mpf(1) / 2 - self.half_exponent
        num = _compile(self.numerator, mp)
        rad = _compile(self.radicand, mp)
        power, alpha = self.prefactor_power, self.alpha

        def f(s):
            s = mp.mpf(s)
            sa = s**alpha
            return s**power * mp.exp(-rate * sa) * num(s, sa) * rad(s, sa) ** half

        return f


def _compile(elem: ExpPolyElem, mp):
    two_b = 2 * _mpq(mp, elem.B)
    parts = [(k, [(d, _mpq(mp, c)) for d, c in p.coeffs.items()]) for k, p in elem.terms.items()]

    def f(s, sa):
        E = mp.exp(-two_b * sa)
        return mp.fsum(E**k * mp.fsum(c * s**d for d, c in coeffs) for k, coeffs in parts)

    return f


def nu_expr(params: WeightParams = WeightParams()) -> RadicalExpr:
    """nu(s) itself: numerator 1, half exponent 0."""
    A, B, alpha = symbolic_params(params)
    inner = RatPoly({0: A}) + RatPoly.monomial(alpha, B * alpha)
    k1 = RatPoly.monomial(1 - 2 * A, 2) * inner * inner * RatPoly({1: 1, 0: -1})
    radicand = ExpPolyElem({0: RatPoly.const(1), 1: k1}, B, alpha)
    numerator = ExpPolyElem({0: RatPoly.const(1)}, B, alpha)
    return RadicalExpr(B, numerator, radicand, 0, -A, alpha)


def derivative(expr: RadicalExpr) -> RadicalExpr:
    N, R, n = expr.numerator, expr.radicand, expr.half_exponent
    L = ExpPolyElem({0: expr.log_derivative()}, R.B, R.alpha)
    new = N.deriv() * R + N * R.deriv() * (Fraction(1, 2) - n) + L * N * R
    return RadicalExpr(expr.prefactor_rate, new, R, n + 1, expr.prefactor_power, expr.alpha)


@functools.lru_cache(maxsize=32)
def _derivatives(A: int, B: Fraction, alpha: int, n: int):
    if n == 0:
        return nu_expr(WeightParams(A, B, alpha))
    return derivative(_derivatives(A, B, alpha, n - 1))


def nth_derivative(params: WeightParams, n: int, max_order: int = 8) -> RadicalExpr:
    if n < 0:
        raise ValueError("derivative order must be >= 0")
    if n > max_order:
        raise ValueError(f"order {n} exceeds the configured maximum {max_order}")
    A, B, alpha = symbolic_params(params)
    return _derivatives(A, B, alpha, n)


# --------------------------------------------------------------- structure


@dataclass(frozen=True)
class StructureReport:
    order: int
    leading_part: RatPoly
    expected_sign: int
    leading_is_constant: bool
    P: dict
    degrees: dict
    exp_step_note: str


def verify_structure(expr: RadicalExpr, n: int) -> StructureReport:
    """Check that the E**0 part of ``N_n`` has dominant term of sign (-1)**n.

    For alpha = 1 and A = 0 the E**0 part must be exactly the constant
    ``(-B)**n``; in general its top monomial must be
    ``(-B alpha)**n * s**(n (alpha - 1))``.  The E**k parts for k >= 1 are
    returned as ``P[k]``.
    """
    q0 = expr.numerator.part(0)
    B, alpha = Fraction(expr.prefactor_rate), expr.alpha
    expected_top = (-B * alpha) ** n
    expected_deg = n * (alpha - 1)
    if q0.is_zero() or q0.degree() != expected_deg or q0.leading() != expected_top:
        raise StructureViolation(f"order {n}: E^0 part {q0!r} does not lead with {expected_top}*s^{expected_deg}")
    simple = expr.prefactor_power == 0 and alpha == 1
    if simple and not q0.is_constant():
        raise StructureViolation(f"order {n}: E^0 part {q0!r} is not constant")
    P = {k: p for k, p in sorted(expr.numerator.terms.items()) if k >= 1}
    return StructureReport(
        order=n,
        leading_part=q0,
        expected_sign=(-1) ** n,
        leading_is_constant=q0.is_constant(),
        P=P,
        degrees={k: p.degree() for k, p in P.items()},
        exp_step_note="exponential steps are exp(-2ks) (powers of the radicand's exponential), k = 1..%d" % max(P, default=0),
    )


# ------------------------------------------------------ exponential bounds


def _round_down(x: Fraction, bits: int = 160) -> Fraction:
    """Largest dyadic rational <= x with about ``bits`` significant bits (x > 0)."""
    shift = bits - (x.numerator.bit_length() - x.denominator.bit_length())
    if shift >= 0:
        return Fraction((x.numerator << shift) // x.denominator, 1 << shift)
    return Fraction((x.numerator // (x.denominator << -shift)) << -shift)


@functools.lru_cache(maxsize=4096)
def exp_neg_upper(x: Fraction) -> Fraction:
    """Rational ``U >= exp(-x)`` for rational ``x >= 0``.

    Uses ``exp(x) >= (1 + x/2**p)**(2**p)`` evaluated by repeated squaring
    with every intermediate rounded down, so the result is a rigorous lower
    bound for ``exp(x)`` and its reciprocal an upper bound for ``exp(-x)``.
    """
    x = Fraction(x)
    if x < 0:
        raise ValueError("exp_neg_upper needs x >= 0")
    if x == 0:
        return Fraction(1)
    p = 20
    y = _round_down(1 + x / (1 << p))
    for _ in range(p):
        y = _round_down(y * y)
    return 1 / y


# ------------------------------------------------------- tail threshold


@dataclass(frozen=True)
class TailCertificate:
    order: int
    s_n: Fraction
    monotone_from: Fraction
    critical_points: tuple
    cells_checked: int
    tail_margin: Fraction
    bad_cells: int


def _critical_points(expr: RadicalExpr, D: int):
    """Points beyond which every ``E**k s**(d - D)`` is decreasing."""
    B, alpha = Fraction(expr.prefactor_rate), expr.alpha
    pts = []
    for k, p in expr.numerator.terms.items():
        if k == 0:
            continue
        for d in p.coeffs:
            if d - D > 0:
                # 2 k B alpha s**alpha >= d - D
                pts.append(Fraction(d - D, 2 * k) / (B * alpha))
    return pts


def _root_upper(x: Fraction, alpha: int) -> Fraction:
    """A rational >= x**(1/alpha)."""
    if alpha == 1:
        return x
    guess = Fraction(math.ceil(float(x) ** (1.0 / alpha) + 1))
    while guess**alpha < x:
        guess += 1
    return guess


def _cell_ok(expr, sigma, lo: Fraction, hi: Fraction) -> bool:
    B, alpha = Fraction(expr.prefactor_rate), expr.alpha
    low0, high0 = expr.numerator.part(0).interval(lo, hi)
    lead = low0 if sigma > 0 else -high0
    if lead <= 0:
        return False
    rest = Fraction(0)
    for k, p in expr.numerator.terms.items():
        if k == 0:
            continue
        a, b = p.interval(lo, hi)
        rest += exp_neg_upper(2 * k * B * lo**alpha) * max(abs(a), abs(b))
        if rest >= lead:
            return False
    return rest < lead


def tail_sign_threshold(expr: RadicalExpr, n: int, *, cell=Fraction(1, 8), max_depth=3,
                        cap=2000) -> TailCertificate:
    """Rational ``s_n >= 1`` with ``(-1)**n * N_n(s) > 0`` for all ``s >= s_n``.

    Since the prefactor and the radicand are positive on ``s >= 1``, the sign
    of ``N_n`` is the sign of the n-th derivative.  Two regions are checked:

    * ``[S, inf)``: with ``D`` the top degree of the E**0 part, ``S`` beyond
      every critical point of the terms ``E**k s**(d-D)`` so all of them
      decrease, the inequality at ``S`` propagates to the whole half-line;
    * ``[1, S]``: cells of width ``cell`` (bisected up to ``max_depth``)
      with exact monomial enclosures and rational bounds on ``E``.

    Cells are visited from ``S`` downward; ``s_n`` is the right end of the
    first cell that cannot be certified (or 1 if none fails).
    """
    report = verify_structure(expr, n)
    sigma = report.expected_sign
    q0 = report.leading_part * sigma
    D = q0.degree()
    c_top = q0.leading()
    B, alpha = Fraction(expr.prefactor_rate), expr.alpha
    crit = _critical_points(expr, D)
    S = max([Fraction(1)] + [_root_upper(c, alpha) for c in crit])
    S = Fraction(math.ceil(S))
    margin = None
    while S <= cap:
        kappa = c_top - sum((abs(c) * S ** (d - D) for d, c in q0.coeffs.items() if d < D), Fraction(0))
        if kappa > 0:
            rest = Fraction(0)
            for k, p in expr.numerator.terms.items():
                if k == 0:
                    continue
                shifted = sum((abs(c) * S ** (d - D) for d, c in p.coeffs.items()), Fraction(0))
                rest += exp_neg_upper(2 * k * B * S**alpha) * shifted
            if rest < kappa:
                margin = kappa - rest
                break
        S += 1
    if margin is None:
        raise ThresholdNotFound(f"order {n}: no monotone tail start below {cap}")

    def certify(lo, hi, depth):
        if _cell_ok(expr, sigma, lo, hi):
            return True, 1
        if depth == 0:
            return False, 1
        mid = (lo + hi) / 2
        ok1, c1 = certify(lo, mid, depth - 1)
        ok2, c2 = certify(mid, hi, depth - 1)
        return ok1 and ok2, c1 + c2

    # Walk down from S; everything right of the first failing cell is certified.
    s_n = Fraction(1)
    cells = bad = 0
    hi = S
    while hi > 1:
        lo = max(hi - cell, Fraction(1))
        ok, count = certify(lo, hi, max_depth)
        cells += count
        if not ok:
            bad = 1
            s_n = hi
            break
        hi = lo
    return TailCertificate(n, s_n, S, tuple(sorted(set(crit))), cells, margin, bad)


# ------------------------------------------------------------------ limits


def limit_check(expr: RadicalExpr) -> bool:
    """Structural check that the expression tends to 0 as s -> infinity.

    A positive exponential rate in the prefactor dominates every Laurent
    polynomial, and the radicand tends to its E**0 part; that part must be
    the constant 1 for the radical factor to stay bounded.
    """
    radicand_ok = expr.radicand.part(0) == RatPoly.const(1)
    if not radicand_ok:
        return False
    if expr.prefactor_rate > 0:
        return True
    q0 = expr.numerator.part(0)
    top = q0.degree()
    return q0.is_zero() or (top < 0 and expr.prefactor_power <= 0) or (top + expr.prefactor_power < 0)


def numeric_sign_check(expr: RadicalExpr, n: int, s_n, *, points=1000, width=100, bits=128) -> bool:
    """Sign of ``(-1)**n`` times the derivative at ``points`` points in ``(s_n, s_n + width)``."""
    from .precision import PrecCtx

    mp = PrecCtx(bits, 1e-30).mp
    start = mp.mpf(Fraction(s_n).numerator) / Fraction(s_n).denominator
    sigma = (-1) ** n
    f = expr.numeric(mp)
    for i in range(1, points + 1):
        s = start + mp.mpf(width) * i / (points + 1)
        if sigma * f(s) < 0:
            return False
    return True


# ------------------------------------------------------------- certificate


@dataclass
class OrderRecord:
    order: int
    structure_ok: bool
    leading_part: RatPoly
    P: dict
    limit_zero_ok: bool
    s_n: Fraction
    sign_ok: bool
    numeric_sign_ok: bool
    tail: TailCertificate | None = None
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.structure_ok and self.limit_zero_ok and self.sign_ok and self.numeric_sign_ok

    def to_json(self):
        out = {
            "order": self.order,
            "structure_ok": self.structure_ok,
            "leading_part": self.leading_part.to_json(),
            "P": {str(k): p.to_json() for k, p in self.P.items()},
            "limit_zero_ok": self.limit_zero_ok,
            "s_n": f"{self.s_n.numerator}/{self.s_n.denominator}",
            "sign_ok": self.sign_ok,
            "numeric_sign_ok": self.numeric_sign_ok,
            "passed": self.passed,
        }
        if self.tail is not None:
            out["tail"] = {
                "monotone_from": str(self.tail.monotone_from),
                "critical_points": [str(c) for c in self.tail.critical_points],
                "cells_checked": self.tail.cells_checked,
                "uncertified_cells": self.tail.bad_cells,
            }
        if self.message:
            out["message"] = self.message
        return out


@dataclass
class DzCertificate:
    params: WeightParams
    max_order: int
    records: list = field(default_factory=list)
    chain_rule_note: str = CHAIN_RULE_NOTE
    radicand_nonnegative: bool = False

    @property
    def valid(self) -> bool:
        return self.radicand_nonnegative and len(self.records) == self.max_order + 1 and all(
            r.passed for r in self.records)

    def to_json(self):
        return {
            "params": self.params.as_dict(),
            "max_order": self.max_order,
            "valid": self.valid,
            "radicand_geq_1_on_s_geq_1": self.radicand_nonnegative,
            "chain_rule_note": self.chain_rule_note,
            "orders": [r.to_json() for r in self.records],
        }


def radicand_nonnegative(expr: RadicalExpr) -> bool:
    """``R >= 1`` on ``s >= 1``: every E**k part (k >= 1) has nonnegative coefficients in s = 1 + u."""
    R = expr.radicand
    if R.part(0) != RatPoly.const(1):
        return False
    for k, p in R.terms.items():
        if k == 0:
            continue
        low = p.low_degree()
        cleared = p * RatPoly.monomial(-low) if low < 0 else p
        if any(c < 0 for c in cleared.shifted(1).coeffs.values()):
            return False
    return True


def dz_certify(params: WeightParams = WeightParams(), max_order: int = 8, *,
               numeric_points: int = 1000) -> DzCertificate:
    """Run the derivative, structure, limit and tail-sign checks for n = 0..max_order."""
    symbolic_params(params)
    cert = DzCertificate(params, max_order)
    cert.radicand_nonnegative = radicand_nonnegative(nth_derivative(params, 0, max_order))
    for n in range(max_order + 1):
        expr = nth_derivative(params, n, max_order)
        try:
            report = verify_structure(expr, n)
        except StructureViolation as exc:
            cert.records.append(OrderRecord(n, False, expr.numerator.part(0), {}, False,
                                            Fraction(0), False, False, message=str(exc)))
            continue
        tail = tail_sign_threshold(expr, n)
        numeric_ok = numeric_sign_check(expr, n, tail.s_n, points=numeric_points) if numeric_points else True
        cert.records.append(OrderRecord(
            order=n,
            structure_ok=True,
            leading_part=report.leading_part,
            P=report.P,
            limit_zero_ok=limit_check(expr),
            s_n=tail.s_n,
            sign_ok=True,
            numeric_sign_ok=numeric_ok,
            tail=tail,
        ))
    return cert
