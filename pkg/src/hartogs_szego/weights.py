"""The defining function phi of the Hartogs domain and its radial weights.

For parameters (A, B, alpha) the domain is
``{(z1, z2): |z1| < 1, |z2| < phi(|z1|)}`` with
``phi(r) = (1 - r**2)**A * exp(-B / (1 - r**2)**alpha)``.

Every radial quantity has two evaluation routes: the r-form in terms of
``q = 1 - r**2`` and the s-form in terms of ``s = 1 / (1 - r**2)``.  The
s-form is used whenever ``q < 1/32``.

The gradient convention is ``|grad phi|**2 = phi'(r)**2 / 2`` (twice the
squared modulus of the complex derivative), the normalization under which
the boundary weight for (0, 1, 1) is
``nu(s) = exp(-s) * sqrt(1 - 2 exp(-2s) (s**3 - s**4))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

from .errors import ConfigError
from .precision import PrecCtx

__all__ = [
    "WeightParams",
    "RadialWeightProfile",
    "PolynomialWeight",
    "PseudoconvexityResult",
    "phi",
    "phi_s",
    "phi_prime",
    "grad_norm_sq",
    "grad_norm_sq_s",
    "weight",
    "laplacian_neg_log_phi",
    "laplacian_neg_log_phi_s",
    "pseudoconvexity_scan",
    "to_mpf",
]

DEFAULT_CTX = PrecCtx()
_S_SWITCH = 32  # use the s-form once 1 - r**2 < 1/32


def to_mpf(mp, x):
    """Convert ints, floats, Fractions, strings and mpfs to ``mp.mpf`` exactly."""
    if isinstance(x, Fraction):
        return mp.mpf(x.numerator) / x.denominator
    return mp.mpf(x)


@dataclass(frozen=True)
class WeightParams:
    """The triple (A, B, alpha) with A >= 0, B > 0, alpha > 0."""

    A: Real = 0
    B: Real = 1
    alpha: Real = 1

    def __post_init__(self):
        for name in ("A", "B", "alpha"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (Real, Fraction)):
                raise ConfigError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(float(value)):
                raise ConfigError(f"{name} must be finite")
        if self.A < 0:
            raise ConfigError(f"A must be >= 0, got {self.A}")
        if not self.B > 0:
            raise ConfigError(f"B must be > 0, got {self.B}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")

    def as_dict(self):
        return {"A": _plain(self.A), "B": _plain(self.B), "alpha": _plain(self.alpha)}

    def mp_values(self, mp):
        return to_mpf(mp, self.A), to_mpf(mp, self.B), to_mpf(mp, self.alpha)

    @property
    def label(self):
        return f"A={_plain(self.A)},B={_plain(self.B)},alpha={_plain(self.alpha)}"


def _plain(x):
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else str(x)
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


def _log1pexp(x: float) -> float:
    return x + math.log1p(math.exp(-x)) if x > 30 else math.log1p(math.exp(x))


def _one_minus_r2(mp, r):
    return (1 - r) * (1 + r)


# -------------------------------------------------------------------- phi


def phi_s(params: WeightParams, s, ctx: PrecCtx = DEFAULT_CTX):
    """phi as a function of s = 1/(1 - r**2), s >= 1."""
    mp = ctx.mp
    A, B, alpha = params.mp_values(mp)
    s = mp.mpf(s)
    return s ** (-A) * mp.exp(-B * s**alpha)


def phi(params: WeightParams, r, ctx: PrecCtx = DEFAULT_CTX):
    mp = ctx.mp
    r = mp.mpf(r)
    if not 0 <= r <= 1:
        raise ValueError("phi is defined for 0 <= r <= 1")
    if r == 1:
        return mp.zero
    q = _one_minus_r2(mp, r)
    if q * _S_SWITCH < 1:
        return phi_s(params, 1 / q, ctx)
    A, B, alpha = params.mp_values(mp)
    return q**A * mp.exp(-B / q**alpha)


def _log_derivative_s(mp, params, s):
    # d/ds log phi = -(A/s + B alpha s**(alpha-1))
    A, B, alpha = params.mp_values(mp)
    return -(A / s + B * alpha * s ** (alpha - 1))


def phi_prime(params: WeightParams, r, ctx: PrecCtx = DEFAULT_CTX):
    """d phi / dr, exact closed form."""
    mp = ctx.mp
    r = mp.mpf(r)
    if r >= 1:
        return mp.zero
    A, B, alpha = params.mp_values(mp)
    q = _one_minus_r2(mp, r)
    return -phi(params, r, ctx) * (2 * A * r / q + 2 * alpha * B * r * q ** (-alpha - 1))


def grad_norm_sq_s(params: WeightParams, s, ctx: PrecCtx = DEFAULT_CTX):
    """|grad phi|**2 in the s variable: 2 (d phi/ds)**2 s**3 (s - 1)."""
    mp = ctx.mp
    s = mp.mpf(s)
    dphi = phi_s(params, s, ctx) * _log_derivative_s(mp, params, s)
    return 2 * dphi**2 * s**3 * (s - 1)


def grad_norm_sq(params: WeightParams, r, ctx: PrecCtx = DEFAULT_CTX):
    mp = ctx.mp
    r = mp.mpf(r)
    if not 0 <= r < 1:
        raise ValueError("grad_norm_sq is defined for 0 <= r < 1")
    q = _one_minus_r2(mp, r)
    if q * _S_SWITCH < 1:
        return grad_norm_sq_s(params, 1 / q, ctx)
    return phi_prime(params, r, ctx) ** 2 / 2


# ------------------------------------------------------------- weights


@dataclass(frozen=True)
class RadialWeightProfile:
    """``phi**phi_power * sqrt(1 + |grad phi|**2)``; ``phi_power`` defaults to 2j+1.

    The Hardy-space inflation uses the power 2j+1 for the j-th weighted
    Bergman space; the boundary slice integrals of the Szego projection use
    j+1, which is why the power is a separate field.
    """

    params: WeightParams
    j: int = 0
    phi_power: int | None = None

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 0:
            raise ConfigError("inflation index j must be a nonnegative integer")
        if self.phi_power is None:
            object.__setattr__(self, "phi_power", 2 * self.j + 1)
        if self.phi_power <= 0:
            raise ConfigError("phi_power must be positive")

    kind = "flat"

    def evaluator_s(self, s, ctx: PrecCtx = DEFAULT_CTX):
        mp = ctx.mp
        s = mp.mpf(s)
        if mp.isinf(s):
            return mp.zero
        p = phi_s(self.params, s, ctx)
        dlog = _log_derivative_s(mp, self.params, s)
        grad2 = 2 * (p * dlog) ** 2 * s**3 * (s - 1)
        return p**self.phi_power * mp.sqrt(1 + grad2)

    def evaluator_r(self, r, ctx: PrecCtx = DEFAULT_CTX):
        mp = ctx.mp
        r = mp.mpf(r)
        if r >= 1:
            return mp.zero
        q = _one_minus_r2(mp, r)
        if q * _S_SWITCH < 1:
            return self.evaluator_s(1 / q, ctx)
        return phi(self.params, r, ctx) ** self.phi_power * mp.sqrt(1 + grad_norm_sq(self.params, r, ctx))

    def log_s(self, s: float) -> float:
        """Double-precision log of the weight; only used to locate peaks."""
        A, B, alpha = float(self.params.A), float(self.params.B), float(self.params.alpha)
        logphi = -A * math.log(s) - B * s**alpha
        if s <= 1:
            return self.phi_power * logphi
        dlog = A / s + B * alpha * s ** (alpha - 1)
        log_grad2 = math.log(2 * dlog**2) + 2 * logphi + 3 * math.log(s) + math.log(s - 1)
        return self.phi_power * logphi + 0.5 * _log1pexp(log_grad2)

    @property
    def key(self):
        return {"kind": "flat", **self.params.as_dict(), "j": self.j, "phi_power": self.phi_power}


@dataclass(frozen=True)
class PolynomialWeight:
    """``(1 - r**2)**k``: a Bekolle-Bonami regular comparison weight (k=0 gives 1)."""

    k: int = 2

    kind = "poly"

    def evaluator_s(self, s, ctx: PrecCtx = DEFAULT_CTX):
        mp = ctx.mp
        s = mp.mpf(s)
        if mp.isinf(s):
            return mp.one if self.k == 0 else mp.zero
        return s ** (-self.k)

    def evaluator_r(self, r, ctx: PrecCtx = DEFAULT_CTX):
        mp = ctx.mp
        r = mp.mpf(r)
        return _one_minus_r2(mp, r) ** self.k

    def log_s(self, s: float) -> float:
        return -self.k * math.log(s)

    @property
    def key(self):
        return {"kind": "poly", "k": self.k}


def weight(params: WeightParams, j: int) -> RadialWeightProfile:
    """The radial weight of the j-th inflated Bergman space (up to its constant)."""
    return RadialWeightProfile(params, j)


# ------------------------------------------------------- pseudoconvexity


def laplacian_neg_log_phi_s(params: WeightParams, s, ctx: PrecCtx = DEFAULT_CTX):
    mp = ctx.mp
    A, B, alpha = params.mp_values(mp)
    s = mp.mpf(s)
    r2 = 1 - 1 / s
    return (
        4 * A * s
        + 4 * A * r2 * s**2
        + 4 * alpha * B * s ** (alpha + 1)
        + 4 * alpha * (alpha + 1) * B * r2 * s ** (alpha + 2)
    )


def laplacian_neg_log_phi(params: WeightParams, r, ctx: PrecCtx = DEFAULT_CTX):
    """Radial Laplacian u'' + u'/r of u = -log phi; 2 u''(0) at the center."""
    mp = ctx.mp
    r = mp.mpf(r)
    if not 0 <= r < 1:
        raise ValueError("laplacian_neg_log_phi is defined for 0 <= r < 1")
    q = _one_minus_r2(mp, r)
    if q * _S_SWITCH < 1:
        return laplacian_neg_log_phi_s(params, 1 / q, ctx)
    A, B, alpha = params.mp_values(mp)
    # u = -A log q + B q**-alpha with q = 1 - r**2
    d1 = 2 * A * r / q + 2 * alpha * B * r * q ** (-alpha - 1)
    d2 = (
        2 * A / q
        + 4 * A * r**2 / q**2
        + 2 * alpha * B * q ** (-alpha - 1)
        + 4 * alpha * (alpha + 1) * B * r**2 * q ** (-alpha - 2)
    )
    if r == 0:
        return 2 * d2
    return d2 + d1 / r


@dataclass(frozen=True)
class PseudoconvexityResult:
    params: WeightParams
    grid_size: int
    min_value: object
    argmin_r: object
    argmin_s: object
    tolerance: float
    passed: bool

    def as_dict(self):
        import mpmath

        return {
            "params": self.params.as_dict(),
            "grid_size": self.grid_size,
            "min_laplacian": mpmath.nstr(self.min_value, 30),
            "argmin_r": mpmath.nstr(self.argmin_r, 30),
            "argmin_s": mpmath.nstr(self.argmin_s, 30),
            "tolerance": self.tolerance,
            "verdict": "PASS" if self.passed else "FAIL",
        }


def pseudoconvexity_scan(
    params: WeightParams,
    grid_size: int = 10_000,
    ctx: PrecCtx = DEFAULT_CTX,
    tolerance: float = 1e-25,
    s_cap: float = 1e8,
) -> PseudoconvexityResult:
    """Minimum of Laplacian(-log phi) on a grid refined toward r = 1.

    Half of the points are uniform in r on [0, r(s=32)); the other half are
    log-uniform in s on [32, s_cap], so the grid reaches 1 - r ~ 1/(2 s_cap).
    """
    if grid_size < 2:
        raise ConfigError("grid_size must be >= 2")
    mp = ctx.mp
    n_inner = grid_size // 2
    n_outer = grid_size - n_inner
    r_switch = mp.sqrt(1 - mp.mpf(1) / _S_SWITCH)
    best = None
    for i in range(n_inner):
        r = r_switch * i / n_inner
        val = laplacian_neg_log_phi(params, r, ctx)
        if best is None or val < best[0]:
            best = (val, r, 1 / _one_minus_r2(mp, r))
    log_lo, log_hi = mp.log(_S_SWITCH), mp.log(mp.mpf(s_cap))
    for i in range(n_outer):
        s = mp.exp(log_lo + (log_hi - log_lo) * i / max(n_outer - 1, 1))
        val = laplacian_neg_log_phi_s(params, s, ctx)
        if best is None or val < best[0]:
            best = (val, mp.sqrt(1 - 1 / s), s)
    value, r_min, s_min = best
    return PseudoconvexityResult(params, grid_size, value, r_min, s_min, tolerance, bool(value >= -tolerance))
