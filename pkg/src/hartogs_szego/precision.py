"""Extended-precision arithmetic contexts and double-exponential quadrature.

Both rules work on a ladder of step sizes ``h = 2**-level``.  Level 0 walks
outward from ``t = 0`` on each side until the summands become negligible
(or a hard cap derived from the working precision is hit, which signals a
non-integrable endpoint); finer levels only add the odd multiples of the
new step inside the same window.  The error estimate of a level is the
difference to the previous level.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath

from .errors import ConfigError, EvaluationFailure, NonConvergent

__all__ = [
    "PrecCtx",
    "QuadResult",
    "integrate_finite",
    "integrate_semi_infinite",
]

# Walk at least this far in t before trusting a negligible summand.
_MIN_T = 3


@functools.lru_cache(maxsize=None)
def _context(bits: int) -> mpmath.ctx_mp.MPContext:
    ctx = mpmath.MPContext()
    ctx.prec = bits
    return ctx


@dataclass(frozen=True)
class PrecCtx:
    """Working precision and tolerance for every extended-precision routine."""

    significand_bits: int = 256
    target_rel_err: float = 1e-30
    max_refinement_levels: int = 10

    def __post_init__(self):
        if int(self.significand_bits) != self.significand_bits or self.significand_bits < 128:
            raise ConfigError("significand_bits must be an integer >= 128")
        if not self.target_rel_err > 0:
            raise ConfigError("target_rel_err must be positive")
        if self.target_rel_err < 2.0 ** (3 - self.significand_bits):
            raise ConfigError(
                f"target_rel_err={self.target_rel_err:g} is not achievable with "
                f"{self.significand_bits} significand bits"
            )
        if int(self.max_refinement_levels) != self.max_refinement_levels or self.max_refinement_levels < 1:
            raise ConfigError("max_refinement_levels must be a positive integer")

    @property
    def mp(self) -> mpmath.ctx_mp.MPContext:
        """The mpmath context configured for this precision (shared, read-only)."""
        return _context(self.significand_bits)

    @property
    def eps(self):
        return self.mp.ldexp(1, -self.significand_bits)

    def mpf(self, x):
        return self.mp.mpf(x)

    def with_tolerance(self, target_rel_err: float) -> "PrecCtx":
        return PrecCtx(self.significand_bits, target_rel_err, self.max_refinement_levels)


@dataclass(frozen=True)
class QuadResult:
    value: object
    err_estimate: object
    levels_used: int
    trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.err_estimate < 0:
            raise ValueError("negative error estimate")


# --------------------------------------------------------------------------
# Node tables.  A node is (t, offset, weight) in the standard coordinates of
# the rule; the offset is measured from the endpoint the node approaches so
# that abscissae next to an endpoint keep full relative accuracy.
# --------------------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _tanh_sinh_nodes(bits: int, level: int, hard_t: float):
    """Nodes for t > 0 on [-1, 1]: (t, 1 - |x|, weight), new points of ``level`` only."""
    mp = _context(bits)
    h = mp.ldexp(1, -level)
    step = 1 if level == 0 else 2
    start = 1
    nodes = []
    k = start
    half_pi = mp.pi / 2
    while True:
        t = k * h
        if t > hard_t:
            break
        u = half_pi * mp.sinh(t)
        e = mp.exp(-2 * u)
        offset = 2 * e / (1 + e)
        weight = half_pi * mp.cosh(t) * 4 * e / (1 + e) ** 2
        nodes.append((float(t), offset, weight))
        k += step
    return tuple(nodes)


@functools.lru_cache(maxsize=64)
def _exp_sinh_nodes(bits: int, level: int, hard_t_left: float, hard_t_right: float):
    """Nodes x = exp(pi/2 sinh t) for t != 0, split by sign of t."""
    mp = _context(bits)
    h = mp.ldexp(1, -level)
    step = 1 if level == 0 else 2
    half_pi = mp.pi / 2
    right, left = [], []
    k = 1
    while k * h <= hard_t_right:
        t = k * h
        x = mp.exp(half_pi * mp.sinh(t))
        right.append((float(t), x, half_pi * mp.cosh(t) * x))
        k += step
    k = 1
    while k * h <= hard_t_left:
        t = -k * h
        x = mp.exp(half_pi * mp.sinh(t))
        left.append((float(-t), x, half_pi * mp.cosh(t) * x))
        k += step
    return tuple(right), tuple(left)


def _evaluate(f, x):
    try:
        y = f(x)
    except (ArithmeticError, ValueError) as exc:
        raise EvaluationFailure(f"integrand failed at x={mpmath.nstr(x, 20)}: {exc}") from exc
    if not mpmath.isfinite(y):
        raise EvaluationFailure(f"integrand is not finite at x={mpmath.nstr(x, 20)}")
    return y


class _Side:
    """Running state for one half-line of t: the window found at level 0."""

    def __init__(self):
        self.t_cut = None
        self.abs_total = 0


def _walk(f, nodes, to_x, side: _Side, eps, level: int):
    """Sum weight*f over ``nodes``; at level 0 also fix the truncation window."""
    total = 0
    for t, offset, weight in nodes:
        if side.t_cut is not None and t > side.t_cut:
            break
        term = weight * _evaluate(f, to_x(offset))
        total += term
        side.abs_total += abs(term)
        if level == 0 and side.t_cut is None and t >= _MIN_T:
            if abs(term) <= eps * side.abs_total:
                side.t_cut = t + 1
    if level == 0 and side.t_cut is None:
        raise NonConvergent(
            "integrand is not negligible at the hard cutoff; endpoint behavior is not integrable"
        )
    return total


def _refine(level_sum, ctx: PrecCtx, what: str) -> QuadResult:
    """Drive the level-doubling loop.  ``level_sum(level)`` returns the new-node sum."""
    mp = ctx.mp
    tol = mp.mpf(ctx.target_rel_err)
    raw = level_sum(0)
    h = mp.mpf(1)
    estimate = h * raw
    trace = []
    for level in range(1, ctx.max_refinement_levels + 1):
        h = h / 2
        raw += level_sum(level)
        new = h * raw
        err = abs(new - estimate)
        trace.append(err)
        estimate = new
        if level >= 3 and err <= tol * abs(estimate):
            return QuadResult(estimate, err, level, tuple(trace))
    raise NonConvergent(
        f"{what}: no convergence within {ctx.max_refinement_levels} levels "
        f"(last relative change {mpmath.nstr(trace[-1] / abs(estimate), 5) if estimate else 'inf'})"
    )


def _hard_t(bits: int, factor: float) -> float:
    # u = pi/2 sinh t with exp(-u) < 2**(-factor*bits/2); level 0 only samples
    # integer t, so one extra unit guarantees a node past that point
    return math.asinh(factor * bits * math.log(2) / math.pi) + 1


def integrate_finite(f: Callable, a, b, ctx: PrecCtx) -> QuadResult:
    """Tanh-sinh quadrature of ``f`` over ``[a, b]``.

    Abscissae next to either endpoint are formed as ``a + offset`` or
    ``b - offset`` with the offset computed directly, so integrable endpoint
    singularities are sampled with full relative accuracy.  Raises
    :class:`NonConvergent` for non-integrable endpoints or when refinement
    stalls, :class:`EvaluationFailure` when ``f`` raises.
    """
    mp = ctx.mp
    a, b = mp.mpf(a), mp.mpf(b)
    if not a < b:
        raise ValueError("integrate_finite requires a < b")
    half = (b - a) / 2
    mid = a + half
    eps = ctx.eps
    bits = ctx.significand_bits
    hard = _hard_t(bits, 4.0)
    left, right = _Side(), _Side()

    def level_sum(level):
        s = 0
        if level == 0:
            s += mp.pi / 2 * _evaluate(f, mid)
        nodes = _tanh_sinh_nodes(bits, level, hard)
        s += _walk(f, nodes, lambda o: b - half * o, right, eps, level)
        s += _walk(f, nodes, lambda o: a + half * o, left, eps, level)
        return half * s

    return _refine(level_sum, ctx, "integrate_finite")


def integrate_semi_infinite(f: Callable, a, ctx: PrecCtx, decay_rate=1) -> QuadResult:
    """Exp-sinh quadrature of ``f`` over ``[a, inf)``.

    ``decay_rate`` is the caller's lower bound on the exponential decay rate
    of ``f``; it sets the length scale of the substitution
    ``x = a + exp(pi/2 sinh t) / decay_rate``.
    """
    mp = ctx.mp
    a = mp.mpf(a)
    if not decay_rate > 0:
        raise ValueError("decay_rate must be positive")
    scale = 1 / mp.mpf(decay_rate)
    eps = ctx.eps
    bits = ctx.significand_bits
    hard_left = _hard_t(bits, 4.0)
    hard_right = _hard_t(bits, 4.0)
    left, right = _Side(), _Side()

    def level_sum(level):
        s = 0
        if level == 0:
            s += mp.pi / 2 * _evaluate(f, a + scale)
        r_nodes, l_nodes = _exp_sinh_nodes(bits, level, hard_left, hard_right)
        s += _walk(f, r_nodes, lambda x: a + scale * x, right, eps, level)
        s += _walk(f, l_nodes, lambda x: a + scale * x, left, eps, level)
        return scale * s

    return _refine(level_sum, ctx, "integrate_semi_infinite")
