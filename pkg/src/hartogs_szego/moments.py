"""Moments of the radial weights, weighted Bergman kernels and the Szego kernel.

The j-th weighted Bergman space in the inflation of the Hardy space carries
the weight ``c_j * w_j`` with ``w_j = phi**(2j+1) * sqrt(1 + |grad phi|**2)``
and ``c_j = 2*pi``.  Its monomials have squared norms

    m[j, n] = (2*pi)**2 * integral_0^1 r**(2n+1) w_j(r) dr,

which equal the squared boundary norms of ``z1**n * z2**j`` on the Hartogs
domain; the kernels are diagonal in these moments:

    B_j(z, t) = sum_n (z * conj(t))**n / m[j, n]
    S((z1, z2), (t1, t2)) = sum_j (z2 * conj(t2))**j * B_j(z1, t1)
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
from scipy.optimize import minimize_scalar

from . import __version__
from .errors import (
    CacheIntegrityError,
    DivergenceRisk,
    LogConvexityViolation,
    TruncationFailure,
)
from .precision import PrecCtx, integrate_finite, integrate_semi_infinite
from .weights import (
    DEFAULT_CTX,
    RadialWeightProfile,
    WeightParams,
    grad_norm_sq,
    phi,
    to_mpf,
)

logger = logging.getLogger(__name__)

__all__ = [
    "MomentTable",
    "MomentStore",
    "KernelValue",
    "SzegoEval",
    "ConsistencyRow",
    "moment",
    "moment_quad",
    "moment_table",
    "bergman_kernel_eval",
    "szego_kernel_eval",
    "boundary_monomial_norm_sq",
    "inflation_consistency_check",
    "CACHE_SCHEMA",
]

CACHE_SCHEMA = 1


# ---------------------------------------------------------------- moments


def _peak(weight, beta: float):
    """Location and width (in s) of the maximum of the s-form moment integrand."""

    def neg_log(u):
        s = 1.0 + math.exp(u)
        val = weight.log_s(s) - 2.0 * math.log(s)
        if beta:
            val += 0.5 * beta * math.log1p(-1.0 / s)
        return -val

    grid = [-12.0 + 0.25 * i for i in range(161)]
    best = min(grid, key=neg_log)
    res = minimize_scalar(neg_log, bounds=(best - 0.25, best + 0.25), method="bounded",
                          options={"xatol": 1e-10})
    u = res.x
    s_star = 1.0 + math.exp(u)
    # curvature of log g in s by central differences; only used as a length scale
    h = 1e-4 * s_star
    f0 = -neg_log(u)
    fp = -neg_log(math.log(s_star + h - 1.0))
    fm = -neg_log(math.log(max(s_star - h - 1.0, 1e-300)))
    curv = -(fp - 2 * f0 + fm) / (h * h)
    width = 1.0 / math.sqrt(curv) if curv > 0 else max(1.0, s_star)
    return s_star, width


def moment_quad(weight, beta, ctx: PrecCtx = DEFAULT_CTX, normalization=None):
    """``normalization * integral_0^1 r**(beta+1) w(r) dr`` and its error estimate.

    Integrated in ``s = 1/(1 - r**2)`` where the integrand becomes
    ``(1 - 1/s)**(beta/2) * w(s) / (2 s**2)``; the s-range is split at the
    Laplace peak so both pieces keep relative accuracy for large beta.
    ``normalization`` defaults to ``(2*pi)**2``.
    """
    mp = ctx.mp
    beta_mp = to_mpf(mp, beta)
    if beta_mp < 0:
        raise ValueError("beta must be >= 0")
    half_beta = beta_mp / 2
    norm = (2 * mp.pi) ** 2 if normalization is None else to_mpf(mp, normalization)

    def g(s):
        val = weight.evaluator_s(s, ctx) / (2 * s * s)
        if half_beta:
            if s == 1:
                return mp.zero
            val *= mp.exp(half_beta * mp.log1p(-1 / s))
        return val

    s_star, width = _peak(weight, float(beta_mp))
    if s_star - 1.0 < 1e-3:
        res = integrate_semi_infinite(g, 1, ctx, decay_rate=1 / width)
        value, err = res.value, res.err_estimate
    else:
        split = mp.mpf(s_star)
        left = integrate_finite(g, 1, split, ctx)
        right = integrate_semi_infinite(g, split, ctx, decay_rate=1 / width)
        value = left.value + right.value
        err = left.err_estimate + right.err_estimate
    return norm * value, norm * err


def moment(params: WeightParams, j: int = 0, beta=0, ctx: PrecCtx = DEFAULT_CTX, *,
           weight=None, phi_power=None):
    """Generalized moment ``(2*pi)**2 * integral_0^1 r**(beta+1) w(r) dr``.

    ``w`` is ``phi**phi_power * sqrt(1 + |grad phi|**2)`` with
    ``phi_power = 2j+1`` by default; ``weight`` overrides the profile
    entirely (comparison weights and test hooks).
    """
    if weight is None:
        weight = RadialWeightProfile(params, j, phi_power)
    return moment_quad(weight, beta, ctx)[0]


@dataclass
class MomentTable:
    """Entries ``m[j, n]`` for ``n = 0..n_max`` with per-entry error bounds."""

    weight: object
    j: int
    entries: list
    errors: list
    ctx: PrecCtx
    normalization: object = None

    @property
    def n_max(self) -> int:
        return len(self.entries) - 1

    @property
    def params(self):
        return getattr(self.weight, "params", None)

    def __getitem__(self, n):
        return self.entries[n]

    def __len__(self):
        return len(self.entries)

    def log_convexity_defects(self, slack=None):
        """Indices n where ``m[n]**2 > m[n-1] * m[n+1]`` beyond rounding slack."""
        mp = self.ctx.mp
        slack = mp.mpf(8 * self.ctx.target_rel_err) if slack is None else slack
        bad = []
        for n in range(1, len(self.entries) - 1):
            lhs = self.entries[n] ** 2
            rhs = self.entries[n - 1] * self.entries[n + 1]
            if lhs > rhs * (1 + slack):
                bad.append(n)
        return bad

    def ratios(self):
        return [self.entries[n + 1] / self.entries[n] for n in range(len(self.entries) - 1)]

    def to_csv(self) -> str:
        lines = ["n,m,err_bound"]
        for n, (m, e) in enumerate(zip(self.entries, self.errors)):
            lines.append(f"{n},{mpmath.nstr(m, 40)},{mpmath.nstr(e, 6)}")
        return "\n".join(lines) + "\n"

    def cache_key(self):
        return _cache_key(self.weight, self.j, self.ctx, self.normalization)


def _compute_entries(weight, ns, ctx, normalization):
    vals, errs = [], []
    for n in ns:
        v, e = moment_quad(weight, 2 * n, ctx, normalization)
        vals.append(v)
        errs.append(e)
    return vals, errs


def moment_table(params: WeightParams, j: int, n_max: int, ctx: PrecCtx = DEFAULT_CTX, *,
                 weight=None, normalization=None, escalate: bool = True) -> MomentTable:
    """Moments ``m[j, 0..n_max]``; checks log-convexity and escalates precision once."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if weight is None:
        weight = RadialWeightProfile(params, j)
    vals, errs = _compute_entries(weight, range(n_max + 1), ctx, normalization)
    table = MomentTable(weight, j, vals, errs, ctx, normalization)
    bad = table.log_convexity_defects()
    if bad and escalate:
        bits = 2 * ctx.significand_bits
        logger.warning("log-convexity defect at n=%s; recomputing at %d bits", bad[:5], bits)
        hi = PrecCtx(bits, ctx.target_rel_err, ctx.max_refinement_levels + 2)
        return moment_table(params, j, n_max, hi, weight=weight, normalization=normalization,
                            escalate=False)
    if bad:
        raise LogConvexityViolation(f"moment table j={j} not log-convex at n={bad[:5]}")
    return table


# ------------------------------------------------------------------ cache


def _cache_key(weight, j, ctx, normalization):
    payload = {
        "schema": CACHE_SCHEMA,
        "version": __version__,
        "weight": weight.key,
        "j": j,
        "bits": ctx.significand_bits,
        "target_rel_err": ctx.target_rel_err,
        "normalization": None if normalization is None else mpmath.nstr(normalization, 50),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:24], payload


def _entries_digest(entries, errors):
    body = json.dumps([entries, errors]).encode()
    return hashlib.sha256(body).hexdigest()


class MomentStore:
    """Lazily extended moment tables for one weight family and precision.

    With ``cache_dir`` set, tables are persisted as JSON with decimal-string
    significands and a SHA-256 checksum; writes go through a temporary file
    and an atomic rename.
    """

    def __init__(self, params: WeightParams, ctx: PrecCtx = DEFAULT_CTX, cache_dir=None, *,
                 normalization=None, weight_factory=None):
        self.params = params
        self.ctx = ctx
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.normalization = normalization
        self._factory = weight_factory or (lambda j: RadialWeightProfile(params, j))
        self._tables: dict[int, MomentTable] = {}

    def _path(self, weight, j):
        key, _ = _cache_key(weight, j, self.ctx, self.normalization)
        return self.cache_dir / f"moments-{key}.json"

    def _load(self, weight, j):
        if self.cache_dir is None:
            return None
        path = self._path(weight, j)
        if not path.exists():
            return None
        try:
            data = json.loads(path.read_text())
            entries, errors = data["entries"], data["errors"]
            if data["checksum"] != _entries_digest(entries, errors):
                raise CacheIntegrityError(f"checksum mismatch in {path}")
            if data["key"] != _cache_key(weight, j, self.ctx, self.normalization)[1]:
                raise CacheIntegrityError(f"key mismatch in {path}")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, CacheIntegrityError):
                raise
            raise CacheIntegrityError(f"unreadable moment cache {path}: {exc}") from exc
        mp = self.ctx.mp
        return MomentTable(weight, j, [mp.mpf(e) for e in entries], [mp.mpf(e) for e in errors],
                           self.ctx, self.normalization)

    def _save(self, table):
        if self.cache_dir is None:
            return
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        digits = int(self.ctx.significand_bits * math.log10(2)) + 3
        entries = [mpmath.nstr(e, digits, strip_zeros=False) for e in table.entries]
        errors = [mpmath.nstr(e, 6) for e in table.errors]
        data = {
            "key": table.cache_key()[1],
            "entries": entries,
            "errors": errors,
            "checksum": _entries_digest(entries, errors),
        }
        path = self._path(table.weight, table.j)
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(data, fh, indent=1)
        os.replace(tmp, path)

    def table(self, j: int, n_max: int) -> MomentTable:
        current = self._tables.get(j)
        if current is None:
            current = self._load(self._factory(j), j)
        if current is not None and current.n_max >= n_max:
            self._tables[j] = current
            return current
        weight = self._factory(j)
        if current is None:
            current = moment_table(self.params, j, n_max, self.ctx, weight=weight,
                                   normalization=self.normalization)
        else:
            vals, errs = _compute_entries(weight, range(current.n_max + 1, n_max + 1), self.ctx,
                                          self.normalization)
            current = MomentTable(weight, j, current.entries + vals, current.errors + errs,
                                  current.ctx, self.normalization)
            bad = current.log_convexity_defects()
            if bad:
                raise LogConvexityViolation(f"extended table j={j} not log-convex at n={bad[:5]}")
        self._tables[j] = current
        self._save(current)
        return current


# ---------------------------------------------------------------- kernels


@dataclass(frozen=True)
class KernelValue:
    value: object
    tail_bound: object
    terms: int


def bergman_kernel_eval(table: MomentTable, z, t, tol=1e-20) -> KernelValue:
    """``B_j(z, t)`` from its diagonal series with a certified tail bound.

    With ``rho = |z conj(t)|`` and ``q = m[N+2] / m[N+1]`` (moment ratios are
    nondecreasing by log-convexity) the remainder after ``n = N`` is at most
    ``rho**(N+1) / (m[N+1] (1 - rho/q))`` whenever ``rho < q``.
    """
    mp = table.ctx.mp
    w = mp.mpc(z) * mp.conj(mp.mpc(t))
    rho = abs(w)
    tol = mp.mpf(tol)
    if rho >= 1:
        raise DivergenceRisk(f"|z * conj(t)| = {mpmath.nstr(rho, 8)} >= 1")
    m = table.entries
    total = mp.mpc(0)
    power = mp.mpc(1)
    rho_pow = mp.one
    for n in range(len(m)):
        total += power / m[n]
        power *= w
        rho_pow *= rho
        if rho == 0:
            return KernelValue(total, mp.zero, n + 1)
        if n + 2 > table.n_max:
            break
        q = m[n + 2] / m[n + 1]
        if rho < q:
            bound = rho_pow / (m[n + 1] * (1 - rho / q))
            if bound <= tol:
                return KernelValue(total, bound, n + 1)
    raise TruncationFailure(
        f"table with n_max={table.n_max} cannot certify the tail at |z conj t|={mpmath.nstr(rho, 8)}"
    )


@dataclass(frozen=True)
class SzegoEval:
    value: object
    tail_bound: object
    n_terms: tuple
    j_terms: int


def _solve_phi(params, target, ctx, lo, hi=1):
    """Largest-precision bisection for phi(r) = target on [lo, hi] (phi decreasing)."""
    mp = ctx.mp
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    for _ in range(200):
        mid = (lo + hi) / 2
        if phi(params, mid, ctx) > target:
            lo = mid
        else:
            hi = mid
    return lo


def szego_kernel_eval(params: WeightParams, z, t, tol=1e-15, ctx: PrecCtx = DEFAULT_CTX,
                      store: MomentStore | None = None) -> SzegoEval:
    """Truncated double series for the Szego kernel at interior points.

    The remainder over ``j > J`` (all n) is bounded through the elementary
    lower bound ``m[j, n] >= (2 pi)**2 (r2 - r1) r1**(2n+1) phi(r2)**(2j+1)``
    on a radial band ``[r1, r2]`` chosen between ``sqrt(|z1 t1|)`` and the
    boundary; each retained ``B_j`` carries its own certified n-tail.
    """
    mp = ctx.mp
    z1, z2 = (mp.mpc(v) for v in z)
    t1, t2 = (mp.mpc(v) for v in t)
    for label, (u1, u2) in (("z", (z1, z2)), ("t", (t1, t2))):
        if abs(u1) >= 1 or abs(u2) >= phi(params, abs(u1), ctx):
            raise DivergenceRisk(f"{label} is not an interior point of the domain")
    store = store or MomentStore(params, ctx)
    tol = mp.mpf(tol)
    x = z2 * mp.conj(t2)
    if x == 0:
        table = _table_for(store, 0, abs(z1 * t1), tol)
        k = bergman_kernel_eval(table, z1, t1, tol)
        return SzegoEval(k.value, k.tail_bound, (k.terms,), 1)

    a = mp.sqrt(abs(z1 * t1))
    b = mp.sqrt(abs(x))
    phi_a = phi(params, a, ctx)
    if b >= phi_a:
        raise DivergenceRisk("point pair lies outside the convergence region of the series")
    r2 = _solve_phi(params, mp.sqrt(b * phi_a), ctx, a)
    r1 = (a + r2) / 2
    phi2 = phi(params, r2, ctx)
    rho1 = (a / r1) ** 2
    rho2 = (b / phi2) ** 2
    K = 1 / ((2 * mp.pi) ** 2 * (r2 - r1) * r1 * phi2)
    geo = K / ((1 - rho1) * (1 - rho2))
    J = 0
    while geo * rho2 ** (J + 1) > tol / 2:
        J += 1
    j_tail = geo * rho2 ** (J + 1)
    per_j = tol / (2 * (J + 1))
    total = mp.mpc(0)
    bound = j_tail
    n_terms = []
    xj = mp.mpc(1)
    for j in range(J + 1):
        local_tol = per_j / abs(xj) if xj != 0 else per_j
        table = _table_for(store, j, abs(z1 * t1), local_tol)
        k = bergman_kernel_eval(table, z1, t1, local_tol)
        total += xj * k.value
        bound += abs(xj) * k.tail_bound
        n_terms.append(k.terms)
        xj *= x
    return SzegoEval(total, bound, tuple(n_terms), J + 1)


def _table_for(store: MomentStore, j, rho, tol):
    """A table long enough for ``bergman_kernel_eval`` at ``rho`` and ``tol``."""
    n_max = 4
    while True:
        table = store.table(j, n_max)
        try:
            bergman_kernel_eval(table, rho, 1, tol)
            return table
        except TruncationFailure:
            if n_max > 4096:
                raise
            n_max *= 2


# ------------------------------------------------- boundary cross-checks


def boundary_monomial_norm_sq(params: WeightParams, n: int, j: int, ctx: PrecCtx = DEFAULT_CTX):
    """``||z1**n z2**j||**2`` on the boundary, straight from the surface measure.

    On the boundary ``|z2| = phi(|z1|)``, the measure is
    ``phi sqrt(1 + |grad phi|**2) dtheta dA(z1)``; the theta integral and the
    angular part of dA each give 2*pi and the radial integral is done in r.
    """
    mp = ctx.mp

    def radial(r):
        if r >= 1:
            return mp.zero
        p = phi(params, r, ctx)
        return r ** (2 * n + 1) * p ** (2 * j) * p * mp.sqrt(1 + grad_norm_sq(params, r, ctx))

    res = integrate_finite(radial, 0, 1, ctx)
    return 2 * mp.pi * 2 * mp.pi * res.value


@dataclass(frozen=True)
class ConsistencyRow:
    n: int
    j: int
    boundary: object
    moment: object
    rel_err: object
    passed: bool


@dataclass
class ConsistencyReport:
    rows: list = field(default_factory=list)
    tolerance: float = 1e-10

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def as_dict(self):
        return {
            "tolerance": self.tolerance,
            "verdict": "PASS" if self.passed else "FAIL",
            "rows": [
                {"n": r.n, "j": r.j, "boundary_norm_sq": mpmath.nstr(r.boundary, 25),
                 "moment": mpmath.nstr(r.moment, 25), "rel_err": mpmath.nstr(r.rel_err, 3),
                 "verdict": "PASS" if r.passed else "FAIL"}
                for r in self.rows
            ],
        }


def inflation_consistency_check(params: WeightParams, grid, ctx: PrecCtx = DEFAULT_CTX, *,
                                tolerance=1e-10, c_j=None, store: MomentStore | None = None):
    """Compare boundary norms of ``z1**n z2**j`` with moment-table entries.

    ``c_j`` is the constant of the j-th Bergman weight (``2*pi`` unless a
    negative control overrides it); the table normalization is ``2*pi*c_j``.
    """
    mp = ctx.mp
    grid = list(grid)
    report = ConsistencyReport(tolerance=tolerance)
    if not grid:
        return report
    if store is None:
        normalization = None if c_j is None else 2 * mp.pi * to_mpf(mp, c_j)
        store = MomentStore(params, ctx, normalization=normalization)
    n_need: dict[int, int] = {}
    for n, j in grid:
        n_need[j] = max(n_need.get(j, 0), n)
    for n, j in grid:
        m = store.table(j, n_need[j])[n]
        bnd = boundary_monomial_norm_sq(params, n, j, ctx)
        rel = abs(bnd - m) / abs(m)
        report.rows.append(ConsistencyRow(n, j, bnd, m, rel, bool(rel <= tolerance)))
    return report
