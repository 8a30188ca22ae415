"""Brute-force ground truth: residue-sum Riemann approximations, Monte-Carlo
estimation, and exact solution counting modulo p^m.

Residue classes are always lifted to their least nonnegative integer
representatives, so every result is reproducible bit for bit.  Points where
a norm/val carrier is 0 mod p^m are counted as ambiguous: the lift decides
the contribution, the caller drives the level high enough that the count
vanishes (or tolerates it).
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from math import sqrt
from typing import Callable, Sequence, Union

from .cells import CellTower, membership
from .errors import BudgetExceededError, NonIntegralCoefficientsError
from .formula_dsl import (
    FracNormPower,
    IntegerPower,
    Norm,
    Product,
    QExpExpr,
    RationalConst,
    ScalarMultiple,
    Sum,
    Val,
)
from .padic_core import (
    INF,
    PrimeContext,
    _unit_nth_power_residues,
    hensel_level,
    int_valuation,
    power_norm,
    residue,
    valuation,
)
from .polynomials import Polynomial, eval_int_terms
from .qexp_sum import level_krange
from .rootval import RootScaledValue

DEFAULT_BUDGET = 10**8

ExactValue = Union[Fraction, RootScaledValue]


@dataclass
class OracleResult:
    value: ExactValue
    level: int
    ambiguous_count: int

    def real_value(self) -> float:
        if isinstance(self.value, RootScaledValue):
            return self.value.real_value()
        return float(self.value)


# -- compiled point evaluation ---------------------------------------------------


class _Carrier:
    """Integer-cleared polynomial carrier with fast valuation at integer lifts."""

    def __init__(self, poly: Polynomial, ctx: PrimeContext):
        self.terms, denom = poly.cleared()
        self.vden = int(int_valuation(denom, ctx.p)) if denom else 0
        self.p = ctx.p

    def valuation_at(self, point: Sequence[int]):
        num = eval_int_terms(self.terms, point)
        if num == 0:
            return INF
        return int_valuation(num, self.p) - self.vden


def compile_expr(e: QExpExpr, ctx: PrimeContext,
                 level: int) -> Callable[[Sequence[int]], tuple[ExactValue, bool]]:
    """Compile an expression into a fast evaluator over integer lifts.

    The evaluator returns (exact value, ambiguous) where ambiguous means a
    carrier was 0 mod p^level.  Conventions at exactly-vanishing carriers:
    val contributes the level-truncated valuation, norm powers contribute 0.
    """
    p = ctx.p

    if isinstance(e, RationalConst):
        value = e.value
        return lambda pt: (value, False)
    if isinstance(e, (Norm, Val, FracNormPower)):
        carrier = _Carrier(e.carrier, ctx)
        if isinstance(e, Norm):
            def run(pt):
                v = carrier.valuation_at(pt)
                if v is INF:
                    return Fraction(0), True
                return power_norm(p, -int(v)), v >= level
            return run
        if isinstance(e, Val):
            def run(pt):
                v = carrier.valuation_at(pt)
                if v is INF:
                    return Fraction(level), True  # truncated valuation
                return Fraction(int(v)), v >= level
            return run
        a, n = e.a, e.n

        def run(pt):
            v = carrier.valuation_at(pt)
            if v is INF:
                if a > 0:
                    return Fraction(0), True
                if a == 0:
                    return Fraction(1), True
                return Fraction(0), True  # divergent convention, flagged
            exp = Fraction(a * int(v), n)
            amb = v >= level
            if exp.denominator == 1:
                return power_norm(p, -int(exp)), amb
            return RootScaledValue.monomial(p, exp), amb
        return run
    if isinstance(e, Sum):
        subs = [compile_expr(it, ctx, level) for it in e.items]

        def run(pt):
            total: ExactValue = Fraction(0)
            amb = False
            for sub in subs:
                v, a_ = sub(pt)
                total = _vadd(total, v, p)
                amb = amb or a_
            return total, amb
        return run
    if isinstance(e, Product):
        subs = [compile_expr(it, ctx, level) for it in e.items]

        def run(pt):
            total: ExactValue = Fraction(1)
            amb = False
            for sub in subs:
                v, a_ = sub(pt)
                total = _vmul(total, v, p)
                amb = amb or a_
            return total, amb
        return run
    if isinstance(e, ScalarMultiple):
        sub = compile_expr(e.item, ctx, level)
        scalar = e.scalar

        def run(pt):
            v, amb = sub(pt)
            if isinstance(v, RootScaledValue):
                return v.scale(scalar), amb
            return scalar * v, amb
        return run
    if isinstance(e, IntegerPower):
        sub = compile_expr(e.base, ctx, level)
        k = e.exponent

        def run(pt):
            v, amb = sub(pt)
            if isinstance(v, RootScaledValue):
                out: ExactValue = RootScaledValue.from_rational(1, p)
                for _ in range(k):
                    out = out * v
                return out, amb
            return v**k, amb
        return run
    raise TypeError(f"not a DSL node: {e!r}")


def _vadd(a: ExactValue, b: ExactValue, p: int) -> ExactValue:
    if isinstance(a, RootScaledValue) or isinstance(b, RootScaledValue):
        if not isinstance(a, RootScaledValue):
            a = RootScaledValue.from_rational(a, p)
        if not isinstance(b, RootScaledValue):
            b = RootScaledValue.from_rational(b, p)
        return a + b
    return a + b


def _vmul(a: ExactValue, b: ExactValue, p: int) -> ExactValue:
    if isinstance(a, RootScaledValue) or isinstance(b, RootScaledValue):
        if not isinstance(a, RootScaledValue):
            a = RootScaledValue.from_rational(a, p)
        if not isinstance(b, RootScaledValue):
            b = RootScaledValue.from_rational(b, p)
        return a * b
    return a * b


class _ChunkedSum:
    """Deterministic chunked accumulation of exact values."""

    def __init__(self, p: int, chunk: int = 4096):
        self.p = p
        self.chunk = chunk
        self.pending: list[ExactValue] = []
        self.partials: list[ExactValue] = []

    def add(self, v: ExactValue):
        self.pending.append(v)
        if len(self.pending) >= self.chunk:
            self._flush()

    def _flush(self):
        if not self.pending:
            return
        total: ExactValue = Fraction(0)
        for v in self.pending:
            total = _vadd(total, v, self.p)
        self.partials.append(total)
        self.pending = []

    def total(self) -> ExactValue:
        self._flush()
        total: ExactValue = Fraction(0)
        for v in self.partials:
            total = _vadd(total, v, self.p)
        return total


# -- fast membership for explicit one-level cells -----------------------------------


def _fast_domain_filter(domain: CellTower, ctx: PrimeContext, level: int):
    """Precompiled (member, ambiguous) test for integer lifts, or None.

    Only for one-level towers with constant integer center and constant
    bounds; semantically identical to cells.membership (tested), just
    avoiding per-point polynomial and Fraction work.
    """
    if len(domain.levels) != 1:
        return None
    lv = domain.levels[0]
    if not lv.center.is_constant():
        return None
    center = lv.center.constant_value()
    if center.denominator != 1:
        return None
    c = int(center)
    coset = lv.coset
    p = ctx.p
    if coset.lam == 0:
        def run_point(r: int):
            diff = r - c
            v = int_valuation(diff, p)
            amb = v is INF or v >= level
            return diff == 0, amb
        return run_point
    try:
        krange = level_krange(lv, ctx)
    except Exception:
        return None
    m_hensel = hensel_level(coset.n, p)
    pm = p**m_hensel
    powers = _unit_nth_power_residues(p, coset.n, m_hensel)
    mu_inv = pow(residue(coset.lam * power_norm(p, -int(valuation(coset.lam, ctx))),
                         m_hensel, ctx), -1, pm)
    margin = level - m_hensel

    def run(r: int):
        diff = r - c
        v = int_valuation(diff, p)
        if v is INF:
            return False, True
        v = int(v)
        amb = v > margin
        if not krange.contains(v):
            return False, amb
        unit = diff // p**v if diff > 0 else -((-diff) // p**v)
        return (unit * mu_inv) % pm in powers, amb

    return run


# -- operations --------------------------------------------------------------------


def _check_budget(p: int, level: int, arity: int, budget: int):
    if p ** (level * arity) > budget:
        raise BudgetExceededError(
            f"{p}^{level * arity} residue points exceed the budget of {budget}")


def riemann_integrate(e: QExpExpr, arity: int, level: int, ctx: PrimeContext,
                      domain: CellTower | None = None,
                      budget: int = DEFAULT_BUDGET) -> OracleResult:
    """Riemann sum over all residue classes mod p^level of Z_p^arity.

    Each class contributes p^(-arity*level) times the integrand value at its
    least nonnegative integer lift; an optional explicit cell restricts the
    domain (classes are included iff their lift is a member, and classes the
    level cannot decide are counted ambiguous).
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    p = ctx.p
    _check_budget(p, level, arity, budget)
    run = compile_expr(e, ctx, level)
    acc = _ChunkedSum(p)
    ambiguous = 0
    pm = p**level
    fast = None
    if domain is not None and arity == 1:
        fast = _fast_domain_filter(domain, ctx, level)
    for pt in itertools.product(range(pm), repeat=arity):
        if domain is not None:
            if fast is not None:
                member, amb = fast(pt[0])
            else:
                member, amb = membership(domain, pt, ctx, level)
            if amb:
                ambiguous += 1
            if not member:
                continue
            value, amb_v = run(pt)
            if amb_v and not amb:
                ambiguous += 1
        else:
            value, amb_v = run(pt)
            if amb_v:
                ambiguous += 1
        acc.add(value)
    weight = Fraction(1, p ** (arity * level))
    total = acc.total()
    if isinstance(total, RootScaledValue):
        value: ExactValue = total.scale(weight)
        if value.is_rational():
            value = value.as_exact_rational()
    else:
        value = total * weight
    return OracleResult(value=value, level=level, ambiguous_count=ambiguous)


def monte_carlo_integrate(e: QExpExpr, arity: int, samples: int, seed: int,
                          ctx: PrimeContext,
                          level: int | None = None) -> tuple[float, float]:
    """Seeded Monte-Carlo estimate (mean, standard error) over Z_p^arity.

    Points are uniform independent residues at the configured level, lifted;
    results are deterministic for a fixed seed.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    level = ctx.default_level if level is None else level
    rng = random.Random(seed)
    run = compile_expr(e, ctx, level)
    pm = ctx.p**level
    values = []
    for _ in range(samples):
        pt = tuple(rng.randrange(pm) for _ in range(arity))
        v, _amb = run(pt)
        values.append(v.real_value() if isinstance(v, RootScaledValue) else float(v))
    mean = sum(values) / samples
    var = sum((v - mean) ** 2 for v in values) / (samples - 1)
    return mean, sqrt(var / samples)


def _modular_terms(poly: Polynomial, modulus: int, p: int):
    """Coefficients reduced mod modulus; p-integrality enforced."""
    out = []
    for exps, coeff in poly.terms:
        if coeff.denominator % p == 0:
            raise NonIntegralCoefficientsError(
                f"coefficient {coeff} is not p-integral at p = {p}")
        c = coeff.numerator * pow(coeff.denominator, -1, modulus) % modulus
        out.append((exps, c))
    return out


def eval_poly_mod(terms, point: Sequence[int], modulus: int) -> int:
    total = 0
    for exps, c in terms:
        term = c
        for x, k in zip(point, exps):
            if k:
                term = term * pow(x, k, modulus) % modulus
        total = (total + term) % modulus
    return total


def count_solutions(fs: Sequence[Polynomial], z: Sequence[int], m: int,
                    ctx: PrimeContext, n: int | None = None,
                    budget: int = DEFAULT_BUDGET) -> int:
    """#{x in (Z/p^m)^n : f(x) = z mod p^m componentwise}."""
    if m < 1:
        raise ValueError("level m must be >= 1")
    p = ctx.p
    if n is None:
        n = max((f.max_variable() for f in fs), default=1) or 1
    _check_budget(p, m, n, budget)
    pm = p**m
    target = tuple(int(zi) % pm for zi in z)
    if len(target) != len(fs):
        raise ValueError("z must have one residue per polynomial")
    systems = [_modular_terms(f, pm, p) for f in fs]
    count = 0
    for pt in itertools.product(range(pm), repeat=n):
        if all(eval_poly_mod(terms, pt, pm) == zi
               for terms, zi in zip(systems, target)):
            count += 1
    return count


def solution_histogram(fs: Sequence[Polynomial], m: int, ctx: PrimeContext,
                       n: int | None = None,
                       budget: int = DEFAULT_BUDGET) -> dict[tuple[int, ...], int]:
    """All counts N_m(z) at once: the histogram of f(x) mod p^m over x."""
    p = ctx.p
    if n is None:
        n = max((f.max_variable() for f in fs), default=1) or 1
    _check_budget(p, m, n, budget)
    pm = p**m
    systems = [_modular_terms(f, pm, p) for f in fs]
    hist: dict[tuple[int, ...], int] = {}
    for pt in itertools.product(range(pm), repeat=n):
        key = tuple(eval_poly_mod(terms, pt, pm) for terms in systems)
        hist[key] = hist.get(key, 0) + 1
    return hist


def stabilization_check(values: Sequence, levels: Sequence[int],
                        ctx: PrimeContext) -> bool:
    """True iff consecutive differences decay like C * p^(-m).

    C is anchored at the first consecutive pair, C = |v1 - v0| * p^(m0);
    every later pair must satisfy |v(m+1) - v(m)| <= C * p^(-m).  A constant
    sequence passes; sequences with non-shrinking differences fail.
    """
    if len(values) < 3:
        raise ValueError("need at least 3 levels")
    if len(values) != len(levels):
        raise ValueError("values and levels must align")
    diffs = [abs(Fraction(values[i + 1]) - Fraction(values[i]))
             for i in range(len(values) - 1)]
    c = diffs[0] * Fraction(ctx.p) ** levels[0]
    return all(d <= c * power_norm(ctx.p, -m)
               for d, m in zip(diffs, levels[:-1]))
