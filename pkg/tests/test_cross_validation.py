"""Independent cross-checks of the exact kernels against structure theory
and brute-force enumeration."""

import math
import random
from fractions import Fraction

from cellint import (
    Bound,
    BoxDomain,
    CellLevel,
    CellTermSpec,
    CellTower,
    CosetSpec,
    DecompositionCertificate,
    NormDescription,
    Polynomial,
    PrimeContext,
    check_norm_description,
    check_partition,
    contains,
    fiber_valuation_range,
    hensel_level,
    integrate_explicit_tower,
    parse_poly,
    point_cell,
    riemann_integrate,
    shell_sum,
    unit_ball_coset_cell,
    unit_coset_density,
    zp_nonzero_cell,
)
from cellint.formula_dsl import FracNormPower, IntegerPower, Val, make_product, parse_expr
from cellint.qexp_sum import TermOnCell
from cellint.rootval import RootScaledValue


def test_density_matches_unit_group_structure():
    # Z_p^x = Z/(p-1) x Z_p for odd p (Z/2 x Z_2 for p = 2), so the n-th
    # power units have index gcd(n, p-1) * p^{v_p(n)} (resp. the 2-adic
    # variant), giving eps = (1 - 1/p) / index.
    for p in (2, 3, 5, 7):
        ctx = PrimeContext(p)
        for n in range(1, 7):
            vp = 0
            nn = n
            while nn % p == 0:
                nn //= p
                vp += 1
            if p == 2:
                # Z_2^x = Z/2 x Z_2 (torsion -1, free part generated by 5)
                index = (2 if n % 2 == 0 else 1) * 2**vp
            else:
                index = math.gcd(n, p - 1) * p**vp
            expected = (1 - Fraction(1, p)) / index
            assert unit_coset_density(1, n, ctx) == expected, (p, n)


def test_measure_matches_residue_count():
    # Counting cell residues mod 5^6 reproduces the closed-form measure
    # for every shell the level fully resolves.
    ctx = PrimeContext(5)
    cell = unit_ball_coset_cell(1, 2)
    m = 6
    count = sum(1 for r in range(5**m) if contains(cell, [r], ctx))
    # residues with v <= m - 1 are fully resolved; the 0 class is excluded
    expected = sum(Fraction(2, 5) * Fraction(1, 5**k) * 5**m
                   for k in range(0, m, 2))
    assert count == expected


def _random_finite_cell(rng, ctx):
    p = ctx.p
    n = rng.choice([1, 2, 3] if p != 2 else [1, 2])
    lam = rng.choice([Fraction(1), Fraction(2), Fraction(p), Fraction(3)])
    if lam % p == 0 and rng.random() < 0.5:
        lam = Fraction(p)
    center = rng.choice([0, 1, 2])
    v_alpha = rng.randint(1, 3)  # k <= v_alpha (nonstrict) keeps shells finite
    cell = CellTower((CellLevel(
        center=Polynomial.constant(center),
        lower=Bound(Polynomial.constant(Fraction(1, p**v_alpha)), strict=False),
        upper=Bound(Polynomial.constant(1), strict=False),
        coset=CosetSpec(lam, n)),))
    return cell, center, lam, n, v_alpha


def test_shell_sum_equals_riemann_exactly_randomized():
    # For finite-shell cells every residue class is resolved once the level
    # exceeds max k + Hensel margin, so the brute-force Riemann sum equals
    # the closed form as an exact element of Q[p^(1/n)].
    rng = random.Random(424242)
    for _ in range(40):
        ctx = PrimeContext(rng.choice([2, 3, 5]))
        p = ctx.p
        cell, center, lam, n, v_alpha = _random_finite_cell(rng, ctx)
        a = rng.randint(-2, 3)
        l = rng.randint(0, 2)
        level = v_alpha + hensel_level(n, p) + 1

        term = TermOnCell(RootScaledValue.from_rational(1, p), a, n, l, lam)
        krange = fiber_valuation_range(cell.levels[0], [], ctx)
        closed, ok = shell_sum(term, krange, ctx)
        assert ok  # finite ranges always converge

        # |(t-c)^a lam^{-a}|^{1/n} * v(t-c)^l as a DSL integrand
        carrier = parse_poly(f"x1 - {center}" if center else "x1").scale(1 / lam)
        factors = [FracNormPower(carrier, a, n)]
        if l > 0:
            factors.append(IntegerPower(Val(parse_poly(f"x1 - {center}")
                                             if center else parse_poly("x1")), l))
        expr = make_product(factors)
        oracle = riemann_integrate(expr, 1, level, ctx, domain=cell)
        got = oracle.value if isinstance(oracle.value, RootScaledValue) \
            else RootScaledValue.from_rational(oracle.value, p)
        assert got == closed, (p, n, lam, a, l, v_alpha)


def nested_parabola_cells():
    # Partition of Z_5^2 with the second level centered at x1^2.
    c = parse_poly("x1^2")
    ball = Bound(Polynomial.constant(1), strict=False)
    zero = Polynomial.constant(0)
    lvl_zero = CellLevel(center=zero, lower=None, upper=None,
                         coset=CosetSpec(Fraction(0), 1))
    lvl_rest = CellLevel(center=zero, lower=None, upper=ball,
                         coset=CosetSpec(Fraction(1), 1))
    lvl_graph = CellLevel(center=c, lower=None, upper=None,
                          coset=CosetSpec(Fraction(0), 1))
    lvl_off = CellLevel(center=c, lower=None, upper=ball,
                        coset=CosetSpec(Fraction(1), 1))
    return (CellTower((lvl_zero, lvl_graph)), CellTower((lvl_zero, lvl_off)),
            CellTower((lvl_rest, lvl_graph)), CellTower((lvl_rest, lvl_off)))


def test_partition_with_nonconstant_center():
    ctx = PrimeContext(5)
    cert = DecompositionCertificate(5, BoxDomain(2), nested_parabola_cells())
    report = check_partition(cert, 2, ctx)
    assert report.ok
    assert report.points_tested == 5**4


def test_norm_description_with_nonconstant_center():
    # |t - x1^2| = |(t - x1^2)^1 * 1^{-1}|^{1/1} away from the graph, and
    # vanishes on it (delta = 0 describes the zero norm).
    ctx = PrimeContext(5)
    cells = nested_parabola_cells()
    cert = DecompositionCertificate(
        5, BoxDomain(2), cells,
        (NormDescription(2, 0, Polynomial.constant(0), a=0, level=1),
         NormDescription(3, 0, Polynomial.constant(1), a=1, level=1)))
    f = [parse_poly("x2 - x1^2")]
    report = check_norm_description(f, cert, 2, ctx)
    assert report.ok
    assert report.points_checked > 0

    wrong = DecompositionCertificate(
        5, BoxDomain(2), cells,
        (NormDescription(3, 0, Polynomial.constant(5), a=1, level=1),))
    assert not check_norm_description(f, wrong, 2, ctx).ok


def test_tower_integral_with_nonconstant_center_against_oracle():
    # int_{Z_5^2} |t - x1^2| d(x1, t): translation invariance in t makes the
    # inner fiber integral p/(p+1) for every x1, so the total is p/(p+1).
    ctx = PrimeContext(5)
    cells = nested_parabola_cells()
    cert = DecompositionCertificate(5, BoxDomain(2), cells)
    terms = [CellTermSpec(1, Fraction(1), ((0, 0), (1, 0))),
             CellTermSpec(3, Fraction(1), ((0, 0), (1, 0)))]
    value, ok = integrate_explicit_tower(terms, cert, ctx)
    assert ok and value.as_exact_rational() == Fraction(5, 6)
    oracle = riemann_integrate(parse_expr("norm(x2 - x1^2)"), 2, 4, ctx)
    assert abs(oracle.real_value() - 5 / 6) < 1e-4
