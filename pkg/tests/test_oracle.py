"""Residue-sum oracle, Monte-Carlo estimation, and solution counting."""

from fractions import Fraction

import pytest

from cellint import (
    BudgetExceededError,
    NonIntegralCoefficientsError,
    PrimeContext,
    count_solutions,
    monte_carlo_integrate,
    parse_expr,
    parse_poly,
    riemann_integrate,
    solution_histogram,
    stabilization_check,
    unit_ball_coset_cell,
)

C5 = PrimeContext(5)
C7 = PrimeContext(7)


def test_riemann_constant():
    for m in (1, 3):
        r = riemann_integrate(parse_expr("1"), 1, m, C5)
        assert r.value == 1 and r.ambiguous_count == 0


def test_riemann_norm():
    r = riemann_integrate(parse_expr("norm(x1)"), 1, 6, C5)
    assert r.ambiguous_count == 1  # the residue 0
    assert abs(r.value - Fraction(5, 6)) <= Fraction(1, 5**5)
    # exact truncated value: sum_{k<m} (1-1/p) p^{-2k}
    expected = sum((1 - Fraction(1, 5)) * Fraction(1, 5**(2 * k)) for k in range(6))
    assert r.value == expected


def test_riemann_valuation():
    r = riemann_integrate(parse_expr("val(x1)"), 1, 6, C5)
    assert r.ambiguous_count == 1
    assert abs(float(r.value) - 0.25) < 1e-3


def test_riemann_domain_restricted():
    r = riemann_integrate(parse_expr("norm(x1)^{1/2}"), 1, 6, C5,
                          domain=unit_ball_coset_cell(1, 2))
    assert abs(float(r.value) - 25 / 62) < 1e-5


def test_riemann_refinement_consistency():
    # x1^2 + 5 never vanishes on Z_5 and v is bounded by 1, so the integrand
    # is constant on level-2 classes: refining cannot change the exact value.
    e = parse_expr("norm(x1^2 + 5)")
    values = {m: riemann_integrate(e, 1, m, C5).value for m in (2, 3, 4)}
    assert values[2] == values[3] == values[4]
    assert riemann_integrate(e, 1, 2, C5).ambiguous_count == 0


def test_riemann_budget():
    with pytest.raises(BudgetExceededError):
        riemann_integrate(parse_expr("norm(x1)"), 1, 8, C5, budget=1000)


def test_riemann_two_variables():
    r = riemann_integrate(parse_expr("norm(x1)*norm(x2)"), 2, 3, C5)
    expected_1d = sum((1 - Fraction(1, 5)) * Fraction(1, 5**(2 * k)) for k in range(3))
    assert r.value == expected_1d**2


def test_monte_carlo_constant_and_determinism():
    est, err = monte_carlo_integrate(parse_expr("1"), 1, 100, 7, C5)
    assert est == 1.0 and err == 0.0
    a = monte_carlo_integrate(parse_expr("norm(x1)"), 1, 5000, 42, C5)
    b = monte_carlo_integrate(parse_expr("norm(x1)"), 1, 5000, 42, C5)
    assert a == b  # bit-identical for a fixed seed
    c = monte_carlo_integrate(parse_expr("norm(x1)"), 1, 5000, 43, C5)
    assert a != c


def test_monte_carlo_close_to_oracle():
    est, err = monte_carlo_integrate(parse_expr("norm(x1)"), 1, 20000, 42, C5)
    assert abs(est - 5 / 6) <= 5 * err


def test_count_solutions_examples():
    assert count_solutions([parse_poly("x1")], [3], 2, C5) == 1
    assert count_solutions([parse_poly("x1^2")], [1], 2, C5) == 2  # {1, 24}
    assert count_solutions([parse_poly("x1^2")], [2], 1, C5) == 0


def test_count_solutions_multiplicative_on_products():
    f = [parse_poly("x1^2"), parse_poly("x2^3 + 1")]
    for z1, z2 in [(1, 1), (4, 2), (1, 0)]:
        joint = count_solutions(f, [z1, z2], 2, C5, n=2)
        left = count_solutions([parse_poly("x1^2")], [z1], 2, C5)
        right = count_solutions([parse_poly("x1^3 + 1")], [z2], 2, C5)
        assert joint == left * right


def test_count_solutions_rejects_non_integral():
    with pytest.raises(NonIntegralCoefficientsError):
        count_solutions([parse_poly("1/5*x1")], [0], 1, C5)


def test_histogram_matches_counts():
    hist = solution_histogram([parse_poly("x1^2")], 2, C5)
    assert hist[(1,)] == 2
    assert sum(hist.values()) == 25
    assert (2,) not in hist


def test_fast_domain_filter_matches_membership():
    from cellint import point_cell, zp_nonzero_cell
    from cellint.cells import membership
    from cellint.oracle import _fast_domain_filter

    for ctx in (PrimeContext(2), PrimeContext(5)):
        p = ctx.p
        towers = [zp_nonzero_cell(), unit_ball_coset_cell(1, 2),
                  unit_ball_coset_cell(p, 2), unit_ball_coset_cell(3, 3),
                  point_cell(1)]
        for level in (2, 4):
            for tower in towers:
                fast = _fast_domain_filter(tower, ctx, level)
                assert fast is not None
                for r in range(p**level):
                    assert fast(r) == membership(tower, (r,), ctx, level)


def test_stabilization_constant():
    assert stabilization_check([Fraction(1)] * 4, [3, 4, 5, 6], C5) is True


def test_stabilization_riemann_norm():
    values = [riemann_integrate(parse_expr("norm(x1)"), 1, m, C5).value
              for m in range(3, 8)]
    assert stabilization_check(values, list(range(3, 8)), C5) is True


def test_stabilization_divergent():
    # int |t|^{-1}: partial sums grow by (1 - 1/p) per level
    values = [riemann_integrate(parse_expr("norm(x1)^{-1/1}"), 1, m, C5).value
              for m in range(4, 9)]
    diffs = [values[i + 1] - values[i] for i in range(len(values) - 1)]
    assert all(d == 1 - Fraction(1, 5) for d in diffs)
    assert stabilization_check(values, list(range(4, 9)), C5) is False
