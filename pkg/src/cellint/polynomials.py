"""Multivariate polynomials over Q in the variables x1, x2, ...

Canonical sparse form: a map from exponent vectors to nonzero rational
coefficients.  The variable order x1 < x2 < ... is fixed globally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence


def _pad(exps: tuple[int, ...], arity: int) -> tuple[int, ...]:
    return exps + (0,) * (arity - len(exps))


@dataclass(frozen=True)
class Polynomial:
    arity: int
    terms: tuple[tuple[tuple[int, ...], Fraction], ...] = field(default=())

    @staticmethod
    def make(arity: int, coeffs: dict[tuple[int, ...], Fraction]) -> "Polynomial":
        """Canonical form: zero coefficients dropped, arity trimmed to the
        variables actually referenced (so printing is faithful)."""
        clean = {_pad(e, arity): Fraction(c) for e, c in coeffs.items() if c != 0}
        used = 0
        for e in clean:
            for i, v in enumerate(e):
                if v:
                    used = max(used, i + 1)
        trimmed = {e[:used]: c for e, c in clean.items()}
        return Polynomial(used, tuple(sorted(trimmed.items(), reverse=True)))

    @classmethod
    def constant(cls, c, arity: int = 0) -> "Polynomial":
        return cls.make(arity, {(0,) * arity: Fraction(c)})

    @classmethod
    def variable(cls, index: int, arity: int | None = None) -> "Polynomial":
        """The variable x{index+1}."""
        n = index + 1 if arity is None else arity
        e = tuple(1 if i == index else 0 for i in range(n))
        return cls.make(n, {e: Fraction(1)})

    # -- algebra -----------------------------------------------------------

    def _aligned(self, other: "Polynomial") -> tuple[int, dict, dict]:
        n = max(self.arity, other.arity)
        a = {_pad(e, n): c for e, c in self.terms}
        b = {_pad(e, n): c for e, c in other.terms}
        return n, a, b

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n, a, b = self._aligned(other)
        for e, c in b.items():
            a[e] = a.get(e, Fraction(0)) + c
        return Polynomial.make(n, a)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.arity, tuple((e, -c) for e, c in self.terms))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        n, a, b = self._aligned(other)
        acc: dict[tuple[int, ...], Fraction] = {}
        for e1, c1 in a.items():
            for e2, c2 in b.items():
                e = tuple(i + j for i, j in zip(e1, e2))
                acc[e] = acc.get(e, Fraction(0)) + c1 * c2
        return Polynomial.make(n, acc)

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative polynomial power")
        out = Polynomial.constant(1, self.arity)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def scale(self, q) -> "Polynomial":
        q = Fraction(q)
        if q == 0:
            return Polynomial.make(self.arity, {})
        return Polynomial(self.arity, tuple((e, c * q) for e, c in self.terms))

    def derivative(self, index: int) -> "Polynomial":
        acc: dict[tuple[int, ...], Fraction] = {}
        for e, c in self.terms:
            if index < len(e) and e[index] > 0:
                de = tuple(v - 1 if i == index else v for i, v in enumerate(e))
                acc[de] = acc.get(de, Fraction(0)) + c * e[index]
        return Polynomial.make(self.arity, acc)

    # -- queries -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(all(v == 0 for v in e) for e, _ in self.terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return self.terms[0][1] if self.terms else Fraction(0)

    def max_variable(self) -> int:
        """Number of leading variables actually referenced."""
        best = 0
        for e, _ in self.terms:
            for i, v in enumerate(e):
                if v:
                    best = max(best, i + 1)
        return best

    def eval(self, point: Sequence) -> Fraction:
        if len(point) < self.arity:
            raise ValueError(f"point has {len(point)} coordinates, need {self.arity}")
        pt = [Fraction(x) for x in point]
        total = Fraction(0)
        for e, c in self.terms:
            term = c
            for x, k in zip(pt, e):
                if k:
                    term *= x**k
            total += term
        return total

    def cleared(self) -> tuple[tuple[tuple[tuple[int, ...], int], ...], int]:
        """Integer-coefficient view: (terms, denom) with self = terms/denom."""
        denom = lcm(1, *(c.denominator for _, c in self.terms))
        items = tuple((e, int(c * denom)) for e, c in self.terms)
        return items, denom

    def __str__(self) -> str:
        return format_poly(self)


def eval_int_terms(terms: Iterable[tuple[tuple[int, ...], int]], point: Sequence[int]) -> int:
    """Evaluate an integer-coefficient term list at an integer point."""
    total = 0
    for e, c in terms:
        term = c
        for x, k in zip(point, e):
            if k:
                term *= x**k
        total += term
    return total


def format_poly(poly: Polynomial) -> str:
    """Deterministic rendering that round-trips through the DSL parser."""
    if not poly.terms:
        return "0"
    parts: list[str] = []
    for e, c in poly.terms:
        factors = [f"x{i + 1}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k]
        mag = abs(c)
        if not factors:
            body = str(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = "*".join([str(mag)] + factors)
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if c > 0 else f"- {body}")
    return " ".join(parts)
