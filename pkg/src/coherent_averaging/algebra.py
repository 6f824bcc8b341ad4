"""Sparse polynomials over the rationals and a case-splitting system solver.

The solver targets the low-degree (mostly bilinear) systems produced by
coherence requirements.  Every branch keeps an equivalent system:

* echelon reduction of the equations, with monomials ordered so that rows
  living entirely in a chosen block of monomials surface as a basis;
* linear rows are used to eliminate a variable by substitution;
* rows divisible by a variable ``v`` are divided when ``v`` is known to be
  nonzero, otherwise the branch splits into ``v = 0`` and ``v != 0``;
* univariate rows are solved by the rational root test.

A branch that can make no progress is reported as inconclusive rather than
guessed at.
"""

from __future__ import annotations

import math
import numbers
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

Monomial = tuple  # sorted variable names, repeated for powers


class Poly:
    """Polynomial with ``Fraction`` coefficients keyed by monomial."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, object] | None = None):
        clean: dict = {}
        for m, c in (terms or {}).items():
            c = Fraction(c)
            if c:
                m = tuple(sorted(m))
                c = clean.get(m, 0) + c
                if c:
                    clean[m] = c
                else:
                    clean.pop(m, None)
        self.terms = clean

    @classmethod
    def _raw(cls, terms: dict) -> "Poly":
        p = cls.__new__(cls)
        p.terms = terms
        return p

    @classmethod
    def var(cls, name: str) -> "Poly":
        return cls._raw({(name,): Fraction(1)})

    @classmethod
    def const(cls, value) -> "Poly":
        value = Fraction(value)
        return cls._raw({(): value} if value else {})

    @staticmethod
    def coerce(value) -> "Poly":
        return value if isinstance(value, Poly) else Poly.const(value)

    @staticmethod
    def _scalar(value) -> bool:
        return isinstance(value, (numbers.Rational, Poly))

    # -- arithmetic --

    def __add__(self, other):
        if not Poly._scalar(other):
            return NotImplemented
        other = Poly.coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return Poly._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if not Poly._scalar(other):
            return NotImplemented
        return self + (-Poly.coerce(other))

    def __rsub__(self, other):
        return Poly.coerce(other) - self

    def __mul__(self, other):
        if not Poly._scalar(other):
            return NotImplemented
        if not isinstance(other, Poly):
            other = Fraction(other)
            if not other:
                return Poly()
            return Poly._raw({m: c * other for m, c in self.terms.items()})
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(sorted(m1 + m2))
                s = out.get(m, 0) + c1 * c2
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        return Poly._raw(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / Fraction(other))

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        try:
            other = Poly.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.terms == other.terms

    __hash__ = None

    # -- inspection --

    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=-1)

    def variables(self) -> set[str]:
        return {v for m in self.terms for v in m}

    def is_constant(self) -> bool:
        return all(not m for m in self.terms)

    def constant(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def coefficient(self, monomial: Monomial) -> Fraction:
        return self.terms.get(tuple(sorted(monomial)), Fraction(0))

    def common_variables(self) -> set[str]:
        """Variables dividing every term."""
        it = iter(self.terms)
        try:
            common = set(next(it))
        except StopIteration:
            return set()
        for m in it:
            common &= set(m)
        return common

    def divide_variable(self, v: str) -> "Poly":
        out = {}
        for m, c in self.terms.items():
            lst = list(m)
            lst.remove(v)
            out[tuple(lst)] = c
        return Poly._raw(out)

    def subs(self, mapping: Mapping[str, object]) -> "Poly":
        if not any(v in mapping for v in self.variables()):
            return self
        out = Poly()
        for m, c in self.terms.items():
            term = Poly.const(c)
            rest = []
            for v in m:
                if v in mapping:
                    term = term * Poly.coerce(mapping[v])
                else:
                    rest.append(v)
            out = out + term * Poly._raw({tuple(rest): Fraction(1)})
        return out

    def evaluate(self, values: Mapping[str, object]) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms.items():
            term = c
            for v in m:
                term *= Fraction(values[v])
            total += term
        return total

    def primitive(self) -> "Poly":
        """Scaled so the leading coefficient (in sorted monomial order) is 1."""
        if not self.terms:
            return self
        lead = self.terms[min(self.terms, key=_degree_first)]
        return self / lead

    def __repr__(self):
        return f"Poly({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=_degree_first):
            c = self.terms[m]
            body = "*".join(_power_string(m))
            if not body:
                txt = str(abs(c))
            elif abs(c) == 1:
                txt = body
            else:
                txt = f"{abs(c)}*{body}"
            parts.append(("-" if c < 0 else "+", txt))
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, txt in parts[1:]:
            out += f" {sign} {txt}"
        return out


def _power_string(m: Monomial) -> list[str]:
    out = []
    i = 0
    while i < len(m):
        j = i
        while j < len(m) and m[j] == m[i]:
            j += 1
        out.append(m[i] if j - i == 1 else f"{m[i]}^{j - i}")
        i = j
    return out


def _degree_first(m: Monomial):
    return (-len(m), m)


# -- echelon reduction ---------------------------------------------------------


def echelon(polys: Iterable[Poly], key: Callable[[Monomial], object]) -> list[Poly]:
    """Echelon basis of the span of ``polys``; each row's ``key``-least monomial is distinct.

    If ``key`` sorts a block of monomials last, the rows whose leading
    monomial lies in that block form a basis of the subspace of
    combinations supported on that block alone.
    """
    pivots: dict[Monomial, dict] = {}
    order: list[Monomial] = []
    for p in polys:
        row = dict(p.terms)
        while row:
            lead = min(row, key=key)
            prow = pivots.get(lead)
            if prow is None:
                c = row[lead]
                row = {m: v / c for m, v in row.items()}
                pivots[lead] = row
                order.append(lead)
                break
            c = row[lead]
            for m, v in prow.items():
                s = row.get(m, 0) - c * v
                if s:
                    row[m] = s
                else:
                    row.pop(m, None)
    return [Poly._raw(pivots[m]) for m in order]


def rational_roots(p: Poly) -> tuple[list[Fraction], Poly]:
    """Rational roots of a univariate polynomial and the cofactor left after removing them."""
    (v,) = p.variables()
    deg = p.degree()
    coeffs = [p.coefficient((v,) * k) for k in range(deg + 1)]
    lcm = 1
    for c in coeffs:
        lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
    ints = [int(c * lcm) for c in coeffs]
    roots: list[Fraction] = []
    while len(ints) > 1 and ints[0] == 0:
        roots.append(Fraction(0))
        ints = ints[1:]
    found = True
    while found and len(ints) > 1:
        found = False
        for cand in _candidates(ints[0], ints[-1]):
            if _horner(ints, cand) == 0:
                roots.append(cand)
                ints = _integral(_deflate(ints, cand))
                found = True
                break
    rest = Poly({(v,) * k: c for k, c in enumerate(ints)})
    return sorted(set(roots)), rest


def _integral(coeffs: Sequence) -> list[int]:
    coeffs = [Fraction(c) for c in coeffs]
    lcm = 1
    for c in coeffs:
        lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
    return [int(c * lcm) for c in coeffs]


def _divisors(n: int) -> list[int]:
    n = abs(n)
    out = set()
    for k in range(1, math.isqrt(n) + 1):
        if n % k == 0:
            out.update((k, n // k))
    return sorted(out)


def _candidates(const: int, lead: int) -> list[Fraction]:
    out = set()
    for p in _divisors(const):
        for q in _divisors(lead):
            out.add(Fraction(p, q))
            out.add(Fraction(-p, q))
    return sorted(out, key=lambda f: (abs(f), f))


def _horner(ints: Sequence, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(ints):
        acc = acc * x + c
    return acc


def _deflate(ints: Sequence, root: Fraction) -> list:
    # synthetic division by (v - root), coefficients low -> high
    high = list(reversed(ints))
    out = [high[0]]
    for c in high[1:-1]:
        out.append(c + out[-1] * root)
    return list(reversed(out))


# -- system solving ------------------------------------------------------------


@dataclass
class Solution:
    """One branch's solution set: every variable as a polynomial in the free ones."""

    values: dict[str, Poly]
    free: tuple[str, ...]
    conditions: tuple[str, ...]
    nonzero: tuple[Poly, ...] = ()

    @property
    def is_point(self) -> bool:
        return not self.free

    def point(self) -> dict[str, Fraction]:
        if self.free:
            raise ValueError(f"solution has free parameters {self.free}")
        return {v: p.constant() for v, p in self.values.items()}


@dataclass
class Inconclusive:
    reason: str
    equations: list[Poly]
    conditions: tuple[str, ...]


@dataclass
class SolveResult:
    solutions: list[Solution] = field(default_factory=list)
    inconclusive: list[Inconclusive] = field(default_factory=list)
    branches: int = 0
    dead_branches: int = 0

    @property
    def complete(self) -> bool:
        return not self.inconclusive


@dataclass
class _State:
    equations: list[Poly]
    assignment: dict[str, Poly]
    nonzero_vars: set[str]
    nonzero_polys: list[Poly]
    conditions: list[str]

    def fork(self) -> "_State":
        return _State(list(self.equations), dict(self.assignment), set(self.nonzero_vars),
                      list(self.nonzero_polys), list(self.conditions))


class _Dead(Exception):
    pass


def _block_key(block: Callable[[Monomial], int]):
    return lambda m: (block(m), -len(m), m)


def _substitute(state: _State, v: str, value: Poly) -> None:
    mapping = {v: value}
    state.assignment = {k: p.subs(mapping) for k, p in state.assignment.items()}
    state.assignment[v] = value
    state.equations = [e.subs(mapping) for e in state.equations]
    if v in state.nonzero_vars:
        state.nonzero_vars.discard(v)
        state.nonzero_polys.append(value)
    state.nonzero_polys = [p.subs(mapping) for p in state.nonzero_polys]
    kept = []
    for p in state.nonzero_polys:
        if p.is_constant():
            if not p:
                raise _Dead
            continue
        if len(p.terms) == 1:
            # c * monomial != 0 marks every variable in it nonzero
            state.nonzero_vars.update(p.variables())
            continue
        kept.append(p)
    state.nonzero_polys = kept


def _reduce(state: _State) -> None:
    """Echelonize and add quotients of rows divisible by a nonzero variable.

    Rows are never dropped, so the span only grows; the loop stops once no
    quotient raises its dimension.
    """
    eqs = echelon([e for e in state.equations if e], _block_key(lambda m: 0))
    changed = True
    while changed:
        changed = False
        for e in eqs:
            if e.is_constant():
                raise _Dead
        for v in sorted(state.nonzero_vars):
            if not any(v in m for e in eqs for m in e.terms):
                continue
            basis = echelon(eqs, _block_key(lambda m, v=v: 1 if v in m else 0))
            quotients = [b.divide_variable(v) for b in basis if all(v in m for m in b.terms)]
            if not quotients:
                continue
            grown = echelon(eqs + quotients, _block_key(lambda m: 0))
            if len(grown) > len(eqs):
                eqs = grown
                changed = True
                break
    state.equations = eqs


def solve_system(
    equations: Iterable[Poly],
    variables: Sequence[str],
    nonzero: Iterable[str] = (),
    *,
    max_branches: int = 2000,
    time_limit: float | None = None,
) -> SolveResult:
    """All rational solutions of ``equations = 0`` with ``nonzero`` variables forced nonzero."""
    variables = list(variables)
    start = _State(
        [Poly.coerce(e) for e in equations],
        {},
        set(nonzero),
        [],
        [f"{v} != 0" for v in nonzero],
    )
    result = SolveResult()
    stack = [start]
    deadline = None if time_limit is None else time.monotonic() + time_limit
    while stack:
        state = stack.pop()
        if result.branches >= max_branches or (deadline is not None and time.monotonic() > deadline):
            result.inconclusive.append(Inconclusive("branch budget exhausted", state.equations, tuple(state.conditions)))
            continue
        result.branches += 1
        try:
            children = _advance(state, result, variables)
        except _Dead:
            result.dead_branches += 1
            continue
        stack.extend(reversed(children))
    return result


def _advance(state: _State, result: SolveResult, variables: Sequence[str]) -> list[_State]:
    while True:
        _reduce(state)
        eqs = state.equations
        if not eqs:
            free = tuple(v for v in variables if v not in state.assignment)
            values = {v: state.assignment.get(v, Poly.var(v)) for v in variables}
            result.solutions.append(
                Solution(values, free, tuple(state.conditions), tuple(state.nonzero_polys))
            )
            return []
        linear = [e for e in eqs if e.degree() == 1]
        if linear:
            e = linear[0]
            vs = sorted(e.variables(), key=lambda v: (v in state.nonzero_vars, v))
            v = vs[0]
            coef = e.coefficient((v,))
            value = (Poly.var(v) - e / coef).subs({v: 0})
            _substitute(state, v, value)
            continue
        # split on a variable factor
        candidates = sorted({v for e in eqs for v in e.common_variables()} - state.nonzero_vars)
        if not candidates:
            candidates = _hidden_factors(eqs, state)
        if candidates:
            return _split(state, candidates[0])
        for e in eqs:
            if len(e.variables()) == 1:
                roots, rest = rational_roots(e)
                (v,) = e.variables()
                children = []
                for root in roots:
                    child = state.fork()
                    child.conditions.append(f"{v} = {root}")
                    try:
                        _substitute(child, v, Poly.const(root))
                    except _Dead:
                        continue
                    children.append(child)
                if rest.degree() >= 1:
                    result.inconclusive.append(
                        Inconclusive(f"irrational roots of {rest}", eqs, tuple(state.conditions))
                    )
                return children
        pool = sorted(
            {v for e in eqs for v in e.variables()} - state.nonzero_vars,
            key=lambda v: (-sum(v in e.variables() for e in eqs), v),
        )
        if pool:
            return _split(state, pool[0])
        result.inconclusive.append(Inconclusive("no elimination step applies", eqs, tuple(state.conditions)))
        return []


def _hidden_factors(eqs: list[Poly], state: _State) -> list[str]:
    """Unknown-sign variables dividing some nonzero combination of the equations."""
    out = []
    for v in sorted({v for e in eqs for v in e.variables()} - state.nonzero_vars):
        basis = echelon(eqs, _block_key(lambda m, v=v: 1 if v in m else 0))
        if any(all(v in m for m in b.terms) and b.degree() > 1 for b in basis):
            out.append(v)
    return out


def _split(state: _State, v: str) -> list[_State]:
    zero = state.fork()
    zero.conditions.append(f"{v} = 0")
    children = []
    try:
        _substitute(zero, v, Poly())
        children.append(zero)
    except _Dead:
        pass
    nonzero = state.fork()
    nonzero.conditions.append(f"{v} != 0")
    nonzero.nonzero_vars.add(v)
    children.append(nonzero)
    return children
