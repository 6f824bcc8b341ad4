"""Exact coherence checks for averaging families.

A family is coherent when coarsening by ``d`` and then by ``e`` equals
coarsening by ``e * d`` in one step.  Because operators are stencils this is
a finite identity between exact rational weights.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .engine import apply, compose
from .errors import AdmissibilityError, RangeError
from .lattice import CellField, Convention, as_convention, format_number
from .schemes import SchemeFamily, box_low, box_width


@dataclass(frozen=True)
class DecompositionSolutions:
    """All ``(r, t)`` with ``r * d + t = i`` and ``r``, ``t`` in their support ranges."""

    i: int
    d: int
    e: int
    convention: Convention
    solutions: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.solutions)


def enumerate_decompositions(i: int, d: int, e: int, convention=Convention.CENTERED) -> DecompositionSolutions:
    convention = as_convention(convention)
    if d < 1 or e < 1:
        raise RangeError("factors must be >= 1")
    lo_out = box_low(e * d, convention)
    if not lo_out <= i <= lo_out + box_width(e * d, convention) - 1:
        raise RangeError(f"offset {i} outside the support of factor {e * d}")
    lo_r, lo_t = box_low(e, convention), box_low(d, convention)
    sols = []
    for r in range(lo_r, lo_r + box_width(e, convention)):
        t = i - r * d
        if lo_t <= t <= lo_t + box_width(d, convention) - 1:
            sols.append((r, t))
    return DecompositionSolutions(i, d, e, convention, tuple(sols))


def decomposition_case(i: int, d: int, e: int) -> str:
    """Which of the three centered cases ``i`` falls in: ``"i"``, ``"ii"`` or ``"iii"``.

    ``"i"``: beyond the last multiple of ``d`` (one solution), ``"ii"``: a
    multiple of ``d`` (one solution), ``"iii"``: strictly inside and not a
    multiple (two solutions).
    """
    if abs(i) > d * (e - 1):
        return "i"
    if i % d == 0:
        return "ii"
    return "iii"


def predicted_decompositions(i: int, d: int, e: int) -> tuple[tuple[int, int], ...]:
    """Centered solutions written down case by case, without search."""
    case = decomposition_case(i, d, e)
    if case == "i":
        return ((e - 1, i - d * (e - 1)),) if i > 0 else ((-(e - 1), i + (e - 1) * d),)
    if case == "ii":
        return ((i // d, 0),)
    q, p = divmod(i, d)
    return ((q, p), (q + 1, p - d))


@dataclass
class WeightIdentityReport:
    d: int
    e: int
    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_weight_identity(d: int, e: int) -> WeightIdentityReport:
    """Check ``sum (e - |r|)(d - |t|) = ed - |i|`` over centered decompositions of every ``|i| <= ed - 1``."""
    if d < 1 or e < 1:
        raise RangeError("factors must be >= 1")
    report = WeightIdentityReport(d, e)
    for i in range(-(e * d - 1), e * d):
        sols = enumerate_decompositions(i, d, e).solutions
        lhs = sum((e - abs(r)) * (d - abs(t)) for r, t in sols)
        rhs = e * d - abs(i)
        report.checked += 1
        if lhs != rhs:
            report.violations.append((i, lhs, rhs))
    return report


def check_weight_identity_nd(d: int, e: int, dim: int) -> WeightIdentityReport:
    """The ``dim``-dimensional product identity, by enumerating every ``(r, t)`` vector pair."""
    report = WeightIdentityReport(d, e)
    totals: dict[tuple[int, ...], int] = {}
    er, dr = range(-(e - 1), e), range(-(d - 1), d)
    for r in itertools.product(er, repeat=dim):
        for t in itertools.product(dr, repeat=dim):
            i = tuple(rk * d + tk for rk, tk in zip(r, t))
            w = 1
            for rk, tk in zip(r, t):
                w *= (e - abs(rk)) * (d - abs(tk))
            totals[i] = totals.get(i, 0) + w
    for i in itertools.product(range(-(e * d - 1), e * d), repeat=dim):
        rhs = 1
        for ik in i:
            rhs *= e * d - abs(ik)
        report.checked += 1
        if totals.get(i, 0) != rhs:
            report.violations.append((i, totals.get(i, 0), rhs))
    return report


# -- family verification -----------------------------------------------------


@dataclass
class PairResult:
    d: int
    e: int
    discrepancies: list  # (offset, expected, composed)

    @property
    def coherent(self) -> bool:
        return not self.discrepancies

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "e": self.e,
            "coherent": self.coherent,
            "discrepancies": [
                {"offset": list(off), "expected": format_number(exp), "composed": format_number(got)}
                for off, exp, got in self.discrepancies
            ],
        }


@dataclass
class CoherenceReport:
    family: str
    dim: int
    convention: Convention
    pairs: list[PairResult] = field(default_factory=list)

    @property
    def coherent(self) -> bool:
        return all(p.coherent for p in self.pairs)

    @property
    def discrepancies(self) -> list:
        return [(p.d, p.e, off, exp, got) for p in self.pairs for off, exp, got in p.discrepancies]

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "dimension": self.dim,
            "convention": self.convention.value,
            "coherent": self.coherent,
            "pairs": [p.to_dict() for p in self.pairs],
        }


def factor_pairs(max_factor: int, family: SchemeFamily | None = None, min_factor: int = 1) -> list[tuple[int, int]]:
    """All ordered ``(d, e)`` in ``[min_factor, max_factor]^2`` admissible for ``family``, ``e*d`` included."""
    ok = family.admissible if family is not None else (lambda k: k >= 1)
    return [
        (d, e)
        for d in range(min_factor, max_factor + 1)
        for e in range(min_factor, max_factor + 1)
        if ok(d) and ok(e) and ok(d * e)
    ]


def verify_family_coherence(family: SchemeFamily, pairs: Iterable[tuple[int, int]]) -> CoherenceReport:
    """Compare ``compose(family(e), family(d))`` with ``family(e*d)`` for every pair ``(d, e)``."""
    report = CoherenceReport(family.name, family.dim, family.convention)
    for d, e in pairs:
        for k in (d, e, d * e):
            if not family.admissible(k):
                raise AdmissibilityError(f"factor {k} is not admissible for family {family.name!r}")
        composed = compose(family(e), family(d))
        expected = family(e * d)
        report.pairs.append(PairResult(d, e, expected.differences(composed)))
    return report


def field_coherence_error(family: SchemeFamily, d: int, e: int, rng: np.random.Generator, margin: int = 2) -> float:
    """Max relative deviation between two-step and one-step coarsening of a random float field.

    The field has entries in ``[-1, 1]`` and is just wide enough for a few
    coarse cells.  This guards the floating application path; exactness is
    checked on stencils.
    """
    ed = e * d
    lo = box_low(ed, family.convention)
    width = box_width(ed, family.convention) + ed * margin
    values = rng.uniform(-1.0, 1.0, size=(width,) * family.dim)
    f = CellField(values, convention=family.convention, origin=(lo,) * family.dim)
    two_step = apply(family(e), apply(family(d), f))
    one_step = apply(family(ed), f)
    if two_step.origin != one_step.origin or two_step.shape != one_step.shape:
        raise AssertionError("two-step and one-step extents differ")
    scale = max(1.0, float(np.max(np.abs(one_step.values))))
    return float(np.max(np.abs(two_step.values - one_step.values))) / scale
