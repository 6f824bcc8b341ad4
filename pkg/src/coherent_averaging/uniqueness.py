"""Solving for every coherent family of weights under symmetry and genericity.

The unknown weights of two factors ``d`` and ``e`` enter the coherence
requirement ``A_e o A_d = A_d o A_e`` bilinearly.  The pipeline is:

1. derive the constraint system for the pair ``(2, 3)`` from symbolic
   stencils, with a declared symmetry collapsing offsets to orbits;
2. solve it exactly by case splitting (``algebra.solve_system``);
3. for each solution branch, solve for the weights of every larger factor
   from the (now linear) commutation with factors 2 and 3, falling back on
   composition of known factors when that is not enough;
4. recognize the resulting tables as a closed-form catalogue family and
   re-verify coherence of that family.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .algebra import Poly, SolveResult, solve_system
from .coherence import CoherenceReport, verify_family_coherence
from .engine import compose, compose_arrays
from .errors import ConventionError, RangeError
from .lattice import Convention, as_convention, format_number
from .schemes import (
    SchemeFamily,
    WeightStencil,
    box_low,
    box_offsets,
    box_width,
    get_family,
)


class Symmetry(str, enum.Enum):
    NONE = "none"
    SIGN_1D = "sign"
    SQUARE_2D = "square"
    HYPEROCTAHEDRAL = "hyperoctahedral"


def _check_symmetry(symmetry: Symmetry, dim: int, convention: Convention) -> None:
    if symmetry is Symmetry.NONE:
        return
    if convention is not Convention.CENTERED:
        raise ConventionError(f"{symmetry.value} symmetry needs centered labelling")
    if symmetry is Symmetry.SIGN_1D and dim != 1:
        raise RangeError("sign symmetry is one-dimensional")
    if symmetry is Symmetry.SQUARE_2D and dim != 2:
        raise RangeError("square symmetry is two-dimensional")


def canonical_offset(offset: Sequence[int], symmetry: Symmetry) -> tuple[int, ...]:
    if symmetry is Symmetry.NONE:
        return tuple(offset)
    return tuple(sorted(abs(c) for c in offset))


def weight_name(d: int, rep: Sequence[int]) -> str:
    return f"w{d}[{','.join(str(c) for c in rep)}]"


def orbits(d: int, dim: int, convention, symmetry) -> dict[tuple[int, ...], list[tuple[int, ...]]]:
    """Orbit representative -> member offsets, for the support box of factor ``d``."""
    convention, symmetry = as_convention(convention), Symmetry(symmetry)
    out: dict = {}
    for off in box_offsets(d, dim, convention):
        out.setdefault(canonical_offset(off, symmetry), []).append(off)
    return dict(sorted(out.items()))


@dataclass
class SymbolicStencil:
    d: int
    dim: int
    convention: Convention
    array: np.ndarray  # object array of Poly over the support box
    unknowns: list[str]
    normalization: Poly | None  # sum of weights minus one, unless built in

    def evaluate(self, values: Mapping[str, object]) -> WeightStencil:
        weights = {}
        lo = box_low(self.d, self.convention)
        for idx, p in np.ndenumerate(self.array):
            weights[tuple(i + lo for i in idx)] = Poly.coerce(p).evaluate(values)
        return WeightStencil.from_weights(self.d, self.dim, self.convention, weights, normalized=False)


def symbolic_stencil(d: int, dim: int, convention, symmetry, eliminate_center: bool = False) -> SymbolicStencil:
    """Stencil whose weights are unknowns, one per symmetry orbit.

    With ``eliminate_center`` the central weight is written as one minus the
    others, so normalization holds identically.
    """
    convention, symmetry = as_convention(convention), Symmetry(symmetry)
    _check_symmetry(symmetry, dim, convention)
    width, lo = box_width(d, convention), box_low(d, convention)
    arr = np.empty((width,) * dim, dtype=object)
    if d == 1:
        arr[(0,) * dim] = Poly.const(1)
        return SymbolicStencil(d, dim, convention, arr, [], None)
    orbs = orbits(d, dim, convention, symmetry)
    center = (0,) * dim
    names = {rep: weight_name(d, rep) for rep in orbs}
    values = {rep: Poly.var(n) for rep, n in names.items()}
    unknowns = list(names.values())
    if eliminate_center:
        if convention is not Convention.CENTERED or symmetry is Symmetry.NONE:
            raise RangeError("the center can only be eliminated for symmetric centered stencils")
        others = Poly.const(1)
        for rep, members in orbs.items():
            if rep != center:
                others = others - len(members) * values[rep]
        values[center] = others
        unknowns.remove(names[center])
    total = Poly()
    for rep, members in orbs.items():
        for off in members:
            arr[tuple(c - lo for c in off)] = values[rep]
            total = total + values[rep]
    normalization = None if eliminate_center else total - 1
    return SymbolicStencil(d, dim, convention, arr, unknowns, normalization)


def _known_array(stencil: WeightStencil) -> np.ndarray:
    arr = np.empty(stencil.shape, dtype=object)
    for idx in np.ndindex(*stencil.shape):
        arr[idx] = Fraction(int(stencil.numerators[idx]), stencil.denominator)
    return arr


@dataclass
class Equation:
    offset: tuple[int, ...] | None
    lhs: Poly
    rhs: Poly
    kind: str = "coherence"

    @property
    def poly(self) -> Poly:
        return self.lhs - self.rhs

    def __str__(self):
        where = f"@{self.offset}" if self.offset is not None else f"[{self.kind}]"
        return f"{where}: {self.lhs} = {self.rhs}"


@dataclass
class ConstraintSystem:
    """Polynomial equations on unknown weights from one coherence requirement."""

    d: int
    e: int
    dim: int
    convention: Convention
    symmetry: Symmetry
    unknowns: list[str]
    equations: list[Equation]
    side_conditions: list[str] = field(default_factory=list)  # variables assumed nonzero
    stencils: dict[int, SymbolicStencil] = field(default_factory=dict)

    def equation_at(self, offset: Sequence[int]) -> Equation:
        offset = tuple(offset)
        for eq in self.equations:
            if eq.offset == offset:
                return eq
        raise KeyError(f"no equation at offset {offset}")

    def polys(self) -> list[Poly]:
        return [eq.poly for eq in self.equations]

    def values_from(self, stencils: Mapping[int, WeightStencil]) -> dict[str, Fraction]:
        """Unknown values read off concrete stencils (each orbit's representative)."""
        out = {}
        for name in self.unknowns:
            k, rest = name[1:].split("[", 1)
            rep = tuple(int(c) for c in rest.rstrip("]").split(","))
            out[name] = stencils[int(k)].weight(rep)
        return out

    def residuals(self, values: Mapping[str, object]) -> list[tuple[Equation, Fraction]]:
        """Equations not satisfied by ``values``, with their residuals."""
        bad = []
        for eq in self.equations:
            r = eq.poly.evaluate(values)
            if r:
                bad.append((eq, r))
        return bad

    def solve(self, **kwargs) -> SolveResult:
        return solve_system(self.polys(), self.unknowns, self.side_conditions, **kwargs)


def derive_constraints(
    d: int,
    e: int,
    dim: int = 1,
    convention=Convention.CENTERED,
    symmetry=Symmetry.NONE,
    *,
    known: Mapping[int, WeightStencil] | None = None,
    eliminate_center: bool | None = None,
    nonzero: Iterable[str] = (),
) -> ConstraintSystem:
    """Equations ``(A_e o A_d)(i) = (A_d o A_e)(i)`` for every canonical offset ``i``.

    Factors listed in ``known`` enter with fixed weights; the others are
    symbolic.  Normalization equations are appended for every symbolic
    stencil that does not build it in.
    """
    convention, symmetry = as_convention(convention), Symmetry(symmetry)
    _check_symmetry(symmetry, dim, convention)
    if eliminate_center is None:
        eliminate_center = symmetry is Symmetry.SIGN_1D
    known = dict(known or {})
    arrays, stencils, unknowns = {}, {}, []
    for k in dict.fromkeys((d, e)):
        if k in known:
            st = known[k]
            if st.d != k or st.dim != dim or st.convention is not convention:
                raise RangeError(f"known stencil for factor {k} has the wrong layout")
            arrays[k] = _known_array(st)
        else:
            sym = symbolic_stencil(k, dim, convention, symmetry, eliminate_center)
            arrays[k] = sym.array
            stencils[k] = sym
            unknowns.extend(sym.unknowns)
    lhs = compose_arrays(arrays[e], e, arrays[d], d, convention)
    rhs = compose_arrays(arrays[d], d, arrays[e], e, convention)
    lo = box_low(d * e, convention)
    equations = []
    for idx in np.ndindex(*lhs.shape):
        off = tuple(i + lo for i in idx)
        if canonical_offset(off, symmetry) != off:
            continue
        equations.append(Equation(off, Poly.coerce(lhs[idx]), Poly.coerce(rhs[idx])))
    for k, sym in stencils.items():
        if sym.normalization is not None:
            equations.append(Equation(None, sym.normalization + 1, Poly.const(1), kind=f"normalization w{k}"))
    return ConstraintSystem(d, e, dim, convention, symmetry, unknowns, equations, list(nonzero), stencils)


# -- families ----------------------------------------------------------------


@dataclass
class SolutionFamily:
    """One coherent family found by a solver, with the tables it was read from."""

    name: str
    tables: dict[int, WeightStencil]
    branch_conditions: tuple[str, ...]
    methods: dict[int, str]
    base_values: dict[str, Fraction]
    family: SchemeFamily | None = None
    coherence: CoherenceReport | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def recognized(self) -> bool:
        return self.family is not None

    @property
    def verified(self) -> bool:
        return self.coherence is not None and self.coherence.coherent

    def assignment(self, d: int) -> WeightStencil:
        """Closed-form weights for factor ``d`` (or the solved table if unrecognized)."""
        if self.family is not None:
            return self.family(d)
        return self.tables[d]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "branch_conditions": list(self.branch_conditions),
            "recognized": self.recognized,
            "coherence_verified": self.verified,
            "base_values": {k: format_number(v) for k, v in self.base_values.items()},
            "methods": {str(k): v for k, v in sorted(self.methods.items())},
            "weights": {str(k): stencil_to_dict(st) for k, st in sorted(self.tables.items())},
            "notes": list(self.notes),
        }


def stencil_to_dict(st: WeightStencil) -> dict[str, str]:
    return {",".join(str(c) for c in off): format_number(w) for off, w in st.nonzero_weights().items()}


@dataclass
class UniquenessResult:
    setting: dict
    families: list[SolutionFamily]
    base_system: ConstraintSystem
    base_result: SolveResult
    inconclusive: list[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.inconclusive

    def family_names(self) -> list[str]:
        return [f.name for f in self.families]

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "complete": self.complete,
            "families": [f.to_dict() for f in self.families],
            "inconclusive": list(self.inconclusive),
            "branches_explored": self.base_result.branches,
        }


def _candidates(dim: int, convention: Convention, factorized_1d: bool) -> list[SchemeFamily]:
    if convention is Convention.CENTERED:
        names = ["bf", "parity", "centered-delta"]
        if dim == 2 and not factorized_1d:
            names.append("rotated-parity")
    else:
        names = ["uniform", "lower-left", "corner-ne", "diagonal"]
        if dim == 2:
            names += ["corner-nw", "corner-se", "antidiagonal", "edge-south", "edge-north", "edge-west", "edge-east"]
        names.append("central")
    return [get_family(n, 1 if factorized_1d else dim) for n in names]


def _recognize(tables: Mapping[int, WeightStencil], candidates: Sequence[SchemeFamily]) -> SchemeFamily | None:
    for fam in candidates:
        if all(fam.admissible(d) and fam(d) == st for d, st in tables.items()):
            return fam
    return None


def _verification_pairs(family: SchemeFamily, max_product: int) -> list[tuple[int, int]]:
    return [
        (d, e)
        for d in range(2, max_product + 1)
        for e in range(2, max_product // d + 1)
        if family.admissible(d) and family.admissible(e) and family.admissible(d * e)
    ]


def _is_prime(n: int) -> bool:
    return n >= 2 and all(n % p for p in range(2, math.isqrt(n) + 1))


def _extend(
    tables: dict[int, WeightStencil],
    d: int,
    dim: int,
    convention: Convention,
    symmetry: Symmetry,
    eliminate_center: bool,
) -> tuple[WeightStencil | None, str]:
    """Weights for factor ``d`` given the tables of smaller factors."""
    anchors = [k for k in (2, 3) if k in tables and k != d]
    polys, unknowns = [], None
    for k in anchors:
        system = derive_constraints(k, d, dim, convention, symmetry, known={k: tables[k]},
                                    eliminate_center=eliminate_center)
        polys.extend(system.polys())
        unknowns = system.unknowns
    sym = symbolic_stencil(d, dim, convention, symmetry, eliminate_center)
    result = solve_system(polys, unknowns, max_branches=50)
    points = [s for s in result.solutions if s.is_point]
    composite = next(((a, d // a) for a in range(2, math.isqrt(d) + 1) if d % a == 0), None)
    composed = None
    if composite is not None and composite[0] in tables and composite[1] in tables:
        composed = compose(tables[composite[1]], tables[composite[0]])
    if len(points) == 1 and result.complete and len(result.solutions) == 1:
        solved = sym.evaluate(points[0].point())
        if composed is not None and composed != solved:
            return None, "commutation solution disagrees with composition"
        return solved, "unique solution of commutation with " + " and ".join(f"A{k}" for k in anchors)
    if not result.solutions and result.complete:
        return None, "commutation constraints have no solution"
    if composed is not None:
        values = {}
        for name in unknowns:
            rep = tuple(int(c) for c in name.split("[", 1)[1].rstrip("]").split(","))
            values[name] = composed.weight(rep)
        if any(p.evaluate(values) for p in polys):
            return None, "composition violates commutation constraints"
        return composed, f"forced by coherence as composition of factors {composite[1]} and {composite[0]}"
    return None, f"commutation leaves {len(points[0].free) if points else '?'} free parameters"


def _solve_families(
    dim: int,
    convention: Convention,
    symmetry: Symmetry,
    nonzero_base: Sequence[Sequence[int]],
    max_factor: int,
    *,
    eliminate_center: bool = False,
    factorized_1d: bool = False,
    max_branches: int = 2000,
    time_limit: float | None = None,
    verify_up_to: int = 36,
) -> UniquenessResult:
    nonzero = [weight_name(2, rep) for rep in nonzero_base]
    system = derive_constraints(2, 3, dim, convention, symmetry, eliminate_center=eliminate_center, nonzero=nonzero)
    result = system.solve(max_branches=max_branches, time_limit=time_limit)
    setting = {
        "dimension": dim,
        "convention": convention.value,
        "symmetry": symmetry.value,
        "nonzero": nonzero,
        "max_factor": max_factor,
        "factorized": factorized_1d,
    }
    out = UniquenessResult(setting, [], system, result)
    for inc in result.inconclusive:
        out.inconclusive.append(f"base system: {inc.reason} under {', '.join(inc.conditions)}")
    candidates = _candidates(dim, convention, factorized_1d)
    for sol in result.solutions:
        conditions = sol.conditions
        if not sol.is_point:
            out.inconclusive.append(
                f"base system: branch {', '.join(conditions)} leaves free parameters {', '.join(sol.free)}"
            )
            continue
        values = sol.point()
        tables = {1: _identity(dim, convention)}
        for k in (2, 3):
            tables[k] = system.stencils[k].evaluate(values)
        methods = {2: "base system", 3: "base system"}
        notes = []
        for k in (2, 3):
            if tables[k].total() != 1:
                notes.append(f"weights of factor {k} sum to {tables[k].total()}")
        ok = not notes
        for d in range(4, max_factor + 1):
            if not ok:
                break
            stencil, how = _extend(tables, d, dim, convention, symmetry, eliminate_center)
            methods[d] = how
            if stencil is None:
                notes.append(f"factor {d}: {how}")
                if "free parameters" in how:
                    out.inconclusive.append(f"branch {', '.join(conditions)}: factor {d} {how}")
                ok = False
                break
            tables[d] = stencil
        if not ok and not any("free parameters" in n for n in notes):
            # this branch admits no coherent family
            continue
        fam = _recognize({k: v for k, v in tables.items() if k >= 2}, candidates)
        name = fam.name if fam is not None else "unrecognized"
        sf = SolutionFamily(name, tables, conditions, methods, values, fam, notes=notes)
        if fam is not None:
            sf.coherence = verify_family_coherence(fam, _verification_pairs(fam, verify_up_to))
        else:
            table_family = SchemeFamily("solved-tables", dim, convention, tables.__getitem__, tables.__contains__)
            sf.coherence = verify_family_coherence(table_family, _verification_pairs(table_family, max_factor))
        out.families.append(sf)
    return out


def _identity(dim: int, convention: Convention) -> WeightStencil:
    return WeightStencil(1, dim, convention, np.ones((1,) * dim, dtype=np.int64), 1)


def solve_1d_factorized(generic: bool = True, max_factor: int = 12, **kwargs) -> UniquenessResult:
    """Sign-symmetric one-dimensional profiles (products give every dimension).

    With ``generic`` the weight at offset 1 of factor 2 is assumed nonzero.
    """
    return _solve_families(
        1, Convention.CENTERED, Symmetry.SIGN_1D, [(1,)] if generic else [], max_factor,
        eliminate_center=True, factorized_1d=True, **kwargs,
    )


def solve_2d_symmetric(generic: bool = True, max_factor: int = 7, **kwargs) -> UniquenessResult:
    """Planar weights with the full square symmetry; factor-2 orbit weights assumed nonzero."""
    nonzero = [(0, 0), (0, 1), (1, 1)] if generic else []
    return _solve_families(2, Convention.CENTERED, Symmetry.SQUARE_2D, nonzero, max_factor, **kwargs)


def solve_corner(generic: bool = True, max_factor: int = 7, dim: int = 2, **kwargs) -> UniquenessResult:
    """Corner-labelled weights without symmetry; all factor-2 weights assumed nonzero."""
    nonzero = [off for off in box_offsets(2, dim, Convention.CORNER)] if generic else []
    return _solve_families(dim, Convention.CORNER, Symmetry.NONE, nonzero, max_factor, **kwargs)


def induction_milestones(stencil: WeightStencil) -> dict:
    """Check the odd-factor pattern ``w[p-i, p-j] = i*j*w[p-1, p-1]`` and ``w[p-1, p-1] = p^-4``."""
    if stencil.dim != 2 or stencil.convention is not Convention.CENTERED:
        raise RangeError("milestones are stated for planar centered stencils")
    p = stencil.d
    corner = stencil.weight((p - 1, p - 1))
    failures = [
        (i, j)
        for i in range(1, p)
        for j in range(1, p)
        if stencil.weight((p - i, p - j)) != i * j * corner
    ]
    return {
        "p": p,
        "corner_weight": corner,
        "product_pattern_holds": not failures,
        "pattern_failures": failures,
        "corner_is_p_to_minus_4": corner == Fraction(1, p**4),
    }


# -- higher-dimensional probe --------------------------------------------------


def probe_higher_dim_uniqueness(
    dim: int = 3,
    factors: tuple[int, int] = (2, 3),
    *,
    extra_factors: Sequence[int] = (5,),
    time_limit: float = 120.0,
    max_branches: int = 2000,
) -> dict:
    """Search all generic symmetric solutions of the ``factors`` commutation in ``dim`` dimensions.

    Weights are assumed invariant under coordinate permutations and sign
    flips, and every factor-``factors[0]`` orbit weight is assumed nonzero.
    The report states whether the triangular-product weights are the only
    solution found.  It is evidence for the statement, never a proof, and
    reports itself inconclusive when the search does not finish.
    """
    d, e = factors
    symmetry = Symmetry.HYPEROCTAHEDRAL
    orb_d = orbits(d, dim, Convention.CENTERED, symmetry)
    nonzero = [weight_name(d, rep) for rep in orb_d]
    system = derive_constraints(d, e, dim, Convention.CENTERED, symmetry, nonzero=nonzero)
    result = system.solve(max_branches=max_branches, time_limit=time_limit)
    bf_values = system.values_from({k: get_family("bf", dim)(k) for k in (d, e)})
    bf_ok = not system.residuals(bf_values)
    points = [s.point() for s in result.solutions if s.is_point]
    parametric = [s for s in result.solutions if not s.is_point]
    others = [p for p in points if p != bf_values]
    complete = result.complete and not parametric
    extensions = {}
    if complete and points == [bf_values]:
        tables = {k: system.stencils[k].evaluate(bf_values) for k in (d, e)}
        for p in extra_factors:
            st, how = _extend(tables, p, dim, Convention.CENTERED, symmetry, False)
            extensions[str(p)] = {
                "method": how,
                "matches_product_weights": st is not None and st == get_family("bf", dim)(p),
            }
    if not complete:
        status = "inconclusive"
    elif others:
        status = "counterexample"
    elif points == [bf_values]:
        status = "supported"
    else:
        status = "no-solution"
    return {
        "kind": "numerical evidence, not a proof",
        "claim": "symmetric coherent weights in dimension D are the normalized triangular products",
        "dimension": dim,
        "factors": [d, e],
        "orbits": {str(k): [list(rep) for rep in orbits(k, dim, Convention.CENTERED, symmetry)] for k in (d, e)},
        "unknowns": len(system.unknowns),
        "equations": len(system.equations),
        "generic_assumptions": nonzero,
        "product_weights_satisfy_constraints": bf_ok,
        "solutions_found": [{k: format_number(v) for k, v in p.items()} for p in points],
        "unique_solution_is_product_weights": complete and points == [bf_values],
        "extensions": extensions,
        "status": status,
        "complete": complete,
        "branches_explored": result.branches,
        "inconclusive_branches": [i.reason for i in result.inconclusive],
    }
