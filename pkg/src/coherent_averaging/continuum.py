"""Hat-kernel sampling of continuum functions and multiscale towers.

A function ``p`` on ``R^D`` is sampled on the cells of ``L_z`` by pairing it
with the product hat kernel ``prod z^-1 Lam((x_k - c_k) / z)`` centered at
each cell center ``c``, where ``Lam(x) = max(0, 1 - |x|)``.  The two-scale
relation

    Lam(x / d) = sum_{|i| <= d-1} ((d - |i|) / d) Lam(x - i)

makes triangular-weight averaging of the samples at scale ``z`` equal to the
samples at scale ``d z``, so sampled functions are consistent across scales.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .algebra import Poly
from .engine import apply
from .errors import AdmissibilityError, DegreeError, ExtentError, RangeError
from .lattice import CellField, Convention, Scale, as_convention
from .schemes import SchemeFamily, get_family

VARIABLES = ("x", "y", "z", "w")
MAX_DEGREE = 3

# moments of the unit hat kernel: int u^k Lam(u) du
HAT_MOMENTS = (Fraction(1), Fraction(0), Fraction(1, 6), Fraction(0))


def hat(x) -> Fraction:
    x = Fraction(x)
    return max(Fraction(0), 1 - abs(x))


def hat_refinement_check(d: int) -> bool:
    """Check the two-scale relation of the hat kernel for factor ``d``.

    Both sides are piecewise linear with breakpoints at integers and vanish
    outside ``[-d, d]``, so agreement at the integer nodes proves the identity.
    """
    if d < 1:
        raise RangeError(f"factor must be >= 1, got {d}")
    for x in range(-d, d + 1):
        lhs = hat(Fraction(x, d))
        rhs = sum(Fraction(d - abs(i), d) * hat(x - i) for i in range(-(d - 1), d))
        if lhs != rhs:
            return False
    return True


# -- polynomials -----------------------------------------------------------


class SampledPolynomial:
    """Polynomial in ``dim`` variables with rational coefficients and per-axis degree at most 3.

    Coefficients are keyed by exponent tuples.  ``parse`` reads strings such
    as ``"x^2*y - 1/3"`` over the variables ``x, y, z, w``.
    """

    def __init__(self, coefficients: Mapping[Sequence[int], object], dim: int = 1):
        if dim < 1:
            raise RangeError(f"dimension must be >= 1, got {dim}")
        coeffs: dict[tuple[int, ...], Fraction] = {}
        for exps, c in coefficients.items():
            exps = tuple(int(k) for k in exps)
            if len(exps) != dim:
                raise RangeError(f"exponent {exps} does not match dimension {dim}")
            if any(k < 0 for k in exps):
                raise RangeError(f"negative exponent in {exps}")
            if any(k > MAX_DEGREE for k in exps):
                raise DegreeError(f"per-axis degree above {MAX_DEGREE} in monomial {exps}")
            c = Fraction(c)
            if c:
                coeffs[exps] = coeffs.get(exps, Fraction(0)) + c
        self.dim = dim
        self.coefficients = {k: v for k, v in coeffs.items() if v}

    @classmethod
    def parse(cls, text: str, dim: int | None = None) -> "SampledPolynomial":
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError:
            raise RangeError(f"cannot parse polynomial {text!r}") from None
        poly = _to_poly(tree.body)
        used = [VARIABLES.index(v) for v in poly.variables()]
        need = max(used) + 1 if used else 1
        dim = need if dim is None else dim
        if dim < need:
            raise RangeError(f"{text!r} uses {need} variables but dimension is {dim}")
        coeffs = {}
        for mono, c in poly.terms.items():
            exps = [0] * dim
            for v in mono:
                exps[VARIABLES.index(v)] += 1
            coeffs[tuple(exps)] = c
        return cls(coeffs, dim)

    @classmethod
    def monomial(cls, exponents: Sequence[int]) -> "SampledPolynomial":
        return cls({tuple(exponents): 1}, len(exponents))

    def degree(self) -> int:
        return max((sum(e) for e in self.coefficients), default=0)

    def __call__(self, *point):
        total = Fraction(0)
        for exps, c in self.coefficients.items():
            term = c
            for x, k in zip(point, exps):
                term *= Fraction(x) ** k
            total += term
        return total

    def hat_average(self, center: Sequence, z) -> Fraction:
        """Exact pairing with the hat kernel of width ``z`` centered at ``center``."""
        z = Fraction(z)
        total = Fraction(0)
        for exps, c in self.coefficients.items():
            term = c
            for ck, n in zip(center, exps):
                term *= _shifted_moment(Fraction(ck), z, n)
            total += term
        return total

    def __str__(self) -> str:
        if not self.coefficients:
            return "0"
        parts = []
        for exps in sorted(self.coefficients, reverse=True):
            factors = [f"{v}^{k}" if k > 1 else v for v, k in zip(VARIABLES, exps) if k]
            c = self.coefficients[exps]
            parts.append("*".join([str(c)] * (c != 1 or not factors) + factors))
        return " + ".join(parts)


def _shifted_moment(c: Fraction, z: Fraction, n: int) -> Fraction:
    # int (c + z u)^n Lam(u) du
    return sum(math.comb(n, j) * c ** (n - j) * z**j * HAT_MOMENTS[j] for j in range(n + 1))


def _to_poly(node) -> Poly:
    if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
        return Poly.const(node.value)
    if isinstance(node, ast.Name):
        if node.id not in VARIABLES:
            raise RangeError(f"unknown variable {node.id!r}; use {', '.join(VARIABLES)}")
        return Poly.var(node.id)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _to_poly(node.operand)
        return -inner if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.BinOp):
        left, right = _to_poly(node.left), _to_poly(node.right)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            if not right.is_constant() or not right:
                raise RangeError("can only divide by a nonzero constant")
            return left * (1 / right.constant())
        if isinstance(node.op, ast.Pow):
            if not right.is_constant() or right.constant().denominator != 1 or right.constant() < 0:
                raise RangeError("exponents must be nonnegative integers")
            out = Poly.const(1)
            for _ in range(int(right.constant())):
                out = out * left
            return out
    raise RangeError(f"unsupported expression {ast.dump(node)}")


# -- sampling --------------------------------------------------------------


def _as_scale(z) -> Scale:
    return z if isinstance(z, Scale) else Scale(Fraction(z))


def _centers(extent, z: Fraction, convention: Convention) -> list[list[Fraction]]:
    shift = Fraction(1, 2) if convention is Convention.CORNER else Fraction(0)
    return [[(a + shift) * z for a in range(lo, hi + 1)] for lo, hi in extent]


def _check_extent(extent) -> tuple[tuple[int, int], ...]:
    extent = tuple((int(lo), int(hi)) for lo, hi in extent)
    if not extent or any(hi < lo for lo, hi in extent):
        raise ExtentError(f"empty extent {extent}")
    return extent


def hat_sample(p: SampledPolynomial, z, extent, convention=Convention.CENTERED) -> CellField:
    """Exact hat samples of ``p`` on the inclusive cell box ``extent`` at scale ``z``.

    Centered cell ``a`` has center ``a z``; corner cell ``a`` covers
    ``[a z, (a + 1) z]`` and is sampled at its midpoint.
    """
    convention, scale = as_convention(convention), _as_scale(z)
    extent = _check_extent(extent)
    if len(extent) != p.dim:
        raise RangeError(f"extent has {len(extent)} axes, polynomial has {p.dim}")
    axes = _centers(extent, scale.value, convention)
    values = np.empty(tuple(len(a) for a in axes), dtype=object)
    for idx in np.ndindex(*values.shape):
        values[idx] = p.hat_average([axes[k][i] for k, i in enumerate(idx)], scale.value)
    return CellField(values, scale, convention, tuple(lo for lo, _ in extent))


def _simpson_nodes(panels: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes and kernel-weighted Simpson weights on [-1, 1], kink at 0 on a node
    n = 2 * panels
    u = np.linspace(-1.0, 1.0, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= (2.0 / n) / 3.0
    return u, w * np.maximum(0.0, 1.0 - np.abs(u))


def hat_sample_function(
    f: Callable,
    z,
    extent,
    convention=Convention.CENTERED,
    panels: int = 2**10,
) -> CellField:
    """Approximate hat samples of a smooth vectorized ``f(x, y, ...)`` by composite Simpson.

    Each unit cell gets ``panels`` Simpson panels per axis.  The result is a
    float field, accurate to roughly ``1e-9`` for smooth ``f``.
    """
    convention, scale = as_convention(convention), _as_scale(z)
    extent = _check_extent(extent)
    zf = float(scale.value)
    u, w = _simpson_nodes(panels)
    axes = _centers(extent, scale.value, convention)
    dim = len(extent)
    values = np.empty(tuple(len(a) for a in axes))
    for idx in np.ndindex(*values.shape):
        grids = np.meshgrid(*[float(axes[k][i]) + zf * u for k, i in enumerate(idx)], indexing="ij")
        sample = np.asarray(f(*grids), dtype=np.float64)
        for _ in range(dim):
            sample = np.tensordot(sample, w, axes=([0], [0]))
        values[idx] = float(sample)
    return CellField(values, scale, convention, tuple(lo for lo, _ in extent))


# -- commutation with averaging -----------------------------------------------


@dataclass
class CommuteReport:
    family: str
    d: int
    z: Fraction
    extent: tuple
    residual: CellField | None
    max_residual: Fraction

    @property
    def passed(self) -> bool:
        return self.max_residual == 0

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "d": self.d,
            "z": str(self.z),
            "fine_extent": [list(b) for b in self.extent],
            "max_residual": str(self.max_residual),
            "passed": self.passed,
        }


def _as_family(family, dim: int) -> SchemeFamily:
    return family if isinstance(family, SchemeFamily) else get_family(family, dim)


def commute_check(p: SampledPolynomial, z, d: int, extent, family="bf") -> CommuteReport:
    """Compare averaging of fine hat samples with direct hat samples at scale ``d z``.

    The residual is ``apply(family(d), hat_sample(p, z)) - hat_sample(p, d z)``
    on the coarse cells the fine extent supports.  Corner families sample at
    cell midpoints.
    """
    fam = _as_family(family, p.dim)
    if not fam.admissible(d):
        raise AdmissibilityError(f"factor {d} is not admissible for family {fam.name!r}")
    scale = _as_scale(z)
    fine = hat_sample(p, scale, extent, fam.convention)
    averaged = apply(fam(d), fine)
    direct = hat_sample(p, scale.coarsen(d), averaged.extent, fam.convention)
    diff = averaged.values - direct.values
    residual = CellField(diff, averaged.scale, fam.convention, averaged.origin)
    worst = max((abs(v) for v in diff.flat), default=Fraction(0))
    return CommuteReport(fam.name, d, scale.value, fine.extent, residual, worst)


# -- towers ----------------------------------------------------------------


@dataclass
class TowerLevel:
    factor: int
    cumulative: int
    field: CellField


@dataclass
class Tower:
    """A base field and its successive coarsenings by one family."""

    base: CellField
    family: SchemeFamily
    levels: list[TowerLevel] = field(default_factory=list)
    requested: tuple[int, ...] = ()
    truncated: str | None = None

    @property
    def top(self) -> CellField:
        return self.levels[-1].field if self.levels else self.base

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def complete(self) -> bool:
        return self.truncated is None

    def manifest(self) -> dict:
        return {
            "family": self.family.name,
            "dimension": self.family.dim,
            "convention": self.family.convention.value,
            "requested_factors": list(self.requested),
            "base": {"scale": str(self.base.scale.value), "extent": [list(b) for b in self.base.extent]},
            "levels": [
                {
                    "level": k + 1,
                    "factor": lv.factor,
                    "cumulative_factor": lv.cumulative,
                    "scale": str(lv.field.scale.value),
                    "extent": [list(b) for b in lv.field.extent],
                }
                for k, lv in enumerate(self.levels)
            ],
            "complete": self.complete,
            "truncated": self.truncated,
        }


def build_tower(
    source,
    family,
    factors: Sequence[int],
    *,
    z=1,
    extent=None,
) -> Tower:
    """Coarsen ``source`` by each factor in turn.

    ``source`` is a ``CellField`` or a ``SampledPolynomial``; a polynomial is
    hat-sampled at scale ``z`` on ``extent`` first.  When the field becomes
    too small for the next factor the tower stops there and records why.
    """
    if isinstance(source, SampledPolynomial):
        fam = _as_family(family, source.dim)
        if extent is None:
            raise ExtentError("a polynomial source needs an extent")
        base = hat_sample(source, z, extent, fam.convention)
    elif isinstance(source, CellField):
        fam = _as_family(family, source.dim)
        base = source
    else:
        raise TypeError(f"unsupported tower source {type(source).__name__}")
    if fam.dim != base.dim:
        raise RangeError(f"family dimension {fam.dim} != field dimension {base.dim}")
    factors = tuple(int(k) for k in factors)
    for k in factors:
        if not fam.admissible(k):
            raise AdmissibilityError(f"factor {k} is not admissible for family {fam.name!r}")
    tower = Tower(base, fam, requested=factors)
    current, cumulative = base, 1
    for k in factors:
        try:
            current = apply(fam(k), current)
        except ExtentError as exc:
            tower.truncated = f"stopped before factor {k} at level {tower.depth}: {exc}"
            break
        cumulative *= k
        tower.levels.append(TowerLevel(k, cumulative, current))
    return tower


@dataclass
class PathReport:
    factorizations: list[tuple[int, ...]]
    towers: list[Tower]
    extent: tuple | None
    mismatches: list  # (factorization index, cell)

    @property
    def consistent(self) -> bool:
        return self.extent is not None and not self.mismatches and all(t.complete for t in self.towers)


def _intersect(a, b):
    box = tuple((max(alo, blo), min(ahi, bhi)) for (alo, ahi), (blo, bhi) in zip(a, b))
    return None if any(hi < lo for lo, hi in box) else box


def path_independence(source, family, factorizations: Sequence[Sequence[int]], **kwargs) -> PathReport:
    """Build one tower per factorization and compare their top fields on the common extent."""
    towers = [build_tower(source, family, fs, **kwargs) for fs in factorizations]
    tops = [t.top for t in towers]
    scales = {t.scale.value for t in tops}
    box = tops[0].extent if len(scales) == 1 else None
    for t in tops[1:]:
        if box is None:
            break
        box = _intersect(box, t.extent)
    mismatches = []
    if box is not None:
        ref = tops[0].restrict(box)
        for n, t in enumerate(tops[1:], start=1):
            other = t.restrict(box)
            for cell in ref.cells():
                if ref[cell] != other[cell]:
                    mismatches.append((n, cell))
    return PathReport([tuple(f) for f in factorizations], towers, box, mismatches)
