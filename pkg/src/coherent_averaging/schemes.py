"""Exact rational weight stencils and the catalogue of averaging families.

A stencil for scale factor ``d`` stores its weights as an integer array of
numerators over one common denominator, laid out on the offset box

* ``[-(d-1), d-1]^D`` for centered labelling,
* ``[0, d-1]^D`` for corner labelling.

Numerators are int64 while that cannot overflow and Python ints otherwise.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import AdmissibilityError, ConventionError, RangeError
from .lattice import Convention, as_convention

_INT64_SAFE = 2**62


def box_low(d: int, convention: Convention) -> int:
    return -(d - 1) if convention is Convention.CENTERED else 0


def box_width(d: int, convention: Convention) -> int:
    return 2 * d - 1 if convention is Convention.CENTERED else d


def box_offsets(d: int, dim: int, convention: Convention) -> Iterable[tuple[int, ...]]:
    lo = box_low(d, convention)
    axis = range(lo, lo + box_width(d, convention))
    return itertools.product(axis, repeat=dim)


def max_abs(arr: np.ndarray) -> int:
    if arr.size == 0:
        return 0
    return int(max(abs(int(arr.max())), abs(int(arr.min()))))


def int_array(arr: np.ndarray, bound: int | None = None) -> np.ndarray:
    """Integer array as int64 when ``bound`` (default: its own max) is safe, else object ints."""
    if bound is None:
        bound = max_abs(arr)
    if bound < _INT64_SAFE:
        return np.asarray(arr).astype(np.int64)
    return np.asarray(arr).astype(object)


def _array_gcd(arr: np.ndarray) -> int:
    if arr.dtype == object:
        return reduce(math.gcd, (int(v) for v in arr.ravel()), 0)
    return int(np.gcd.reduce(arr.ravel())) if arr.size else 0


class WeightStencil:
    """Weights ``w(offset)`` of one averaging operator with scale factor ``d``."""

    __slots__ = ("d", "dim", "convention", "numerators", "denominator")

    def __init__(self, d: int, dim: int, convention, numerators, denominator: int = 1, *, normalized: bool = True):
        if d < 1:
            raise RangeError(f"scale factor must be >= 1, got {d}")
        if dim < 1:
            raise RangeError(f"dimension must be >= 1, got {dim}")
        convention = as_convention(convention)
        nums = np.asarray(numerators)
        width = box_width(d, convention)
        if nums.shape != (width,) * dim:
            raise RangeError(f"numerator array shape {nums.shape} != {(width,) * dim}")
        denominator = int(denominator)
        if denominator == 0:
            raise ZeroDivisionError("stencil denominator is zero")
        if denominator < 0:
            nums, denominator = -nums, -denominator
        nums = int_array(nums)
        g = math.gcd(_array_gcd(nums), denominator)
        if g > 1:
            nums = nums // g
            denominator //= g
        nums = int_array(nums)
        nums.flags.writeable = False
        self.d = int(d)
        self.dim = int(dim)
        self.convention = convention
        self.numerators = nums
        self.denominator = denominator
        if normalized and self.total() != 1:
            raise ValueError(f"stencil weights sum to {self.total()}, not 1")

    # -- construction ------------------------------------------------------

    @classmethod
    def from_weights(cls, d: int, dim: int, convention, weights: Mapping[Sequence[int], object], *, normalized=True):
        """Build from a mapping offset -> rational; offsets not listed are zero."""
        convention = as_convention(convention)
        fracs = {tuple(int(c) for c in k): Fraction(v) for k, v in weights.items()}
        den = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fracs.values()), 1)
        lo = box_low(d, convention)
        width = box_width(d, convention)
        nums = np.zeros((width,) * dim, dtype=object)
        for off, w in fracs.items():
            if len(off) != dim:
                raise RangeError(f"offset {off} has wrong dimension")
            idx = tuple(c - lo for c in off)
            if any(not 0 <= i < width for i in idx):
                if w == 0:
                    continue
                raise RangeError(f"offset {off} outside the support box for d={d}")
            nums[idx] = w.numerator * (den // w.denominator)
        return cls(d, dim, convention, nums, den, normalized=normalized)

    # -- access ------------------------------------------------------------

    @property
    def low(self) -> int:
        return box_low(self.d, self.convention)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.numerators.shape

    def weight(self, offset) -> Fraction:
        if isinstance(offset, (int, np.integer)):
            offset = (offset,)
        idx = tuple(int(c) - self.low for c in offset)
        if len(idx) != self.dim or any(not 0 <= i < n for i, n in zip(idx, self.shape)):
            return Fraction(0)
        return Fraction(int(self.numerators[idx]), self.denominator)

    def __getitem__(self, offset) -> Fraction:
        return self.weight(offset)

    def offsets(self) -> Iterable[tuple[int, ...]]:
        return box_offsets(self.d, self.dim, self.convention)

    @property
    def weights(self) -> dict[tuple[int, ...], Fraction]:
        """Every offset of the support box, zeros included."""
        return {off: self.weight(off) for off in self.offsets()}

    @property
    def support(self) -> list[tuple[int, ...]]:
        lo = self.low
        return [tuple(int(i) + lo for i in idx) for idx in zip(*np.nonzero(self.numerators))]

    def nonzero_weights(self) -> dict[tuple[int, ...], Fraction]:
        return {off: self.weight(off) for off in self.support}

    def total(self) -> Fraction:
        return Fraction(int(self.numerators.sum()), self.denominator)

    def to_float(self) -> np.ndarray:
        return self.numerators.astype(np.float64) / self.denominator

    def same_layout(self, other: "WeightStencil") -> bool:
        return self.d == other.d and self.dim == other.dim and self.convention is other.convention

    def __eq__(self, other):
        if not isinstance(other, WeightStencil):
            return NotImplemented
        return (
            self.same_layout(other)
            and self.denominator == other.denominator
            and bool(np.array_equal(self.numerators, other.numerators))
        )

    def __hash__(self):
        return hash((self.d, self.dim, self.convention, self.denominator, self.numerators.tobytes()))

    def __repr__(self):
        return f"WeightStencil(d={self.d}, dim={self.dim}, convention={self.convention.value}, nonzero={len(self.support)})"

    def differences(self, other: "WeightStencil") -> list[tuple[tuple[int, ...], Fraction, Fraction]]:
        """Offsets where the weights differ, as ``(offset, self_weight, other_weight)``."""
        if not self.same_layout(other):
            raise ConventionError("stencils with different factor, dimension or convention")
        lhs = int_array(self.numerators, max_abs(self.numerators) * other.denominator) * other.denominator
        rhs = int_array(other.numerators, max_abs(other.numerators) * self.denominator) * self.denominator
        lo = self.low
        out = []
        for idx in zip(*np.nonzero(lhs != rhs)):
            off = tuple(int(i) + lo for i in idx)
            out.append((off, self.weight(off), other.weight(off)))
        return out


# -- catalogue stencils ------------------------------------------------------


def identity_stencil(dim: int = 1, convention=Convention.CENTERED) -> WeightStencil:
    return WeightStencil(1, dim, convention, np.ones((1,) * dim, dtype=np.int64), 1)


def _outer(profiles: Sequence[np.ndarray]) -> np.ndarray:
    bound = math.prod(max_abs(p) for p in profiles)
    out = int_array(profiles[0], bound)
    for p in profiles[1:]:
        out = np.multiply.outer(out, int_array(p, bound))
    return out


def bf_profile(d: int) -> np.ndarray:
    """Relative one-dimensional weights ``d - |i|`` for ``|i| <= d - 1``."""
    i = np.arange(-(d - 1), d, dtype=np.int64)
    return d - np.abs(i)


def bf_stencil(d: int, dim: int = 2) -> WeightStencil:
    """Centered triangular-product weights ``d^{-2D} prod_k (d - |i_k|)``."""
    if d < 1 or dim < 1:
        raise RangeError("bf_stencil needs d >= 1 and dim >= 1")
    return WeightStencil(d, dim, Convention.CENTERED, _outer([bf_profile(d)] * dim), d ** (2 * dim))


def parity_stencil(d: int) -> WeightStencil:
    """One-dimensional centered weights ``1/d`` where ``d - i`` is odd, zero elsewhere."""
    if d < 1:
        raise RangeError(f"parity_stencil needs d >= 1, got {d}")
    i = np.arange(-(d - 1), d, dtype=np.int64)
    return WeightStencil(d, 1, Convention.CENTERED, ((d - i) % 2 == 1).astype(np.int64), d)


def uniform_corner_stencil(d: int, dim: int = 2) -> WeightStencil:
    if d < 1 or dim < 1:
        raise RangeError("uniform_corner_stencil needs d >= 1 and dim >= 1")
    return WeightStencil(d, dim, Convention.CORNER, np.ones((d,) * dim, dtype=np.int64), d**dim)


class Degenerate(str, enum.Enum):
    LOWER_LEFT = "lower-left"
    CORNER_NE = "corner-ne"
    CORNER_NW = "corner-nw"
    CORNER_SE = "corner-se"
    DIAGONAL = "diagonal"
    ANTIDIAGONAL = "antidiagonal"
    CENTRAL = "central"
    EDGE_SOUTH = "edge-south"
    EDGE_NORTH = "edge-north"
    EDGE_WEST = "edge-west"
    EDGE_EAST = "edge-east"


_EDGES = {Degenerate.EDGE_SOUTH, Degenerate.EDGE_NORTH, Degenerate.EDGE_WEST, Degenerate.EDGE_EAST}
_PLANAR_ONLY = {Degenerate.CORNER_NW, Degenerate.CORNER_SE, Degenerate.ANTIDIAGONAL} | _EDGES


def degenerate_stencil(kind, d: int, dim: int = 2) -> WeightStencil:
    """Corner-labelled degenerate schemes.

    Axis 0 runs west to east and axis 1 south to north, so the north-west
    corner is offset ``(0, d-1)``.  The north-west, south-east and
    antidiagonal schemes exist only for ``dim == 2``; the others generalize
    along the main diagonal.  Edge schemes average the fine cells along one
    side of the coarse cell.
    """
    kind = Degenerate(kind)
    if d < 1:
        raise RangeError(f"scale factor must be >= 1, got {d}")
    if kind in _PLANAR_ONLY and dim != 2:
        raise RangeError(f"{kind.value} scheme is only defined for dim 2")
    if kind is Degenerate.CENTRAL and d % 2 == 0:
        raise AdmissibilityError(f"central scheme needs an odd factor, got {d}")
    nums = np.zeros((d,) * dim, dtype=np.int64)
    den = 1
    if kind is Degenerate.LOWER_LEFT:
        nums[(0,) * dim] = 1
    elif kind is Degenerate.CORNER_NE:
        nums[(d - 1,) * dim] = 1
    elif kind is Degenerate.CORNER_NW:
        nums[0, d - 1] = 1
    elif kind is Degenerate.CORNER_SE:
        nums[d - 1, 0] = 1
    elif kind is Degenerate.CENTRAL:
        nums[((d - 1) // 2,) * dim] = 1
    elif kind in _EDGES:
        if kind is Degenerate.EDGE_SOUTH:
            nums[:, 0] = 1
        elif kind is Degenerate.EDGE_NORTH:
            nums[:, d - 1] = 1
        elif kind is Degenerate.EDGE_WEST:
            nums[0, :] = 1
        else:
            nums[d - 1, :] = 1
        den = d
    elif kind is Degenerate.DIAGONAL:
        for i in range(d):
            nums[(i,) * dim] = 1
        den = d
    else:
        for i in range(d):
            nums[i, d - 1 - i] = 1
        den = d
    return WeightStencil(d, dim, Convention.CORNER, nums, den)


def centered_delta_stencil(d: int, dim: int = 1) -> WeightStencil:
    """Centered point-sampling scheme: all weight on the central fine cell."""
    nums = np.zeros((2 * d - 1,) * dim, dtype=np.int64)
    nums[(d - 1,) * dim] = 1
    return WeightStencil(d, dim, Convention.CENTERED, nums, 1)


def rotated_parity_stencil(d: int) -> WeightStencil:
    """Planar parity weights in diagonal coordinates.

    Weight ``1/d^2`` at ``(i, j)`` when both ``i + j`` and ``i - j`` are
    parity offsets of factor ``d``; the lattice map ``(i, j) -> (i + j, i - j)``
    commutes with scaling, so the family inherits coherence from parity.
    """
    if d < 1:
        raise RangeError(f"rotated_parity_stencil needs d >= 1, got {d}")
    i = np.arange(-(d - 1), d, dtype=np.int64)
    u, v = i[:, None] + i[None, :], i[:, None] - i[None, :]
    mask = (np.abs(u) <= d - 1) & (np.abs(v) <= d - 1) & ((d - u) % 2 == 1) & ((d - v) % 2 == 1)
    return WeightStencil(d, 2, Convention.CENTERED, mask.astype(np.int64), d * d)


def tensor_product(profiles: Sequence[WeightStencil]) -> WeightStencil:
    """Product stencil ``w(i_1, ..., i_D) = prod_k profile_k(i_k)`` of one-dimensional profiles."""
    if not profiles:
        raise RangeError("tensor_product needs at least one profile")
    first = profiles[0]
    for p in profiles:
        if p.dim != 1:
            raise RangeError("tensor_product profiles must be one-dimensional")
        if p.d != first.d:
            raise RangeError(f"profiles have different factors ({p.d} vs {first.d})")
        if p.convention is not first.convention:
            raise ConventionError("profiles use different conventions")
    den = math.prod(p.denominator for p in profiles)
    return WeightStencil(first.d, len(profiles), first.convention, _outer([p.numerators for p in profiles]), den)


def perturbed(stencil: WeightStencil, offset, value) -> WeightStencil:
    """Set one weight to ``value`` and rescale the whole stencil back to total 1."""
    weights = stencil.nonzero_weights()
    weights[tuple(offset)] = Fraction(value)
    total = sum(weights.values())
    if total == 0:
        raise ValueError("perturbation makes the weights sum to zero")
    return WeightStencil.from_weights(
        stencil.d, stencil.dim, stencil.convention, {k: v / total for k, v in weights.items()}
    )


# -- families ----------------------------------------------------------------


@dataclass(frozen=True)
class SchemeFamily:
    """A rule assigning a stencil to every admissible scale factor."""

    name: str
    dim: int
    convention: Convention
    generator: Callable[[int], WeightStencil]
    admissible: Callable[[int], bool] = lambda d: d >= 1
    description: str = ""

    def __call__(self, d: int) -> WeightStencil:
        if not self.admissible(d):
            raise AdmissibilityError(f"factor {d} is not admissible for family {self.name!r}")
        return self.generator(d)

    def stencil(self, d: int) -> WeightStencil:
        return self(d)


def _odd(d: int) -> bool:
    return d >= 1 and d % 2 == 1


def bf_family(dim: int = 2) -> SchemeFamily:
    return SchemeFamily("bf", dim, Convention.CENTERED, lambda d: bf_stencil(d, dim),
                        description="centered triangular-product weights")


def parity_family(dim: int = 1) -> SchemeFamily:
    return SchemeFamily("parity", dim, Convention.CENTERED,
                        lambda d: tensor_product([parity_stencil(d)] * dim),
                        description="uniform weight on offsets i with d - i odd")


def centered_delta_family(dim: int = 1) -> SchemeFamily:
    return SchemeFamily("centered-delta", dim, Convention.CENTERED, lambda d: centered_delta_stencil(d, dim),
                        description="point sampling at the coarse cell center")


def rotated_parity_family() -> SchemeFamily:
    return SchemeFamily("rotated-parity", 2, Convention.CENTERED, rotated_parity_stencil,
                        description="parity weights along the two diagonals")


def uniform_family(dim: int = 2) -> SchemeFamily:
    return SchemeFamily("uniform", dim, Convention.CORNER, lambda d: uniform_corner_stencil(d, dim),
                        description="straight average over the covered fine cells")


def degenerate_family(kind, dim: int = 2) -> SchemeFamily:
    kind = Degenerate(kind)
    admissible = _odd if kind is Degenerate.CENTRAL else (lambda d: d >= 1)
    return SchemeFamily(kind.value, dim, Convention.CORNER, lambda d: degenerate_stencil(kind, d, dim), admissible)


def perturbed_family(base: SchemeFamily, d: int, offset, value) -> SchemeFamily:
    """``base`` with one weight of its factor-``d`` stencil changed and renormalized."""
    bad = perturbed(base(d), offset, value)

    def gen(k: int) -> WeightStencil:
        return bad if k == d else base(k)

    return SchemeFamily(f"{base.name}~perturbed", base.dim, base.convention, gen, base.admissible)


FAMILY_NAMES = ("bf", "parity", "centered-delta", "rotated-parity", "uniform") + tuple(k.value for k in Degenerate)


def get_family(name: str, dim: int = 2) -> SchemeFamily:
    if name == "bf":
        return bf_family(dim)
    if name == "parity":
        return parity_family(dim)
    if name == "centered-delta":
        return centered_delta_family(dim)
    if name == "rotated-parity":
        if dim != 2:
            raise RangeError("rotated-parity scheme is only defined for dim 2")
        return rotated_parity_family()
    if name == "uniform":
        return uniform_family(dim)
    try:
        kind = Degenerate(name)
    except ValueError:
        raise KeyError(f"unknown scheme family {name!r}; choose from {', '.join(FAMILY_NAMES)}") from None
    if kind in _PLANAR_ONLY and dim != 2:
        raise RangeError(f"{name} scheme is only defined for dim 2")
    return degenerate_family(kind, dim)
