"""Applying stencils to cell fields and composing stencils.

Composition works on stencils alone: the operator ``A_e o A_d`` (first
coarsen by ``d``, then by ``e``) has weight

    w(i) = sum over r * d + t = i of outer(r) * inner(t)

which is a strided convolution of the outer stencil (upsampled by ``d``)
with the inner one.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConventionError, ExtentError, RangeError
from .lattice import CellField, Convention, d_adic_expand
from .schemes import WeightStencil, box_low, box_width, int_array, max_abs


def compose_arrays(outer: np.ndarray, e: int, inner: np.ndarray, d: int, convention: Convention) -> np.ndarray:
    """Strided convolution of two weight arrays laid out on their support boxes.

    Works for int64/object integer arrays and for object arrays of any ring
    elements supporting ``+``, ``*`` and truth testing.
    """
    dim = outer.ndim
    lo_outer, lo_inner, lo_out = box_low(e, convention), box_low(d, convention), box_low(e * d, convention)
    shape = (box_width(e * d, convention),) * dim
    if outer.dtype == object or inner.dtype == object:
        out = np.zeros(shape, dtype=object)
    else:
        bound = int(np.abs(outer).sum()) * max_abs(inner)
        out = int_array(np.zeros(shape, dtype=np.int64), bound)
        inner = int_array(inner, bound)
    n = inner.shape[0]
    for idx in zip(*np.nonzero(outer)):
        starts = [(int(i) + lo_outer) * d + lo_inner - lo_out for i in idx]
        out[tuple(slice(s, s + n) for s in starts)] += outer[idx] * inner
    return out


def _check_pair(outer: WeightStencil, inner: WeightStencil) -> None:
    if outer.convention is not inner.convention:
        raise ConventionError("cannot compose stencils with different conventions")
    if outer.dim != inner.dim:
        raise RangeError("cannot compose stencils of different dimension")


def compose(outer: WeightStencil, inner: WeightStencil) -> WeightStencil:
    """Stencil of coarsening by ``inner.d`` followed by coarsening by ``outer.d``."""
    _check_pair(outer, inner)
    nums = compose_arrays(outer.numerators, outer.d, inner.numerators, inner.d, outer.convention)
    return WeightStencil(outer.d * inner.d, outer.dim, outer.convention, nums, outer.denominator * inner.denominator)


def iterate(stencil: WeightStencil, s: int) -> WeightStencil:
    """The ``s``-fold composite, a stencil for factor ``d**s``."""
    if s < 1:
        raise RangeError(f"iterate needs s >= 1, got {s}")
    result = stencil
    for _ in range(s - 1):
        result = compose(stencil, result)
    return result


def iterate_digit_product(stencil: WeightStencil, s: int) -> WeightStencil:
    """Closed form of ``iterate`` for corner stencils.

    The weight at ``i`` is the product over digit positions of
    ``stencil(i_1[k], ..., i_D[k])`` where ``i_j[k]`` is the k-th base-``d``
    digit of coordinate ``i_j``.
    """
    if stencil.convention is not Convention.CORNER:
        raise ConventionError("the digit-product form holds for corner stencils only")
    if s < 1:
        raise RangeError(f"iterate needs s >= 1, got {s}")
    d = stencil.d
    if d == 1:
        return stencil
    size = d**s
    weights = {}
    for idx in np.ndindex(*(size,) * stencil.dim):
        digits = [d_adic_expand(c, d, s) for c in idx]
        w = Fraction(1)
        for level in range(s):
            w *= stencil.weight(tuple(dg[level] for dg in digits))
            if w == 0:
                break
        if w:
            weights[idx] = w
    return WeightStencil.from_weights(size, stencil.dim, Convention.CORNER, weights)


# -- application -------------------------------------------------------------


def output_range(origin: int, n: int, d: int, lo: int, hi: int) -> tuple[int, int]:
    """Inclusive coarse index range whose fine offsets ``d*a + [lo, hi]`` fit in ``origin .. origin+n-1``."""
    a_min = -((lo - origin) // d)
    a_max = (origin + n - 1 - hi) // d
    return a_min, a_max


def _strided(start: int, count: int, d: int) -> slice:
    return slice(start, start + d * (count - 1) + 1, d)


# real fields accumulate in extended precision and round once at the end, so
# the dense and separable paths agree to about one ulp where the platform has it
ACCUMULATOR = np.longdouble


def _finish(acc: np.ndarray, denominator: int, exact: bool) -> np.ndarray:
    if exact:
        return acc * Fraction(1, denominator)
    return (acc / ACCUMULATOR(denominator)).astype(np.float64)


def apply(stencil: WeightStencil, field: CellField) -> CellField:
    """Coarsen ``field`` by ``stencil.d``.

    Only coarse cells whose whole support box lies inside the field extent
    are produced; nothing outside the input extent is read.
    """
    if stencil.convention is not field.convention:
        raise ConventionError("stencil and field use different conventions")
    if stencil.dim != field.dim:
        raise RangeError(f"stencil dimension {stencil.dim} != field dimension {field.dim}")
    d, lo = stencil.d, stencil.low
    hi = lo + stencil.shape[0] - 1
    ranges = [output_range(o, n, d, lo, hi) for o, n in zip(field.origin, field.shape)]
    if any(a_max < a_min for a_min, a_max in ranges):
        raise ExtentError(f"field extent {field.extent} is too small for factor {d}")
    counts = [a_max - a_min + 1 for a_min, a_max in ranges]
    acc = np.zeros(counts, dtype=object if field.exact else ACCUMULATOR)
    for idx in zip(*np.nonzero(stencil.numerators)):
        slices = tuple(
            _strided(d * a_min + int(i) + lo - o, m, d) for i, (a_min, _), o, m in zip(idx, ranges, field.origin, counts)
        )
        num = int(stencil.numerators[idx])
        acc += (num if field.exact else ACCUMULATOR(num)) * field.values[slices]
    values = _finish(acc, stencil.denominator, field.exact)
    return CellField(values, field.scale.coarsen(d), field.convention, tuple(a for a, _ in ranges))


def apply_separable(profiles: Sequence[WeightStencil], field: CellField) -> CellField:
    """Apply ``tensor_product(profiles)`` one axis at a time.

    Costs ``O(D (2d - 1))`` multiply-adds per output cell instead of
    ``O((2d - 1)^D)``; results agree exactly with ``apply`` on exact fields.
    """
    if len(profiles) != field.dim:
        raise RangeError(f"need {field.dim} profiles, got {len(profiles)}")
    if field.dim == 1:
        return apply(profiles[0], field)
    first = profiles[0]
    for p in profiles:
        if p.dim != 1:
            raise RangeError("separable profiles must be one-dimensional")
        if p.d != first.d:
            raise RangeError("separable profiles must share one factor")
        if p.convention is not field.convention:
            raise ConventionError("profile and field use different conventions")
    d, lo = first.d, first.low
    hi = lo + first.shape[0] - 1
    values = field.values if field.exact else field.values.astype(ACCUMULATOR)
    origin = []
    for axis, (p, o, n) in enumerate(zip(profiles, field.origin, field.shape)):
        a_min, a_max = output_range(o, n, d, lo, hi)
        if a_max < a_min:
            raise ExtentError(f"field extent {field.extent} is too small for factor {d}")
        m = a_max - a_min + 1
        moved = np.moveaxis(values, axis, 0)
        acc = np.zeros((m,) + moved.shape[1:], dtype=moved.dtype)
        for (i,) in zip(*np.nonzero(p.numerators)):
            num = int(p.numerators[i])
            acc += (num if field.exact else ACCUMULATOR(num)) * moved[_strided(d * a_min + int(i) + lo - o, m, d)]
        values = np.moveaxis(acc, 0, axis)
        origin.append(a_min)
    den = math.prod(p.denominator for p in profiles)
    return CellField(_finish(values, den, field.exact), field.scale.coarsen(d), field.convention, tuple(origin))
