"""Scales, cell labelling conventions, cell fields and d-adic index arithmetic.

A cell field lives on a finite index box of the lattice ``z Z^D``.  Two
labelling conventions are supported:

* ``CENTERED``: cell ``a`` is the cell whose center sits at ``a * z`` once the
  coordinate system is shifted by half a cell along every axis.
* ``CORNER``: cell ``a`` is the cell whose lower-left corner sits at ``a * z``.

The half-cell shift is a convention only; nothing about it is stored.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import ConventionError, ExtentError, FieldFormatError, RangeError, ScaleError

FIELD_FORMAT = "cellfield/1"


class Convention(str, enum.Enum):
    CENTERED = "centered"
    CORNER = "corner"


def as_convention(value) -> Convention:
    try:
        return Convention(value)
    except ValueError:
        raise ConventionError(f"unknown convention {value!r}") from None


class ScaleSet(str, enum.Enum):
    POWERS_OF_TWO = "powers-of-two"
    ALL_RECIPROCALS = "reciprocals"
    POSITIVE_RATIONALS = "rationals"

    def contains(self, value: Fraction) -> bool:
        if value <= 0:
            return False
        if self is ScaleSet.POSITIVE_RATIONALS:
            return True
        if self is ScaleSet.ALL_RECIPROCALS:
            return value.numerator == 1
        # 2^{-r}, r >= 0
        q = value.denominator
        return value.numerator == 1 and q & (q - 1) == 0


@dataclass(frozen=True)
class Scale:
    """A positive rational length drawn from a scale set."""

    value: Fraction
    scale_set: ScaleSet = ScaleSet.POSITIVE_RATIONALS

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))
        object.__setattr__(self, "scale_set", ScaleSet(self.scale_set))
        if not self.scale_set.contains(self.value):
            raise ScaleError(f"{self.value} is not in scale set {self.scale_set.value}")

    def precedes(self, other: "Scale") -> bool:
        """Finer-than order: ``self`` precedes ``other`` iff ``other = d * self`` with integer ``d >= 2``."""
        ratio = Fraction(other.value) / self.value
        return ratio.denominator == 1 and ratio.numerator >= 2

    def coarsen(self, d: int) -> "Scale":
        return Scale(self.value * d, self.scale_set)

    def __str__(self) -> str:
        return str(self.value)


def d_adic_expand(i: int, d: int, s: int) -> tuple[int, ...]:
    """Digits ``(i_1, ..., i_s)`` with ``i = i_1 d^{s-1} + ... + i_s``, most significant first."""
    if d < 2:
        raise RangeError(f"base must be >= 2, got {d}")
    if s < 1:
        raise RangeError(f"digit count must be >= 1, got {s}")
    if not 0 <= i <= d**s - 1:
        raise RangeError(f"{i} is outside [0, {d**s - 1}]")
    digits = []
    for _ in range(s):
        i, r = divmod(i, d)
        digits.append(r)
    return tuple(reversed(digits))


def d_adic_value(digits: Sequence[int], d: int) -> int:
    value = 0
    for digit in digits:
        value = value * d + digit
    return value


@dataclass(frozen=True)
class CellIndex:
    coords: tuple[int, ...]
    convention: Convention

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        object.__setattr__(self, "convention", as_convention(self.convention))

    @property
    def dim(self) -> int:
        return len(self.coords)


def coarse_index(index: CellIndex, d: int) -> CellIndex:
    """The coarse cell (factor ``d``) that fine cell ``index`` belongs to.

    Corner labels use floor division.  Centered labels go to the nearest
    multiple of ``d``; when two are equally near (even ``d``) the lower one wins.
    """
    if d < 1:
        raise RangeError(f"factor must be >= 1, got {d}")
    if index.convention is Convention.CORNER:
        coords = tuple(c // d for c in index.coords)
    else:
        half = (d - 1) // 2
        coords = tuple((c + half) // d for c in index.coords)
    return CellIndex(coords, index.convention)


def _exact_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        if isinstance(v, (float, np.floating)):
            raise TypeError("exact fields take integers or Fractions, not floats")
        out[idx] = Fraction(v)
    return out


@dataclass(frozen=True, eq=False)
class CellField:
    """Values on a finite box of cells at one scale.

    ``origin`` is the index of the first cell along each axis; the extent is
    ``origin[k] .. origin[k] + values.shape[k] - 1``.  Values are either an
    object array of ``Fraction`` (exact) or a float64 array.
    """

    values: np.ndarray
    scale: Scale = field(default_factory=lambda: Scale(Fraction(1)))
    convention: Convention = Convention.CENTERED
    origin: tuple[int, ...] | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim == 0:
            raise ExtentError("a cell field needs at least one axis")
        if values.dtype.kind in "fiu" and values.dtype.kind != "f":
            values = _exact_array(values)
        elif values.dtype == object:
            values = _exact_array(values)
        elif values.dtype.kind == "f":
            values = values.astype(np.float64, copy=True)
        else:
            raise TypeError(f"unsupported field dtype {values.dtype}")
        if 0 in values.shape:
            raise ExtentError("empty field extent")
        values.flags.writeable = False
        origin = self.origin if self.origin is not None else (0,) * values.ndim
        if len(origin) != values.ndim:
            raise ExtentError("origin length does not match field dimension")
        scale = self.scale if isinstance(self.scale, Scale) else Scale(Fraction(self.scale))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", tuple(int(o) for o in origin))
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "convention", as_convention(self.convention))

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def exact(self) -> bool:
        return self.values.dtype == object

    @property
    def extent(self) -> tuple[tuple[int, int], ...]:
        """Inclusive ``(low, high)`` index bounds per axis."""
        return tuple((o, o + n - 1) for o, n in zip(self.origin, self.shape))

    def contains(self, coords: Sequence[int]) -> bool:
        return len(coords) == self.dim and all(lo <= c <= hi for c, (lo, hi) in zip(coords, self.extent))

    def __getitem__(self, coords):
        if isinstance(coords, CellIndex):
            if coords.convention is not self.convention:
                raise ConventionError("cell index and field use different conventions")
            coords = coords.coords
        if isinstance(coords, (int, np.integer)):
            coords = (coords,)
        coords = tuple(coords)
        if not self.contains(coords):
            raise ExtentError(f"cell {coords} outside extent {self.extent}")
        return self.values[tuple(c - o for c, o in zip(coords, self.origin))]

    def cells(self) -> Iterable[tuple[int, ...]]:
        for idx in np.ndindex(*self.shape):
            yield tuple(i + o for i, o in zip(idx, self.origin))

    def to_float(self) -> "CellField":
        if not self.exact:
            return self
        return CellField(self.values.astype(np.float64), self.scale, self.convention, self.origin)

    def restrict(self, extent: Sequence[tuple[int, int]]) -> "CellField":
        """Sub-field on an inclusive box that must lie inside this field's extent."""
        slices = []
        for (lo, hi), (flo, fhi), o in zip(extent, self.extent, self.origin):
            if lo < flo or hi > fhi or hi < lo:
                raise ExtentError(f"box {tuple(extent)} not inside {self.extent}")
            slices.append(slice(lo - o, hi - o + 1))
        return CellField(self.values[tuple(slices)], self.scale, self.convention, tuple(lo for lo, _ in extent))

    def equals(self, other: "CellField") -> bool:
        return (
            self.convention is other.convention
            and self.scale.value == other.scale.value
            and self.origin == other.origin
            and self.shape == other.shape
            and bool(np.all(self.values == other.values))
        )


def common_extent(a: CellField, b: CellField) -> tuple[tuple[int, int], ...] | None:
    box = []
    for (alo, ahi), (blo, bhi) in zip(a.extent, b.extent):
        lo, hi = max(alo, blo), min(ahi, bhi)
        if hi < lo:
            return None
        box.append((lo, hi))
    return tuple(box)


# -- serialization ---------------------------------------------------------


def format_number(value) -> str:
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return repr(float(value))


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise FieldFormatError(f"not a rational number: {text!r}") from None


def dump_field(f: CellField, stream: TextIO) -> None:
    """Write a JSON header line followed by the row-major CSV payload.

    Each CSV row holds one line along the last axis; rows follow C order over
    the leading axes.  Exact values are written as ``p/q``.
    """
    header = {
        "format": FIELD_FORMAT,
        "dimension": f.dim,
        "convention": f.convention.value,
        "scale": {
            "numerator": f.scale.value.numerator,
            "denominator": f.scale.value.denominator,
            "set": f.scale.scale_set.value,
        },
        "extent": {"origin": list(f.origin), "shape": list(f.shape)},
        "dtype": "rational" if f.exact else "real",
    }
    stream.write(json.dumps(header) + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    rows = f.values.reshape(-1, f.shape[-1])
    for row in rows:
        writer.writerow(format_number(v) for v in row)


def load_field(stream: TextIO) -> CellField:
    first = stream.readline()
    try:
        header = json.loads(first)
        if header.get("format") != FIELD_FORMAT:
            raise FieldFormatError(f"unsupported field format {header.get('format')!r}")
        dim = int(header["dimension"])
        shape = tuple(int(n) for n in header["extent"]["shape"])
        origin = tuple(int(o) for o in header["extent"]["origin"])
        scale = Scale(
            Fraction(int(header["scale"]["numerator"]), int(header["scale"]["denominator"])),
            ScaleSet(header["scale"].get("set", ScaleSet.POSITIVE_RATIONALS.value)),
        )
        convention = as_convention(header["convention"])
        dtype = header["dtype"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FieldFormatError):
            raise
        raise FieldFormatError(f"bad field header: {exc}") from None
    if len(shape) != dim or len(origin) != dim:
        raise FieldFormatError("extent does not match dimension")
    rows = [row for row in csv.reader(stream) if row]
    expected_rows = math.prod(shape[:-1])
    if len(rows) != expected_rows or any(len(r) != shape[-1] for r in rows):
        raise FieldFormatError(f"payload does not match shape {shape}")
    if dtype == "rational":
        values = np.empty(shape, dtype=object).reshape(-1, shape[-1])
        for r, row in enumerate(rows):
            for c, text in enumerate(row):
                values[r, c] = parse_rational(text)
    elif dtype == "real":
        try:
            values = np.array([[float(t) for t in row] for row in rows], dtype=np.float64)
        except ValueError as exc:
            raise FieldFormatError(str(exc)) from None
    else:
        raise FieldFormatError(f"unknown dtype {dtype!r}")
    return CellField(values.reshape(shape), scale, convention, origin)


def save_field(f: CellField, path) -> None:
    with open(path, "w", newline="") as fh:
        dump_field(f, fh)


def read_field(path) -> CellField:
    with open(Path(path)) as fh:
        return load_field(fh)


def field_to_text(f: CellField) -> str:
    buf = io.StringIO()
    dump_field(f, buf)
    return buf.getvalue()


def field_from_text(text: str) -> CellField:
    return load_field(io.StringIO(text))
