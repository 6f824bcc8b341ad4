from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherent_averaging.errors import ConventionError, ExtentError, FieldFormatError, RangeError, ScaleError
from coherent_averaging.lattice import (
    CellField,
    CellIndex,
    Convention,
    Scale,
    ScaleSet,
    coarse_index,
    common_extent,
    d_adic_expand,
    d_adic_value,
    field_from_text,
    field_to_text,
    read_field,
    save_field,
)


@pytest.mark.parametrize("i, d, s, digits", [(5, 2, 3, (1, 0, 1)), (0, 7, 4, (0, 0, 0, 0)), (26, 3, 3, (2, 2, 2))])
def test_d_adic_expand_examples(i, d, s, digits):
    assert d_adic_expand(i, d, s) == digits


@pytest.mark.parametrize("i, d, s", [(-1, 2, 3), (8, 2, 3), (0, 1, 2), (0, 2, 0)])
def test_d_adic_expand_rejects_out_of_range(i, d, s):
    with pytest.raises(RangeError):
        d_adic_expand(i, d, s)


@given(st.data(), st.integers(2, 9), st.integers(1, 6))
def test_d_adic_roundtrip(data, d, s):
    i = data.draw(st.integers(0, d**s - 1))
    digits = d_adic_expand(i, d, s)
    assert all(0 <= k < d for k in digits)
    assert d_adic_value(digits, d) == i


def test_d_adic_exhaustive_small():
    for d in range(2, 10):
        for s in range(1, 4):
            seen = {d_adic_expand(i, d, s) for i in range(d**s)}
            assert len(seen) == d**s


@pytest.mark.parametrize(
    "coords, conv, d, expected",
    [
        ((7, 3), Convention.CORNER, 4, (1, 0)),
        ((0, 0), Convention.CORNER, 5, (0, 0)),
        ((6, -6), Convention.CENTERED, 3, (2, -2)),
        ((-1, -5), Convention.CORNER, 4, (-1, -2)),
    ],
)
def test_coarse_index_examples(coords, conv, d, expected):
    out = coarse_index(CellIndex(coords, conv), d)
    assert out.coords == expected and out.convention is conv


def test_centered_coarse_index_nearest_with_lower_tie():
    # odd d: nearest multiple; even d: halfway cells go to the lower coarse cell
    assert coarse_index(CellIndex((4,), "centered"), 3).coords == (1,)
    assert coarse_index(CellIndex((5,), "centered"), 3).coords == (2,)
    assert coarse_index(CellIndex((1,), "centered"), 2).coords == (0,)
    assert coarse_index(CellIndex((-1,), "centered"), 2).coords == (-1,)


@given(st.lists(st.integers(-200, 200), min_size=1, max_size=3), st.integers(1, 7), st.integers(1, 7))
def test_corner_coarse_index_composes(coords, d, e):
    idx = CellIndex(tuple(coords), Convention.CORNER)
    assert coarse_index(coarse_index(idx, d), e) == coarse_index(idx, e * d)


def test_scale_sets_and_order():
    assert Scale(Fraction(1, 8), ScaleSet.POWERS_OF_TWO).precedes(Scale(Fraction(1, 2), ScaleSet.POWERS_OF_TWO))
    assert not Scale(Fraction(1, 2)).precedes(Scale(Fraction(1, 2)))
    assert not Scale(Fraction(1, 2)).precedes(Scale(Fraction(3, 4)))
    assert Scale(Fraction(1, 6)).precedes(Scale(Fraction(1, 2)))
    with pytest.raises(ScaleError):
        Scale(Fraction(1, 6), ScaleSet.POWERS_OF_TWO)
    with pytest.raises(ScaleError):
        Scale(Fraction(2, 3), ScaleSet.ALL_RECIPROCALS)
    with pytest.raises(ScaleError):
        Scale(Fraction(-1, 2))
    assert Scale(Fraction(1, 6), ScaleSet.ALL_RECIPROCALS).coarsen(3).value == Fraction(1, 2)


def test_cell_field_access_and_extent():
    f = CellField([[1, 2, 3], [4, 5, 6]], origin=(-1, 2))
    assert f.exact and f.extent == ((-1, 0), (2, 4))
    assert f[0, 4] == 6 and isinstance(f[0, 4], Fraction)
    with pytest.raises(ExtentError):
        f[1, 2]
    with pytest.raises(ExtentError):
        f[-1, 5]
    with pytest.raises(ConventionError):
        f[CellIndex((0, 2), Convention.CORNER)]
    assert f.restrict([(0, 0), (3, 4)]).values.tolist() == [[5, 6]]
    with pytest.raises(ExtentError):
        f.restrict([(0, 1), (2, 4)])
    with pytest.raises(ValueError):
        f.values[0, 0] = 9


def test_cell_field_rejects_floats_in_exact_arrays_and_empty():
    with pytest.raises(TypeError):
        CellField(np.array([Fraction(1), 0.5], dtype=object))
    with pytest.raises(ExtentError):
        CellField(np.zeros((0, 3)))


def test_common_extent():
    a = CellField(np.zeros((4,)), origin=(0,))
    b = CellField(np.zeros((4,)), origin=(2,))
    c = CellField(np.zeros((2,)), origin=(9,))
    assert common_extent(a, b) == ((2, 3),)
    assert common_extent(a, c) is None


def test_serialization_roundtrip_exact(rng, tmp_path):
    from conftest import random_rational_field

    f = CellField(random_rational_field(rng, (3, 4, 5)), Scale(Fraction(1, 6)), Convention.CORNER, (-2, 0, 7))
    text = field_to_text(f)
    header = text.splitlines()[0]
    assert '"format": "cellfield/1"' in header and '"dtype": "rational"' in header
    assert len(text.splitlines()) == 1 + 3 * 4
    g = field_from_text(text)
    assert g.equals(f)
    path = tmp_path / "f.field"
    save_field(f, path)
    assert read_field(path).equals(f)


def test_serialization_roundtrip_real_is_bit_exact(rng):
    f = CellField(rng.normal(size=(5, 6)) * 1e-3)
    g = field_from_text(field_to_text(f))
    assert g.values.tobytes() == f.values.tobytes()


@pytest.mark.parametrize(
    "text",
    [
        "not json\n1,2\n",
        '{"format": "other"}\n',
        '{"format": "cellfield/1", "dimension": 1, "convention": "centered", '
        '"scale": {"numerator": 1, "denominator": 1}, "extent": {"origin": [0], "shape": [3]}, "dtype": "rational"}\n1,2\n',
        '{"format": "cellfield/1", "dimension": 1, "convention": "centered", '
        '"scale": {"numerator": 1, "denominator": 1}, "extent": {"origin": [0], "shape": [2]}, "dtype": "rational"}\n1,x\n',
        '{"format": "cellfield/1", "dimension": 1, "convention": "sideways", '
        '"scale": {"numerator": 1, "denominator": 1}, "extent": {"origin": [0], "shape": [1]}, "dtype": "real"}\n1\n',
    ],
)
def test_malformed_field_text(text):
    with pytest.raises(FieldFormatError):
        field_from_text(text)
