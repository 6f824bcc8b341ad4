from fractions import Fraction

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from coherent_averaging.engine import apply
from coherent_averaging.estimator import LatticeCoarsener
from coherent_averaging.lattice import CellField
from coherent_averaging.schemes import get_family


def test_params_roundtrip():
    est = LatticeCoarsener(family="parity", factor=3)
    assert est.get_params()["family"] == "parity"
    twin = clone(est).set_params(factor=5)
    assert twin.factor == 5 and est.factor == 3


def test_transform_needs_fit():
    with pytest.raises(NotFittedError):
        LatticeCoarsener().transform(np.zeros((1, 8, 8)))


def test_matches_engine(rng):
    X = rng.normal(size=(3, 12, 12))
    out = LatticeCoarsener(factor=3, separable=False).fit_transform(X)
    for x, y in zip(X, out):
        ref = apply(get_family("bf", 2)(3), CellField(x))
        np.testing.assert_array_equal(y, ref.values)


def test_output_geometry():
    est = LatticeCoarsener(factor=2, origin=(-4, -4)).fit(np.zeros((1, 9, 9)))
    assert est.output_origin_ == (-1, -1) and est.output_shape_ == (3, 3)
    assert est.n_features_in_ == 81


def test_separable_agrees_with_dense(rng):
    X = rng.normal(size=(4, 20, 20))
    a = LatticeCoarsener(factor=4, separable=True).fit_transform(X)
    b = LatticeCoarsener(factor=4, separable=False).fit_transform(X)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


def test_exact_mode_keeps_rationals():
    X = np.arange(2 * 6 * 6).reshape(2, 6, 6)
    out = LatticeCoarsener(factor=2, exact=True).fit_transform(X)
    assert out.dtype == object and isinstance(out[0, 0, 0], Fraction)
    # bf reproduces affine fields exactly
    assert out[0, 0, 0] == X[0, 2, 2]


def test_corner_family():
    X = np.arange(16.0).reshape(1, 4, 4)
    out = LatticeCoarsener(family="uniform", factor=2).fit_transform(X)
    np.testing.assert_array_equal(out[0], [[2.5, 4.5], [10.5, 12.5]])


@pytest.mark.parametrize(
    "kwargs,X",
    [
        ({"factor": 0}, np.zeros((1, 8))),
        ({"factor": 2.5}, np.zeros((1, 8))),
        ({"separable": "yes"}, np.zeros((1, 8))),
        ({"family": "diagonal", "separable": True}, np.zeros((1, 8, 8))),
        ({"origin": (0,)}, np.zeros((1, 8, 8))),
        ({"factor": 5}, np.zeros((1, 6, 6))),
        ({}, np.zeros(8)),
    ],
)
def test_fit_rejects(kwargs, X):
    with pytest.raises(ValueError):
        LatticeCoarsener(**kwargs).fit(X)


def test_transform_rejects_other_shapes():
    est = LatticeCoarsener().fit(np.zeros((1, 8, 8)))
    with pytest.raises(ValueError):
        est.transform(np.zeros((1, 9, 8)))


def test_unknown_family():
    with pytest.raises(KeyError):
        LatticeCoarsener(family="nope").fit(np.zeros((1, 8)))


def test_two_steps_in_a_pipeline_equal_one(rng):
    X = rng.normal(size=(2, 30))
    first = LatticeCoarsener(factor=2, origin=(-15,)).fit(X)
    pipe = make_pipeline(first, LatticeCoarsener(factor=3, origin=first.output_origin_))
    chained = pipe.fit_transform(X)
    second = pipe[-1]
    direct_est = LatticeCoarsener(factor=6, origin=(-15,)).fit(X)
    direct = direct_est.transform(X)
    assert second.output_origin_ == direct_est.output_origin_
    assert second.output_shape_ == direct_est.output_shape_
    np.testing.assert_allclose(chained, direct, rtol=0, atol=1e-13)
