"""Scikit-learn transformer that coarsens a batch of fields.

``X`` has shape ``(n_samples, *field_shape)``; each sample is one field on a
box of cells starting at ``origin``.  ``transform`` returns the coarsened
fields stacked the same way.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .engine import apply, apply_separable, output_range
from .lattice import CellField
from .schemes import get_family

# families whose D-dimensional stencil is the tensor power of the 1-D one
PRODUCT_FAMILIES = frozenset({"bf", "parity", "centered-delta", "uniform", "lower-left", "corner-ne"})


class LatticeCoarsener(TransformerMixin, BaseEstimator):
    """Apply one averaging step of a scheme family to every sample.

    Parameters
    ----------
    family : scheme family name, e.g. ``"bf"`` or ``"uniform"``.
    factor : scale factor ``d``.
    separable : ``True`` forces the per-axis path (product families only),
        ``False`` forces the dense stencil, ``"auto"`` picks per-axis when it applies.
    exact : keep values as exact rationals (object array of ``Fraction``).
    origin : index of the first cell along each axis; zeros if None.
    """

    def __init__(self, family="bf", factor=2, separable="auto", exact=False, origin=None):
        self.family = family
        self.factor = factor
        self.separable = separable
        self.exact = exact
        self.origin = origin

    def _validate(self, X, reset):
        if self.exact:
            X = check_array(X, allow_nd=True, ensure_2d=False, dtype=None, ensure_all_finite=False)
            X = np.vectorize(Fraction, otypes=[object])(X) if X.size else X.astype(object)
        else:
            X = check_array(X, allow_nd=True, ensure_2d=False, dtype=np.float64)
        if X.ndim < 2:
            raise ValueError(f"expected shape (n_samples, *field_shape), got {X.shape}")
        if reset:
            self.field_shape_ = X.shape[1:]
        elif X.shape[1:] != self.field_shape_:
            raise ValueError(f"field shape {X.shape[1:]} differs from the fitted {self.field_shape_}")
        return X

    def fit(self, X, y=None):
        if not isinstance(self.factor, (int, np.integer)) or self.factor < 1:
            raise ValueError(f"factor must be a positive integer, got {self.factor!r}")
        if self.separable not in (True, False, "auto"):
            raise ValueError(f"separable must be True, False or 'auto', got {self.separable!r}")
        X = self._validate(X, reset=True)
        dim = X.ndim - 1
        family = get_family(self.family, dim)
        self.stencil_ = family(int(self.factor))
        self.convention_ = family.convention
        product = self.family in PRODUCT_FAMILIES
        if self.separable is True and not product:
            raise ValueError(f"family {self.family!r} is not a tensor product; use separable=False")
        self.profiles_ = [get_family(self.family, 1)(int(self.factor))] * dim if product and self.separable else None
        origin = tuple(self.origin) if self.origin is not None else (0,) * dim
        if len(origin) != dim:
            raise ValueError(f"origin has {len(origin)} entries for {dim}-dimensional fields")
        self.origin_ = origin
        lo = self.stencil_.low
        hi = lo + self.stencil_.shape[0] - 1
        ranges = [output_range(o, n, self.stencil_.d, lo, hi) for o, n in zip(origin, self.field_shape_)]
        if any(b < a for a, b in ranges):
            raise ValueError(f"fields of shape {self.field_shape_} are too small for factor {self.factor}")
        self.output_origin_ = tuple(a for a, _ in ranges)
        self.output_shape_ = tuple(b - a + 1 for a, b in ranges)
        self.n_features_in_ = int(np.prod(self.field_shape_))
        return self

    def transform(self, X):
        check_is_fitted(self, "stencil_")
        X = self._validate(X, reset=False)
        out = np.empty((X.shape[0],) + self.output_shape_, dtype=object if self.exact else np.float64)
        for n, sample in enumerate(X):
            f = CellField(sample, convention=self.convention_, origin=self.origin_)
            g = apply_separable(self.profiles_, f) if self.profiles_ else apply(self.stencil_, f)
            out[n] = g.values
        return out
