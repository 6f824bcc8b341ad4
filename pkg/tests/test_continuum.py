import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherent_averaging.continuum import (
    HAT_MOMENTS,
    SampledPolynomial,
    build_tower,
    commute_check,
    hat,
    hat_refinement_check,
    hat_sample,
    hat_sample_function,
    path_independence,
)
from coherent_averaging.engine import apply
from coherent_averaging.errors import AdmissibilityError, DegreeError, RangeError
from coherent_averaging.lattice import CellField, Convention
from coherent_averaging.schemes import FAMILY_NAMES, get_family

from conftest import random_rational_field

F = Fraction


def test_hat_values():
    assert [hat(x) for x in (-1, F(-1, 2), 0, F(1, 3), 1, 2)] == [0, F(1, 2), 1, F(2, 3), 0, 0]


def test_hat_moments_by_quadrature():
    u = np.linspace(-1, 1, 200001)
    lam = np.maximum(0, 1 - np.abs(u))
    for n, m in enumerate(HAT_MOMENTS):
        assert np.trapezoid(u**n * lam, u) == pytest.approx(float(m), abs=1e-9)


def test_refinement_node_example():
    # at x = 1 and d = 2: hat(1/2) = 1/2 hat(0) + 1 hat(1) + 1/2 hat(2) = 1/2
    assert hat(F(1, 2)) == sum(F(2 - abs(i), 2) * hat(1 - i) for i in (-1, 0, 1))
    assert hat_refinement_check(2)


@pytest.mark.parametrize("d", list(range(1, 65)))
def test_refinement_holds(d):
    assert hat_refinement_check(d)


def test_refinement_rejects_bad_factor():
    with pytest.raises(RangeError):
        hat_refinement_check(0)


def test_parse_and_evaluate():
    p = SampledPolynomial.parse("x^2*y - 1/3", dim=2)
    assert p.degree() == 3 and p(3, 2) == 18 - F(1, 3)
    assert SampledPolynomial.parse("2*x**3 + x").coefficients == {(3,): 2, (1,): 1}
    with pytest.raises(RangeError):
        SampledPolynomial.parse("sin(x)")
    with pytest.raises(RangeError):
        SampledPolynomial.parse("x*y", dim=1)


def test_degree_limit():
    with pytest.raises(DegreeError):
        SampledPolynomial.parse("x^4")
    with pytest.raises(DegreeError):
        SampledPolynomial.monomial((0, 5))
    # total degree above 3 is fine as long as each axis stays within it
    assert SampledPolynomial.parse("x^3*y^3", dim=2).degree() == 6


def test_hat_sample_of_square():
    f = hat_sample(SampledPolynomial.parse("x^2"), 1, [(-3, 3)])
    assert list(f.values) == [F(a * a) + F(1, 6) for a in range(-3, 4)]
    g = hat_sample(SampledPolynomial.parse("x^2"), F(1, 2), [(0, 2)])
    assert list(g.values) == [F(a * a, 4) + F(1, 24) for a in range(3)]


def test_corner_sampling_uses_midpoints():
    f = hat_sample(SampledPolynomial.parse("x"), 2, [(0, 2)], Convention.CORNER)
    assert list(f.values) == [1, 3, 5]


def test_hat_sample_matches_quadrature():
    p = SampledPolynomial.parse("x^3*y - 2*x*y^2 + 1/7", dim=2)
    exact = hat_sample(p, F(3, 2), [(-1, 1), (0, 2)]).to_float().values
    approx = hat_sample_function(lambda x, y: x**3 * y - 2 * x * y**2 + 1 / 7, F(3, 2), [(-1, 1), (0, 2)],
                                 panels=256).values
    np.testing.assert_allclose(approx, exact, rtol=0, atol=1e-12)


def test_quadrature_of_a_smooth_function():
    # the hat transform of cos is cos(a) * (2 - 2 cos 1)
    f = hat_sample_function(np.cos, 1, [(0, 3)])
    expected = [math.cos(a) * (2 - 2 * math.cos(1)) for a in range(4)]
    np.testing.assert_allclose(f.values, expected, rtol=0, atol=1e-12)


def test_commute_example():
    rep = commute_check(SampledPolynomial.parse("x^2*y", dim=2), 1, 3, [(-6, 6), (-6, 6)])
    assert rep.passed and rep.max_residual == 0
    assert rep.residual.extent == ((-1, 1), (-1, 1))


@pytest.mark.parametrize("dim,d", list(product([1, 2], [2, 3, 4])))
def test_every_cubic_monomial_commutes(dim, d):
    extent = [(-2 * d, 2 * d)] * dim
    for exps in product(range(4), repeat=dim):
        rep = commute_check(SampledPolynomial.monomial(exps), F(1, 3), d, extent)
        assert rep.passed, exps


def test_uniform_corner_analogue_leaves_quadratic_residual():
    rep = commute_check(SampledPolynomial.parse("x^2"), 1, 2, [(0, 7)], family=get_family("uniform", 1))
    assert set(rep.residual.values.flat) == {F(-1, 4)}
    z, d = F(2, 5), 3
    rep = commute_check(SampledPolynomial.parse("x^2"), z, d, [(0, 8)], family=get_family("uniform", 1))
    assert set(rep.residual.values.flat) == {z * z * (1 - d * d) / 12}
    assert commute_check(SampledPolynomial.parse("x - 2"), 1, 4, [(0, 11)], family=get_family("uniform", 1)).passed


@given(st.lists(st.fractions(-5, 5, max_denominator=9), min_size=4, max_size=4),
       st.integers(2, 5))
def test_cubics_commute_for_bf(coeffs, d):
    p = SampledPolynomial({(k,): c for k, c in enumerate(coeffs)})
    assert commute_check(p, F(1, 2), d, [(-d, 2 * d)]).passed


def test_constant_tower():
    base = CellField(np.full((30, 30), F(5, 3), dtype=object))
    tower = build_tower(base, "bf", [2, 3])
    assert tower.complete and tower.depth == 2
    assert set(tower.top.values.flat) == {F(5, 3)}
    assert tower.top.scale.value == 6
    assert [lv.cumulative for lv in tower.levels] == [2, 6]


def test_tower_truncates_when_the_field_runs_out():
    tower = build_tower(CellField(np.ones(9, dtype=object)), get_family("bf", 1), [2, 2, 2, 2])
    assert not tower.complete and tower.depth < 4
    m = tower.manifest()
    assert m["complete"] is False and m["requested_factors"] == [2, 2, 2, 2]
    assert len(m["levels"]) == tower.depth


def test_tower_rejects_inadmissible_factor_up_front():
    with pytest.raises(AdmissibilityError):
        build_tower(CellField(np.ones(40, dtype=object), convention="corner"), get_family("central", 1), [3, 2])


def test_polynomial_tower_tracks_direct_sampling():
    p = SampledPolynomial.parse("x^3 - x*y + y^2", dim=2)
    tower = build_tower(p, "bf", [2, 3], z=1, extent=[(-20, 20), (-20, 20)])
    direct = hat_sample(p, 6, tower.top.extent)
    assert tower.top.equals(direct)


def test_two_paths_to_six(rng):
    base = CellField(random_rational_field(rng, (40, 40)), origin=(-20, -20))
    rep = path_independence(base, "bf", [(2, 3), (6,), (3, 2)])
    assert rep.consistent and rep.extent is not None


def test_lower_left_two_steps_equal_one():
    vals = random_rational_field(np.random.default_rng(3), (16, 16))
    base = CellField(vals, convention="corner")
    a = build_tower(base, get_family("lower-left", 2), [2, 2]).top
    b = build_tower(base, get_family("lower-left", 2), [4]).top
    assert a.equals(b)
    assert a[1, 2] == vals[4, 8]


def _factorizations(n, lo=2):
    if n == 1:
        return [()]
    return [(k,) + rest for k in range(lo, n + 1) if n % k == 0 for rest in _factorizations(n // k, 2)]


def test_factorization_helper():
    assert sorted(_factorizations(12)) == sorted(
        [(2, 2, 3), (2, 3, 2), (3, 2, 2), (2, 6), (6, 2), (3, 4), (4, 3), (12,)]
    )


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_path_independence_for_catalogue(name, rng):
    fam = get_family(name, 2)
    n = 15 if name == "central" else 12
    paths = [fs for fs in _factorizations(n) if all(fam.admissible(k) for k in fs)]
    size = 3 * n + 4
    base = CellField(random_rational_field(rng, (size, size)), convention=fam.convention, origin=(-size // 2,) * 2)
    rep = path_independence(base, fam, paths)
    assert rep.consistent, rep.mismatches[:3]


def test_path_independence_for_thirty_in_one_dimension(rng):
    fam = get_family("bf", 1)
    base = CellField(random_rational_field(rng, (100,)), origin=(-50,))
    rep = path_independence(base, fam, _factorizations(30))
    assert rep.consistent and len(rep.towers) == 13


def test_path_independence_detects_incoherence(rng):
    from coherent_averaging.schemes import perturbed_family

    fam = perturbed_family(get_family("uniform", 1), 6, (0,), F(1, 3))
    base = CellField(random_rational_field(rng, (60,)), convention="corner")
    rep = path_independence(base, fam, [(2, 3), (6,)])
    assert not rep.consistent
