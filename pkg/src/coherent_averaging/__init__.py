"""Coherent averaging operators on scaled lattices.

Stencils are exact rationals; composition, coherence checks and the weight
solvers all run without floating point.  Fields may be exact or real.
"""

__version__ = "0.1.0"

from .errors import (
    AdmissibilityError,
    ConventionError,
    DegreeError,
    ExtentError,
    FieldFormatError,
    LatticeError,
    RangeError,
    ScaleError,
)
from .lattice import (
    CellField,
    CellIndex,
    Convention,
    Scale,
    ScaleSet,
    coarse_index,
    d_adic_expand,
    d_adic_value,
    read_field,
    save_field,
)
from .schemes import (
    FAMILY_NAMES,
    Degenerate,
    SchemeFamily,
    WeightStencil,
    bf_stencil,
    degenerate_stencil,
    get_family,
    parity_stencil,
    tensor_product,
    uniform_corner_stencil,
)
from .engine import apply, apply_separable, compose, iterate, iterate_digit_product
from .coherence import (
    check_weight_identity,
    enumerate_decompositions,
    factor_pairs,
    verify_family_coherence,
)
from .uniqueness import (
    derive_constraints,
    induction_milestones,
    probe_higher_dim_uniqueness,
    solve_1d_factorized,
    solve_2d_symmetric,
    solve_corner,
)
from .continuum import SampledPolynomial, Tower, build_tower, commute_check, hat_refinement_check, hat_sample
from .estimator import LatticeCoarsener
