"""Exception hierarchy shared by every module in the package."""


class LatticeError(Exception):
    """Base class for all errors raised by coherent_averaging."""


class RangeError(LatticeError, ValueError):
    """An integer argument lies outside its admissible range."""


class ScaleError(LatticeError, ValueError):
    """A length scale is not a member of its declared scale set."""


class ConventionError(LatticeError, ValueError):
    """Objects labelled with different cell conventions were combined."""


class ExtentError(LatticeError, IndexError):
    """A cell index falls outside a field, or an operation has empty output."""


class AdmissibilityError(LatticeError, ValueError):
    """A scale factor is not admissible for a scheme family."""


class DegreeError(LatticeError, ValueError):
    """A polynomial exceeds the supported per-axis degree."""


class FieldFormatError(LatticeError, ValueError):
    """A serialized cell field could not be parsed."""
