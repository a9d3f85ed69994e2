class ShapeError(ValueError):
    """Array dimensions are inconsistent with the requested operation."""


class CapacityError(ValueError):
    """A configured size cap (basis dimension, permanent size, oracle limits) was exceeded."""


class CatalogError(KeyError):
    """Unknown gate name."""


class FidelityUndefinedError(ZeroDivisionError):
    """Fidelity of a zero contraction map."""


class NormError(ValueError):
    """Operation needs a nonzero matrix."""


class ContractionViolation(ValueError):
    """Matrix has spectral norm larger than one."""


class InsufficientDataError(ValueError):
    """Too few points in the fit window."""


class LoadError(ValueError):
    """Serialized record violates a type invariant."""
