"""Exception hierarchy shared by all engine modules."""


class HybridSimError(Exception):
    """Base class for engine errors."""


class DimensionError(HybridSimError, ValueError):
    pass


class EigenError(HybridSimError):
    """Eigen-decomposition failed or produced an unusable (defective) basis."""


class DegeneracyError(EigenError):
    """Branch collision / exceptional point where a derivative is undefined."""


class ClosedFormError(HybridSimError, ZeroDivisionError):
    """A printed closed-form coefficient hit a vanishing denominator."""


class ToleranceError(HybridSimError):
    """A numerical invariant was violated beyond its tolerance."""


class SingularGeometryError(HybridSimError):
    """Evaluation inside the a < a_min coordinate singularity."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class OverdampedError(HybridSimError, ValueError):
    """Critically or over-damped classical parameters (Gamma/m >= Omega)."""


class ConfigError(HybridSimError, ValueError):
    pass
