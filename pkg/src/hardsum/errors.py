"""Exception types raised by the library."""


class ParameterDomainError(ValueError):
    """Constructor parameters violate the construction's stated conditions."""


class RegimeError(ParameterDomainError):
    """Parameters fall in a regime served by a different family.

    ``directive`` names the family the caller should use instead, if any.
    """

    def __init__(self, message, directive=None):
        super().__init__(message)
        self.directive = directive


class UnsupportedFamilyError(TypeError):
    """The operation has no meaning for this instance family."""


class ProxValidityError(ValueError):
    """Proximal step size outside the range where the prox is well defined."""


class NumericalError(RuntimeError):
    """An inner numerical solve failed to reach its tolerance."""
