"""Exception types. All derive from ``ValueError`` so callers can catch broadly."""


class InvalidParameterError(ValueError):
    pass


class InvalidInputError(ValueError):
    pass


class RegimeError(ValueError):
    """Requested quantity needs real characteristic roots, i.e. (i - 1) <= N theta^2."""


class DomainError(ValueError):
    pass


class SingularDeterminantError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass
