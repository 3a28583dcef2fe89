"""Exception types shared across the package.

The CLI maps `InputError` (and its subclasses) to exit status 2 and
`InvariantViolation` to exit status 1.
"""


class InputError(ValueError):
    """Malformed or out-of-domain input."""


class ParameterError(InputError):
    """Parameters that violate a stated hypothesis (for example E <= 4 eps')."""


class PreconditionError(InputError):
    """Hypothesis of a comparison not met; carries the measured violation."""

    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured


class ResourceError(RuntimeError):
    """Enumeration bound exceeded."""


class InvariantViolation(AssertionError):
    """An internal invariant that the theory guarantees failed to hold."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InstanceError(InputError):
    """An HHS instance whose data contradicts a structural requirement."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
