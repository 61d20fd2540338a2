class ValidationError(ValueError):
    """Input is not a valid state, Hamiltonian, or channel."""


class DomainError(ValueError):
    """Quantity is undefined for the given (valid) arguments."""


class PreconditionError(RuntimeError):
    """A certifier was called before the check it depends on passed."""
