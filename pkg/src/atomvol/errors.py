"""Exception hierarchy shared by the library and the CLI."""


class AtomVolError(Exception):
    """Base class for all library errors."""


class DomainError(AtomVolError, ValueError):
    """An argument lies outside the domain of the operation."""


class ArbitrageError(AtomVolError, ValueError):
    """A price violates the static no-arbitrage bounds."""


class NumericalError(AtomVolError, ArithmeticError):
    """A numerical procedure (root finding, quadrature) did not converge."""


class QuadratureError(NumericalError):
    pass


class InversionError(NumericalError):
    pass


class EstimationError(NumericalError):
    """An estimator could not produce a real-valued estimate."""


class UnsupportedModelError(AtomVolError):
    """The requested computation is not defined for the given model."""


class DivergenceWarning(UserWarning):
    """A replication integral diverges as its cutoff goes to zero."""
