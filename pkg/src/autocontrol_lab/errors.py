"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent lattice, parameters or run configuration."""


class DomainError(ValueError):
    """Argument outside the domain of a chart, kernel or closed-form solution."""


class DegenerateInputError(ValueError):
    """Input carries no usable information (e.g. an all-zero field)."""


class NoAdmissibleStepError(ValueError):
    """The step-size bound has a non-positive numerator."""


class EstimationError(RuntimeError):
    """A quadrature or sampling estimate failed to stabilise."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NumericBlowup(ArithmeticError):
    """A stepper produced non-finite amplitudes.

    This is a signal, not a crash: orchestration code records it as a
    blow-up event.
    """

    def __init__(self, step, last_norm=None, time=None):
        self.step = step
        self.last_norm = last_norm
        self.time = time
        super().__init__(
            f"non-finite amplitudes at step {step} (last finite norm {last_norm})"
        )
