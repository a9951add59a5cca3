"""Exception hierarchy for glflow."""


class GlflowError(Exception):
    """Base class for all glflow errors."""


class DomainError(GlflowError):
    """Invalid macroscopic domain or lattice construction failure."""


class SolverError(GlflowError):
    """An iterative solver failed to converge or its preconditions fail."""


class InstabilityError(GlflowError):
    """A time integration became unstable (energy growth or NaN)."""


class DivergenceError(GlflowError):
    """A Monte Carlo chain diverged (field norm exploded)."""


class ConfigError(GlflowError):
    """Invalid run configuration.

    Carries the full list of validation messages in ``errors``.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
