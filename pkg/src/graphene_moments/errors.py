"""Exception hierarchy shared by all modules."""


class GrapheneMomentsError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(GrapheneMomentsError):
    """A numerical operation failed or left its domain of validity."""


class NonHermitian(NumericalError):
    pass


class UnsupportedOrder(GrapheneMomentsError, ValueError):
    pass


class GridMismatch(GrapheneMomentsError, ValueError):
    pass


class NonPositiveEpsilon(GrapheneMomentsError, ValueError):
    pass


class ExpOverflow(NumericalError):
    pass


class DegenerateVectorPart(NumericalError):
    pass


class NotDecoupled(GrapheneMomentsError, ValueError):
    pass


class NonPositiveDensity(NumericalError):
    pass


class PolarizationOverflow(NumericalError):
    pass


class DomainError(NumericalError, ValueError):
    pass


class NewtonDivergence(NumericalError):
    pass


class OdeInstability(NumericalError):
    pass


class TailMass(NumericalError):
    """Integrand does not decay at the momentum boundary."""


class OriginSingularity(NumericalError):
    pass


class StepRejected(NumericalError):
    pass


class DtUnderflow(NumericalError):
    pass


class ConfigError(GrapheneMomentsError):
    """Base for configuration problems (CLI exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        super().__init__(f"{message}{where}")


class ValidationError(ConfigError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
