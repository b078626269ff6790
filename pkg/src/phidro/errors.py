"""Exception hierarchy shared by all phidro modules."""


class PhidroError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(PhidroError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ContractError(PhidroError, ValueError):
    """Inputs violate a structural precondition (shape, simplex, support)."""


class DomainError(PhidroError, ValueError):
    """A function was evaluated outside its domain."""


class SchemaError(PhidroError):
    """A requested CSV column is missing."""

    def __init__(self, column: str):
        super().__init__(f"missing column {column!r}")
        self.column = column


class ParseError(PhidroError):
    """A CSV cell could not be parsed as a finite real."""

    def __init__(self, row: int, column: str, text: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {text!r}")
        self.row = row
        self.column = column


class EmptyInputError(PhidroError):
    """The CSV body contains no data rows."""


class DegenerateSupportError(PhidroError):
    """Calibration needs at least two distinct scenarios."""


class InfeasibleThresholdError(PhidroError):
    """Likelihood threshold exceeds the maximum-likelihood value."""


class InnerSolverInconsistency(PhidroError, ArithmeticError):
    """Recovered worst-case weights do not sum to one."""


class OracleScaleError(PhidroError):
    """The brute-force oracle was asked to solve an instance too large for it."""


class InfeasiblePointError(PhidroError):
    """A point violates (or touches) an inequality constraint."""

    def __init__(self, index: int, value: float):
        super().__init__(f"constraint {index} not strictly satisfied: g = {value!r}")
        self.index = index
        self.value = value


class StartPointError(PhidroError):
    """The optimizer start point is not strictly feasible."""


class StationaryPoint(PhidroError):
    """Raised as a signal when the objective gradient vanishes."""


class UndefinedBarrierParameter(PhidroError):
    """The implied barrier parameter is undefined (zero barrier gradient)."""


class MarginError(PhidroError, ValueError):
    """Finite-difference probe would leave the feasible box."""


class UnsupportedModeError(PhidroError):
    """The requested optimizer cannot handle the given problem."""


class ConfigError(PhidroError):
    """Run configuration failed validation."""
