"""Exception hierarchy shared by every module of the engine."""


class QCleanError(Exception):
    """Base class for all engine errors."""


class TypeMismatchError(QCleanError):
    """A literal or key is not type-compatible with an attribute's kind."""


class SchemaError(QCleanError):
    """Unknown attribute/relation, arity mismatch or malformed schema."""


class ParseError(QCleanError):
    """Syntax error in the rule DSL or the SQL subset.

    ``line`` and ``column`` are 1-based and may be ``None`` when unknown.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class RuleError(QCleanError):
    """A rule is invalid for the relation it is bound to."""


class RepairError(QCleanError):
    """A repair precondition was violated (e.g. a non-violating pair)."""


class ValidationError(QCleanError):
    """A persisted probabilistic dataset violates a cell invariant."""


class StatisticsError(QCleanError):
    """Inconsistent statistics were supplied to an estimator."""
