"""Exception types and the report object shared by the validation passes."""

from __future__ import annotations

from dataclasses import dataclass, field


class LogilpError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateName(LogilpError):
    pass


class UnknownParent(LogilpError):
    pass


class UnknownConcept(LogilpError):
    pass


class DuplicateArgName(LogilpError):
    pass


class DslSyntaxError(LogilpError):
    """Syntax error in a .dk file, with 1-based line/column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, col {col})")
        self.raw_message = message
        self.line = line
        self.col = col

    def __reduce__(self):
        return (type(self), (self.raw_message, self.line, self.col))


class UnboundVariable(LogilpError):
    pass


class BadPath(LogilpError):
    pass


class SchemaError(LogilpError):
    """Instance JSON does not match the expected shape or the graph."""


class DanglingLink(LogilpError):
    pass


class MissingArg(LogilpError):
    pass


class MissingScore(LogilpError):
    pass


class Infeasible(LogilpError):
    """No 0-1 assignment satisfies the model.

    ``hint`` names the first constraint that produced a contradiction,
    as a starting point for debugging, not a minimal core.
    """

    def __init__(self, message: str = "model is infeasible", hint: str | None = None):
        super().__init__(message if hint is None else f"{message} (first failing: {hint})")
        self.raw_message = message
        self.hint = hint

    def __reduce__(self):
        return (type(self), (self.raw_message, self.hint))


class TooLarge(LogilpError):
    pass


class DimMismatch(LogilpError):
    pass


class MissingAssignment(LogilpError):
    pass


class MissingLabels(LogilpError):
    pass


class ConfigError(LogilpError):
    pass


class GraphMismatch(LogilpError):
    pass


ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Violation:
    """One finding from a validation pass."""

    code: str
    message: str
    severity: str = ERROR
    where: str = ""

    def __str__(self) -> str:
        loc = f" [{self.where}]" if self.where else ""
        return f"{self.severity}: {self.code}{loc}: {self.message}"


@dataclass
class ValidationReport:
    """Collected violations; ``ok`` means no error-severity entries."""

    violations: list[Violation] = field(default_factory=list)

    def add(self, code: str, message: str, severity: str = ERROR, where: str = "") -> None:
        self.violations.append(Violation(code, message, severity, where))

    @property
    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == ERROR]

    @property
    def warnings(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == WARNING]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def __str__(self) -> str:
        if not self.violations:
            return "clean"
        return "\n".join(str(v) for v in self.violations)

    def to_json(self) -> list[dict]:
        return [
            {"code": v.code, "message": v.message, "severity": v.severity, "where": v.where}
            for v in self.violations
        ]
