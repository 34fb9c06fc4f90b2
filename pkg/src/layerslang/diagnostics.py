"""Source locations, diagnostics and the compiler's exception types."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    offset: int
    length: int

    @property
    def end(self):
        return self.offset + self.length

    def to(self, other):
        """Span from the start of ``self`` to the end of ``other``."""
        return Span(self.line, self.column, self.offset,
                    max(self.end, other.end) - self.offset)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Span | None = None
    severity: str = "error"

    def format(self, filename="<input>"):
        line, col = (self.span.line, self.span.column) if self.span else (1, 1)
        head = self.severity if not self.code else f"{self.severity} {self.code}"
        return f"{filename}:{line}:{col}: {head}: {self.message}"

    def sort_key(self):
        return (self.span.offset if self.span else -1, self.code)


class LayersError(Exception):
    """Base class for every error raised by the toolchain."""


class LexError(LayersError):
    UNEXPECTED_CHAR = "UnexpectedChar"
    UNTERMINATED_FILE = "UnterminatedFile"
    MALFORMED_NUMBER = "MalformedNumber"

    def __init__(self, kind, message, span):
        super().__init__(message)
        self.kind = kind
        self.message = message
        self.span = span

    @property
    def diagnostic(self):
        return Diagnostic("", self.message, self.span)


class ParseError(LayersError):
    def __init__(self, expected, found, span=None):
        self.expected = frozenset(expected)
        self.found = found
        self.span = span if span is not None else found.span
        names = ", ".join(sorted(self.expected))
        super().__init__(f"expected {names} but found {found.describe()}")

    @property
    def diagnostic(self):
        return Diagnostic("", str(self), self.span)


class SemanticError(LayersError):
    """Raised with every error diagnostic collected during analysis."""

    def __init__(self, diagnostics):
        self.diagnostics = sorted(diagnostics, key=Diagnostic.sort_key)
        super().__init__("\n".join(d.format() for d in self.diagnostics))

    @property
    def codes(self):
        return [d.code for d in self.diagnostics]


class DataError(LayersError):
    """Malformed or unreadable dataset file."""


class IRFormatError(LayersError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class EngineError(LayersError):
    """Runtime failure while interpreting a program."""
