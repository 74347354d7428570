"""Error hierarchy with stable machine-readable codes.

Every user-facing failure carries a `code` used in CLI JSON output and
asserted by the tests; messages are for humans and may change.
"""
from __future__ import annotations


class SpecError(Exception):
    code = "error"

    def to_json(self):
        return {"error": self.code, "message": str(self)}


class LexError(SpecError):
    code = "lex-error"


class ParseError(SpecError):
    code = "parse-error"


class ResolveError(SpecError):
    code = "unbound-identifier"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code:
            self.code = code
        elif "duplicate" in message:
            self.code = "duplicate-declaration"


class TypeCheckError(SpecError):
    code = "type-error"

    def __init__(self, message, *, expected=None, actual=None, line=None):
        super().__init__(message)
        self.expected = expected
        self.actual = actual
        self.line = line

    def to_json(self):
        out = {"error": self.code, "message": str(self)}
        if self.expected is not None:
            out["expected"] = str(self.expected)
        if self.actual is not None:
            out["actual"] = str(self.actual)
        if self.line is not None:
            out["line"] = self.line
        return out


class NormalizationError(SpecError):
    code = "normalization-error"


class DivisionByZero(NormalizationError):
    code = "division-by-zero"


class LossCompileError(SpecError):
    code = "loss-compile-error"


class UnboundedDomain(LossCompileError):
    code = "unbounded-sampling-domain"


class QueryCompileError(SpecError):
    code = "query-compile-error"


class AlternatingQuantifiers(QueryCompileError):
    code = "alternating-quantifiers"


class NonlinearEmbedding(QueryCompileError):
    code = "nonlinear-embedding"


class UnsupportedAtom(QueryCompileError):
    code = "unsupported-atom"


class PatternBudgetExceeded(SpecError):
    code = "pattern-budget-exceeded"


class NetworkFormatError(SpecError):
    code = "network-format-error"


class ResourceError(SpecError):
    code = "resource-error"


class CacheError(SpecError):
    code = "cache-error"


class ExportError(SpecError):
    code = "export-error"


class InternalError(SpecError):
    """A postcondition re-check failed: always a bug, never user error."""
    code = "internal-error"
