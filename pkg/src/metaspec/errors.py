"""Error types shared across the toolkit."""
from __future__ import annotations

from dataclasses import dataclass, field


class MetaspecError(Exception):
    """Base class for all tool-reported errors."""


@dataclass
class ParseError(MetaspecError):
    message: str
    file: str = "<input>"
    line: int = 0
    col: int = 0

    def __str__(self):
        return f"{self.file}:{self.line}:{self.col}: parse error: {self.message}"


@dataclass
class TypecheckError:
    """One type violation. Typechecking collects these instead of raising."""

    message: str
    line: int = 0

    def __str__(self):
        return f"line {self.line}: type error: {self.message}"


class TypecheckFailure(MetaspecError):
    """Raised by helpers that need a typed program and cannot continue."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


# Well-formedness error kinds for meta-properties.
UNKNOWN_GLOBAL = "UnknownGlobal"
META_VAR_WRONG_CONTEXT = "MetaVarWrongContext"
UNBOUNDED_QUANTIFIER = "UnboundedQuantifier"
UNKNOWN_TARGET_FUNCTION = "UnknownTargetFunction"
INVALID_PREDICATE = "InvalidPredicate"


@dataclass
class SpecError:
    kind: str
    message: str
    meta_name: str = ""

    def __str__(self):
        where = f" in meta {self.meta_name}" if self.meta_name else ""
        return f"spec error{where}: [{self.kind}] {self.message}"


class DuplicateName(MetaspecError):
    pass


class EvalError(MetaspecError):
    """Error while evaluating an annotation predicate (reported as a failing
    assertion with a reason, never as a crash)."""


class MiniRuntimeError(MetaspecError):
    """Runtime fault in interpreted mini-C code (null deref, out-of-bounds,
    missing stub, division by zero). Aborts the run with a partial report."""


class IncomparableRuns(MetaspecError):
    """diff_reports got reports from different drivers or seeds."""
