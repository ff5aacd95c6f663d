"""Well-formedness rules for meta-properties.

A meta-property predicate may refer to globals, named constants, enum
literals, its bound quantifier variables and the meta-variable its context
provides. It may read pointer values but never memory behind a pointer
(no `*p`, `p->f`, `p[i]` as values), which keeps its footprint finite and
statically known.
"""
from __future__ import annotations

from .ast import Deref, Expr, Field, Index, PtrType, Var, walk_exprs
from .errors import (
    INVALID_PREDICATE, META_VAR_WRONG_CONTEXT, SpecError, UNBOUNDED_QUANTIFIER,
    UNKNOWN_GLOBAL, UNKNOWN_TARGET_FUNCTION, SpecError as _SpecError,
)
from .spec_ast import (
    BoolAtom, Compare, ContextKind, Forall, Implies, LocAddrOf, LocRange,
    LocRead, LocWritten, MetaProperty, PAnd, PNot, POr, Predicate, Separated,
    TargetSpec,
)
from .typecheck import INT_T, TypedProgram, expr_typer, is_int_like, same_type


def resolve_targets(t: TargetSpec, program) -> set[str]:
    """F = (F+ or all defined functions) \\ (F- or nothing)."""
    defined = {f.name for f in program.defined_functions()}
    included = set(t.includes) & defined if t.includes is not None else defined
    excluded = set(t.excludes) if t.excludes is not None else set()
    return included - excluded


class _WfChecker:
    def __init__(self, meta: MetaProperty, tp: TypedProgram):
        self.m = meta
        self.tp = tp
        self.errors: list[SpecError] = []
        self.typer = expr_typer(tp)

    def err(self, kind: str, msg: str):
        self.errors.append(SpecError(kind, msg, self.m.name))

    def run(self) -> list[SpecError]:
        self.check_targets()
        self.check_names(self.m.predicate, frozenset())
        if not self.errors:
            self.check_pred(self.m.predicate, {})
        return self.errors

    def check_targets(self):
        defined = {f.name for f in self.tp.program.defined_functions()}
        for names in (self.m.targets.includes, self.m.targets.excludes):
            for n in names or []:
                if n not in defined:
                    self.err(UNKNOWN_TARGET_FUNCTION,
                             f"{n!r} is not a function defined in the program")

    # -- name scoping -------------------------------------------------------

    def known_name(self, n: str, bound: frozenset) -> bool:
        tp = self.tp
        return (n in bound or n in tp.globals or n in tp.constants
                or n in tp.enum_literals)

    def check_names(self, p: Predicate, bound: frozenset):
        match p:
            case Forall(var=v, lo=lo, hi=hi, body=b):
                for e in (lo, hi):
                    if e is not None:
                        self._names_in(e, bound)
                self.check_names(b, bound | {v})
            case Implies(lhs=l, rhs=r) | PAnd(lhs=l, rhs=r) | POr(lhs=l, rhs=r):
                self.check_names(l, bound)
                self.check_names(r, bound)
            case PNot(operand=x):
                self.check_names(x, bound)
            case Compare(lhs=l, rhs=r):
                self._names_in(l, bound)
                self._names_in(r, bound)
            case BoolAtom(expr=e):
                self._names_in(e, bound)
            case Separated(lhs=a, rhs=b):
                for t in (a, b):
                    match t:
                        case LocAddrOf(lvalue=lv):
                            self._names_in(lv, bound)
                        case LocRange(ptr=pt, lo=lo, hi=hi):
                            for e in (pt, lo, hi):
                                self._names_in(e, bound)
                        case LocWritten():
                            if self.m.context is not ContextKind.WRITING:
                                self.err(META_VAR_WRONG_CONTEXT,
                                         "\\written is only available in the writing context")
                        case LocRead():
                            if self.m.context is not ContextKind.READING:
                                self.err(META_VAR_WRONG_CONTEXT,
                                         "\\read is only available in the reading context")

    def _names_in(self, e: Expr, bound: frozenset):
        for sub in walk_exprs(e):
            if isinstance(sub, Var) and not self.known_name(sub.name, bound):
                self.err(UNKNOWN_GLOBAL,
                         f"{sub.name!r} is not a global, constant, enum literal "
                         f"or bound quantifier variable")

    # -- typing and structural rules -----------------------------------------

    def type_expr(self, e: Expr, quantvars: dict) -> object | None:
        before = len(self.typer.issues)
        ty = self.typer.type_expr(e, None, quantvars)
        for issue in self.typer.issues[before:]:
            self.err(INVALID_PREDICATE, str(issue))
        if ty is not None:
            self._forbid_indirection(e)
        return ty

    def _forbid_indirection(self, e: Expr):
        for sub in walk_exprs(e):
            match sub:
                case Deref():
                    self.err(INVALID_PREDICATE,
                             "predicates may not dereference pointers")
                case Field(arrow=True):
                    self.err(INVALID_PREDICATE,
                             "predicates may not read fields through pointers")
                case Index(base=b) if isinstance(b.ty, PtrType):
                    self.err(INVALID_PREDICATE,
                             "predicates may not index through pointers")

    def check_pred(self, p: Predicate, quantvars: dict):
        match p:
            case Forall(var=v, lo=lo, hi=hi, body=b, line=line):
                if lo is None or hi is None:
                    self.err(UNBOUNDED_QUANTIFIER,
                             f"quantifier over {v!r} needs a lo <= {v} < hi guard")
                else:
                    for e in (lo, hi):
                        if any(isinstance(s, Var) and s.name == v for s in walk_exprs(e)):
                            self.err(UNBOUNDED_QUANTIFIER,
                                     f"bounds of {v!r} may not mention {v!r}")
                        ty = self.type_expr(e, quantvars)
                        if ty is not None and not is_int_like(ty):
                            self.err(INVALID_PREDICATE, "quantifier bounds must be integers")
                if v in quantvars:
                    self.err(INVALID_PREDICATE, f"quantifier variable {v!r} shadows an outer one")
                if v in self.tp.globals or v in self.tp.constants or v in self.tp.enum_literals:
                    self.err(INVALID_PREDICATE, f"quantifier variable {v!r} shadows a global name")
                self.check_pred(b, {**quantvars, v: INT_T})
            case Implies(lhs=l, rhs=r) | PAnd(lhs=l, rhs=r) | POr(lhs=l, rhs=r):
                self.check_pred(l, quantvars)
                self.check_pred(r, quantvars)
            case PNot(operand=x):
                self.check_pred(x, quantvars)
            case Compare(op=op, lhs=l, rhs=r):
                lt = self.type_expr(l, quantvars)
                rt = self.type_expr(r, quantvars)
                if lt is None or rt is None:
                    return
                if op in ("==", "!="):
                    ok = ((is_int_like(lt) and is_int_like(rt)) or same_type(lt, rt))
                else:
                    ok = is_int_like(lt) and is_int_like(rt)
                if not ok:
                    self.err(INVALID_PREDICATE, f"cannot compare {lt} with {rt}")
            case BoolAtom(expr=e):
                ty = self.type_expr(e, quantvars)
                if ty is not None and not is_int_like(ty):
                    self.err(INVALID_PREDICATE, f"predicate atom must be int-valued, not {ty}")
            case Separated(lhs=a, rhs=b):
                for t in (a, b):
                    self.check_locterm(t, quantvars)

    def check_locterm(self, t, quantvars: dict):
        match t:
            case LocAddrOf(lvalue=lv):
                from .ast import is_lvalue
                if not is_lvalue(lv):
                    self.err(INVALID_PREDICATE, "location term '&' needs an lvalue")
                    return
                self.type_expr(lv, quantvars)
            case LocRange(ptr=pt, lo=lo, hi=hi):
                pty = self.type_expr(pt, quantvars)
                if pty is not None and not isinstance(pty, PtrType):
                    self.err(INVALID_PREDICATE,
                             f"range base must be a pointer, not {pty}")
                for e in (lo, hi):
                    ty = self.type_expr(e, quantvars)
                    if ty is not None and not is_int_like(ty):
                        self.err(INVALID_PREDICATE, "range bounds must be integers")


def check_well_formed(meta: MetaProperty, tp: TypedProgram) -> list[SpecError]:
    """Return the (possibly empty) list of well-formedness violations."""
    return _WfChecker(meta, tp).run()
