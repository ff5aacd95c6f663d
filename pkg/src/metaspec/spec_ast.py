"""AST of the meta-property specification language."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

from .ast import Expr


class ContextKind(enum.Enum):
    WEAK_INVARIANT = "weak_invariant"
    STRONG_INVARIANT = "strong_invariant"
    WRITING = "writing"
    READING = "reading"

    @property
    def keyword(self) -> str:
        return "\\" + self.value


@dataclass
class TargetSpec:
    """F = (includes or all defined functions) minus (excludes or nothing)."""

    includes: list[str] | None = None
    excludes: list[str] | None = None


class Predicate:
    pass


class LocTerm:
    pass


@dataclass
class Forall(Predicate):
    """Bounded integer quantifier enumerating [lo, hi).

    lo/hi are None when the source had no recognizable `lo <= x < hi` guard;
    well-formedness rejects that as an unbounded quantifier.
    """

    var: str
    lo: Expr | None
    hi: Expr | None
    body: Predicate
    line: int = dc_field(default=0, compare=False)


@dataclass
class Implies(Predicate):
    lhs: Predicate
    rhs: Predicate


@dataclass
class PAnd(Predicate):
    lhs: Predicate
    rhs: Predicate


@dataclass
class POr(Predicate):
    lhs: Predicate
    rhs: Predicate


@dataclass
class PNot(Predicate):
    operand: Predicate


@dataclass
class Compare(Predicate):
    op: str  # == != < <= > >=
    lhs: Expr
    rhs: Expr


@dataclass
class Separated(Predicate):
    """Both location term sets are pairwise disjoint."""

    lhs: LocTerm
    rhs: LocTerm


@dataclass
class BoolAtom(Predicate):
    expr: Expr


@dataclass
class LocAddrOf(LocTerm):
    lvalue: Expr


@dataclass
class LocRange(LocTerm):
    """`ptr + (lo .. hi)`: cells ptr[lo] through ptr[hi] inclusive."""

    ptr: Expr
    lo: Expr
    hi: Expr


@dataclass
class LocWritten(LocTerm):
    pass


@dataclass
class LocRead(LocTerm):
    pass


@dataclass
class MetaProperty:
    name: str
    context: ContextKind
    targets: TargetSpec
    predicate: Predicate
    line: int = dc_field(default=0, compare=False)


def walk_predicates(pred: Predicate):
    yield pred
    match pred:
        case Forall(body=b):
            yield from walk_predicates(b)
        case Implies(lhs=l, rhs=r) | PAnd(lhs=l, rhs=r) | POr(lhs=l, rhs=r):
            yield from walk_predicates(l)
            yield from walk_predicates(r)
        case PNot(operand=x):
            yield from walk_predicates(x)


def predicate_exprs(pred: Predicate):
    """Yield every mini-C expression embedded in a predicate, including
    quantifier bounds and location-term components."""
    for p in walk_predicates(pred):
        match p:
            case Forall(lo=lo, hi=hi):
                if lo is not None:
                    yield lo
                if hi is not None:
                    yield hi
            case Compare(lhs=l, rhs=r):
                yield l
                yield r
            case BoolAtom(expr=e):
                yield e
            case Separated(lhs=a, rhs=b):
                for t in (a, b):
                    match t:
                        case LocAddrOf(lvalue=lv):
                            yield lv
                        case LocRange(ptr=pt, lo=lo, hi=hi):
                            yield pt
                            yield lo
                            yield hi


def loc_terms(pred: Predicate):
    for p in walk_predicates(pred):
        if isinstance(p, Separated):
            yield p.lhs
            yield p.rhs


def uses_metavar(pred: Predicate, kind: type) -> bool:
    return any(isinstance(t, kind) for t in loc_terms(pred))
