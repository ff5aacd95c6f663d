"""Parser for annotation blocks: meta clauses, contract clauses, assertions.

Meta clause grammar (one or more per block, each ending in `;`):

    meta NAME: \\forall function f;
        [ \\subset(f, {n1, ...}) ==> ] [ ! \\subset(f, {n1, ...}) ==> ]
        CONTEXT(f), PREDICATE ;

with CONTEXT one of \\weak_invariant, \\strong_invariant, \\writing,
\\reading. Quantifiers in predicates must be bounded:
`\\forall int x; lo <= x < hi ==> body` (the `lo <= x && x < hi` spelling is
also accepted); the bound conjuncts are split off the guard at parse time.
"""
from __future__ import annotations

from .ast import Binary, Expr, RawSpan, Unary, walk_exprs
from .errors import DuplicateName, ParseError
from .lexer import TokenStream, tokenize
from .parser import AnnotHole, ChainHole, ExprParser, ForallHole, LocHole, SeparatedHole
from .spec_ast import (
    BoolAtom, Compare, ContextKind, Forall, Implies, LocAddrOf, LocRange,
    LocRead, LocTerm, LocWritten, MetaProperty, PAnd, PNot, POr, Predicate,
    Separated, TargetSpec,
)

_CONTEXTS = {
    "\\weak_invariant": ContextKind.WEAK_INVARIANT,
    "\\strong_invariant": ContextKind.STRONG_INVARIANT,
    "\\writing": ContextKind.WRITING,
    "\\reading": ContextKind.READING,
}


def _stream(text: str, file: str, base_line: int) -> TokenStream:
    return TokenStream(tokenize(text, file, base_line, capture_annotations=False), file)


# ---------------------------------------------------------------------------
# Lowering the annotation-mode expression tree into Predicate nodes
# ---------------------------------------------------------------------------

def _check_no_holes(e: Expr, ts: TokenStream):
    for sub in walk_exprs(e):
        if isinstance(sub, AnnotHole):
            raise ParseError("quantifier/\\separated cannot appear inside arithmetic",
                             ts.file, sub.line, 0)


def _lower_locterm(h: LocHole, ts: TokenStream) -> LocTerm:
    match h.kind:
        case "written":
            return LocWritten()
        case "read":
            return LocRead()
        case "addrof":
            _check_no_holes(h.lvalue, ts)
            return LocAddrOf(h.lvalue)
        case "range":
            for e in (h.ptr, h.lo, h.hi):
                _check_no_holes(e, ts)
            return LocRange(h.ptr, h.lo, h.hi)
    raise AssertionError(h.kind)


def _split_bounds(var: str, guard: Predicate):
    """Pull `lo <= var` and `var < hi` conjuncts out of a quantifier guard.
    Returns (lo, hi, leftover guard or None) or None if either bound is
    missing."""
    conjuncts = []

    def flatten(p):
        if isinstance(p, PAnd):
            flatten(p.lhs)
            flatten(p.rhs)
        else:
            conjuncts.append(p)

    flatten(guard)
    lo = hi = None
    rest = []
    from .ast import Var
    for c in conjuncts:
        if (lo is None and isinstance(c, Compare) and c.op == "<="
                and isinstance(c.rhs, Var) and c.rhs.name == var):
            lo = c.lhs
        elif (hi is None and isinstance(c, Compare) and c.op == "<"
                and isinstance(c.lhs, Var) and c.lhs.name == var):
            hi = c.rhs
        else:
            rest.append(c)
    if lo is None or hi is None:
        return None
    leftover = None
    for c in rest:
        leftover = c if leftover is None else PAnd(leftover, c)
    return lo, hi, leftover


def to_predicate(e: Expr, ts: TokenStream) -> Predicate:
    """Convert the boolean skeleton of an annotation expression tree."""
    match e:
        case ForallHole():
            body = to_predicate(e.body, ts)
            lo = hi = None
            if isinstance(body, Implies):
                split = _split_bounds(e.var, body.lhs)
                if split is not None:
                    lo, hi, leftover = split
                    body = body.rhs if leftover is None else Implies(leftover, body.rhs)
            return Forall(e.var, lo, hi, body, line=e.line)
        case SeparatedHole():
            return Separated(_lower_locterm(e.lhs, ts), _lower_locterm(e.rhs, ts))
        case ChainHole():
            pred = None
            for a, op, b in zip(e.operands, e.ops, e.operands[1:]):
                _check_no_holes(a, ts)
                _check_no_holes(b, ts)
                cmp = Compare(op, a, b)
                pred = cmp if pred is None else PAnd(pred, cmp)
            return pred
        case Binary(op="==>", lhs=l, rhs=r):
            return Implies(to_predicate(l, ts), to_predicate(r, ts))
        case Binary(op="&&", lhs=l, rhs=r):
            return PAnd(to_predicate(l, ts), to_predicate(r, ts))
        case Binary(op="||", lhs=l, rhs=r):
            return POr(to_predicate(l, ts), to_predicate(r, ts))
        case Unary(op="!", operand=x):
            return PNot(to_predicate(x, ts))
        case Binary(op=op, lhs=l, rhs=r) if op in ("==", "!=", "<", "<=", ">", ">="):
            _check_no_holes(l, ts)
            _check_no_holes(r, ts)
            return Compare(op, l, r)
        case _:
            _check_no_holes(e, ts)
            return BoolAtom(e)


def parse_predicate_text(text: str, file: str = "<annot>", base_line: int = 1) -> Predicate:
    ts = _stream(text, file, base_line)
    pred = _parse_predicate(ts)
    ts.expect("EOF")
    return pred


def _parse_predicate(ts: TokenStream) -> Predicate:
    ep = ExprParser(ts, annot=True)
    return to_predicate(ep.parse_pred_expr(), ts)


# ---------------------------------------------------------------------------
# Meta clauses
# ---------------------------------------------------------------------------

def _parse_meta_clause(ts: TokenStream) -> MetaProperty:
    line = ts.expect("NAME", "meta").line
    name = ts.expect("NAME").value
    ts.expect("OP", ":")
    ts.expect("BSKW", "\\forall")
    ts.expect("NAME", "function")
    fvar = ts.expect("NAME").value
    ts.expect("OP", ";")

    includes = excludes = None
    while ts.at("BSKW", "\\subset") or ts.at_op("!"):
        negated = ts.accept("OP", "!") is not None
        ts.expect("BSKW", "\\subset")
        ts.expect("OP", "(")
        v = ts.expect("NAME").value
        if v != fvar:
            ts.fail(f"\\subset constrains {v!r} but the bound function variable is {fvar!r}")
        ts.expect("OP", ",")
        ts.expect("OP", "{")
        names: list[str] = []
        if not ts.at_op("}"):
            names.append(ts.expect("NAME").value)
            while ts.accept("OP", ","):
                names.append(ts.expect("NAME").value)
        ts.expect("OP", "}")
        ts.expect("OP", ")")
        ts.expect("OP", "==>")
        if negated:
            if excludes is not None:
                ts.fail("at most one negated \\subset constraint per meta")
            excludes = names
        else:
            if includes is not None:
                ts.fail("at most one \\subset constraint per meta")
            includes = names

    t = ts.cur
    if t.kind != "BSKW" or t.value not in _CONTEXTS:
        ts.fail("expected a context (\\weak_invariant, \\strong_invariant, \\writing, \\reading)")
    context = _CONTEXTS[ts.advance().value]
    ts.expect("OP", "(")
    v = ts.expect("NAME").value
    if v != fvar:
        ts.fail(f"context applies to {v!r} but the bound function variable is {fvar!r}")
    ts.expect("OP", ")")
    ts.expect("OP", ",")
    pred = _parse_predicate(ts)
    ts.expect("OP", ";")
    return MetaProperty(name, context, TargetSpec(includes, excludes), pred, line=line)


def parse_meta_block(span: RawSpan | str, file: str = "<annot>") -> list[MetaProperty]:
    """Parse all `meta` clauses of one annotation block. Names must be unique
    within the block."""
    if isinstance(span, RawSpan):
        text, file, base = span.text, span.file, span.line
    else:
        text, base = span, 1
    ts = _stream(text, file, base)
    metas: list[MetaProperty] = []
    seen: set[str] = set()
    while not ts.at("EOF"):
        m = _parse_meta_clause(ts)
        if m.name in seen:
            raise DuplicateName(f"duplicate meta name {m.name!r}")
        seen.add(m.name)
        metas.append(m)
    return metas


def extract_metas(program) -> list[MetaProperty]:
    """Collect the meta-properties of every annotation block of a parsed
    program, enforcing global name uniqueness."""
    metas: list[MetaProperty] = []
    seen: set[str] = set()
    for span in program.meta_spans:
        for m in parse_meta_block(span):
            if m.name in seen:
                raise DuplicateName(f"duplicate meta name {m.name!r}")
            seen.add(m.name)
            metas.append(m)
    return metas


# ---------------------------------------------------------------------------
# Contract / assertion clauses (reparsing emitted annotated source)
# ---------------------------------------------------------------------------

def parse_annotation_clauses(span: RawSpan, file: str = "<annot>"):
    """Parse `requires NAME: P;` / `ensures NAME: P;` / `assert NAME: P;`
    clauses. Returns a list of (kind, meta name, Predicate)."""
    ts = _stream(span.text, span.file or file, span.line)
    out = []
    while not ts.at("EOF"):
        kind_tok = ts.expect("NAME")
        if kind_tok.value not in ("requires", "ensures", "assert"):
            ts.fail(f"expected requires/ensures/assert, found {kind_tok.value!r}")
        label = "_"
        if ts.cur.kind == "NAME" and ts.peek().value == ":":
            label = ts.advance().value
            ts.advance()
        pred = _parse_predicate(ts)
        ts.expect("OP", ";")
        out.append((kind_tok.value, label, pred))
    return out
