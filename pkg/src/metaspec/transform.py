"""Translation of meta-properties into contracts and point assertions.

Context rules, applied per target function f:

  * weak invariant: P becomes a precondition and a postcondition of f.
  * strong invariant: like weak, plus an assertion after every statement
    whose write may affect P's footprint, and after calls to defined
    functions outside the target set (their effects are unconstrained;
    calls to targeted functions are covered by the callee's generated
    postcondition, and registered stubs/builtins are trusted).
  * writing: before every statement writing memory, P with `\\written`
    replaced by the address of the written lvalue. Never at call sites.
  * reading: before every statement reading memory, P with `\\read`
    replaced by the address of the read lvalue. Never at call sites.

Assertions are anchored on sequence points canonically: an assertion that
follows statement A is attached before A's successor when one exists in the
same block, otherwise after A. This makes emitted source reparse to the
same anchors.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

from .ast import (
    AddrOf, ArrayType, Assign, Binary, Block, Call, EnumRef, Expr, Field,
    FunctionDef, If, Index, IntLit, NullLit, Program, PtrType, RecordRef,
    Return, Stmt, Unary, Var, While,
)
from .errors import ParseError, TypecheckFailure
from .normalize import (
    AccessDescriptor, NormalizedProgram, classify_accesses, is_memory_lvalue,
    normalize_program,
)
from .pretty import ProgramPrinter, render_pred
from .spec_ast import (
    BoolAtom, Compare, ContextKind, Forall, Implies, LocAddrOf, LocRange,
    LocRead, LocTerm, LocWritten, MetaProperty, PAnd, PNot, POr, Predicate,
    Separated, walk_predicates,
)
from .typecheck import INT_T, TypedProgram, expr_typer, typecheck
from .wellformed import resolve_targets


# ---------------------------------------------------------------------------
# Footprints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Footprint:
    """Globals and (record type, field) pairs a predicate's value depends on."""

    globals: frozenset[str] = frozenset()
    fields: frozenset[tuple[str, str]] = frozenset()

    @property
    def empty(self) -> bool:
        return not self.globals and not self.fields


def _lvalue_path(e: Expr) -> tuple[str, tuple] | None:
    """(root global name, steps) of a direct lvalue path; steps are
    ('field', name) or ('index',). None if not rooted in a Var."""
    steps: list = []
    node = e
    while True:
        match node:
            case Var(name=n):
                return n, tuple(reversed(steps))
            case Field(base=b, field=f, arrow=False):
                steps.append(("field", f))
                node = b
            case Index(base=b):
                steps.append(("index",))
                node = b
            case _:
                return None


def read_paths(pred: Predicate, tp: TypedProgram) -> list[tuple[str, tuple]]:
    """Direct global lvalue paths whose cells the predicate reads. Address
    computations (&lv, range bases' own address math) contribute only their
    index subexpressions."""
    paths: list[tuple[str, tuple]] = []

    def rvalue(e: Expr):
        match e:
            case Var(name=n):
                if n in tp.globals:
                    paths.append((n, ()))
            case Field() | Index():
                p = _lvalue_path(e)
                if p is not None and p[0] in tp.globals:
                    paths.append(p)
                _subscripts(e)
            case AddrOf(lvalue=lv):
                address(lv)
            case Unary(operand=x):
                rvalue(x)
            case Binary(lhs=l, rhs=r):
                rvalue(l)
                rvalue(r)

    def _subscripts(e: Expr):
        while isinstance(e, (Field, Index)):
            if isinstance(e, Index):
                rvalue(e.index)
            e = e.base

    def address(lv: Expr):
        _subscripts(lv)

    for p in walk_predicates(pred):
        match p:
            case Forall(lo=lo, hi=hi):
                for e in (lo, hi):
                    if e is not None:
                        rvalue(e)
            case Compare(lhs=l, rhs=r):
                rvalue(l)
                rvalue(r)
            case BoolAtom(expr=e):
                rvalue(e)
            case Separated(lhs=a, rhs=b):
                for t in (a, b):
                    match t:
                        case LocAddrOf(lvalue=lv):
                            address(lv)
                        case LocRange(ptr=pt, lo=lo, hi=hi):
                            rvalue(pt)
                            rvalue(lo)
                            rvalue(hi)
    return paths


def _path_field_pairs(tp: TypedProgram, root: str, steps: tuple):
    ty = tp.globals[root]
    for step in steps:
        match step:
            case ("index",):
                ty = ty.elem if isinstance(ty, ArrayType) else ty
            case ("field", f):
                if isinstance(ty, RecordRef):
                    off, fty = tp.field_offset(ty.name, f)
                    yield (ty.name, f)
                    ty = fty


def free_footprint(pred: Predicate, tp: TypedProgram) -> Footprint:
    """Every global the predicate reads, plus every (record type, field)
    pair it accesses."""
    gl: set[str] = set()
    fields: set[tuple[str, str]] = set()
    for root, steps in read_paths(pred, tp):
        gl.add(root)
        fields.update(_path_field_pairs(tp, root, steps))
    return Footprint(frozenset(gl), frozenset(fields))


def may_affect(write: AccessDescriptor, fp: Footprint) -> bool:
    """Conservative: can this write change the footprint's cells? Pointer
    writes assume the worst case the type allows."""
    match write.kind:
        case "direct":
            return write.base_global in fp.globals
        case "direct_local":
            return False
        case "ptr_field":
            return any(pair in fp.fields for pair in write.field_pairs)
        case "ptr_char":
            return not fp.empty
    raise ValueError(f"unknown descriptor kind {write.kind!r}")


# ---------------------------------------------------------------------------
# Meta-variable instantiation
# ---------------------------------------------------------------------------

def instantiate(pred: Predicate, metavar: str, loc: LocTerm) -> Predicate:
    """Structurally substitute \\written or \\read ('written'/'read') by a
    concrete location term."""
    target = LocWritten if metavar == "written" else LocRead

    def sub_term(t: LocTerm) -> LocTerm:
        return loc if isinstance(t, target) else t

    def sub(p: Predicate) -> Predicate:
        match p:
            case Forall(var=v, lo=lo, hi=hi, body=b):
                return Forall(v, lo, hi, sub(b), line=p.line)
            case Implies(lhs=l, rhs=r):
                return Implies(sub(l), sub(r))
            case PAnd(lhs=l, rhs=r):
                return PAnd(sub(l), sub(r))
            case POr(lhs=l, rhs=r):
                return POr(sub(l), sub(r))
            case PNot(operand=x):
                return PNot(sub(x))
            case Separated(lhs=a, rhs=b):
                return Separated(sub_term(a), sub_term(b))
            case _:
                return p

    return sub(pred)


# ---------------------------------------------------------------------------
# Annotated programs
# ---------------------------------------------------------------------------

class Origin(enum.Enum):
    PRE = "pre"
    POST = "post"
    AFTER_WRITE = "after_write"
    BEFORE_WRITE = "before_write"
    BEFORE_READ = "before_read"
    AFTER_CALL = "after_call"


@dataclass
class TaggedPred:
    meta_name: str
    pred: Predicate
    origin: Origin


AnchorKey = tuple[str, tuple[int, ...], str]  # (function, stmt path, side)


@dataclass
class AnnotatedProgram:
    program: NormalizedProgram
    contracts: dict[str, tuple[list[TaggedPred], list[TaggedPred]]] = dc_field(default_factory=dict)
    point_asserts: dict[AnchorKey, list[TaggedPred]] = dc_field(default_factory=dict)

    def require(self, fname: str) -> list[TaggedPred]:
        return self.contracts.setdefault(fname, ([], []))[0]

    def ensure(self, fname: str) -> list[TaggedPred]:
        return self.contracts.setdefault(fname, ([], []))[1]

    def asserts_at(self, key: AnchorKey) -> list[TaggedPred]:
        return self.point_asserts.setdefault(key, [])


def _anchor_after(stmts: list[Stmt], i: int) -> tuple[tuple[int, ...], str]:
    """Canonical anchor for 'right after stmts[i]': before the successor if
    one exists in the same block, else after the statement itself."""
    if i + 1 < len(stmts):
        return stmts[i + 1].loc.stmt_index, "before"
    return stmts[i].loc.stmt_index, "after"


def _stmt_lists(fn: FunctionDef):
    def walk(stmts):
        yield stmts
        for s in stmts:
            match s:
                case If(then=t, els=e):
                    yield from walk(t.stmts)
                    if e is not None:
                        yield from walk(e.stmts)
                case While(body=b):
                    yield from walk(b.stmts)
                case Block(stmts=inner):
                    yield from walk(inner)
    yield from walk(fn.body.stmts)


def apply_meta(np: NormalizedProgram, m: MetaProperty) -> AnnotatedProgram:
    """One meta-property's contribution (contracts and point assertions).
    The meta must be well-formed."""
    delta = AnnotatedProgram(np)
    tp = np.tp
    type_predicate(tp, m.predicate)
    targets = resolve_targets(m.targets, np.program)
    accesses = classify_accesses(np)
    fp = free_footprint(m.predicate, tp)
    invariant = m.context in (ContextKind.WEAK_INVARIANT, ContextKind.STRONG_INVARIANT)

    for fn in np.program.defined_functions():
        if fn.name not in targets:
            continue
        if invariant:
            delta.require(fn.name).append(TaggedPred(m.name, m.predicate, Origin.PRE))
            delta.ensure(fn.name).append(TaggedPred(m.name, m.predicate, Origin.POST))
        for stmts in _stmt_lists(fn):
            for i, s in enumerate(stmts):
                acc = accesses.get((fn.name, s.loc.stmt_index))
                match m.context:
                    case ContextKind.STRONG_INVARIANT:
                        if acc is not None and acc.write is not None and may_affect(acc.write, fp):
                            path, side = _anchor_after(stmts, i)
                            delta.asserts_at((fn.name, path, side)).append(
                                TaggedPred(m.name, m.predicate, Origin.AFTER_WRITE))
                        elif isinstance(s, Call) and _unknown_callee(s.callee, targets, tp):
                            path, side = _anchor_after(stmts, i)
                            delta.asserts_at((fn.name, path, side)).append(
                                TaggedPred(m.name, m.predicate, Origin.AFTER_CALL))
                    case ContextKind.WRITING:
                        if acc is not None and acc.write is not None:
                            inst = instantiate(m.predicate, "written",
                                               LocAddrOf(acc.write.lvalue))
                            delta.asserts_at((fn.name, s.loc.stmt_index, "before")).append(
                                TaggedPred(m.name, inst, Origin.BEFORE_WRITE))
                    case ContextKind.READING:
                        for r in (acc.reads if acc is not None else []):
                            inst = instantiate(m.predicate, "read", LocAddrOf(r.lvalue))
                            delta.asserts_at((fn.name, s.loc.stmt_index, "before")).append(
                                TaggedPred(m.name, inst, Origin.BEFORE_READ))
    return delta


def _unknown_callee(callee: str, targets: set[str], tp: TypedProgram) -> bool:
    """True when a strong invariant must be re-asserted after calling
    `callee`: a defined function outside the target set. Builtins and
    registered stubs have trusted (empty) footprints; targeted callees are
    covered by their own generated postcondition."""
    if callee in targets:
        return False
    fn = tp.functions.get(callee)
    return fn is not None and fn.body is not None


def apply_all(np: NormalizedProgram, metas: list[MetaProperty]) -> AnnotatedProgram:
    """Union of all deltas; assertion order at a shared point follows meta
    declaration order. Deterministic."""
    ap = AnnotatedProgram(np)
    for m in metas:
        delta = apply_meta(np, m)
        for fname, (req, ens) in delta.contracts.items():
            ap.require(fname).extend(req)
            ap.ensure(fname).extend(ens)
        for key, preds in delta.point_asserts.items():
            ap.asserts_at(key).extend(preds)
    return ap


def lint_annotations(ap: AnnotatedProgram, metas: list[MetaProperty] | None = None) -> list[str]:
    """Non-fatal findings: duplicated assertions (e.g. the same meta applied
    twice) and metas with empty target sets."""
    warnings = []
    for key, preds in sorted(ap.point_asserts.items()):
        seen = {}
        for t in preds:
            k = (t.meta_name, render_pred(t.pred), key[2])
            if k in seen:
                warnings.append(
                    f"duplicate assertion for meta {t.meta_name!r} at "
                    f"{key[0]}:{'.'.join(map(str, key[1]))} ({key[2]})")
            seen[k] = True
    for m in metas or []:
        if not resolve_targets(m.targets, ap.program.program):
            warnings.append(f"meta {m.name!r} has an empty target set")
    return warnings


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _contract_lines(ap: AnnotatedProgram, fname: str) -> list[str]:
    req, ens = ap.contracts.get(fname, ([], []))
    clauses = [f"requires {t.meta_name}: {render_pred(t.pred)};" for t in req]
    clauses += [f"ensures {t.meta_name}: {render_pred(t.pred)};" for t in ens]
    if not clauses:
        return []
    body = "\n    ".join(clauses)
    return [f"/*@ {body} */"]


def _assert_lines(ap: AnnotatedProgram, fname: str, path, side: str) -> list[str]:
    preds = ap.point_asserts.get((fname, path, side), [])
    return [f"/*@ assert {t.meta_name}: {render_pred(t.pred)}; */" for t in preds]


def _printer(ap: AnnotatedProgram) -> ProgramPrinter:
    return ProgramPrinter(
        ap.program.program,
        contract_hook=lambda fname: _contract_lines(ap, fname),
        assert_hook=lambda fname, path, side: _assert_lines(ap, fname, path, side),
    )


def emit_annotated_source(ap: AnnotatedProgram) -> str:
    """Pretty-print the program with contract blocks and point assertions.
    The output reparses to an equivalent annotated program."""
    return _printer(ap).run()


def emit_with_linemap(ap: AnnotatedProgram):
    """(text, stmt line map, function line map) of the emitted rendering;
    the checker reports locations in terms of this rendering."""
    pr = _printer(ap)
    text = pr.run()
    return text, pr.stmt_lines, pr.fn_lines


# ---------------------------------------------------------------------------
# Reparsing emitted annotated source
# ---------------------------------------------------------------------------

def type_predicate(tp: TypedProgram, pred: Predicate, fn_info=None):
    """Annotate every expression of a predicate with its type (function
    scope included, so instantiated assertions may mention locals)."""
    typer = expr_typer(tp)

    def walk(p: Predicate, quantvars: dict):
        match p:
            case Forall(var=v, lo=lo, hi=hi, body=b):
                for e in (lo, hi):
                    if e is not None:
                        typer.type_expr(e, fn_info, quantvars)
                walk(b, {**quantvars, v: INT_T})
            case Implies(lhs=l, rhs=r) | PAnd(lhs=l, rhs=r) | POr(lhs=l, rhs=r):
                walk(l, quantvars)
                walk(r, quantvars)
            case PNot(operand=x):
                walk(x, quantvars)
            case Compare(lhs=l, rhs=r):
                typer.type_expr(l, fn_info, quantvars)
                typer.type_expr(r, fn_info, quantvars)
            case BoolAtom(expr=e):
                typer.type_expr(e, fn_info, quantvars)
            case Separated(lhs=a, rhs=b):
                for t in (a, b):
                    match t:
                        case LocAddrOf(lvalue=lv):
                            typer.type_expr(lv, fn_info, quantvars)
                        case LocRange(ptr=pt, lo=lo, hi=hi):
                            for e in (pt, lo, hi):
                                typer.type_expr(e, fn_info, quantvars)

    walk(pred, {})
    if typer.issues:
        raise TypecheckFailure(typer.issues)


_ORIGIN_BY_KIND = {"requires": Origin.PRE, "ensures": Origin.POST}


def parse_annotated_program(text: str, file: str = "<annotated>") -> AnnotatedProgram:
    """Rebuild an AnnotatedProgram from emitted annotated source. The program
    part must already be in normal form (normalization is idempotent, so this
    holds for anything the emitter produced)."""
    from .parser import parse_program
    from .spec_parser import parse_annotation_clauses

    prog = parse_program(text, file)
    tp = typecheck(prog)
    np = normalize_program(tp)
    ap = AnnotatedProgram(np)

    for fname, span in prog.contract_spans:
        for kind, label, pred in parse_annotation_clauses(span, file):
            if kind == "assert":
                raise ParseError("assert clause in a contract block", file, span.line, 1)
            type_predicate(np.tp, pred, np.tp.fn_info.get(fname))
            tagged = TaggedPred(label, pred, _ORIGIN_BY_KIND[kind])
            if kind == "requires":
                ap.require(fname).append(tagged)
            else:
                ap.ensure(fname).append(tagged)

    for fname, path, side, span in prog.assert_spans:
        for kind, label, pred in parse_annotation_clauses(span, file):
            if kind != "assert":
                raise ParseError("contract clause inside a function body", file, span.line, 1)
            type_predicate(np.tp, pred, np.tp.fn_info.get(fname))
            origin = Origin.BEFORE_WRITE if side == "before" else Origin.AFTER_WRITE
            ap.asserts_at((fname, path, side)).append(TaggedPred(label, pred, origin))
    return ap
