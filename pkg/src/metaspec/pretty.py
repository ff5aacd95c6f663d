"""Pretty-printer for mini-C programs and annotation predicates.

The printer is the canonical renderer: parse(pretty_print(p)) equals p
structurally (source locations aside). It also reports the line each
statement lands on, which the checker uses so that report locations always
refer to the printed rendering.
"""
from __future__ import annotations

from .ast import (
    AddrOf, ArrayType, Assign, Binary, Block, Call, CharType, Deref, EnumRef,
    Expr, Field, FunctionDef, If, Index, IntLit, IntType, NullLit, Program,
    PtrType, RecordRef, Return, TypeRef, Unary, Var, While,
)
from .spec_ast import (
    BoolAtom, Compare, Forall, Implies, LocAddrOf, LocRange, LocRead,
    LocTerm, LocWritten, PAnd, PNot, POr, Predicate, Separated, MetaProperty,
)

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}
_UNARY = 7
_POSTFIX = 8
_ATOM = 9


def expr_prec(e: Expr) -> int:
    match e:
        case Binary(op=op):
            return _PREC[op]
        case Unary() | AddrOf() | Deref():
            return _UNARY
        case Field() | Index():
            return _POSTFIX
        case _:
            return _ATOM


def render_expr(e: Expr, min_prec: int = 0) -> str:
    match e:
        case IntLit(value=v):
            s = str(v)
        case NullLit():
            s = "NULL"
        case Var(name=n):
            s = n
        case Unary(op=op, operand=x):
            s = op + render_expr(x, _UNARY)
        case AddrOf(lvalue=lv):
            s = "&" + render_expr(lv, _UNARY)
        case Deref(ptr=p):
            s = "*" + render_expr(p, _UNARY)
        case Field(base=b, field=f, arrow=arrow):
            s = render_expr(b, _POSTFIX) + ("->" if arrow else ".") + f
        case Index(base=b, index=i):
            s = render_expr(b, _POSTFIX) + "[" + render_expr(i) + "]"
        case Binary(op=op, lhs=l, rhs=r):
            p = _PREC[op]
            s = f"{render_expr(l, p)} {op} {render_expr(r, p + 1)}"
        case _:
            raise ValueError(f"cannot render {e!r}")
    if expr_prec(e) < min_prec:
        return f"({s})"
    return s


def render_type(ty: TypeRef) -> str:
    match ty:
        case IntType():
            return "int"
        case CharType():
            return "char"
        case EnumRef(name=n):
            return f"enum {n}"
        case RecordRef(name=n):
            return f"struct {n}"
        case PtrType(pointee=p):
            return render_type(p) + "*"
    raise ValueError(f"cannot render type {ty}")


def render_decl(ty: TypeRef, name: str) -> str:
    suffix = ""
    while isinstance(ty, ArrayType):
        suffix += f"[{render_expr(ty.size_expr)}]"
        ty = ty.elem
    return f"{render_type(ty)} {name}{suffix}"


# ---------------------------------------------------------------------------
# Predicates
# ---------------------------------------------------------------------------

_P_IMPLIES, _P_OR, _P_AND, _P_NOT, _P_ATOM = 0, 1, 2, 3, 4


def _pred_prec(p: Predicate) -> int:
    match p:
        case Forall() | Implies():
            return _P_IMPLIES
        case POr():
            return _P_OR
        case PAnd():
            return _P_AND
        case Compare():
            return _P_NOT
        case BoolAtom(expr=e):
            return _P_ATOM if expr_prec(e) >= _UNARY else _P_IMPLIES
        case _:
            return _P_ATOM


def render_locterm(t: LocTerm) -> str:
    match t:
        case LocWritten():
            return "\\written"
        case LocRead():
            return "\\read"
        case LocAddrOf(lvalue=lv):
            return "&" + render_expr(lv, _POSTFIX)
        case LocRange(ptr=p, lo=lo, hi=hi):
            return f"{render_expr(p, _POSTFIX)} + ({render_expr(lo)} .. {render_expr(hi)})"
    raise ValueError(f"cannot render {t!r}")


def render_pred(p: Predicate, min_prec: int = 0) -> str:
    match p:
        case Forall(var=v, lo=lo, hi=hi, body=b):
            if lo is None:
                s = f"\\forall int {v}; {render_pred(b)}"
            else:
                s = (f"\\forall int {v}; {render_expr(lo)} <= {v} < {render_expr(hi)}"
                     f" ==> {render_pred(b)}")
        case Implies(lhs=l, rhs=r):
            s = f"{render_pred(l, _P_OR)} ==> {render_pred(r, _P_IMPLIES)}"
        case POr(lhs=l, rhs=r):
            s = f"{render_pred(l, _P_OR)} || {render_pred(r, _P_OR + 1)}"
        case PAnd(lhs=l, rhs=r):
            s = f"{render_pred(l, _P_AND)} && {render_pred(r, _P_AND + 1)}"
        case PNot(operand=x):
            s = "!" + render_pred(x, _P_ATOM)
        case Compare(op=op, lhs=l, rhs=r):
            s = f"{render_expr(l, _PREC[op])} {op} {render_expr(r, _PREC[op] + 1)}"
        case Separated(lhs=a, rhs=b):
            s = f"\\separated({render_locterm(a)}, {render_locterm(b)})"
        case BoolAtom(expr=e):
            s = render_expr(e)
        case _:
            raise ValueError(f"cannot render {p!r}")
    if _pred_prec(p) < min_prec:
        return f"({s})"
    return s


def render_meta(m: MetaProperty) -> str:
    parts = [f"meta {m.name}: \\forall function f;"]
    if m.targets.includes is not None:
        parts.append(f"\\subset(f, {{{', '.join(m.targets.includes)}}}) ==>")
    if m.targets.excludes is not None:
        parts.append(f"! \\subset(f, {{{', '.join(m.targets.excludes)}}}) ==>")
    parts.append(f"{m.context.keyword}(f),")
    head = " ".join(parts)
    return f"{head}\n    {render_pred(m.predicate)};"


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------

class ProgramPrinter:
    """Prints a program; optional hooks inject contract and assertion
    annotation lines (used when emitting transformed programs)."""

    def __init__(self, program: Program, contract_hook=None, assert_hook=None,
                 include_spans: bool = True):
        self.p = program
        self.contract_hook = contract_hook
        self.assert_hook = assert_hook
        self.include_spans = include_spans and assert_hook is None
        self.lines: list[str] = []
        self.stmt_lines: dict[tuple[str, tuple[int, ...]], int] = {}
        self.fn_lines: dict[str, int] = {}
        self._raw_asserts: dict[tuple[str, tuple[int, ...], str], list[str]] = {}

    @property
    def next_line(self) -> int:
        return len(self.lines) + 1

    def emit(self, text: str, indent: int = 0):
        for part in text.split("\n"):
            self.lines.append("    " * indent + part if part else part)

    def run(self) -> str:
        p = self.p
        for e in p.enums:
            self.emit(f"enum {e.name} {{ {', '.join(e.literals)} }};")
        for r in p.records:
            self.emit(f"struct {r.name} {{")
            for fname, fty in r.fields:
                self.emit(render_decl(fty, fname) + ";", 1)
            self.emit("};")
        for c in p.constants:
            self.emit(f"const int {c.name} = {render_expr(c.value_expr)};")
        for g in p.globals:
            init = f" = {render_expr(g.init)}" if g.init is not None else ""
            self.emit(render_decl(g.type, g.name) + init + ";")
        if self.include_spans:
            for span in p.meta_spans:
                self.emit(f"/*@{span.text}*/")
            for fname, path, side, span in p.assert_spans:
                self._raw_asserts.setdefault((fname, path, side), []).append(
                    f"/*@{span.text}*/")
        for fn in p.functions:
            self.emit_function(fn)
        return "\n".join(self.lines) + "\n"

    def emit_function(self, fn: FunctionDef):
        if self.contract_hook is not None:
            for line in self.contract_hook(fn.name):
                self.emit(line)
        elif self.include_spans:
            for fname, span in self.p.contract_spans:
                if fname == fn.name:
                    self.emit(f"/*@{span.text}*/")
        ret = "void" if fn.return_type is None else render_type(fn.return_type)
        params = ", ".join(render_decl(t, n) for n, t in fn.params)
        sig = f"{ret} {fn.name}({params})"
        if fn.body is None:
            self.emit(sig + ";")
            return
        self.fn_lines[fn.name] = self.next_line
        self.emit(sig + " {")
        for lname, lty in fn.locals:
            self.emit(render_decl(lty, lname) + ";", 1)
        self.emit_stmts(fn.name, fn.body.stmts, 1)
        self.emit("}")

    def _asserts(self, fname, path, side) -> list[str]:
        if self.assert_hook is not None:
            return self.assert_hook(fname, path, side)
        return self._raw_asserts.get((fname, path, side), [])

    def emit_stmts(self, fname: str, stmts: list, indent: int):
        for s in stmts:
            path = s.loc.stmt_index
            for line in self._asserts(fname, path, "before"):
                self.emit(line, indent)
            self.stmt_lines[(fname, path)] = self.next_line
            self.emit_stmt(fname, s, indent)
            for line in self._asserts(fname, path, "after"):
                self.emit(line, indent)

    def emit_stmt(self, fname: str, s, indent: int):
        match s:
            case Assign(lvalue=lv, rhs=r):
                self.emit(f"{render_expr(lv)} = {render_expr(r)};", indent)
            case Call(dest=d, callee=c, args=a):
                args = ", ".join(render_expr(x) for x in a)
                prefix = f"{render_expr(d)} = " if d is not None else ""
                self.emit(f"{prefix}{c}({args});", indent)
            case Return(value=v):
                self.emit("return;" if v is None else f"return {render_expr(v)};", indent)
            case If(cond=c, then=t, els=e):
                self.emit(f"if ({render_expr(c)}) {{", indent)
                self.emit_stmts(fname, t.stmts, indent + 1)
                if e is not None:
                    self.emit("} else {", indent)
                    self.emit_stmts(fname, e.stmts, indent + 1)
                self.emit("}", indent)
            case While(cond=c, body=b):
                self.emit(f"while ({render_expr(c)}) {{", indent)
                self.emit_stmts(fname, b.stmts, indent + 1)
                self.emit("}", indent)
            case Block(stmts=inner):
                self.emit("{", indent)
                self.emit_stmts(fname, inner, indent + 1)
                self.emit("}", indent)
            case _:
                raise ValueError(f"cannot print {s!r}")


def pretty_print(p) -> str:
    """Render a Program (or an AnnotatedProgram, via its emitter) as source."""
    if isinstance(p, Program):
        return ProgramPrinter(p).run()
    from .transform import AnnotatedProgram, emit_annotated_source
    if isinstance(p, AnnotatedProgram):
        return emit_annotated_source(p)
    raise TypeError(f"cannot pretty-print {type(p).__name__}")
