"""AST of the mini-C language hosting meta-properties.

Structural equality: dataclass `==` ignores source locations and inferred
types (`compare=False` fields), so `parse(pretty_print(p)) == p` is the
round-trip property itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field


@dataclass
class SourceLoc:
    file: str = "<input>"
    line: int = 0
    # Path of child indices from the function body root; uniquely identifies
    # a statement within its function.
    stmt_index: tuple[int, ...] = ()

    def __str__(self):
        return f"{self.file}:{self.line}"


def _loc():
    return dc_field(default_factory=SourceLoc, compare=False, kw_only=True)


# ---------------------------------------------------------------------------
# Type references
# ---------------------------------------------------------------------------

class TypeRef:
    pass


@dataclass
class IntType(TypeRef):
    def __str__(self):
        return "int"


@dataclass
class CharType(TypeRef):
    def __str__(self):
        return "char"


@dataclass
class EnumRef(TypeRef):
    name: str

    def __str__(self):
        return f"enum {self.name}"


@dataclass
class RecordRef(TypeRef):
    name: str

    def __str__(self):
        return f"struct {self.name}"


@dataclass
class PtrType(TypeRef):
    pointee: TypeRef

    def __str__(self):
        return f"{self.pointee}*"


@dataclass
class ArrayType(TypeRef):
    elem: TypeRef
    size_expr: "Expr"
    # Filled by the typechecker (constant-folded element count).
    size: int | None = dc_field(default=None, compare=False)

    def __str__(self):
        n = self.size if self.size is not None else "?"
        return f"{self.elem}[{n}]"


INT = IntType()
CHAR = CharType()


# ---------------------------------------------------------------------------
# Expressions (lvalues are the Var/Field/Index/Deref subset)
# ---------------------------------------------------------------------------

@dataclass
class Expr:
    line: int = dc_field(default=0, compare=False, kw_only=True)
    ty: TypeRef | None = dc_field(default=None, compare=False, kw_only=True)


@dataclass
class IntLit(Expr):
    value: int = 0


@dataclass
class NullLit(Expr):
    pass


@dataclass
class Var(Expr):
    name: str = ""


@dataclass
class Field(Expr):
    base: Expr = None
    field: str = ""
    arrow: bool = False  # True for p->f (sugar for (*p).f)


@dataclass
class Index(Expr):
    base: Expr = None
    index: Expr = None


@dataclass
class Deref(Expr):
    ptr: Expr = None


@dataclass
class AddrOf(Expr):
    lvalue: Expr = None


@dataclass
class Unary(Expr):
    op: str = ""  # '-' '!'
    operand: Expr = None


@dataclass
class Binary(Expr):
    op: str = ""  # + - * / % == != < <= > >= && ||
    lhs: Expr = None
    rhs: Expr = None


LVALUE_KINDS = (Var, Field, Index, Deref)


def is_lvalue(e: Expr) -> bool:
    return isinstance(e, LVALUE_KINDS)


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------

@dataclass
class Stmt:
    loc: SourceLoc = _loc()


@dataclass
class Assign(Stmt):
    lvalue: Expr = None
    rhs: Expr = None


@dataclass
class Block(Stmt):
    stmts: list[Stmt] = dc_field(default_factory=list)


@dataclass
class If(Stmt):
    cond: Expr = None
    then: Block = None
    els: Block | None = None


@dataclass
class While(Stmt):
    cond: Expr = None
    body: Block = None


@dataclass
class Call(Stmt):
    dest: Expr | None = None  # lvalue or None
    callee: str = ""
    args: list[Expr] = dc_field(default_factory=list)


@dataclass
class Return(Stmt):
    value: Expr | None = None


# ---------------------------------------------------------------------------
# Top-level declarations
# ---------------------------------------------------------------------------

@dataclass
class EnumType:
    name: str
    literals: list[str]
    loc: SourceLoc = _loc()


@dataclass
class RecordType:
    name: str
    fields: list[tuple[str, TypeRef]]
    loc: SourceLoc = _loc()


@dataclass
class ConstDef:
    name: str
    value_expr: Expr
    loc: SourceLoc = _loc()


@dataclass
class GlobalDecl:
    name: str
    type: TypeRef
    init: Expr | None = None
    loc: SourceLoc = _loc()


@dataclass
class FunctionDef:
    name: str
    params: list[tuple[str, TypeRef]]
    return_type: TypeRef | None  # None = void
    locals: list[tuple[str, TypeRef]] = dc_field(default_factory=list)
    body: Block | None = None
    is_declared_only: bool = False
    loc: SourceLoc = _loc()


@dataclass
class RawSpan:
    """Verbatim text of a `/*@ ... */` annotation block (without markers)."""

    text: str
    file: str = dc_field(default="<input>", compare=False)
    line: int = dc_field(default=0, compare=False)


@dataclass
class Program:
    enums: list[EnumType] = dc_field(default_factory=list)
    records: list[RecordType] = dc_field(default_factory=list)
    constants: list[ConstDef] = dc_field(default_factory=list)
    globals: list[GlobalDecl] = dc_field(default_factory=list)
    functions: list[FunctionDef] = dc_field(default_factory=list)
    # Annotation spans preserved for the spec language front end.
    meta_spans: list[RawSpan] = dc_field(default_factory=list)
    # (function name, span) for contract blocks preceding a definition.
    contract_spans: list[tuple[str, RawSpan]] = dc_field(default_factory=list)
    # (function, stmt path, 'before'|'after', span) for in-body assert blocks.
    assert_spans: list[tuple[str, tuple[int, ...], str, RawSpan]] = dc_field(default_factory=list)

    def function(self, name: str) -> FunctionDef | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def defined_functions(self) -> list[FunctionDef]:
        """The set F of functions defined (with bodies) in the program."""
        return [f for f in self.functions if f.body is not None]


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------

def assign_stmt_paths(fn: FunctionDef, file: str = "<input>") -> None:
    """Record each statement's path from the body root into its SourceLoc."""
    if fn.body is None:
        return

    def walk(stmts, prefix):
        for i, s in enumerate(stmts):
            path = prefix + (i,)
            s.loc.stmt_index = path
            s.loc.file = file
            match s:
                case If(then=t, els=e):
                    walk(t.stmts, path + (0,))
                    if e is not None:
                        walk(e.stmts, path + (1,))
                case While(body=b):
                    walk(b.stmts, path + (0,))
                case Block(stmts=inner):
                    walk(inner, path)

    walk(fn.body.stmts, ())


def stmt_at_path(fn: FunctionDef, path: tuple[int, ...]) -> Stmt:
    """Resolve a stmt_index path back to its statement."""
    stmts = fn.body.stmts
    i = 0
    node = None
    while i < len(path):
        node = stmts[path[i]]
        i += 1
        if i == len(path):
            return node
        match node:
            case If(then=t, els=e):
                stmts = t.stmts if path[i] == 0 else e.stmts
                i += 1
            case While(body=b):
                assert path[i] == 0
                stmts = b.stmts
                i += 1
            case Block(stmts=inner):
                stmts = inner
            case _:
                raise KeyError(f"path {path} does not resolve in {fn.name}")
    raise KeyError(f"empty path in {fn.name}")


def walk_statements(block: Block):
    """Yield every statement in a block, depth first, inner ones included."""
    for s in block.stmts:
        yield s
        match s:
            case If(then=t, els=e):
                yield from walk_statements(t)
                if e is not None:
                    yield from walk_statements(e)
            case While(body=b):
                yield from walk_statements(b)
            case Block():
                yield from walk_statements(s)


def walk_exprs(e: Expr):
    if e is None:
        return
    yield e
    match e:
        case Field(base=b):
            yield from walk_exprs(b)
        case Index(base=b, index=i):
            yield from walk_exprs(b)
            yield from walk_exprs(i)
        case Deref(ptr=p):
            yield from walk_exprs(p)
        case AddrOf(lvalue=lv):
            yield from walk_exprs(lv)
        case Unary(operand=x):
            yield from walk_exprs(x)
        case Binary(lhs=l, rhs=r):
            yield from walk_exprs(l)
            yield from walk_exprs(r)
