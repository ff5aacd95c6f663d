"""Normalization: make every memory access a syntactically identifiable
single-assignment step.

After normalization:
  * every memory read is a statement `t = <place>` whose right side is
    exactly the read lvalue;
  * every memory write is a statement `<place> = <pure rhs>` whose right
    side reads no memory (operands are temporaries, registers, constants,
    or address computations);
  * place addresses are computed from register operands only;
  * if/while conditions are single register variables (loop conditions are
    recomputed by a copy of their head block at the end of each iteration);
  * `&&`/`||` are lowered to nested ifs, so only evaluated operands read;
  * call arguments are atoms; call results land in registers.

Boundaries between the resulting statements are the sequence points where
assertions may be inserted. Normalization is idempotent.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field as dc_field

from .ast import (
    AddrOf, ArrayType, Assign, Binary, Block, Call, Deref, Expr, Field,
    FunctionDef, If, Index, IntLit, NullLit, Program, PtrType, RecordRef,
    Return, SourceLoc, Stmt, Unary, Var, While, assign_stmt_paths,
    walk_statements,
)
from .typecheck import BUILTINS, FunctionInfo, INT_T, TypedProgram, typecheck


@dataclass
class AccessDescriptor:
    """Abstract location of one memory access in normalized code."""

    lvalue: Expr
    kind: str  # 'direct' | 'direct_local' | 'ptr_field' | 'ptr_char'
    base_global: str | None = None
    field_pairs: frozenset[tuple[str, str]] = frozenset()

    def describe(self) -> str:
        from .pretty import render_expr
        return render_expr(self.lvalue)


@dataclass
class AccessInfo:
    stmt: SourceLoc
    function: str
    write: AccessDescriptor | None = None
    reads: list[AccessDescriptor] = dc_field(default_factory=list)


@dataclass
class NormalizedProgram:
    program: Program
    tp: TypedProgram
    temp_vars: dict[str, list[str]]


# ---------------------------------------------------------------------------
# Expression classification
# ---------------------------------------------------------------------------

def is_register_var(e: Expr, tp: TypedProgram, info: FunctionInfo | None) -> bool:
    return (isinstance(e, Var) and info is not None and info.is_register(e.name))


def is_atom(e: Expr, tp: TypedProgram, info: FunctionInfo | None) -> bool:
    match e:
        case IntLit() | NullLit():
            return True
        case Var(name=n):
            if info is not None and info.var_type(n) is not None:
                return info.is_register(n)
            return n in tp.constants or n in tp.enum_literals
        case AddrOf(lvalue=lv):
            return is_normal_place_address(lv, tp, info)
    return False


def is_pure(e: Expr, tp: TypedProgram, info: FunctionInfo | None) -> bool:
    """No memory reads and no short-circuit operators anywhere inside."""
    match e:
        case Binary(op=op, lhs=l, rhs=r):
            return op not in ("&&", "||") and is_pure(l, tp, info) and is_pure(r, tp, info)
        case Unary(operand=x):
            return is_pure(x, tp, info)
        case _:
            return is_atom(e, tp, info)


def is_memory_lvalue(e: Expr, tp: TypedProgram, info: FunctionInfo | None) -> bool:
    match e:
        case Var(name=n):
            if info is not None and info.var_type(n) is not None:
                return not info.is_register(n)
            return n in tp.globals
        case Field() | Index() | Deref():
            return True
    return False


def is_normal_place_address(lv: Expr, tp: TypedProgram, info) -> bool:
    """Address computation uses register operands only."""
    match lv:
        case Var():
            return is_memory_lvalue(lv, tp, info)
        case Field(base=b, arrow=True):
            return is_atom(b, tp, info)
        case Field(base=b, arrow=False):
            return is_normal_place_address(b, tp, info)
        case Index(base=b, index=i):
            if not is_atom(i, tp, info):
                return False
            if isinstance(b.ty, PtrType):
                return is_atom(b, tp, info)
            return is_normal_place_address(b, tp, info)
        case Deref(ptr=p):
            return is_atom(p, tp, info)
    return False


# ---------------------------------------------------------------------------
# The rewriter
# ---------------------------------------------------------------------------

class _FnNormalizer:
    def __init__(self, tp: TypedProgram, fn: FunctionDef, taken: set[str]):
        self.tp = tp
        self.fn = fn
        orig = tp.fn_info[fn.name]
        # Working copy: the input program's tables stay untouched.
        self.info = FunctionInfo(fn, dict(orig.params), dict(orig.locals),
                                 set(orig.memory_locals))
        self.taken = taken | {n for n, _ in fn.params} | {n for n, _ in fn.locals}
        self.new_locals: list[tuple[str, object]] = []
        self.temps: list[str] = []
        self.counter = 0
        self.out: list[Stmt] = []
        self.loc_line = 0

    def fresh(self, ty) -> str:
        while True:
            name = f"t{self.counter}"
            self.counter += 1
            if name not in self.taken:
                break
        self.taken.add(name)
        self.new_locals.append((name, ty))
        self.temps.append(name)
        # Registers know their own classification immediately.
        self.info.locals[name] = ty
        return name

    def emit(self, s: Stmt):
        s.loc = SourceLoc(line=self.loc_line)
        self.out.append(s)

    def type_of(self, e: Expr):
        if e.ty is not None:
            return e.ty
        from .typecheck import expr_typer
        typer = expr_typer(self.tp)
        return typer.type_expr(e, self.info)

    # -- expressions -------------------------------------------------------

    def atom(self, e: Expr) -> Expr:
        if is_atom(e, self.tp, self.info):
            return e
        v = self.value(e)
        if is_atom(v, self.tp, self.info):
            return v
        t = self.fresh(self.type_of(e) or INT_T)
        self.emit(Assign(Var(t), v))
        return Var(t)

    def value(self, e: Expr) -> Expr:
        """Rewrite to a pure expression, emitting reads/lowerings first."""
        if is_atom(e, self.tp, self.info):
            return e
        match e:
            case Var() | Field() | Index() | Deref():
                place = self.place(e)
                t = self.fresh(self.type_of(e) or INT_T)
                self.emit(Assign(Var(t), place))
                return Var(t)
            case AddrOf(lvalue=lv):
                return AddrOf(self.address(lv), ty=e.ty, line=e.line)
            case Unary(op=op, operand=x):
                return Unary(op, self.value(x), ty=e.ty, line=e.line)
            case Binary(op="&&") | Binary(op="||"):
                return self.lower_shortcircuit(e)
            case Binary(op=op, lhs=l, rhs=r):
                lv_ = self.value(l)
                rv_ = self.value(r)
                return Binary(op, lv_, rv_, ty=e.ty, line=e.line)
        raise AssertionError(f"cannot normalize {e!r}")

    def lower_shortcircuit(self, e: Binary) -> Expr:
        t = self.fresh(INT_T)
        cond = self.atom(e.lhs)
        if not is_register_var(cond, self.tp, self.info):
            tc = self.fresh(INT_T)
            self.emit(Assign(Var(tc), cond))
            cond = Var(tc)
        saved = self.out
        self.out = []
        cb = self.atom(e.rhs)
        self.emit(Assign(Var(t), Binary("!=", cb, IntLit(0))))
        rhs_stmts = self.out
        self.out = saved
        if e.op == "&&":
            self.emit(If(cond, Block(rhs_stmts), Block([self._set(t, 0)])))
        else:
            self.emit(If(cond, Block([self._set(t, 1)]), Block(rhs_stmts)))
        return Var(t)

    def _set(self, name: str, v: int) -> Stmt:
        s = Assign(Var(name), IntLit(v))
        s.loc = SourceLoc(line=self.loc_line)
        return s

    def address(self, lv: Expr) -> Expr:
        """Normalize an lvalue used for its address only."""
        match lv:
            case Var():
                return lv
            case Field(base=b, field=f, arrow=True):
                return Field(self.atom(b), f, True, ty=lv.ty, line=lv.line)
            case Field(base=b, field=f, arrow=False):
                return Field(self.address(b), f, False, ty=lv.ty, line=lv.line)
            case Index(base=b, index=i):
                if isinstance(b.ty, PtrType):
                    nb = self.atom(b)
                else:
                    nb = self.address(b)
                return Index(nb, self.atom(i), ty=lv.ty, line=lv.line)
            case Deref(ptr=p):
                return Deref(self.atom(p), ty=lv.ty, line=lv.line)
        raise AssertionError(f"not an lvalue: {lv!r}")

    place = address

    # -- statements ----------------------------------------------------------

    def block(self, b: Block) -> Block:
        saved = self.out
        self.out = []
        for s in b.stmts:
            self.stmt(s)
        result = Block(self.out, loc=b.loc)
        self.out = saved
        return result

    def cond_var(self, cond: Expr) -> tuple[Expr, list[Stmt]]:
        """Evaluate a condition into a register operand; returns the operand
        and the statements computing it."""
        saved = self.out
        self.out = []
        if is_register_var(cond, self.tp, self.info):
            operand = cond
        else:
            v = self.value(cond)
            t = self.fresh(INT_T)
            self.emit(Assign(Var(t), v))
            operand = Var(t)
        stmts = self.out
        self.out = saved
        return operand, stmts

    def stmt(self, s: Stmt):
        self.loc_line = s.loc.line
        match s:
            case Assign(lvalue=lv, rhs=rhs):
                if is_register_var(lv, self.tp, self.info):
                    if (is_memory_lvalue(rhs, self.tp, self.info)
                            and is_normal_place_address(rhs, self.tp, self.info)):
                        # Already a canonical read statement.
                        self.emit(Assign(lv, rhs))
                    else:
                        self.emit(Assign(lv, self.value(rhs)))
                else:
                    v = self.value(rhs)
                    v = v if is_atom(v, self.tp, self.info) else self.atom(v)
                    place = self.place(lv)
                    self.emit(Assign(place, v))
            case Call(dest=d, callee=c, args=args):
                nargs = [self.atom(a) for a in args]
                if d is None or is_register_var(d, self.tp, self.info):
                    self.emit(Call(d, c, nargs))
                else:
                    rty = (BUILTINS[c][1] if c in BUILTINS
                           else self.tp.functions[c].return_type)
                    t = self.fresh(rty)
                    self.emit(Call(Var(t), c, nargs))
                    place = self.place(d)
                    self.emit(Assign(place, Var(t)))
            case Return(value=v):
                self.emit(Return(None if v is None else self.value(v)))
            case If(cond=c, then=t, els=e):
                operand, stmts = self.cond_var(c)
                self.out.extend(stmts)
                self.emit(If(operand, self.block(t),
                             None if e is None else self.block(e)))
            case While(cond=c, body=b):
                operand, head = self.cond_var(c)
                self.out.extend(head)
                nb = self.block(b)
                nb.stmts.extend(copy.deepcopy(head))
                self.emit(While(operand, nb))
            case Block():
                self.emit(self.block(s))
            case _:
                raise AssertionError(f"cannot normalize statement {s!r}")


def normalize_program(tp: TypedProgram) -> NormalizedProgram:
    """Rewrite a typed program into normal form. The result is re-typechecked
    so its tables include the introduced temporaries."""
    p = tp.program
    taken = (set(tp.globals) | set(tp.constants) | set(tp.enum_literals)
             | set(tp.functions))
    new_functions = []
    temp_vars: dict[str, list[str]] = {}
    for fn in p.functions:
        if fn.body is None:
            new_functions.append(fn)
            continue
        norm = _FnNormalizer(tp, fn, set(taken))
        body = norm.block(fn.body)
        nf = FunctionDef(fn.name, fn.params, fn.return_type,
                         locals=list(fn.locals) + norm.new_locals,
                         body=body, loc=fn.loc)
        temp_vars[fn.name] = norm.temps
        new_functions.append(nf)

    np_prog = Program(
        enums=p.enums, records=p.records, constants=p.constants,
        globals=p.globals, functions=new_functions, meta_spans=list(p.meta_spans),
    )
    for fn in np_prog.functions:
        assign_stmt_paths(fn, fn.loc.file)
    ntp = typecheck(np_prog)
    return NormalizedProgram(np_prog, ntp, temp_vars)


# ---------------------------------------------------------------------------
# Access classification
# ---------------------------------------------------------------------------

def describe_access(lv: Expr, tp: TypedProgram, info: FunctionInfo) -> AccessDescriptor:
    """Build the abstract-location descriptor of a normalized place."""
    pairs: set[tuple[str, str]] = set()
    node = lv
    hop_pointee = None
    while True:
        match node:
            case Var(name=n):
                if info.var_type(n) is not None:
                    return AccessDescriptor(lv, "direct_local", None, frozenset(pairs))
                return AccessDescriptor(lv, "direct", n, frozenset(pairs))
            case Field(base=b, field=f, arrow=arrow):
                rec = b.ty.pointee.name if arrow else b.ty.name
                pairs.add((rec, f))
                if arrow:
                    hop_pointee = RecordRef(rec)
                    break
                node = b
            case Index(base=b):
                if isinstance(b.ty, PtrType):
                    hop_pointee = b.ty.pointee
                    break
                node = b
            case Deref(ptr=pt):
                hop_pointee = pt.ty.pointee
                break
            case _:
                raise AssertionError(f"not a place: {lv!r}")
    if isinstance(hop_pointee, RecordRef):
        return AccessDescriptor(lv, "ptr_field", None, frozenset(pairs))
    return AccessDescriptor(lv, "ptr_char", None, frozenset(pairs))


def classify_accesses(np: NormalizedProgram) -> dict[tuple[str, tuple[int, ...]], AccessInfo]:
    """Map every normalized statement that touches memory to its accesses.
    Call statements contribute no entries (the function-call exception)."""
    result: dict[tuple[str, tuple[int, ...]], AccessInfo] = {}
    tp = np.tp
    for fn in np.program.functions:
        if fn.body is None:
            continue
        info = tp.fn_info[fn.name]
        for s in walk_statements(fn.body):
            if not isinstance(s, Assign):
                continue
            write = reads = None
            if is_memory_lvalue(s.lvalue, tp, info):
                write = describe_access(s.lvalue, tp, info)
            if is_memory_lvalue(s.rhs, tp, info):
                reads = [describe_access(s.rhs, tp, info)]
            if write is not None or reads:
                result[(fn.name, s.loc.stmt_index)] = AccessInfo(
                    s.loc, fn.name, write, reads or [])
    return result
