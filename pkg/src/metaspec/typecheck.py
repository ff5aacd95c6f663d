"""Typechecker for mini-C programs.

Builds symbol tables and the abstract cell layout (one cell per scalar,
arrays are element-count cells, records are the concatenation of their
fields), folds constant expressions, annotates every expression with its
type, and classifies locals into registers vs memory (address-taken or
aggregate locals live in memory; everything else is a register and is
invisible to memory-access classification).
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .ast import (
    AddrOf, ArrayType, Assign, Binary, Block, Call, CharType, Deref, EnumRef,
    EnumType, Expr, Field, FunctionDef, If, Index, IntLit, IntType, NullLit,
    Program, PtrType, RecordRef, RecordType, Return, TypeRef, Unary, Var,
    While, walk_exprs, walk_statements,
)
from .errors import TypecheckError, TypecheckFailure

BUILTINS: dict[str, tuple[list[TypeRef], TypeRef]] = {
    "any_int": ([IntType(), IntType()], IntType()),
}


def is_int_like(ty: TypeRef) -> bool:
    return isinstance(ty, (IntType, CharType))


def is_scalar(ty: TypeRef) -> bool:
    return isinstance(ty, (IntType, CharType, EnumRef, PtrType))


def same_type(a: TypeRef, b: TypeRef) -> bool:
    match a, b:
        case (IntType(), IntType()) | (CharType(), CharType()):
            return True
        case (EnumRef(name=x), EnumRef(name=y)) | (RecordRef(name=x), RecordRef(name=y)):
            return x == y
        case (PtrType(pointee=x), PtrType(pointee=y)):
            return x is None or y is None or same_type(x, y)
        case (ArrayType(), ArrayType()):
            return same_type(a.elem, b.elem) and a.size == b.size
    return False


def assignable(dst: TypeRef, src: TypeRef) -> bool:
    """int and char interconvert freely; enums and pointers are strict."""
    if is_int_like(dst) and is_int_like(src):
        return True
    return same_type(dst, src)


NULL_PTR = PtrType(None)  # type of the NULL literal


@dataclass
class FunctionInfo:
    fn: FunctionDef
    params: dict[str, TypeRef]
    locals: dict[str, TypeRef]
    memory_locals: set[str] = dc_field(default_factory=set)

    def var_type(self, name: str) -> TypeRef | None:
        return self.params.get(name) or self.locals.get(name)

    def is_register(self, name: str) -> bool:
        return (name in self.params or name in self.locals) and name not in self.memory_locals


@dataclass
class TypedProgram:
    program: Program
    enums: dict[str, EnumType]
    enum_literals: dict[str, tuple[str, int]]  # literal -> (enum name, value)
    records: dict[str, RecordType]
    constants: dict[str, int]
    globals: dict[str, TypeRef]
    functions: dict[str, FunctionDef]
    fn_info: dict[str, FunctionInfo]
    _sizes: dict[int, int] = dc_field(default_factory=dict)

    # -- layout ------------------------------------------------------------

    def sizeof(self, ty: TypeRef) -> int:
        match ty:
            case IntType() | CharType() | EnumRef() | PtrType():
                return 1
            case ArrayType():
                return ty.size * self.sizeof(ty.elem)
            case RecordRef(name=n):
                return sum(self.sizeof(ft) for _, ft in self.records[n].fields)
        raise ValueError(f"no size for {ty}")

    def field_offset(self, record: str, field_name: str) -> tuple[int, TypeRef]:
        off = 0
        for fname, fty in self.records[record].fields:
            if fname == field_name:
                return off, fty
            off += self.sizeof(fty)
        raise KeyError(f"{record}.{field_name}")

    def record_of(self, ty: TypeRef) -> str | None:
        return ty.name if isinstance(ty, RecordRef) else None


def const_eval(e: Expr, constants: dict[str, int]) -> int:
    """Evaluate a compile-time integer expression."""
    match e:
        case IntLit(value=v):
            return v
        case Var(name=n) if n in constants:
            return constants[n]
        case Unary(op="-", operand=x):
            return -const_eval(x, constants)
        case Binary(op=op, lhs=l, rhs=r):
            a, b = const_eval(l, constants), const_eval(r, constants)
            match op:
                case "+": return a + b
                case "-": return a - b
                case "*": return a * b
                case "/":
                    if b == 0:
                        raise ValueError("division by zero in constant expression")
                    return int(a / b)
                case "%":
                    if b == 0:
                        raise ValueError("division by zero in constant expression")
                    return a - int(a / b) * b
    raise ValueError("not a constant expression")


class _Checker:
    def __init__(self, program: Program):
        self.p = program
        self.issues: list[TypecheckError] = []

    def err(self, line: int, msg: str):
        self.issues.append(TypecheckError(msg, line))

    # -- table construction -------------------------------------------------

    def build(self) -> TypedProgram:
        p = self.p
        enums, records = {}, {}
        for e in p.enums:
            if e.name in enums or e.name in records:
                self.err(e.loc.line, f"duplicate type name {e.name!r}")
            enums[e.name] = e
        for r in p.records:
            if r.name in enums or r.name in records:
                self.err(r.loc.line, f"duplicate type name {r.name!r}")
            seen = set()
            for fname, _ in r.fields:
                if fname in seen:
                    self.err(r.loc.line, f"duplicate field {fname!r} in struct {r.name}")
                seen.add(fname)
            records[r.name] = r

        enum_literals: dict[str, tuple[str, int]] = {}
        values: set[str] = set()

        def declare(name, line, what):
            if name in values:
                self.err(line, f"duplicate name {name!r} ({what})")
            values.add(name)

        for e in p.enums:
            for i, lit in enumerate(e.literals):
                declare(lit, e.loc.line, "enum literal")
                enum_literals[lit] = (e.name, i)

        constants: dict[str, int] = {}
        for c in p.constants:
            declare(c.name, c.loc.line, "constant")
            try:
                constants[c.name] = const_eval(c.value_expr, constants)
            except ValueError as ex:
                self.err(c.loc.line, f"constant {c.name!r}: {ex}")
                constants[c.name] = 0

        tp = TypedProgram(p, enums, enum_literals, records, constants,
                          globals={}, functions={}, fn_info={})
        self.tp = tp

        for r in p.records:
            self.check_no_record_recursion(r)
        for r in p.records:
            for _, fty in r.fields:
                self.resolve_type(fty, r.loc.line)

        for g in p.globals:
            declare(g.name, g.loc.line, "global")
            self.resolve_type(g.type, g.loc.line)
            tp.globals[g.name] = g.type
            if g.init is not None:
                self.check_global_init(g)

        for f in p.functions:
            if f.name in tp.functions:
                prev = tp.functions[f.name]
                # A declaration may precede the definition; anything else clashes.
                if not (prev.is_declared_only and not f.is_declared_only
                        and prev.params == f.params and prev.return_type == f.return_type):
                    self.err(f.loc.line, f"duplicate function {f.name!r}")
            else:
                declare(f.name, f.loc.line, "function")
            tp.functions[f.name] = f
            if f.name in BUILTINS:
                self.err(f.loc.line, f"{f.name!r} is a builtin and cannot be redefined")

        for f in p.functions:
            self.check_function(f)
        return tp

    def check_no_record_recursion(self, r: RecordType):
        # Inline recursion (through record/array fields) makes the layout
        # unbounded; recursion through pointers is fine.
        def inline_refs(ty: TypeRef):
            match ty:
                case RecordRef(name=n):
                    yield n
                case ArrayType(elem=e):
                    yield from inline_refs(e)

        seen = set()
        stack = [r.name]
        while stack:
            name = stack.pop()
            if name == r.name and seen:
                self.err(r.loc.line, f"recursive record type {r.name!r}")
                return
            if name in seen or name not in self.tp.records:
                continue
            seen.add(name)
            for _, fty in self.tp.records[name].fields:
                stack.extend(inline_refs(fty))

    def resolve_type(self, ty: TypeRef, line: int):
        match ty:
            case EnumRef(name=n):
                if n not in self.tp.enums:
                    self.err(line, f"unknown enum {n!r}")
            case RecordRef(name=n):
                if n not in self.tp.records:
                    self.err(line, f"unknown struct {n!r}")
            case PtrType(pointee=pt):
                if not isinstance(pt, (RecordRef, CharType)):
                    self.err(line, "only pointers to records and char are supported")
                else:
                    self.resolve_type(pt, line)
            case ArrayType():
                try:
                    ty.size = const_eval(ty.size_expr, self.tp.constants)
                except ValueError:
                    self.err(line, "array size must be a compile-time constant")
                    ty.size = 1
                if ty.size <= 0:
                    self.err(line, "array size must be positive")
                    ty.size = 1
                self.resolve_type(ty.elem, line)

    def check_global_init(self, g):
        init = g.init
        if isinstance(g.type, EnumRef):
            if not (isinstance(init, Var) and init.name in self.tp.enum_literals
                    and self.tp.enum_literals[init.name][0] == g.type.name):
                self.err(g.loc.line, f"initializer of {g.name!r} must be a literal of {g.type}")
            return
        if is_int_like(g.type):
            try:
                const_eval(init, self.tp.constants)
            except ValueError:
                self.err(g.loc.line, f"initializer of {g.name!r} must be a constant expression")
            return
        self.err(g.loc.line, f"global {g.name!r}: only int/char/enum initializers are supported")

    # -- functions -----------------------------------------------------------

    def check_function(self, fn: FunctionDef):
        tp = self.tp
        if fn.return_type is not None:
            self.resolve_type(fn.return_type, fn.loc.line)
            if not is_scalar(fn.return_type):
                self.err(fn.loc.line, f"{fn.name!r}: return type must be scalar")
        params, locals_ = {}, {}
        for pname, pty in fn.params:
            self.resolve_type(pty, fn.loc.line)
            if not is_scalar(pty):
                self.err(fn.loc.line, f"parameter {pname!r} must have scalar type")
            if pname in tp.globals or pname in tp.constants or pname in tp.enum_literals:
                self.err(fn.loc.line, f"parameter {pname!r} shadows a global name")
            if pname in params:
                self.err(fn.loc.line, f"duplicate parameter {pname!r}")
            params[pname] = pty
        for lname, lty in fn.locals:
            self.resolve_type(lty, fn.loc.line)
            if lname in tp.globals or lname in tp.constants or lname in tp.enum_literals:
                self.err(fn.loc.line, f"local {lname!r} shadows a global name")
            locals_[lname] = lty
        info = FunctionInfo(fn, params, locals_)
        tp.fn_info[fn.name] = info
        if fn.body is None:
            return

        for lname, lty in locals_.items():
            if not is_scalar(lty):
                info.memory_locals.add(lname)
        for s in walk_statements(fn.body):
            for e in self._stmt_exprs(s):
                for sub in walk_exprs(e):
                    if isinstance(sub, AddrOf):
                        root = self._addr_root(sub.lvalue)
                        if root is not None and info.var_type(root) is not None:
                            info.memory_locals.add(root)

        self.check_block(fn.body, fn, info)

    @staticmethod
    def _stmt_exprs(s):
        match s:
            case Assign(lvalue=lv, rhs=r):
                return [lv, r]
            case If(cond=c) | While(cond=c):
                return [c]
            case Call(dest=d, args=a):
                return ([d] if d is not None else []) + list(a)
            case Return(value=v):
                return [v] if v is not None else []
        return []

    @staticmethod
    def _addr_root(lv: Expr) -> str | None:
        """Variable whose storage an AddrOf pins, or None if behind a pointer."""
        while True:
            match lv:
                case Var(name=n):
                    return n
                case Field(base=b, arrow=False):
                    lv = b
                case Index(base=b):
                    lv = b
                case _:
                    return None

    def check_block(self, block: Block, fn: FunctionDef, info: FunctionInfo):
        for s in block.stmts:
            self.check_stmt(s, fn, info)

    def check_stmt(self, s, fn: FunctionDef, info: FunctionInfo):
        match s:
            case Assign(lvalue=lv, rhs=rhs):
                lt = self.type_lvalue(lv, info)
                rt = self.type_expr(rhs, info)
                if lt is not None and not is_scalar(lt):
                    self.err(s.loc.line, "assignment target must be scalar")
                elif lt is not None and rt is not None and not assignable(lt, rt):
                    self.err(s.loc.line, f"cannot assign {rt} to {lt}")
            case If(cond=c, then=t, els=e):
                self.check_cond(c, info, s.loc.line)
                self.check_block(t, fn, info)
                if e is not None:
                    self.check_block(e, fn, info)
            case While(cond=c, body=b):
                self.check_cond(c, info, s.loc.line)
                self.check_block(b, fn, info)
            case Call():
                self.check_call(s, info)
            case Return(value=v):
                if fn.return_type is None:
                    if v is not None:
                        self.err(s.loc.line, f"{fn.name!r} is void but returns a value")
                elif v is None:
                    self.err(s.loc.line, f"{fn.name!r} must return {fn.return_type}")
                else:
                    vt = self.type_expr(v, info)
                    if vt is not None and not assignable(fn.return_type, vt):
                        self.err(s.loc.line, f"cannot return {vt} as {fn.return_type}")
            case Block():
                self.check_block(s, fn, info)

    def check_cond(self, c: Expr, info, line: int):
        ct = self.type_expr(c, info)
        if ct is not None and not is_int_like(ct):
            self.err(line, f"condition must be int-valued, not {ct}")

    def check_call(self, s: Call, info: FunctionInfo):
        tp = self.tp
        line = s.loc.line
        if s.callee in BUILTINS:
            ptypes, rtype = BUILTINS[s.callee]
        elif s.callee in tp.functions:
            f = tp.functions[s.callee]
            ptypes, rtype = [t for _, t in f.params], f.return_type
        else:
            self.err(line, f"unknown function {s.callee!r}")
            for a in s.args:
                self.type_expr(a, info)
            return
        if len(s.args) != len(ptypes):
            self.err(line, f"{s.callee!r} expects {len(ptypes)} arguments, got {len(s.args)}")
        for a, pt in zip(s.args, ptypes):
            at = self.type_expr(a, info)
            if at is not None and not assignable(pt, at):
                self.err(line, f"argument of type {at} does not match parameter {pt}")
        if s.dest is not None:
            if rtype is None:
                self.err(line, f"{s.callee!r} returns void; result cannot be stored")
                return
            dt = self.type_lvalue(s.dest, info)
            if dt is not None and not assignable(dt, rtype):
                self.err(line, f"cannot store {rtype} result into {dt}")

    # -- expressions ----------------------------------------------------------

    def type_lvalue(self, e: Expr, info: FunctionInfo | None,
                    extra: dict[str, TypeRef] | None = None) -> TypeRef | None:
        ty = self.type_expr(e, info, extra)
        if ty is None:
            return None
        match e:
            case Var(name=n):
                if info is not None and info.var_type(n) is not None:
                    return ty
                if n in self.tp.globals:
                    return ty
                if extra and n in extra:
                    return ty
                self.err(e.line, f"{n!r} is not assignable")
                return None
            case Field() | Index() | Deref():
                return ty
        self.err(e.line, "expression is not an lvalue")
        return None

    def type_expr(self, e: Expr, info: FunctionInfo | None,
                  extra: dict[str, TypeRef] | None = None) -> TypeRef | None:
        ty = self._type_expr(e, info, extra)
        e.ty = ty
        return ty

    def _type_expr(self, e, info, extra) -> TypeRef | None:
        tp = self.tp
        match e:
            case IntLit():
                return INT_T
            case NullLit():
                return NULL_PTR
            case Var(name=n):
                if extra and n in extra:
                    return extra[n]
                if info is not None:
                    vt = info.var_type(n)
                    if vt is not None:
                        return vt
                if n in tp.globals:
                    return tp.globals[n]
                if n in tp.constants:
                    return INT_T
                if n in tp.enum_literals:
                    return EnumRef(tp.enum_literals[n][0])
                self.err(e.line, f"unknown name {n!r}")
                return None
            case Unary(op=op, operand=x):
                xt = self.type_expr(x, info, extra)
                if xt is not None and not is_int_like(xt):
                    self.err(e.line, f"operator {op!r} needs an int operand, got {xt}")
                return INT_T
            case Binary(op=op, lhs=l, rhs=r):
                lt = self.type_expr(l, info, extra)
                rt = self.type_expr(r, info, extra)
                if lt is None or rt is None:
                    return INT_T
                if op in ("==", "!="):
                    ok = ((is_int_like(lt) and is_int_like(rt))
                          or (isinstance(lt, EnumRef) and same_type(lt, rt))
                          or (isinstance(lt, PtrType) and isinstance(rt, PtrType)
                              and same_type(lt, rt)))
                    if not ok:
                        self.err(e.line, f"cannot compare {lt} with {rt}")
                    return INT_T
                if not is_int_like(lt) or not is_int_like(rt):
                    self.err(e.line, f"operator {op!r} needs int operands, got {lt} and {rt}")
                return INT_T
            case AddrOf(lvalue=lv):
                lt = self.type_lvalue(lv, info, extra)
                if lt is None:
                    return None
                if isinstance(lt, (CharType, RecordRef)):
                    return PtrType(lt)
                self.err(e.line, f"cannot take the address of a {lt} (char and record cells only)")
                return None
            case Field(base=b, field=fname, arrow=arrow):
                bt = self.type_expr(b, info, extra)
                if bt is None:
                    return None
                if arrow:
                    if not (isinstance(bt, PtrType) and isinstance(bt.pointee, RecordRef)):
                        self.err(e.line, f"'->' needs a record pointer, got {bt}")
                        return None
                    rec = bt.pointee.name
                else:
                    if not isinstance(bt, RecordRef):
                        self.err(e.line, f"'.' needs a record value, got {bt}")
                        return None
                    rec = bt.name
                for fn_, ft in tp.records[rec].fields:
                    if fn_ == fname:
                        return ft
                self.err(e.line, f"struct {rec} has no field {fname!r}")
                return None
            case Index(base=b, index=i):
                bt = self.type_expr(b, info, extra)
                it = self.type_expr(i, info, extra)
                if it is not None and not is_int_like(it):
                    self.err(e.line, f"array index must be int, got {it}")
                if isinstance(bt, ArrayType):
                    return bt.elem
                if isinstance(bt, PtrType) and bt.pointee is not None:
                    return bt.pointee
                if bt is not None:
                    self.err(e.line, f"cannot index into {bt}")
                return None
            case Deref(ptr=p):
                pt = self.type_expr(p, info, extra)
                if isinstance(pt, PtrType) and pt.pointee is not None:
                    return pt.pointee
                if pt is not None:
                    self.err(e.line, f"cannot dereference {pt}")
                return None
        raise AssertionError(f"unhandled expression {e!r}")


INT_T = IntType()


def typecheck(program: Program) -> TypedProgram:
    """Typecheck a parsed program. Raises TypecheckFailure carrying the full
    list of violations if any check fails."""
    checker = _Checker(program)
    tp = checker.build()
    if checker.issues:
        raise TypecheckFailure(checker.issues)
    return tp


def expr_typer(tp: TypedProgram) -> _Checker:
    """A checker bound to an already-typed program, for typing annotation
    expressions (meta predicates, instantiated assertions)."""
    c = _Checker.__new__(_Checker)
    c.p = tp.program
    c.issues = []
    c.tp = tp
    return c
