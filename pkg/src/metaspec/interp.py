"""Concrete interpreter for mini-C with an abstract-cell memory model.

Every global and every memory-classified local is an object made of scalar
cells (one cell per scalar, arrays are element-count cells). Pointer values
are (object id, cell offset) pairs; NULL is None. Nothing is ever
deallocated, so pointers cannot dangle. Register locals, parameters and
temporaries live in the frame, invisible to the memory model.

The interpreter drives both plain execution (normalization equivalence
checks) and instrumented runs via the `Hooks` callbacks. It also evaluates
annotation predicates: quantifiers enumerate their bounded range,
`\\separated` compares concrete cell regions.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field as dc_field

from .ast import (
    AddrOf, ArrayType, Assign, Binary, Block, Call, CharType, Deref, EnumRef,
    Expr, Field, FunctionDef, If, Index, IntLit, IntType, NullLit, PtrType,
    RecordRef, Return, Stmt, Unary, Var, While,
)
from .errors import EvalError, MiniRuntimeError
from .spec_ast import (
    BoolAtom, Compare, Forall, Implies, LocAddrOf, LocRange, LocRead,
    LocTerm, LocWritten, PAnd, PNot, POr, Predicate, Separated,
)
from .typecheck import FunctionInfo, TypedProgram

MAX_STEPS = 2_000_000


@dataclass
class MemObject:
    oid: int
    name: str  # canonical name, stable across identical executions
    type: object
    cells: list

    @property
    def size(self) -> int:
        return len(self.cells)


@dataclass
class Frame:
    function: str
    regs: dict[str, object] = dc_field(default_factory=dict)
    mem: dict[str, int] = dc_field(default_factory=dict)  # local name -> oid
    info: FunctionInfo | None = None


@dataclass
class MemoryState:
    tp: TypedProgram
    objects: dict[int, MemObject] = dc_field(default_factory=dict)
    globals: dict[str, int] = dc_field(default_factory=dict)
    frames: list[Frame] = dc_field(default_factory=list)

    def global_object(self, name: str) -> MemObject:
        return self.objects[self.globals[name]]


@dataclass(frozen=True)
class ConcreteRegion:
    object: int
    offset: int
    length: int

    def overlaps(self, other: "ConcreteRegion") -> bool:
        if self.object != other.object or self.length == 0 or other.length == 0:
            return False
        return (self.offset < other.offset + other.length
                and other.offset < self.offset + self.length)


@dataclass
class PredResult:
    ok: bool
    witness: dict[str, int] | None = None
    reason: str | None = None


class Hooks:
    """Callbacks the checker layers over plain execution."""

    def on_entry(self, interp, frame): ...

    def on_exit(self, interp, frame): ...

    def before_stmt(self, interp, frame, stmt): ...

    def after_stmt(self, interp, frame, stmt): ...


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


def default_value(ty):
    return None if isinstance(ty, PtrType) else 0


class Interp:
    def __init__(self, tp: TypedProgram, stubs=None, seed: int = 0,
                 hooks: Hooks | None = None, max_steps: int = MAX_STEPS):
        self.tp = tp
        self.stubs: dict[str, tuple[FunctionDef, FunctionInfo]] = stubs or {}
        self.rng = random.Random(seed)
        self.seed = seed
        self.hooks = hooks or Hooks()
        self.max_steps = max_steps
        self.steps = 0
        self.trace: list[tuple] = []
        self._next_oid = 0
        self._local_seq = 0
        self.state = MemoryState(tp)
        self._init_globals()

    # -- memory -------------------------------------------------------------

    def _alloc(self, name: str, ty) -> int:
        oid = self._next_oid
        self._next_oid += 1
        self.state.objects[oid] = MemObject(oid, name, ty, self._zero_cells(ty))
        return oid

    def _zero_cells(self, ty) -> list:
        tp = self.tp
        cells = [0] * tp.sizeof(ty)

        def fill(t, off):
            match t:
                case PtrType():
                    cells[off] = None
                case ArrayType(elem=e):
                    es = tp.sizeof(e)
                    for i in range(t.size):
                        fill(e, off + i * es)
                case RecordRef(name=rn):
                    o = off
                    for _, ft in tp.records[rn].fields:
                        fill(ft, o)
                        o += tp.sizeof(ft)
        fill(ty, 0)
        return cells

    def _init_globals(self):
        from .typecheck import const_eval
        for g in self.tp.program.globals:
            oid = self._alloc(g.name, g.type)
            self.state.globals[g.name] = oid
            if g.init is None:
                continue
            if isinstance(g.type, EnumRef):
                self.state.objects[oid].cells[0] = self.tp.enum_literals[g.init.name][1]
            else:
                self.state.objects[oid].cells[0] = const_eval(g.init, self.tp.constants)

    def canon_value(self, v):
        if v is None:
            return "null"
        if isinstance(v, tuple):
            oid, off = v
            return ("ptr", self.state.objects[oid].name, off)
        return v

    # -- running ------------------------------------------------------------

    def run(self, driver: str):
        fn = self.tp.functions.get(driver)
        if fn is None or (fn.body is None and driver not in self.stubs):
            raise MiniRuntimeError(f"driver {driver!r} is not a defined function")
        if fn.params:
            raise MiniRuntimeError(f"driver {driver!r} must take no parameters")
        return self.call_function(driver, [])

    def call_function(self, fname: str, args: list):
        if fname in self.stubs and self.tp.functions[fname].body is None:
            fn, info = self.stubs[fname]
        else:
            fn = self.tp.functions.get(fname)
            if fn is None:
                raise MiniRuntimeError(f"call to unknown function {fname!r}")
            if fn.body is None:
                raise MiniRuntimeError(f"missing stub for declared-only function {fname!r}")
            info = self.tp.fn_info[fname]

        self.trace.append(("call", fname, tuple(self.canon_value(a) for a in args)))
        frame = Frame(fname, info=info)
        for (pname, pty), value in zip(fn.params, args):
            if pname in info.memory_locals:
                self._local_seq += 1
                oid = self._alloc(f"{fname}.{pname}#{self._local_seq}", pty)
                self.state.objects[oid].cells[0] = value
                frame.mem[pname] = oid
            else:
                frame.regs[pname] = value
        for lname, lty in fn.locals:
            if lname in info.memory_locals:
                self._local_seq += 1
                frame.mem[lname] = self._alloc(f"{fname}.{lname}#{self._local_seq}", lty)
            else:
                frame.regs[lname] = default_value(lty)

        self.state.frames.append(frame)
        self.hooks.on_entry(self, frame)
        value = None
        try:
            self.exec_block(fn.body, frame)
            value = default_value(fn.return_type) if fn.return_type is not None else None
        except _ReturnSignal as r:
            value = r.value
        self.hooks.on_exit(self, frame)
        self.state.frames.pop()
        self.trace.append(("ret", fname, self.canon_value(value)))
        return value

    def exec_block(self, block: Block, frame: Frame):
        for s in block.stmts:
            self.exec_stmt(s, frame)

    def exec_stmt(self, s: Stmt, frame: Frame):
        self.steps += 1
        if self.steps > self.max_steps:
            raise MiniRuntimeError("step limit exceeded")
        self.hooks.before_stmt(self, frame, s)
        match s:
            case Assign(lvalue=lv, rhs=rhs):
                v = self.eval_expr(rhs, frame)
                self.store(lv, v, frame)
            case If(cond=c, then=t, els=e):
                if self.eval_expr(c, frame) != 0:
                    self.exec_block(t, frame)
                elif e is not None:
                    self.exec_block(e, frame)
            case While(cond=c, body=b):
                while True:
                    self.steps += 1
                    if self.steps > self.max_steps:
                        raise MiniRuntimeError("step limit exceeded")
                    if self.eval_expr(c, frame) == 0:
                        break
                    self.exec_block(b, frame)
            case Call(dest=d, callee=c, args=args):
                values = [self.eval_expr(a, frame) for a in args]
                if c == "any_int":
                    lo, hi = values
                    if lo > hi:
                        raise MiniRuntimeError(f"any_int({lo}, {hi}): empty range")
                    result = self.rng.randint(lo, hi)
                else:
                    result = self.call_function(c, values)
                if d is not None:
                    self.store(d, result, frame)
            case Return(value=v):
                result = None if v is None else self.eval_expr(v, frame)
                self.hooks.after_stmt(self, frame, s)
                raise _ReturnSignal(result)
            case Block():
                self.exec_block(s, frame)
            case _:
                raise MiniRuntimeError(f"cannot execute {s!r}")
        self.hooks.after_stmt(self, frame, s)

    # -- places ---------------------------------------------------------------

    def resolve_place(self, lv: Expr, frame: Frame | None,
                      quantvals: dict | None = None) -> tuple[int, int, int]:
        """(object id, cell offset, cell length) of a memory lvalue."""
        tp = self.tp
        match lv:
            case Var(name=n):
                if frame is not None and n in frame.mem:
                    oid = frame.mem[n]
                    return oid, 0, self.state.objects[oid].size
                if n in self.state.globals:
                    oid = self.state.globals[n]
                    return oid, 0, self.state.objects[oid].size
                raise MiniRuntimeError(f"{n!r} has no memory location")
            case Field(base=b, field=f, arrow=arrow):
                if arrow:
                    p = self.eval_expr(b, frame, quantvals)
                    if p is None:
                        raise MiniRuntimeError(f"null pointer in {f!r} access")
                    oid, off = p
                    rec = b.ty.pointee.name
                else:
                    oid, off, _ = self.resolve_place(b, frame, quantvals)
                    rec = b.ty.name
                foff, fty = tp.field_offset(rec, f)
                return self._checked(oid, off + foff, tp.sizeof(fty))
            case Index(base=b, index=ie):
                i = self.eval_expr(ie, frame, quantvals)
                if isinstance(b.ty, PtrType):
                    p = self.eval_expr(b, frame, quantvals)
                    if p is None:
                        raise MiniRuntimeError("null pointer indexed")
                    oid, off = p
                    es = tp.sizeof(b.ty.pointee)
                    return self._checked(oid, off + i * es, es)
                oid, off, _ = self.resolve_place(b, frame, quantvals)
                if not 0 <= i < b.ty.size:
                    raise MiniRuntimeError(
                        f"index {i} out of bounds for array of {b.ty.size}")
                es = tp.sizeof(b.ty.elem)
                return oid, off + i * es, es
            case Deref(ptr=pe):
                p = self.eval_expr(pe, frame, quantvals)
                if p is None:
                    raise MiniRuntimeError("null pointer dereferenced")
                oid, off = p
                return self._checked(oid, off, tp.sizeof(pe.ty.pointee))
        raise MiniRuntimeError(f"not a place: {lv!r}")

    def _checked(self, oid: int, off: int, length: int) -> tuple[int, int, int]:
        obj = self.state.objects[oid]
        if off < 0 or off + length > obj.size:
            raise MiniRuntimeError(
                f"access [{off}, {off + length}) outside object {obj.name!r} "
                f"of {obj.size} cells")
        return oid, off, length

    def store(self, lv: Expr, value, frame: Frame):
        if isinstance(lv, Var):
            n = lv.name
            if frame is not None and n in frame.regs:
                frame.regs[n] = value
                return
        oid, off, length = self.resolve_place(lv, frame)
        if length != 1:
            raise MiniRuntimeError("only scalar cells can be assigned")
        self.state.objects[oid].cells[off] = value

    # -- expressions ------------------------------------------------------------

    def eval_expr(self, e: Expr, frame: Frame | None,
                  quantvals: dict | None = None):
        match e:
            case IntLit(value=v):
                return v
            case NullLit():
                return None
            case Var(name=n):
                if quantvals is not None and n in quantvals:
                    return quantvals[n]
                if frame is not None:
                    if n in frame.regs:
                        return frame.regs[n]
                    if n in frame.mem:
                        return self._load(frame.mem[n], 0)
                if n in self.state.globals:
                    oid = self.state.globals[n]
                    if self.state.objects[oid].size != 1:
                        raise MiniRuntimeError(f"{n!r} is not a scalar")
                    return self._load(oid, 0)
                if n in self.tp.constants:
                    return self.tp.constants[n]
                if n in self.tp.enum_literals:
                    return self.tp.enum_literals[n][1]
                raise MiniRuntimeError(f"unknown name {n!r}")
            case Unary(op=op, operand=x):
                v = self.eval_expr(x, frame, quantvals)
                return -v if op == "-" else (0 if v != 0 else 1)
            case Binary(op=op, lhs=l, rhs=r):
                return self._binop(op, l, r, frame, quantvals)
            case AddrOf(lvalue=lv):
                oid, off, _ = self.resolve_place(lv, frame, quantvals)
                return (oid, off)
            case Field() | Index() | Deref():
                oid, off, length = self.resolve_place(e, frame, quantvals)
                if length != 1:
                    raise MiniRuntimeError("cannot load a non-scalar value")
                return self._load(oid, off)
        raise MiniRuntimeError(f"cannot evaluate {e!r}")

    def _load(self, oid: int, off: int):
        return self.state.objects[oid].cells[off]

    def _binop(self, op, l, r, frame, quantvals):
        if op == "&&":
            if self.eval_expr(l, frame, quantvals) == 0:
                return 0
            return 1 if self.eval_expr(r, frame, quantvals) != 0 else 0
        if op == "||":
            if self.eval_expr(l, frame, quantvals) != 0:
                return 1
            return 1 if self.eval_expr(r, frame, quantvals) != 0 else 0
        a = self.eval_expr(l, frame, quantvals)
        b = self.eval_expr(r, frame, quantvals)
        match op:
            case "+": return a + b
            case "-": return a - b
            case "*": return a * b
            case "/" | "%":
                if b == 0:
                    raise MiniRuntimeError("division by zero")
                q = abs(a) // abs(b)
                if (a < 0) != (b < 0):
                    q = -q
                return q if op == "/" else a - q * b
            case "==": return 1 if a == b else 0
            case "!=": return 1 if a != b else 0
            case "<": return 1 if a < b else 0
            case "<=": return 1 if a <= b else 0
            case ">": return 1 if a > b else 0
            case ">=": return 1 if a >= b else 0
        raise MiniRuntimeError(f"unknown operator {op!r}")

    # -- predicates ----------------------------------------------------------

    def eval_locterm(self, t: LocTerm, frame, quantvals) -> ConcreteRegion:
        tp = self.tp
        match t:
            case LocAddrOf(lvalue=lv):
                oid, off, length = self.resolve_place(lv, frame, quantvals)
                return ConcreteRegion(oid, off, length)
            case LocRange(ptr=pe, lo=loe, hi=hie):
                p = self.eval_expr(pe, frame, quantvals)
                if p is None:
                    raise EvalError("null pointer as range base")
                lo = self.eval_expr(loe, frame, quantvals)
                hi = self.eval_expr(hie, frame, quantvals)
                if lo > hi:
                    raise EvalError(f"range ({lo} .. {hi}) is empty")
                oid, off = p
                es = tp.sizeof(pe.ty.pointee)
                region = ConcreteRegion(oid, off + lo * es, (hi - lo + 1) * es)
                obj = self.state.objects[oid]
                if region.offset < 0 or region.offset + region.length > obj.size:
                    raise EvalError(
                        f"range [{lo} .. {hi}] leaves object {obj.name!r}")
                return region
            case LocWritten() | LocRead():
                raise EvalError("meta-variable was not instantiated")
        raise EvalError(f"cannot evaluate location term {t!r}")

    def eval_predicate(self, pred: Predicate, frame: Frame | None = None) -> PredResult:
        try:
            ok, witness = self._eval_pred(pred, frame, {})
            return PredResult(ok, None if ok else witness)
        except (EvalError, MiniRuntimeError) as ex:
            return PredResult(False, None, reason=str(ex))

    def _eval_pred(self, p: Predicate, frame, quantvals) -> tuple[bool, dict | None]:
        match p:
            case Forall(var=v, lo=loe, hi=hie, body=b):
                if loe is None or hie is None:
                    raise EvalError(f"unbounded quantifier over {v!r}")
                lo = self.eval_expr(loe, frame, quantvals)
                hi = self.eval_expr(hie, frame, quantvals)
                for value in range(lo, hi):
                    ok, w = self._eval_pred(b, frame, {**quantvals, v: value})
                    if not ok:
                        return False, {v: value, **(w or {})}
                return True, None
            case Implies(lhs=l, rhs=r):
                ok, _ = self._eval_pred(l, frame, quantvals)
                if not ok:
                    return True, None
                return self._eval_pred(r, frame, quantvals)
            case PAnd(lhs=l, rhs=r):
                ok, w = self._eval_pred(l, frame, quantvals)
                if not ok:
                    return False, w
                return self._eval_pred(r, frame, quantvals)
            case POr(lhs=l, rhs=r):
                ok, _ = self._eval_pred(l, frame, quantvals)
                if ok:
                    return True, None
                return self._eval_pred(r, frame, quantvals)
            case PNot(operand=x):
                ok, _ = self._eval_pred(x, frame, quantvals)
                return not ok, None
            case Compare(op=op, lhs=l, rhs=r):
                a = self.eval_expr(l, frame, quantvals)
                b = self.eval_expr(r, frame, quantvals)
                match op:
                    case "==": ok = a == b
                    case "!=": ok = a != b
                    case "<": ok = a < b
                    case "<=": ok = a <= b
                    case ">": ok = a > b
                    case ">=": ok = a >= b
                    case _: raise EvalError(f"unknown comparison {op!r}")
                return ok, None
            case BoolAtom(expr=e):
                return self.eval_expr(e, frame, quantvals) != 0, None
            case Separated(lhs=a, rhs=b):
                ra = self.eval_locterm(a, frame, quantvals)
                rb = self.eval_locterm(b, frame, quantvals)
                return not ra.overlaps(rb), None
        raise EvalError(f"cannot evaluate predicate {p!r}")


def eval_predicate(pred: Predicate, state_or_interp, frame: Frame | None = None) -> PredResult:
    """Evaluate a meta-variable-free predicate in a memory state."""
    if isinstance(state_or_interp, Interp):
        return state_or_interp.eval_predicate(pred, frame)
    raise TypeError("eval_predicate needs the interpreter carrying the state")
