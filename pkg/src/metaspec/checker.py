"""Dynamic checking of annotated programs plus the exhaustive oracle.

`run_with_checks` interprets a driver over an instrumented program,
evaluating contracts at entry/exit and point assertions at their anchors,
collecting every verdict (execution continues past failures).

`naive_oracle` realizes each context's definition directly, without any
pruning: invariants at entry/exit (weak) and additionally after every
executed statement (strong); writing/reading predicates before every
memory access, substituted on the fly. It shares only the interpreter and
predicate evaluator with the instrumented path, not the transform.

Verdict rows carry a state digest restricted to the cells the predicate
can observe (its footprint paths); pruned and oracle runs agree exactly on
the set of failing (meta, digest) pairs, which is what `diff_reports`
compares.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field as dc_field

from .ast import (
    Assign, ArrayType, Call, Deref, Expr, Field, FunctionDef, Index, Program,
    RecordRef, Return, Var,
)
from .errors import IncomparableRuns, MiniRuntimeError, TypecheckFailure
from .interp import Frame, Hooks, Interp, PredResult
from .normalize import NormalizedProgram, normalize_program
from .spec_ast import (
    ContextKind, Forall, Implies, LocAddrOf, LocRead, LocWritten,
    MetaProperty, PAnd, PNot, POr, Predicate, Separated,
)
from .transform import AnnotatedProgram, TaggedPred, emit_with_linemap, read_paths
from .typecheck import TypedProgram, typecheck
from .wellformed import resolve_targets


@dataclass
class Verdict:
    meta: str
    function: str
    line: int
    stmt_index: tuple[int, ...]
    phase: str  # pre | post | before | after
    verdict: str  # pass | fail
    witness: dict[str, int] | None
    digest: str
    reason: str | None = None

    def to_json(self) -> dict:
        row = {
            "meta": self.meta, "function": self.function, "line": self.line,
            "stmt_index": list(self.stmt_index), "phase": self.phase,
            "verdict": self.verdict, "witness": self.witness, "digest": self.digest,
        }
        if self.reason is not None:
            row["reason"] = self.reason
        return row


@dataclass
class CheckReport:
    driver: str
    seed: int
    verdicts: list[Verdict] = dc_field(default_factory=list)
    runtime_error: str | None = None

    def failing_pairs(self) -> set[tuple[str, str]]:
        return {(v.meta, v.digest) for v in self.verdicts if v.verdict == "fail"}

    def failing_metas(self) -> set[str]:
        return {v.meta for v in self.verdicts if v.verdict == "fail"}

    def to_json(self) -> dict:
        return {
            "driver": self.driver, "seed": self.seed,
            "runtime_error": self.runtime_error,
            "verdicts": [v.to_json() for v in self.verdicts],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


@dataclass
class EquivalenceResult:
    equivalent: bool
    only_pruned: set[tuple[str, str]] = dc_field(default_factory=set)
    only_oracle: set[tuple[str, str]] = dc_field(default_factory=set)

    def describe(self) -> str:
        if self.equivalent:
            return "Equivalent"
        lines = ["Discrepancies:"]
        for meta, digest in sorted(self.only_pruned):
            lines.append(f"  only pruned run fails: meta {meta} in state {digest}")
        for meta, digest in sorted(self.only_oracle):
            lines.append(f"  only oracle run fails: meta {meta} in state {digest}")
        return "\n".join(lines)


def diff_reports(pruned: CheckReport, oracle: CheckReport) -> EquivalenceResult:
    """Equivalent iff both runs fail for the same (meta, state digest) pairs."""
    if pruned.driver != oracle.driver or pruned.seed != oracle.seed:
        raise IncomparableRuns(
            f"cannot compare runs of ({pruned.driver!r}, seed {pruned.seed}) "
            f"and ({oracle.driver!r}, seed {oracle.seed})")
    a, b = pruned.failing_pairs(), oracle.failing_pairs()
    return EquivalenceResult(a == b, a - b, b - a)


# ---------------------------------------------------------------------------
# Footprint-restricted state digests
# ---------------------------------------------------------------------------

def _pattern_offsets(tp: TypedProgram, root_ty, steps) -> set[int]:
    locs = [(0, root_ty)]
    for step in steps:
        new = []
        for off, ty in locs:
            if step == ("index",) and isinstance(ty, ArrayType):
                es = tp.sizeof(ty.elem)
                for i in range(ty.size):
                    new.append((off + i * es, ty.elem))
            elif step[0] == "field" and isinstance(ty, RecordRef):
                foff, fty = tp.field_offset(ty.name, step[1])
                new.append((off + foff, fty))
            else:
                new.append((off, ty))
        locs = new
    cells: set[int] = set()
    for off, ty in locs:
        cells.update(range(off, off + tp.sizeof(ty)))
    return cells


def digest_cells(tp: TypedProgram, pred: Predicate) -> tuple[tuple[str, tuple[int, ...]], ...]:
    """Cells (per global, sorted offsets) observable by the predicate:
    its read paths with array indices widened to the whole array."""
    acc: dict[str, set[int]] = {}
    for root, steps in read_paths(pred, tp):
        acc.setdefault(root, set()).update(
            _pattern_offsets(tp, tp.globals[root], steps))
    return tuple(sorted((g, tuple(sorted(offs))) for g, offs in acc.items()))


def state_digest(interp: Interp, cells) -> str:
    items = []
    for gname, offsets in cells:
        obj = interp.state.global_object(gname)
        for off in offsets:
            items.append((gname, off, interp.canon_value(obj.cells[off])))
    payload = repr(sorted(items, key=lambda it: (it[0], it[1])))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def full_digest(interp: Interp) -> str:
    """Order-independent hash of every global object's cells (used by the
    normalization equivalence suite)."""
    items = []
    for name in sorted(interp.state.globals):
        obj = interp.state.global_object(name)
        items.append((name, tuple(interp.canon_value(c) for c in obj.cells)))
    return hashlib.sha256(repr(items).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Instrumented run
# ---------------------------------------------------------------------------

class _InstrumentedHooks(Hooks):
    def __init__(self, ap: AnnotatedProgram, report: CheckReport, stmt_lines, fn_lines):
        self.ap = ap
        self.report = report
        self.stmt_lines = stmt_lines
        self.fn_lines = fn_lines
        self._cells_cache: dict[int, tuple] = {}

    def _cells(self, tagged: TaggedPred, tp):
        key = id(tagged)
        if key not in self._cells_cache:
            self._cells_cache[key] = digest_cells(tp, tagged.pred)
        return self._cells_cache[key]

    def _eval(self, interp, frame, tagged: TaggedPred, phase, line, path):
        res: PredResult = interp.eval_predicate(tagged.pred, frame)
        self.report.verdicts.append(Verdict(
            meta=tagged.meta_name, function=frame.function, line=line,
            stmt_index=path, phase=phase,
            verdict="pass" if res.ok else "fail",
            witness=res.witness, reason=res.reason,
            digest=state_digest(interp, self._cells(tagged, interp.tp)),
        ))

    def on_entry(self, interp, frame):
        req, _ = self.ap.contracts.get(frame.function, ((), ()))
        line = self.fn_lines.get(frame.function, 0)
        for t in req:
            self._eval(interp, frame, t, "pre", line, ())

    def on_exit(self, interp, frame):
        _, ens = self.ap.contracts.get(frame.function, ((), ()))
        line = self.fn_lines.get(frame.function, 0)
        for t in ens:
            self._eval(interp, frame, t, "post", line, ())

    def before_stmt(self, interp, frame, stmt):
        self._point(interp, frame, stmt, "before")

    def after_stmt(self, interp, frame, stmt):
        self._point(interp, frame, stmt, "after")

    def _point(self, interp, frame, stmt, side):
        path = stmt.loc.stmt_index
        preds = self.ap.point_asserts.get((frame.function, path, side))
        if not preds:
            return
        line = self.stmt_lines.get((frame.function, path), stmt.loc.line)
        for t in preds:
            self._eval(interp, frame, t, side, line, path)


def run_with_checks(ap: AnnotatedProgram, driver: str, seed: int = 0,
                    stubs=None, max_steps=None) -> CheckReport:
    """Interpret `driver` over the instrumented program, collecting one
    verdict per dynamic assertion evaluation. Report locations refer to the
    emitted annotated rendering."""
    _, stmt_lines, fn_lines = emit_with_linemap(ap)
    report = CheckReport(driver, seed)
    hooks = _InstrumentedHooks(ap, report, stmt_lines, fn_lines)
    kwargs = {"max_steps": max_steps} if max_steps else {}
    interp = Interp(ap.program.tp, stubs=stubs, seed=seed, hooks=hooks, **kwargs)
    try:
        interp.run(driver)
    except MiniRuntimeError as ex:
        report.runtime_error = str(ex)
    return report


# ---------------------------------------------------------------------------
# Naive exhaustive oracle
# ---------------------------------------------------------------------------

def _subst_metavar(pred: Predicate, kind: str, loc) -> Predicate:
    """Independent meta-variable substitution for the oracle."""
    target = LocWritten if kind == "written" else LocRead

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
                return Separated(loc if isinstance(a, target) else a,
                                 loc if isinstance(b, target) else b)
            case _:
                return p

    return sub(pred)


def _is_memory_ref(e: Expr, frame: Frame, interp: Interp) -> bool:
    match e:
        case Var(name=n):
            return n in frame.mem or n in interp.state.globals
        case Field() | Index() | Deref():
            return True
    return False


class _OracleHooks(Hooks):
    def __init__(self, metas, np: NormalizedProgram, report: CheckReport):
        self.report = report
        self.np = np
        self.targets = {m.name: resolve_targets(m.targets, np.program) for m in metas}
        self.cells = {m.name: digest_cells(np.tp, m.predicate) for m in metas}
        self.invariants = [m for m in metas if m.context in
                           (ContextKind.WEAK_INVARIANT, ContextKind.STRONG_INVARIANT)]
        self.strong = [m for m in metas if m.context is ContextKind.STRONG_INVARIANT]
        self.writing = [m for m in metas if m.context is ContextKind.WRITING]
        self.reading = [m for m in metas if m.context is ContextKind.READING]

    def _eval(self, interp, frame, meta: MetaProperty, pred, phase, line, path):
        res = interp.eval_predicate(pred, frame)
        self.report.verdicts.append(Verdict(
            meta=meta.name, function=frame.function, line=line, stmt_index=path,
            phase=phase, verdict="pass" if res.ok else "fail",
            witness=res.witness, reason=res.reason,
            digest=state_digest(interp, self.cells[meta.name]),
        ))

    def _fn_line(self, fname: str) -> int:
        fn = self.np.program.function(fname)
        return fn.loc.line if fn is not None else 0

    def on_entry(self, interp, frame):
        for m in self.invariants:
            if frame.function in self.targets[m.name]:
                self._eval(interp, frame, m, m.predicate, "pre",
                           self._fn_line(frame.function), ())

    def on_exit(self, interp, frame):
        for m in self.invariants:
            if frame.function in self.targets[m.name]:
                self._eval(interp, frame, m, m.predicate, "post",
                           self._fn_line(frame.function), ())

    def before_stmt(self, interp, frame, stmt):
        if not isinstance(stmt, Assign):
            return
        write_lv = stmt.lvalue if _is_memory_ref(stmt.lvalue, frame, interp) else None
        read_lv = stmt.rhs if _is_memory_ref(stmt.rhs, frame, interp) else None
        for m in self.writing:
            if write_lv is not None and frame.function in self.targets[m.name]:
                pred = _subst_metavar(m.predicate, "written", LocAddrOf(write_lv))
                self._eval(interp, frame, m, pred, "before",
                           stmt.loc.line, stmt.loc.stmt_index)
        for m in self.reading:
            if read_lv is not None and frame.function in self.targets[m.name]:
                pred = _subst_metavar(m.predicate, "read", LocAddrOf(read_lv))
                self._eval(interp, frame, m, pred, "before",
                           stmt.loc.line, stmt.loc.stmt_index)

    def after_stmt(self, interp, frame, stmt):
        for m in self.strong:
            if frame.function in self.targets[m.name]:
                self._eval(interp, frame, m, m.predicate, "after",
                           stmt.loc.line, stmt.loc.stmt_index)


def naive_oracle(np: NormalizedProgram, metas: list[MetaProperty], driver: str,
                 seed: int = 0, stubs=None, max_steps=None) -> CheckReport:
    """Unpruned ground truth: every context evaluated at every admissible
    point of its target functions."""
    report = CheckReport(driver, seed)
    hooks = _OracleHooks(metas, np, report)
    kwargs = {"max_steps": max_steps} if max_steps else {}
    interp = Interp(np.tp, stubs=stubs, seed=seed, hooks=hooks, **kwargs)
    try:
        interp.run(driver)
    except MiniRuntimeError as ex:
        report.runtime_error = str(ex)
    return report


# ---------------------------------------------------------------------------
# Plain runs and stubs
# ---------------------------------------------------------------------------

def plain_run(tp: TypedProgram, driver: str, seed: int = 0, stubs=None,
              max_steps=None):
    """Uninstrumented execution; returns (final state full digest, trace,
    runtime error or None)."""
    kwargs = {"max_steps": max_steps} if max_steps else {}
    interp = Interp(tp, stubs=stubs, seed=seed, **kwargs)
    error = None
    try:
        interp.run(driver)
    except MiniRuntimeError as ex:
        error = str(ex)
    return full_digest(interp), list(interp.trace), error


def load_stubs(main: Program, stub_text: str, file: str = "<stubs>"):
    """Parse and typecheck stub bodies for the declared-only functions of
    `main`. Returns the registry run_with_checks/naive_oracle accept."""
    from .parser import parse_program

    stub_prog = parse_program(stub_text, file)
    if stub_prog.enums or stub_prog.records or stub_prog.globals or stub_prog.constants:
        raise TypecheckFailure(["stub files may only define functions"])
    declared = {f.name: f for f in main.functions if f.body is None}
    merged_functions: list[FunctionDef] = []
    stub_names = set()
    for f in stub_prog.functions:
        if f.body is None:
            raise TypecheckFailure([f"stub {f.name!r} has no body"])
        target = declared.get(f.name)
        if target is None:
            raise TypecheckFailure(
                [f"stub {f.name!r} does not match a declared-only function"])
        if target.params != f.params or target.return_type != f.return_type:
            raise TypecheckFailure([f"stub {f.name!r} signature mismatch"])
        stub_names.add(f.name)
    for f in main.functions:
        replacement = next((s for s in stub_prog.functions if s.name == f.name), None)
        merged_functions.append(replacement if replacement is not None else f)
    merged = Program(enums=main.enums, records=main.records,
                     constants=main.constants, globals=main.globals,
                     functions=merged_functions)
    ntp = normalize_program(typecheck(merged))
    return {name: (ntp.program.function(name), ntp.tp.fn_info[name])
            for name in stub_names}
