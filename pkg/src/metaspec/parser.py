"""Recursive-descent parser for mini-C translation units.

Produces a `Program` with source locations populated and `/*@ ... */`
annotation blocks preserved as raw spans (meta blocks, function contracts,
in-body assertions). Local declarations are hoisted into the enclosing
function's `locals` table; initializers become ordinary statements, so the
statement set stays Assign/If/While/Call/Return/Block.
"""
from __future__ import annotations

from .ast import (
    AddrOf, ArrayType, Assign, Binary, Block, Call, CHAR, ConstDef, Deref,
    EnumRef, EnumType, Expr, Field, FunctionDef, GlobalDecl, If, Index, INT,
    IntLit, NullLit, Program, PtrType, RawSpan, RecordRef, RecordType, Return,
    SourceLoc, Stmt, TypeRef, Unary, Var, While, assign_stmt_paths, is_lvalue,
)
from .errors import ParseError
from .lexer import Token, TokenStream, tokenize

_TYPE_KEYWORDS = {"int", "char", "enum", "struct"}
_KEYWORDS = _TYPE_KEYWORDS | {
    "void", "const", "if", "else", "while", "for", "return", "NULL",
}


# ---------------------------------------------------------------------------
# Annotation-mode parse trees that cannot appear in programs. The spec
# language parser lowers these into Predicate nodes.
# ---------------------------------------------------------------------------

class AnnotHole(Expr):
    pass


class ForallHole(AnnotHole):
    def __init__(self, var: str, body: Expr, line: int = 0):
        super().__init__(line=line)
        self.var = var
        self.body = body


class SeparatedHole(AnnotHole):
    def __init__(self, lhs, rhs, line: int = 0):
        super().__init__(line=line)
        self.lhs = lhs
        self.rhs = rhs


class ChainHole(AnnotHole):
    """Chained comparison `a <= b < c` (annotation language only)."""

    def __init__(self, operands: list[Expr], ops: list[str], line: int = 0):
        super().__init__(line=line)
        self.operands = operands
        self.ops = ops


class LocHole(AnnotHole):
    """Location term argument of \\separated."""

    def __init__(self, kind: str, line: int = 0, lvalue=None, ptr=None, lo=None, hi=None):
        super().__init__(line=line)
        self.kind = kind  # 'written' | 'read' | 'addrof' | 'range'
        self.lvalue = lvalue
        self.ptr = ptr
        self.lo = lo
        self.hi = hi


class ExprParser:
    """Expression grammar. `annot=True` enables the annotation extensions:
    `==>`, quantifiers, `\\separated`, and `lo <= x < hi` chains."""

    def __init__(self, ts: TokenStream, annot: bool = False):
        self.ts = ts
        self.annot = annot

    def parse_pred_expr(self) -> Expr:
        ts = self.ts
        if ts.at("BSKW", "\\forall"):
            line = ts.advance().line
            ts.expect("NAME", "int")
            var = ts.expect("NAME").value
            ts.expect("OP", ";")
            body = self.parse_pred_expr()
            return ForallHole(var, body, line=line)
        return self._implies()

    def _implies(self) -> Expr:
        lhs = self._or()
        if self.annot and self.ts.at_op("==>"):
            line = self.ts.advance().line
            rhs = self.parse_pred_expr()  # right associative
            return Binary("==>", lhs, rhs, line=line)
        return lhs

    def _or(self) -> Expr:
        e = self._and()
        while self.ts.at_op("||"):
            line = self.ts.advance().line
            e = Binary("||", e, self._and(), line=line)
        return e

    def _and(self) -> Expr:
        e = self._equality()
        while self.ts.at_op("&&"):
            line = self.ts.advance().line
            e = Binary("&&", e, self._equality(), line=line)
        return e

    def _equality(self) -> Expr:
        e = self._relational()
        if self.ts.at_op("==", "!="):
            op = self.ts.advance()
            return Binary(op.value, e, self._relational(), line=op.line)
        return e

    def _relational(self) -> Expr:
        e = self._additive()
        if not self.ts.at_op("<", "<=", ">", ">="):
            return e
        operands = [e]
        ops = []
        while self.ts.at_op("<", "<=", ">", ">="):
            ops.append(self.ts.advance().value)
            operands.append(self._additive())
        if len(ops) == 1:
            return Binary(ops[0], operands[0], operands[1], line=operands[0].line)
        if not self.annot or any(o not in ("<", "<=") for o in ops):
            self.ts.fail("comparison chains are only allowed as lo <= x < hi in annotations")
        return ChainHole(operands, ops, line=operands[0].line)

    def _additive(self) -> Expr:
        e = self._multiplicative()
        while self.ts.at_op("+", "-"):
            op = self.ts.advance()
            e = Binary(op.value, e, self._multiplicative(), line=op.line)
        return e

    def _multiplicative(self) -> Expr:
        e = self._unary()
        while self.ts.at_op("*", "/", "%"):
            op = self.ts.advance()
            e = Binary(op.value, e, self._unary(), line=op.line)
        return e

    def _unary(self) -> Expr:
        ts = self.ts
        if ts.at_op("-", "!"):
            op = ts.advance()
            return Unary(op.value, self._unary(), line=op.line)
        if ts.at_op("&"):
            op = ts.advance()
            lv = self._unary()
            if not is_lvalue(lv):
                ts.fail("'&' requires an lvalue operand")
            return AddrOf(lv, line=op.line)
        if ts.at_op("*"):
            op = ts.advance()
            return Deref(self._unary(), line=op.line)
        return self._postfix()

    def _postfix(self) -> Expr:
        e = self._primary()
        ts = self.ts
        while True:
            if ts.at_op("["):
                line = ts.advance().line
                idx = self.parse_expr()
                ts.expect("OP", "]")
                e = Index(e, idx, line=line)
            elif ts.at_op("."):
                line = ts.advance().line
                name = ts.expect("NAME").value
                e = Field(e, name, arrow=False, line=line)
            elif ts.at_op("->"):
                line = ts.advance().line
                name = ts.expect("NAME").value
                e = Field(e, name, arrow=True, line=line)
            else:
                return e

    def _primary(self) -> Expr:
        ts = self.ts
        t = ts.cur
        if t.kind == "INT":
            ts.advance()
            return IntLit(int(t.value), line=t.line)
        if ts.at("NAME", "NULL"):
            ts.advance()
            return NullLit(line=t.line)
        if t.kind == "NAME":
            if t.value in _KEYWORDS:
                ts.fail(f"unexpected keyword {t.value!r} in expression")
            ts.advance()
            return Var(t.value, line=t.line)
        if ts.at_op("("):
            ts.advance()
            e = self.parse_pred_expr() if self.annot else self.parse_expr()
            ts.expect("OP", ")")
            return e
        if self.annot and ts.at("BSKW", "\\separated"):
            line = ts.advance().line
            ts.expect("OP", "(")
            lhs = self._locterm()
            ts.expect("OP", ",")
            rhs = self._locterm()
            ts.expect("OP", ")")
            return SeparatedHole(lhs, rhs, line=line)
        ts.fail("expected expression")

    def _locterm(self) -> LocHole:
        ts = self.ts
        t = ts.cur
        if ts.at("BSKW", "\\written"):
            ts.advance()
            return LocHole("written", line=t.line)
        if ts.at("BSKW", "\\read"):
            ts.advance()
            return LocHole("read", line=t.line)
        if ts.at_op("&"):
            ts.advance()
            lv = self._postfix()
            if not is_lvalue(lv):
                ts.fail("'&' requires an lvalue operand")
            return LocHole("addrof", line=t.line, lvalue=lv)
        base = self._postfix()
        if ts.at_op("+"):
            ts.advance()
            ts.expect("OP", "(")
            lo = self.parse_expr()
            ts.expect("OP", "..")
            hi = self.parse_expr()
            ts.expect("OP", ")")
            return LocHole("range", line=t.line, ptr=base, lo=lo, hi=hi)
        ts.fail("location term must be &lvalue, ptr + (lo .. hi), \\written or \\read")

    def parse_expr(self) -> Expr:
        return self._or()


# ---------------------------------------------------------------------------
# Program parser
# ---------------------------------------------------------------------------

class _ProgramParser:
    def __init__(self, text: str, file: str):
        self.file = file
        self.ts = TokenStream(tokenize(text, file), file)
        self.ep = ExprParser(self.ts, annot=False)
        self.prog = Program()
        self.pending_contracts: list[RawSpan] = []
        # (function name, stmt object, side, span); resolved to paths later.
        self.raw_asserts: list[tuple[str, Stmt, str, RawSpan]] = []
        self.cur_fn: FunctionDef | None = None

    # -- helpers ----------------------------------------------------------

    def loc(self, tok: Token) -> SourceLoc:
        return SourceLoc(self.file, tok.line)

    def classify_span(self, span: RawSpan) -> str:
        toks = tokenize(span.text, self.file, base_line=span.line,
                        capture_annotations=False)
        if not toks or toks[0].kind == "EOF":
            raise ParseError("empty annotation block", self.file, span.line, 1)
        head = toks[0].value
        if head in ("meta", "requires", "ensures", "assert"):
            return head
        raise ParseError(f"unrecognized annotation clause {head!r}",
                         self.file, toks[0].line, toks[0].col)

    # -- types ------------------------------------------------------------

    def at_type(self) -> bool:
        return self.ts.cur.kind == "NAME" and self.ts.cur.value in _TYPE_KEYWORDS

    def parse_base_type(self) -> TypeRef:
        ts = self.ts
        t = ts.expect("NAME")
        if t.value == "int":
            base = INT
        elif t.value == "char":
            base = CHAR
        elif t.value == "enum":
            base = EnumRef(ts.expect("NAME").value)
        elif t.value == "struct":
            base = RecordRef(ts.expect("NAME").value)
        else:
            ts.fail(f"expected a type, found {t.value!r}")
        while ts.at_op("*"):
            ts.advance()
            base = PtrType(base)
        return base

    def parse_array_suffix(self, base: TypeRef) -> TypeRef:
        dims = []
        while self.ts.at_op("["):
            self.ts.advance()
            dims.append(self.ep.parse_expr())
            self.ts.expect("OP", "]")
        for size in reversed(dims):
            base = ArrayType(base, size)
        return base

    # -- top level ---------------------------------------------------------

    def parse(self) -> Program:
        ts = self.ts
        while not ts.at("EOF"):
            if ts.cur.kind == "ANNOT":
                tok = ts.advance()
                span = RawSpan(tok.value, self.file, tok.line)
                kind = self.classify_span(span)
                if kind == "meta":
                    self.prog.meta_spans.append(span)
                elif kind in ("requires", "ensures"):
                    self.pending_contracts.append(span)
                else:
                    raise ParseError("assert annotation outside a function body",
                                     self.file, tok.line, tok.col)
                continue
            if ts.at_name("enum") and ts.peek(2).value == "{":
                self.parse_enum()
            elif ts.at_name("struct") and ts.peek(2).value == "{":
                self.parse_record()
            elif ts.at_name("const"):
                self.parse_const()
            elif ts.at_name("void") or self.at_type():
                self.parse_global_or_function()
            else:
                ts.fail("expected a declaration")
        if self.pending_contracts:
            span = self.pending_contracts[0]
            raise ParseError("contract block not followed by a function definition",
                             self.file, span.line, 1)
        for fn in self.prog.functions:
            assign_stmt_paths(fn, self.file)
        for fname, stmt, side, span in self.raw_asserts:
            self.prog.assert_spans.append((fname, stmt.loc.stmt_index, side, span))
        return self.prog

    def parse_enum(self):
        tok = self.ts.expect("NAME", "enum")
        name = self.ts.expect("NAME").value
        self.ts.expect("OP", "{")
        lits = [self.ts.expect("NAME").value]
        while self.ts.accept("OP", ","):
            lits.append(self.ts.expect("NAME").value)
        self.ts.expect("OP", "}")
        self.ts.expect("OP", ";")
        self.prog.enums.append(EnumType(name, lits, loc=self.loc(tok)))

    def parse_record(self):
        tok = self.ts.expect("NAME", "struct")
        name = self.ts.expect("NAME").value
        self.ts.expect("OP", "{")
        fields = []
        while not self.ts.at_op("}"):
            fty = self.parse_base_type()
            fname = self.ts.expect("NAME").value
            fty = self.parse_array_suffix(fty)
            self.ts.expect("OP", ";")
            fields.append((fname, fty))
        self.ts.expect("OP", "}")
        self.ts.expect("OP", ";")
        self.prog.records.append(RecordType(name, fields, loc=self.loc(tok)))

    def parse_const(self):
        tok = self.ts.expect("NAME", "const")
        self.ts.expect("NAME", "int")
        name = self.ts.expect("NAME").value
        self.ts.expect("OP", "=")
        value = self.ep.parse_expr()
        self.ts.expect("OP", ";")
        self.prog.constants.append(ConstDef(name, value, loc=self.loc(tok)))

    def parse_global_or_function(self):
        ts = self.ts
        tok = ts.cur
        if ts.at_name("void"):
            ts.advance()
            if ts.at_op("*"):
                ts.fail("void pointers are not supported")
            rtype = None
        else:
            rtype = self.parse_base_type()
        name = ts.expect("NAME").value
        if ts.at_op("("):
            self.parse_function_rest(name, rtype, tok)
            return
        if rtype is None:
            ts.fail("void is only valid as a function return type")
        if self.pending_contracts:
            raise ParseError("contract block not followed by a function definition",
                             self.file, self.pending_contracts[0].line, 1)
        gtype = self.parse_array_suffix(rtype)
        init = None
        if ts.accept("OP", "="):
            init = self.ep.parse_expr()
        ts.expect("OP", ";")
        self.prog.globals.append(GlobalDecl(name, gtype, init, loc=self.loc(tok)))

    def parse_function_rest(self, name: str, rtype: TypeRef | None, tok: Token):
        ts = self.ts
        ts.expect("OP", "(")
        params: list[tuple[str, TypeRef]] = []
        if ts.at_name("void") and ts.peek().value == ")":
            ts.advance()
        elif not ts.at_op(")"):
            while True:
                pty = self.parse_base_type()
                pname = ts.expect("NAME").value
                params.append((pname, pty))
                if not ts.accept("OP", ","):
                    break
        ts.expect("OP", ")")
        fn = FunctionDef(name, params, rtype, loc=self.loc(tok))
        if ts.accept("OP", ";"):
            fn.is_declared_only = True
            if self.pending_contracts:
                raise ParseError("contract block on a declaration without body",
                                 self.file, self.pending_contracts[0].line, 1)
        else:
            self.cur_fn = fn
            fn.body = self.parse_block()
            self.cur_fn = None
        for span in self.pending_contracts:
            self.prog.contract_spans.append((name, span))
        self.pending_contracts = []
        self.prog.functions.append(fn)

    # -- statements ---------------------------------------------------------

    def declare_local(self, name: str, ty: TypeRef, tok: Token):
        fn = self.cur_fn
        taken = {n for n, _ in fn.params} | {n for n, _ in fn.locals}
        if name in taken:
            raise ParseError(f"duplicate local {name!r}", self.file, tok.line, tok.col)
        fn.locals.append((name, ty))

    def parse_block(self) -> Block:
        tok = self.ts.expect("OP", "{")
        stmts: list[Stmt] = []
        pending: list[RawSpan] = []
        while not self.ts.at_op("}"):
            if self.ts.cur.kind == "ANNOT":
                atok = self.ts.advance()
                span = RawSpan(atok.value, self.file, atok.line)
                if self.classify_span(span) != "assert":
                    raise ParseError("only assert annotations may appear in a body",
                                     self.file, atok.line, atok.col)
                pending.append(span)
                continue
            before = len(stmts)
            self.parse_stmt_into(stmts)
            if pending and len(stmts) > before:
                for span in pending:
                    self.raw_asserts.append((self.cur_fn.name, stmts[before], "before", span))
                pending = []
        if pending:
            if not stmts:
                raise ParseError("assertion in an empty block cannot be anchored",
                                 self.file, pending[0].line, 1)
            for span in pending:
                self.raw_asserts.append((self.cur_fn.name, stmts[-1], "after", span))
        self.ts.expect("OP", "}")
        return Block(stmts, loc=self.loc(tok))

    def parse_stmt_into(self, out: list[Stmt]):
        ts = self.ts
        tok = ts.cur
        if ts.at_op("{"):
            out.append(self.parse_block())
        elif ts.at_name("if"):
            ts.advance()
            ts.expect("OP", "(")
            cond = self.ep.parse_expr()
            ts.expect("OP", ")")
            then = self.parse_branch()
            els = None
            if ts.accept("NAME", "else"):
                els = self.parse_branch()
            out.append(If(cond, then, els, loc=self.loc(tok)))
        elif ts.at_name("while"):
            ts.advance()
            ts.expect("OP", "(")
            cond = self.ep.parse_expr()
            ts.expect("OP", ")")
            body = self.parse_branch()
            out.append(While(cond, body, loc=self.loc(tok)))
        elif ts.at_name("for"):
            self.parse_for(out, tok)
        elif ts.at_name("return"):
            ts.advance()
            value = None
            if not ts.at_op(";"):
                value = self.ep.parse_expr()
            ts.expect("OP", ";")
            out.append(Return(value, loc=self.loc(tok)))
        elif self.at_type():
            self.parse_local_decl(out)
        elif ts.at_name("void", "const", "else"):
            ts.fail(f"unexpected {ts.cur.value!r}")
        else:
            out.append(self.parse_assign_or_call())

    def parse_branch(self) -> Block:
        """If/While arms are always represented as blocks."""
        if self.ts.at_op("{"):
            return self.parse_block()
        tok = self.ts.cur
        stmts: list[Stmt] = []
        self.parse_stmt_into(stmts)
        return Block(stmts, loc=SourceLoc(self.file, tok.line))

    def parse_local_decl(self, out: list[Stmt]):
        tok = self.ts.cur
        ty = self.parse_base_type()
        name = self.ts.expect("NAME").value
        ty = self.parse_array_suffix(ty)
        self.declare_local(name, ty, tok)
        if self.ts.accept("OP", "="):
            if isinstance(ty, ArrayType):
                self.ts.fail("array initializers are not supported")
            out.append(self.parse_rhs_into_stmt(Var(name, line=tok.line), tok))
        self.ts.expect("OP", ";")

    def parse_rhs_into_stmt(self, dest: Expr, tok: Token) -> Stmt:
        """Parse the right side of `lv =`: either a call or an expression."""
        ts = self.ts
        if ts.cur.kind == "NAME" and ts.cur.value not in _KEYWORDS and ts.peek().value == "(":
            callee = ts.advance().value
            args = self.parse_args()
            return Call(dest, callee, args, loc=self.loc(tok))
        return Assign(dest, self.ep.parse_expr(), loc=self.loc(tok))

    def parse_args(self) -> list[Expr]:
        self.ts.expect("OP", "(")
        args = []
        if not self.ts.at_op(")"):
            args.append(self.ep.parse_expr())
            while self.ts.accept("OP", ","):
                args.append(self.ep.parse_expr())
        self.ts.expect("OP", ")")
        return args

    def parse_assign_or_call(self) -> Stmt:
        ts = self.ts
        tok = ts.cur
        if ts.cur.kind == "NAME" and ts.cur.value not in _KEYWORDS and ts.peek().value == "(":
            callee = ts.advance().value
            args = self.parse_args()
            ts.expect("OP", ";")
            return Call(None, callee, args, loc=self.loc(tok))
        lv = self.ep._unary()
        if not is_lvalue(lv):
            ts.fail("statement must be an assignment or a call")
        ts.expect("OP", "=")
        stmt = self.parse_rhs_into_stmt(lv, tok)
        ts.expect("OP", ";")
        return stmt

    def parse_for(self, out: list[Stmt], tok: Token):
        """`for (init; cond; step) body` desugars to init + while."""
        ts = self.ts
        ts.advance()
        ts.expect("OP", "(")
        if not ts.at_op(";"):
            if self.at_type():
                ftok = ts.cur
                ty = self.parse_base_type()
                name = ts.expect("NAME").value
                self.declare_local(name, ty, ftok)
                ts.expect("OP", "=")
                out.append(self.parse_rhs_into_stmt(Var(name, line=ftok.line), ftok))
            else:
                out.append(self._simple_stmt())
        ts.expect("OP", ";")
        cond = self.ep.parse_expr()
        ts.expect("OP", ";")
        step: list[Stmt] = []
        if not ts.at_op(")"):
            step.append(self._simple_stmt())
        ts.expect("OP", ")")
        body = self.parse_branch()
        body.stmts.extend(step)
        out.append(While(cond, body, loc=self.loc(tok)))

    def _simple_stmt(self) -> Stmt:
        ts = self.ts
        tok = ts.cur
        if ts.cur.kind == "NAME" and ts.cur.value not in _KEYWORDS and ts.peek().value == "(":
            callee = ts.advance().value
            return Call(None, callee, self.parse_args(), loc=self.loc(tok))
        lv = self.ep._unary()
        if not is_lvalue(lv):
            ts.fail("expected an assignment or call")
        ts.expect("OP", "=")
        return self.parse_rhs_into_stmt(lv, tok)


def parse_program(source_text: str, file: str = "<input>") -> Program:
    """Parse a mini-C translation unit. Raises ParseError on malformed input."""
    return _ProgramParser(source_text, file).parse()
