"""IMP-ERA: lexer, parser, checks, desugaring and control-flow graph.

The language is a small Modula-flavoured fragment.  Keywords are case
insensitive, identifiers are not.  Comments are written (* ... *).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .ops import BUILTIN_FUNCTIONS, INT_MAX

KEYWORDS = {
    "module", "var", "type", "begin", "end", "if", "then", "elsif", "else",
    "loop", "exit", "while", "do", "case", "of", "return", "read", "write",
    "procedure", "function", "and", "or", "xor", "not", "div", "mod", "true",
    "false", "array", "record", "integer", "cardinal", "boolean", "char",
    "inc", "dec", "error",
}


# ---------------------------------------------------------------- source

@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return "%d:%d" % (self.line, self.col)


NOSPAN = Span(0, 0)


@dataclass(frozen=True)
class SourceProgram:
    path: str
    text: str

    @classmethod
    def read(cls, path) -> "SourceProgram":
        return cls(str(path), Path(path).read_text(encoding="utf-8"))


class ParseError(Exception):
    """Syntax or static-semantic errors, each with a position."""

    def __init__(self, errors: list[tuple[Span, str]], path: str = "<input>"):
        self.errors = errors
        self.path = path
        super().__init__("\n".join(self.lines()))

    def lines(self) -> list[str]:
        return ["%s:%d:%d: %s" % (self.path, sp.line, sp.col, msg) for sp, msg in self.errors]


# ---------------------------------------------------------------- types

@dataclass(frozen=True)
class IntType:
    lo: int | None = None
    hi: int | None = None


@dataclass(frozen=True)
class BoolType:
    pass


@dataclass(frozen=True)
class CharType:
    pass


@dataclass(frozen=True)
class ArrayType:
    index: object       # a subrange IntType or a NamedType
    elem: object


@dataclass(frozen=True)
class RecordType:
    fields: tuple       # of (name, type)


@dataclass(frozen=True)
class NamedType:
    name: str


@dataclass(frozen=True)
class Keyword:
    """A predefined type written by keyword (integer, cardinal, ...)."""

    name: str


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class Num:
    value: int
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class CharLit:
    value: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class ArrayLit:
    items: tuple
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Name:
    id: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Index:
    base: object
    index: object
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Field:
    base: object
    name: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str             # "neg" or "not"
    operand: object
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    span: Span = field(default=NOSPAN, compare=False)


# ---------------------------------------------------------------- statements

@dataclass(frozen=True)
class Assign:
    target: object
    expr: object
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Read:
    target: object
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Write:
    expr: object
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class If:
    cond: object
    then: tuple
    else_: tuple
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Loop:
    body: tuple
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Exit:
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class While:
    cond: object
    body: tuple
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Case:
    expr: object
    arms: tuple         # of (labels tuple, body tuple)
    else_: tuple | None
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Return:
    expr: object | None
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Inc:
    target: object
    amount: object | None
    down: bool = False
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Error:
    span: Span = field(default=NOSPAN, compare=False)


# ---------------------------------------------------------------- declarations

@dataclass(frozen=True)
class VarDecl:
    names: tuple
    type: object
    init: object | None = None
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class TypeDecl:
    name: str
    type: object
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class FuncDecl:
    name: str
    params: tuple       # of (name, type)
    result: object | None
    decls: tuple
    body: tuple
    keyword: str = "procedure"
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Ast:
    name: str | None
    decls: tuple
    body: tuple
    span: Span = field(default=NOSPAN, compare=False)


# ---------------------------------------------------------------- lexer

@dataclass(frozen=True)
class Token:
    kind: str           # id, kw, num, char, op, eof
    text: str
    span: Span


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<char>'[^'\n]'|"[^"\n]")
  | (?P<op>:=|<=|>=|<>|\.\.|≤|≥|≠|[-+*=#<>()\[\]{},;:.|~&^])
""", re.VERBOSE)


def tokenize(text: str, path: str = "<input>") -> list[Token]:
    toks: list[Token] = []
    pos, line, col = 0, 1, 1
    n = len(text)

    def advance(s: str):
        nonlocal line, col
        for ch in s:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1

    while pos < n:
        if text.startswith("(*", pos):
            depth, start, sp = 0, pos, Span(line, col)
            while pos < n:
                if text.startswith("(*", pos):
                    depth += 1
                    pos += 2
                elif text.startswith("*)", pos):
                    depth -= 1
                    pos += 2
                    if depth == 0:
                        break
                else:
                    pos += 1
            if depth:
                raise ParseError([(sp, "unterminated comment")], path)
            advance(text[start:pos])
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError([(Span(line, col), "unknown token %r" % text[pos])], path)
        kind, s = m.lastgroup, m.group()
        sp = Span(line, col)
        if kind == "id" and s.lower() in KEYWORDS:
            toks.append(Token("kw", s.lower(), sp))
        elif kind == "char":
            toks.append(Token("char", s[1], sp))
        elif kind == "op":
            toks.append(Token("op", {"≤": "<=", "≥": ">=", "≠": "#", "<>": "#",
                                     "~": "not", "&": "and"}.get(s, s), sp))
        elif kind != "ws":
            toks.append(Token(kind, s, sp))
        advance(s)
        pos = m.end()
    toks.append(Token("eof", "", Span(line, col)))
    return toks


# ---------------------------------------------------------------- parser

_REL = {"=", "#", "<", "<=", ">", ">="}
_ADD = {"+": "+", "-": "-", "or": "or", "xor": "xor"}
_MUL = {"*": "*", "div": "div", "mod": "mod", "and": "and"}


class _Parser:
    def __init__(self, toks: list[Token], path: str):
        self.toks = toks
        self.i = 0
        self.path = path

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "op") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error("expected %r, found %s" % (text, self.describe(self.tok)))
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        if self.tok.kind != "id":
            self.error("expected identifier, found %s" % self.describe(self.tok))
        t = self.tok
        self.i += 1
        return t

    def describe(self, t: Token) -> str:
        return "end of input" if t.kind == "eof" else repr(t.text)

    def error(self, msg: str, sp: Span | None = None):
        raise ParseError([(sp or self.tok.span, msg)], self.path)

    # -- program

    def program(self) -> Ast:
        sp = self.tok.span
        name = None
        if self.accept("module"):
            name = self.ident().text
            self.expect(";")
        decls = self.decls()
        if self.accept("begin"):
            body = self.stmts()
            self.expect("end")
            if self.tok.kind == "id":
                self.i += 1
            self.accept(".")
        else:
            body = self.stmts()
            if self.accept("end"):
                if self.tok.kind == "id":
                    self.i += 1
            self.accept(".")
        if self.tok.kind != "eof":
            self.error("unexpected %s" % self.describe(self.tok))
        return Ast(name, tuple(decls), tuple(body), sp)

    def decls(self) -> list:
        out = []
        while True:
            if self.accept("var"):
                while self.tok.kind == "id" and self.peek().text in (",", ":"):
                    out.append(self.var_decl())
            elif self.accept("type"):
                while self.tok.kind == "id" and self.peek().text == "=":
                    sp = self.tok.span
                    name = self.ident().text
                    self.expect("=")
                    out.append(TypeDecl(name, self.type_(), sp))
                    self.expect(";")
            elif self.at("procedure") or self.at("function"):
                out.append(self.func_decl())
            else:
                return out

    def var_decl(self) -> VarDecl:
        sp = self.tok.span
        names = [self.ident().text]
        while self.accept(","):
            names.append(self.ident().text)
        self.expect(":")
        ty = self.type_()
        init = self.expr() if self.accept("=") else None
        self.expect(";")
        return VarDecl(tuple(names), ty, init, sp)

    def type_(self):
        t = self.tok
        if t.kind == "kw" and t.text in ("integer", "cardinal", "boolean", "char"):
            self.i += 1
            return Keyword(t.text)
        if self.accept("["):
            lo = self.const_int()
            self.expect("..")
            hi = self.const_int()
            self.expect("]")
            return IntType(lo, hi)
        if self.accept("array"):
            if self.at("["):
                index = self.type_()
            else:
                index = NamedType(self.ident().text)
            self.expect("of")
            return ArrayType(index, self.type_())
        if self.accept("record"):
            fields = []
            while self.tok.kind == "id":
                names = [self.ident().text]
                while self.accept(","):
                    names.append(self.ident().text)
                self.expect(":")
                ty = self.type_()
                fields.extend((n, ty) for n in names)
                if not self.accept(";"):
                    break
            self.expect("end")
            return RecordType(tuple(fields))
        if t.kind == "id":
            self.i += 1
            return NamedType(t.text)
        self.error("expected a type, found %s" % self.describe(t))

    def const_int(self) -> int:
        neg = self.accept("-")
        if self.tok.kind != "num":
            self.error("expected an integer constant")
        v = int(self.tok.text)
        self.i += 1
        return -v if neg else v

    def func_decl(self) -> FuncDecl:
        sp = self.tok.span
        keyword = self.tok.text
        self.i += 1
        name = self.ident().text
        params = []
        self.expect("(")
        if not self.at(")"):
            while True:
                names = [self.ident().text]
                while self.accept(","):
                    names.append(self.ident().text)
                self.expect(":")
                ty = self.type_()
                params.extend((n, ty) for n in names)
                if not self.accept(";"):
                    break
        self.expect(")")
        result = self.type_() if self.accept(":") else None
        self.expect(";")
        decls = self.decls()
        self.expect("begin")
        body = self.stmts()
        self.expect("end")
        end_name = self.ident()
        if end_name.text != name:
            self.error("block %s closed by %s" % (name, end_name.text), end_name.span)
        self.expect(";")
        return FuncDecl(name, tuple(params), result, tuple(decls), tuple(body), keyword, sp)

    # -- statements

    def stmts(self) -> list:
        out = []
        s = self.stmt()
        if s is not None:
            out.append(s)
        while self.accept(";"):
            s = self.stmt()
            if s is not None:
                out.append(s)
        return out

    def stmt(self):
        t = self.tok
        sp = t.span
        if t.kind == "id":
            target = self.designator()
            if not self.at(":="):
                self.error("expected ':=', found %s" % self.describe(self.tok))
            self.i += 1
            return Assign(target, self.expr(), sp)
        if t.kind != "kw":
            return None
        k = t.text
        if k == "if":
            self.i += 1
            return self.if_rest(sp)
        if k == "loop":
            self.i += 1
            body = self.stmts()
            self.expect("end")
            return Loop(tuple(body), sp)
        if k == "while":
            self.i += 1
            cond = self.expr()
            self.expect("do")
            body = self.stmts()
            self.expect("end")
            return While(cond, tuple(body), sp)
        if k == "case":
            self.i += 1
            return self.case_rest(sp)
        if k == "exit":
            self.i += 1
            return Exit(sp)
        if k == "error":
            self.i += 1
            return Error(sp)
        if k == "return":
            self.i += 1
            if self.at(";") or self.at("end") or self.at("else") or self.at("elsif") or self.at("|"):
                return Return(None, sp)
            return Return(self.expr(), sp)
        if k == "read":
            self.i += 1
            self.expect("(")
            target = self.designator()
            self.expect(")")
            return Read(target, sp)
        if k == "write":
            self.i += 1
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return Write(e, sp)
        if k in ("inc", "dec"):
            self.i += 1
            self.expect("(")
            target = self.designator()
            amount = self.expr() if self.accept(",") else None
            self.expect(")")
            return Inc(target, amount, k == "dec", sp)
        return None

    def if_rest(self, sp: Span) -> If:
        cond = self.expr()
        self.expect("then")
        then = self.stmts()
        if self.at("elsif"):
            sp2 = self.tok.span
            self.i += 1
            return If(cond, tuple(then), (self.if_rest(sp2),), sp)
        else_ = self.stmts() if self.accept("else") else []
        self.expect("end")
        return If(cond, tuple(then), tuple(else_), sp)

    def case_rest(self, sp: Span) -> Case:
        e = self.expr()
        self.expect("of")
        arms = []
        self.accept("|")
        while not (self.at("else") or self.at("end")):
            labels = self.labels()
            while self.accept(","):
                labels += self.labels()
            self.expect(":")
            arms.append((tuple(labels), tuple(self.stmts())))
            if not self.accept("|"):
                break
        else_ = tuple(self.stmts()) if self.accept("else") else None
        self.expect("end")
        return Case(e, tuple(arms), else_, sp)

    def labels(self) -> list:
        """One case label, or an integer range lo..hi expanded to its members."""
        first = self.label()
        if not self.accept(".."):
            return [first]
        t = self.tok
        hi = self.const_int()
        if not isinstance(first, Num) or hi < first.value:
            self.error("bad label range", t.span)
        return [first] + [Num(v, t.span) for v in range(first.value + 1, hi + 1)]

    def label(self):
        t = self.tok
        if t.kind == "char":
            self.i += 1
            return CharLit(t.text, t.span)
        if self.at("true") or self.at("false"):
            self.i += 1
            return BoolLit(t.text == "true", t.span)
        return Num(self.const_int(), t.span)

    # -- expressions

    def expr(self):
        left = self.simple()
        t = self.tok
        if t.kind == "op" and t.text in _REL:
            self.i += 1
            return Binary(t.text, left, self.simple(), t.span)
        return left

    def simple(self):
        t = self.tok
        if self.accept("-"):
            if self.tok.kind == "num":
                left = Num(-int(self.tok.text), t.span)
                self.i += 1
                left = self.term_rest(left)
            else:
                left = Unary("neg", self.term(), t.span)
        else:
            self.accept("+")
            left = self.term()
        while self.tok.kind in ("op", "kw") and self.tok.text in _ADD:
            op = self.tok
            self.i += 1
            left = Binary(_ADD[op.text], left, self.term(), op.span)
        return left

    def term(self):
        return self.term_rest(self.factor())

    def term_rest(self, left):
        while self.tok.kind in ("op", "kw") and self.tok.text in _MUL:
            op = self.tok
            self.i += 1
            left = Binary(_MUL[op.text], left, self.factor(), op.span)
        return left

    def factor(self):
        t = self.tok
        sp = t.span
        if t.kind == "num":
            self.i += 1
            return Num(int(t.text), sp)
        if t.kind == "char":
            self.i += 1
            return CharLit(t.text, sp)
        if self.accept("true"):
            return BoolLit(True, sp)
        if self.accept("false"):
            return BoolLit(False, sp)
        if self.accept("not"):
            return Unary("not", self.factor(), sp)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("{"):
            items = [] if self.at("}") else [self.expr()]
            while self.accept(","):
                items.append(self.expr())
            self.expect("}")
            return ArrayLit(tuple(items), sp)
        if t.kind == "id":
            if self.peek().text == "(" and self.peek().kind == "op":
                self.i += 2
                args = [] if self.at(")") else [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                name = t.text.lower() if t.text.lower() in BUILTIN_FUNCTIONS else t.text
                return Call(name, tuple(args), sp)
            return self.designator()
        self.error("unexpected %s in expression" % self.describe(t))

    def designator(self):
        t = self.ident()
        e = Name(t.text, t.span)
        while True:
            if self.at("["):
                sp = self.tok.span
                self.i += 1
                e = Index(e, self.expr(), sp)
                while self.accept(","):
                    e = Index(e, self.expr(), sp)
                self.expect("]")
            elif self.at(".") and self.peek().kind == "id":
                self.i += 1
                e = Field(e, self.ident().text, e.span)
            else:
                return e


def parse(source: SourceProgram | str) -> Ast:
    """Parse and check a program; raises ParseError with positions."""
    if isinstance(source, str):
        source = SourceProgram("<input>", source)
    ast = _Parser(tokenize(source.text, source.path), source.path).program()
    errors = check(ast)
    if errors:
        raise ParseError(errors, source.path)
    return ast


# ---------------------------------------------------------------- checks

@dataclass
class Scope:
    """Names visible in one unit; prefix qualifies function locals."""

    prefix: str
    vars: dict          # plain name -> resolved type
    function: "FuncDecl | None" = None

    def qualify(self, name: str) -> str:
        return self.prefix + name


def resolve_type(ty, types: dict):
    if isinstance(ty, Keyword):
        return {"integer": IntType(), "cardinal": IntType(0, INT_MAX),
                "boolean": BoolType(), "char": CharType()}[ty.name]
    if isinstance(ty, NamedType):
        if ty.name not in types:
            raise KeyError(ty.name)
        return types[ty.name]
    if isinstance(ty, ArrayType):
        return ArrayType(resolve_type(ty.index, types), resolve_type(ty.elem, types))
    if isinstance(ty, RecordType):
        return RecordType(tuple((n, resolve_type(t, types)) for n, t in ty.fields))
    return ty


def bounds(ty) -> tuple[int, int] | None:
    """Index bounds of an array type."""
    if isinstance(ty, ArrayType) and isinstance(ty.index, IntType) and ty.index.lo is not None:
        return ty.index.lo, ty.index.hi
    return None


def check(ast: Ast) -> list[tuple[Span, str]]:
    errors: list[tuple[Span, str]] = []
    types: dict = {}
    gvars: dict = {}
    funcs: dict = {}

    def declare(decls, vars_: dict):
        for d in decls:
            try:
                if isinstance(d, TypeDecl):
                    types[d.name] = resolve_type(d.type, types)
                elif isinstance(d, VarDecl):
                    ty = resolve_type(d.type, types)
                    for n in d.names:
                        vars_[n] = ty
            except KeyError as e:
                errors.append((d.span, "undeclared type %s" % e.args[0]))

    declare(ast.decls, gvars)
    for d in ast.decls:
        if isinstance(d, FuncDecl):
            if d.name in funcs or d.name in BUILTIN_FUNCTIONS:
                errors.append((d.span, "function %s declared twice" % d.name))
            funcs[d.name] = d
    for d in ast.decls:
        if isinstance(d, VarDecl) and d.init is not None:
            _check_expr(d.init, Scope("", gvars), funcs, errors, set())
    calls: dict[str, set] = {}
    for f in funcs.values():
        local: dict = {}
        for n, t in f.params:
            try:
                local[n] = resolve_type(t, types)
            except KeyError as e:
                errors.append((f.span, "undeclared type %s" % e.args[0]))
        declare(f.decls, local)
        called: set = set()
        _check_body(f.body, Scope(f.name + ".", local, f), funcs, errors, called, 0)
        calls[f.name] = called
    _check_body(ast.body, Scope("", gvars), funcs, errors, set(), 0)
    # Recursion, direct or mutual.
    state: dict[str, int] = {}

    def visit(n: str) -> bool:
        if state.get(n) == 1:
            return True
        if state.get(n) == 2:
            return False
        state[n] = 1
        cyc = any(visit(m) for m in sorted(calls.get(n, ())))
        state[n] = 2
        return cyc

    for n in sorted(funcs):
        state.clear()
        if visit(n):
            errors.append((funcs[n].span, "recursive function %s" % n))
    return errors


def _check_body(body, scope: Scope, funcs, errors, called, loops: int):
    for s in body:
        _check_stmt(s, scope, funcs, errors, called, loops)


def _check_stmt(s, scope: Scope, funcs, errors, called, loops: int):
    ce = lambda e: _check_expr(e, scope, funcs, errors, called)
    inside_fn = scope.function is not None
    if isinstance(s, (Assign, Read, Inc)):
        ce(s.target)
        if isinstance(s, Assign):
            ce(s.expr)
        if isinstance(s, Inc) and s.amount is not None:
            ce(s.amount)
        if isinstance(s, Read) and inside_fn:
            errors.append((s.span, "read inside function %s" % scope.function.name))
    elif isinstance(s, Write):
        ce(s.expr)
        if inside_fn:
            errors.append((s.span, "write inside function %s" % scope.function.name))
    elif isinstance(s, If):
        ce(s.cond)
        _check_body(s.then, scope, funcs, errors, called, loops)
        _check_body(s.else_, scope, funcs, errors, called, loops)
    elif isinstance(s, While):
        ce(s.cond)
        _check_body(s.body, scope, funcs, errors, called, loops + 1)
    elif isinstance(s, Loop):
        _check_body(s.body, scope, funcs, errors, called, loops + 1)
    elif isinstance(s, Case):
        ce(s.expr)
        for _, body in s.arms:
            _check_body(body, scope, funcs, errors, called, loops)
        if s.else_ is not None:
            _check_body(s.else_, scope, funcs, errors, called, loops)
    elif isinstance(s, Exit):
        if loops == 0:
            errors.append((s.span, "exit outside loop"))
    elif isinstance(s, Return):
        if not inside_fn:
            errors.append((s.span, "return outside function"))
        else:
            if s.expr is not None:
                ce(s.expr)
            if (s.expr is None) != (scope.function.result is None):
                errors.append((s.span, "return value does not match %s" % scope.function.name))


def _check_expr(e, scope: Scope, funcs, errors, called):
    if isinstance(e, Name):
        if e.id not in scope.vars:
            errors.append((e.span, "undeclared identifier %s" % e.id))
    elif isinstance(e, Index):
        _check_expr(e.base, scope, funcs, errors, called)
        _check_expr(e.index, scope, funcs, errors, called)
    elif isinstance(e, Field):
        _check_expr(e.base, scope, funcs, errors, called)
    elif isinstance(e, Unary):
        _check_expr(e.operand, scope, funcs, errors, called)
    elif isinstance(e, Binary):
        _check_expr(e.left, scope, funcs, errors, called)
        _check_expr(e.right, scope, funcs, errors, called)
    elif isinstance(e, ArrayLit):
        for x in e.items:
            _check_expr(x, scope, funcs, errors, called)
    elif isinstance(e, Call):
        if e.name in BUILTIN_FUNCTIONS:
            if len(e.args) != BUILTIN_FUNCTIONS[e.name]:
                errors.append((e.span, "%s takes %d argument" % (e.name, BUILTIN_FUNCTIONS[e.name])))
        elif e.name not in funcs:
            errors.append((e.span, "undeclared function %s" % e.name))
        else:
            f = funcs[e.name]
            called.add(e.name)
            if f.result is None:
                errors.append((e.span, "procedure %s has no result" % e.name))
            if len(e.args) != len(f.params):
                errors.append((e.span, "%s expects %d arguments" % (e.name, len(f.params))))
        for x in e.args:
            _check_expr(x, scope, funcs, errors, called)


# ---------------------------------------------------------------- core form

_sid_counter = [0]


def _sid() -> int:
    _sid_counter[0] += 1
    return _sid_counter[0]


@dataclass(eq=False)
class CStmt:
    span: Span
    sid: int = field(default_factory=_sid)


@dataclass(eq=False)
class CAssign(CStmt):
    target: object = None
    expr: object = None


@dataclass(eq=False)
class CRead(CStmt):
    target: object = None


@dataclass(eq=False)
class CWrite(CStmt):
    expr: object = None


@dataclass(eq=False)
class CIf(CStmt):
    cond: object = None
    then: list = field(default_factory=list)
    else_: list = field(default_factory=list)
    origin: str = "if"      # if, while or case


@dataclass(eq=False)
class CLoop(CStmt):
    body: list = field(default_factory=list)


@dataclass(eq=False)
class CExit(CStmt):
    pass


@dataclass(eq=False)
class CReturn(CStmt):
    expr: object = None


@dataclass(eq=False)
class CError(CStmt):
    pass


@dataclass
class CoreFunction:
    name: str
    params: list            # plain names
    locals: list            # plain names of local variables
    types: dict             # plain name -> resolved type
    has_result: bool
    body: list
    decl: FuncDecl

    @property
    def scope(self) -> Scope:
        return Scope(self.name + ".", self.types, self.decl)


@dataclass
class CoreProgram:
    name: str | None
    types: dict             # global name -> resolved type
    inits: dict             # global name -> initialiser expression
    functions: dict         # name -> CoreFunction
    body: list
    ast: Ast
    path: str = "<input>"
    type_decls: tuple = ()

    @property
    def scope(self) -> Scope:
        return Scope("", self.types)


def desugar(ast: Ast, path: str = "<input>") -> CoreProgram:
    """Lower while, case and inc/dec to the core statements.

    Statement ids count from 1 within each program, so loading the same text
    twice yields the same ids; statements made later draw fresh ids above
    every id handed out so far.
    """
    saved = _sid_counter[0]
    _sid_counter[0] = 0
    try:
        return _desugar(ast, path)
    finally:
        _sid_counter[0] = max(saved, _sid_counter[0])


def _desugar(ast: Ast, path: str) -> CoreProgram:
    errors = []
    types: dict = {}
    gtypes: dict = {}
    inits: dict = {}
    for d in ast.decls:
        if isinstance(d, TypeDecl):
            types[d.name] = resolve_type(d.type, types)
        elif isinstance(d, VarDecl):
            for n in d.names:
                gtypes[n] = resolve_type(d.type, types)
                if d.init is not None:
                    inits[n] = d.init
    functions = {}
    for d in ast.decls:
        if isinstance(d, FuncDecl):
            local = {n: resolve_type(t, types) for n, t in d.params}
            names = []
            for v in d.decls:
                if isinstance(v, TypeDecl):
                    types[v.name] = resolve_type(v.type, types)
                elif isinstance(v, VarDecl):
                    for n in v.names:
                        local[n] = resolve_type(v.type, types)
                        names.append(n)
            body = _lower(d.body, errors, 0, True)
            functions[d.name] = CoreFunction(d.name, [n for n, _ in d.params], names,
                                             local, d.result is not None, body, d)
    body = _lower(ast.body, errors, 0, False)
    if errors:
        raise ParseError(errors, path)
    return CoreProgram(ast.name, gtypes, inits, functions, body, ast, path,
                       tuple(d for d in ast.decls if isinstance(d, TypeDecl)))


def _lower(body, errors, loops: int, in_fn: bool) -> list:
    out = []
    for s in body:
        out.extend(_lower_stmt(s, errors, loops, in_fn))
    return out


def _lower_stmt(s, errors, loops: int, in_fn: bool) -> list:
    sp = s.span
    if isinstance(s, Assign):
        return [CAssign(sp, target=s.target, expr=s.expr)]
    if isinstance(s, Inc):
        amount = s.amount if s.amount is not None else Num(1, sp)
        return [CAssign(sp, target=s.target,
                        expr=Binary("-" if s.down else "+", s.target, amount, sp))]
    if isinstance(s, Read):
        return [CRead(sp, target=s.target)]
    if isinstance(s, Write):
        return [CWrite(sp, expr=s.expr)]
    if isinstance(s, If):
        return [CIf(sp, cond=s.cond, then=_lower(s.then, errors, loops, in_fn),
                    else_=_lower(s.else_, errors, loops, in_fn))]
    if isinstance(s, Loop):
        return [CLoop(sp, body=_lower(s.body, errors, loops + 1, in_fn))]
    if isinstance(s, While):
        inner = CIf(sp, cond=s.cond, then=_lower(s.body, errors, loops + 1, in_fn),
                    else_=[CExit(sp)], origin="while")
        return [CLoop(sp, body=[inner])]
    if isinstance(s, Case):
        rest = _lower(s.else_, errors, loops, in_fn) if s.else_ is not None else []
        for labels, body in reversed(s.arms):
            cond = None
            for lab in labels:
                test = Binary("=", s.expr, lab, lab.span)
                cond = test if cond is None else Binary("or", cond, test, lab.span)
            arm_span = labels[0].span
            rest = [CIf(arm_span, cond=cond, then=_lower(body, errors, loops, in_fn),
                        else_=rest, origin="case")]
        return rest
    if isinstance(s, Exit):
        if loops == 0:
            errors.append((sp, "exit outside loop"))
        return [CExit(sp)]
    if isinstance(s, Return):
        if not in_fn:
            errors.append((sp, "return outside function"))
        return [CReturn(sp, expr=s.expr)]
    if isinstance(s, Error):
        return [CError(sp)]
    raise TypeError(s)


def load(source: SourceProgram | str | Path) -> CoreProgram:
    """Read, parse and desugar a program."""
    if isinstance(source, Path):
        source = SourceProgram.read(source)
    elif isinstance(source, str):
        source = SourceProgram("<input>", source)
    return desugar(parse(source), source.path)


# ---------------------------------------------------------------- control flow

@dataclass(frozen=True)
class Point:
    id: int
    span: Span
    kind: str           # entry, stmt, branch, head, exit
    unit: str           # "" for the main body, else the function name


@dataclass
class Cfg:
    points: list
    edges: list                 # (src, dst, label)
    pre: dict                   # sid -> point id
    post: dict                  # sid -> point id
    heads: set                  # loop-head point ids
    branch: dict                # if sid -> (then entry, then exit, else entry, else exit)
    entries: dict               # unit -> entry point
    exits: dict                 # unit -> exit point
    stmts: dict                 # sid -> statement
    loops: dict = field(default_factory=dict)   # loop sid -> head point

    def point_at(self, line: int, col: int | None = None, unit: str | None = None) -> int | None:
        """Pre-point of the statement starting at line (and column)."""
        best = None
        for sid, s in self.stmts.items():
            if s.span.line != line:
                continue
            if unit is not None and self.points[self.pre[sid]].unit != unit:
                continue
            if col is not None and s.span.col != col:
                continue
            if best is None or (s.span.col, sid) < (self.stmts[best].span.col, best):
                best = sid
        if best is None and col is not None:
            return self.point_at(line, None, unit)
        return None if best is None else self.pre[best]


def build_cfg(core: CoreProgram) -> Cfg:
    cfg = Cfg([], [], {}, {}, set(), {}, {}, {}, {})

    def new(span: Span, kind: str, unit: str) -> int:
        p = Point(len(cfg.points), span, kind, unit)
        cfg.points.append(p)
        return p.id

    def seq(body: list, entry: int, unit: str, loop_exit: int | None, fn_exit: int | None) -> int:
        cur = entry
        for s in body:
            cur = stmt(s, cur, unit, loop_exit, fn_exit)
        return cur

    def stmt(s, pre: int, unit: str, loop_exit, fn_exit) -> int:
        cfg.pre[s.sid] = pre
        cfg.stmts[s.sid] = s
        if isinstance(s, CIf):
            te = new(s.span, "branch", unit)
            ee = new(s.span, "branch", unit)
            post = new(s.span, "stmt", unit)
            cfg.edges.append((pre, te, "true"))
            cfg.edges.append((pre, ee, "false"))
            tx = seq(s.then, te, unit, loop_exit, fn_exit)
            ex = seq(s.else_, ee, unit, loop_exit, fn_exit)
            cfg.edges.append((tx, post, "join"))
            cfg.edges.append((ex, post, "join"))
            cfg.branch[s.sid] = (te, tx, ee, ex)
        elif isinstance(s, CLoop):
            head = new(s.span, "head", unit)
            post = new(s.span, "stmt", unit)
            cfg.heads.add(head)
            cfg.loops[s.sid] = head
            cfg.edges.append((pre, head, "enter"))
            end = seq(s.body, head, unit, post, fn_exit)
            cfg.edges.append((end, head, "back"))
        elif isinstance(s, CExit):
            post = new(s.span, "stmt", unit)
            cfg.edges.append((pre, loop_exit, "exit"))
        elif isinstance(s, CReturn):
            post = new(s.span, "stmt", unit)
            cfg.edges.append((pre, fn_exit, "return"))
        elif isinstance(s, CError):
            post = new(s.span, "stmt", unit)
            cfg.edges.append((pre, post, "error"))
        else:
            post = new(s.span, "stmt", unit)
            cfg.edges.append((pre, post, type(s).__name__[1:].lower()))
        cfg.post[s.sid] = post
        return post

    entry = new(core.body[0].span if core.body else Span(1, 1), "entry", "")
    cfg.entries[""] = entry
    cfg.exits[""] = seq(core.body, entry, "", None, None)
    for name in sorted(core.functions):
        f = core.functions[name]
        fe = new(f.decl.span, "entry", name)
        fx = new(f.decl.span, "exit", name)
        cfg.entries[name] = fe
        cfg.exits[name] = fx
        end = seq(f.body, fe, name, None, fx)
        cfg.edges.append((end, fx, "return"))
    return cfg


def walk(body: list) -> Iterator:
    """Pre-order traversal of core statements."""
    for s in body:
        yield s
        if isinstance(s, CIf):
            yield from walk(s.then)
            yield from walk(s.else_)
        elif isinstance(s, CLoop):
            yield from walk(s.body)


# ---------------------------------------------------------------- printing

_BIN = {"+": "+", "-": "-", "*": "*", "div": "DIV", "mod": "MOD", "and": "AND",
        "or": "OR", "xor": "XOR", "=": "=", "#": "#", "<": "<", "<=": "<=",
        ">": ">", ">=": ">="}
_EPREC = {"=": 1, "#": 1, "<": 1, "<=": 1, ">": 1, ">=": 1,
          "+": 2, "-": 2, "or": 2, "xor": 2, "*": 3, "div": 3, "mod": 3, "and": 3}


def expr_str(e, prec: int = 0) -> str:
    if isinstance(e, Num):
        s = str(e.value)
        return "(%s)" % s if e.value < 0 and prec > 1 else s
    if isinstance(e, BoolLit):
        return "TRUE" if e.value else "FALSE"
    if isinstance(e, CharLit):
        return "'%s'" % e.value if e.value != "'" else '"\'"'
    if isinstance(e, ArrayLit):
        return "{" + ", ".join(expr_str(x) for x in e.items) + "}"
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Index):
        return "%s[%s]" % (expr_str(e.base, 9), expr_str(e.index))
    if isinstance(e, Field):
        return "%s.%s" % (expr_str(e.base, 9), e.name)
    if isinstance(e, Unary):
        if e.op == "neg":
            s = "-" + expr_str(e.operand, 3)
            return "(%s)" % s if prec > 1 else s
        return "NOT " + expr_str(e.operand, 4)
    if isinstance(e, Binary):
        p = _EPREC[e.op]
        if p == 1:
            s = "%s %s %s" % (expr_str(e.left, 2), _BIN[e.op], expr_str(e.right, 2))
        else:
            s = "%s %s %s" % (expr_str(e.left, p), _BIN[e.op], expr_str(e.right, p + 1))
        return "(%s)" % s if p < prec else s
    if isinstance(e, Call):
        return "%s(%s)" % (e.name, ", ".join(expr_str(a) for a in e.args))
    raise TypeError(e)


def type_str(t) -> str:
    if isinstance(t, Keyword):
        return t.name.upper()
    if isinstance(t, NamedType):
        return t.name
    if isinstance(t, IntType):
        if t.lo is None:
            return "INTEGER"
        return "[%d..%d]" % (t.lo, t.hi)
    if isinstance(t, BoolType):
        return "BOOLEAN"
    if isinstance(t, CharType):
        return "CHAR"
    if isinstance(t, ArrayType):
        return "ARRAY %s OF %s" % (type_str(t.index), type_str(t.elem))
    if isinstance(t, RecordType):
        return "RECORD %s END" % "; ".join("%s: %s" % (n, type_str(ty)) for n, ty in t.fields)
    raise TypeError(t)


def _stmts_str(body, ind: int) -> list[str]:
    lines = []
    for i, s in enumerate(body):
        sub = _stmt_lines(s, ind)
        if i < len(body) - 1:
            sub[-1] += ";"
        lines.extend(sub)
    return lines


def _stmt_lines(s, ind: int) -> list[str]:
    pad = "  " * ind
    if isinstance(s, (Assign, CAssign)):
        return [pad + "%s := %s" % (expr_str(s.target), expr_str(s.expr))]
    if isinstance(s, Inc):
        kw = "DEC" if s.down else "INC"
        extra = "" if s.amount is None else ", " + expr_str(s.amount)
        return [pad + "%s(%s%s)" % (kw, expr_str(s.target), extra)]
    if isinstance(s, (Read, CRead)):
        return [pad + "READ(%s)" % expr_str(s.target)]
    if isinstance(s, (Write, CWrite)):
        return [pad + "WRITE(%s)" % expr_str(s.expr)]
    if isinstance(s, (Exit, CExit)):
        return [pad + "EXIT"]
    if isinstance(s, (Error, CError)):
        return [pad + "ERROR"]
    if isinstance(s, (Return, CReturn)):
        return [pad + ("RETURN" if s.expr is None else "RETURN %s" % expr_str(s.expr))]
    if isinstance(s, (If, CIf)):
        lines = [pad + "IF %s THEN" % expr_str(s.cond)]
        lines += _stmts_str(s.then, ind + 1)
        cur = s
        while len(cur.else_) == 1 and isinstance(cur.else_[0], (If, CIf)):
            cur = cur.else_[0]
            lines.append(pad + "ELSIF %s THEN" % expr_str(cur.cond))
            lines += _stmts_str(cur.then, ind + 1)
        if cur.else_:
            lines.append(pad + "ELSE")
            lines += _stmts_str(cur.else_, ind + 1)
        lines.append(pad + "END")
        return lines
    if isinstance(s, CLoop):
        w = _as_while(s)
        if w is not None:
            cond, body = w
            return ([pad + "WHILE %s DO" % expr_str(cond)] + _stmts_str(body, ind + 1)
                    + [pad + "END"])
        return [pad + "LOOP"] + _stmts_str(s.body, ind + 1) + [pad + "END"]
    if isinstance(s, Loop):
        return [pad + "LOOP"] + _stmts_str(s.body, ind + 1) + [pad + "END"]
    if isinstance(s, While):
        return ([pad + "WHILE %s DO" % expr_str(s.cond)] + _stmts_str(s.body, ind + 1)
                + [pad + "END"])
    if isinstance(s, Case):
        lines = [pad + "CASE %s OF" % expr_str(s.expr)]
        for labels, body in s.arms:
            lines.append(pad + "| %s:" % ", ".join(expr_str(x) for x in labels))
            lines += _stmts_str(body, ind + 1)
        if s.else_ is not None:
            lines.append(pad + "ELSE")
            lines += _stmts_str(s.else_, ind + 1)
        lines.append(pad + "END")
        return lines
    raise TypeError(s)


def _as_while(s: CLoop):
    if len(s.body) == 1 and isinstance(s.body[0], CIf):
        i = s.body[0]
        if len(i.else_) == 1 and isinstance(i.else_[0], CExit) and not _exits_loop(i.then):
            return i.cond, i.then
    return None


def _exits_loop(body) -> bool:
    for s in body:
        if isinstance(s, CExit):
            return True
        if isinstance(s, CIf) and (_exits_loop(s.then) or _exits_loop(s.else_)):
            return True
    return False


def _decl_lines(decls, ind: int) -> list[str]:
    pad = "  " * ind
    lines = []
    for d in decls:
        if isinstance(d, TypeDecl):
            lines.append(pad + "TYPE %s = %s;" % (d.name, type_str(d.type)))
        elif isinstance(d, VarDecl):
            init = "" if d.init is None else " = " + expr_str(d.init)
            lines.append(pad + "VAR %s: %s%s;" % (", ".join(d.names), type_str(d.type), init))
        elif isinstance(d, FuncDecl):
            groups = ", ".join("%s: %s" % (n, type_str(t)) for n, t in d.params)
            groups = "; ".join("%s: %s" % (n, type_str(t)) for n, t in d.params)
            res = "" if d.result is None else ": " + type_str(d.result)
            lines.append(pad + "%s %s(%s)%s;" % (d.keyword.upper(), d.name, groups, res))
            lines += _decl_lines(d.decls, ind + 1)
            lines.append(pad + "BEGIN")
            lines += _stmts_str(d.body, ind + 1)
            lines.append(pad + "END %s;" % d.name)
    return lines


def pretty(ast: Ast) -> str:
    """Source text for an Ast; parse(pretty(a)) == a."""
    lines = []
    if ast.name:
        lines.append("MODULE %s;" % ast.name)
    lines += _decl_lines(ast.decls, 0)
    lines.append("BEGIN")
    lines += _stmts_str(ast.body, 1)
    lines.append("END %s." % ast.name if ast.name else "END.")
    return "\n".join(lines) + "\n"


def pretty_core(core: CoreProgram, decls=None, body=None, functions=None) -> str:
    """Source text for a core program, re-sugaring while loops."""
    ast = core.ast
    decls = list(ast.decls) if decls is None else decls
    lines = []
    if ast.name:
        lines.append("MODULE %s;" % ast.name)
    functions = core.functions if functions is None else functions
    out_decls = []
    for d in decls:
        if isinstance(d, FuncDecl):
            if d.name not in functions:
                continue
            f = functions[d.name]
            out_decls.append(d)
            lines_f = _decl_lines([FuncDecl(d.name, d.params, d.result, d.decls, (), d.keyword)], 0)
            # Replace the empty body with the core one.
            head = lines_f[:-2]
            lines += head + ["BEGIN"] + _stmts_str(f.body, 1) + ["END %s;" % d.name]
        else:
            lines += _decl_lines([d], 0)
    lines.append("BEGIN")
    lines += _stmts_str(core.body if body is None else body, 1)
    lines.append("END %s." % ast.name if ast.name else "END.")
    return "\n".join(lines) + "\n"


def count_statements(body) -> int:
    n = 0
    for s in body:
        n += 1
        if isinstance(s, (CIf, If)):
            n += count_statements(s.then) + count_statements(s.else_)
        elif isinstance(s, (CLoop, Loop, While)):
            n += count_statements(s.body)
        elif isinstance(s, Case):
            n += sum(count_statements(b) for _, b in s.arms)
            n += count_statements(s.else_ or ())
    return n
