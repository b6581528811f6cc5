"""Diagnostics, queries and source-to-source optimisation from analysis
results, with text and JSON emitters."""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

from .eqstate import (Const, EqState, Fun, Omega, Var, class_terms, dump,
                      knows, resolve, term_str)
from .engine import AnalysisResult, EngineConfig, analyze
from .frontend import (ArrayLit, ArrayType, Binary, BoolLit, Call, CAssign, CError,
                       CExit, CharLit, CIf, CLoop, CoreProgram, CRead,
                       CReturn, CWrite, Field, FuncDecl, Index, IntType, Name,
                       Num, ParseError, Span, TypeDecl, Unary, VarDecl,
                       _Parser, count_statements, expr_str, parse,
                       pretty_core, tokenize, walk)
from .ops import BUILTIN_FUNCTIONS
from .transformers import is_artificial, primed, read_names, term_of

KINDS = ("indefinite-value", "eval-error", "inaccessible", "redundant-assignment",
         "unused-definition", "constant", "cheaper-form", "range-check-removable")
PLUS_KINDS = ("indefinite-value", "eval-error")
CALL_COST = 10


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    stage: str
    line: int
    col: int
    detail: str
    unit: str = ""
    replacement: str = ""

    def text(self, path: str) -> str:
        return "%s:%d:%d: [%s/%s] %s" % (path, self.line, self.col, self.kind,
                                         self.stage, self.detail)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "Diagnostic":
        return cls(**d)


def _diag(kind: str, span: Span, detail: str, unit: str = "", replacement: str = "") -> Diagnostic:
    stage = "+" if kind in PLUS_KINDS else "-"
    return Diagnostic(kind, stage, span.line, span.col, detail, unit, replacement)


@dataclass(frozen=True)
class Rewrite:
    line: int
    col: int
    action: str         # remove, replace, unwrap, trap, drop-declaration, keep
    before: str
    after: str
    justification: Diagnostic

    def to_json(self) -> dict:
        d = asdict(self)
        d["justification"] = self.justification.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Rewrite":
        d = dict(d)
        d["justification"] = Diagnostic.from_json(d["justification"])
        return cls(**d)


# ---------------------------------------------------------------- helpers

def visible(unit: str):
    """Accept filter for symbols a user of this unit can write."""
    prefix = unit + "." if unit else ""

    def accept(sym) -> bool:
        if is_artificial(sym):
            return False
        if isinstance(sym, Const) and sym.kind == "array":
            return False
        if isinstance(sym, Var):
            if unit:
                return sym.name.startswith(prefix)
            return "." not in sym.name
        return True

    return accept


def show(t, unit: str = "") -> str:
    """Source-like text of a term, with unit prefixes stripped."""
    return expr_str(term_to_expr(t, unit))


_BINOPS = {"+", "-", "*", "div", "mod", "=", "#", "<", "<=", ">", ">=", "and", "or", "xor"}


def term_to_expr(t, unit: str = ""):
    prefix = unit + "." if unit else ""
    if isinstance(t, Var):
        name = t.name[len(prefix):] if prefix and t.name.startswith(prefix) else t.name
        return Name(name)
    if isinstance(t, Const):
        if t.kind == "int":
            return Num(t.value)
        if t.kind == "bool":
            return BoolLit(t.value)
        if t.kind == "char":
            return CharLit(t.value)
        if t.kind == "array":
            return ArrayLit(tuple(term_to_expr(x, unit) for x in t.value[1]))
        raise ValueError("no literal for %s" % t)
    if isinstance(t, Fun):
        a = t.args
        if t.op == "elm":
            return Index(term_to_expr(a[0], unit), term_to_expr(a[1], unit))
        if t.op == "fld":
            return Field(term_to_expr(a[0], unit), a[1].value)
        if t.op in ("neg", "not"):
            return Unary(t.op, term_to_expr(a[0], unit))
        if t.op in _BINOPS and len(a) == 2:
            return Binary(t.op, term_to_expr(a[0], unit), term_to_expr(a[1], unit))
        return Call(t.op, tuple(term_to_expr(x, unit) for x in a))
    raise ValueError("no expression for %s" % (t,))


def cost(t) -> tuple:
    """(operations, variable occurrences, constants); calls are expensive."""
    if isinstance(t, Fun):
        own = 1 if t.op in _BINOPS or t.op in ("neg", "not", "elm", "fld") \
            or t.op in BUILTIN_FUNCTIONS else CALL_COST
        parts = [cost(a) for a in t.args if not (t.op == "fld" and isinstance(a, Const))]
        return (own + sum(p[0] for p in parts), sum(p[1] for p in parts),
                sum(p[2] for p in parts))
    if isinstance(t, Var):
        return (0, 1, 0)
    return (0, 0, 1)


def _subterms(t):
    yield t
    if isinstance(t, Fun):
        for a in t.args:
            yield from _subterms(a)


def _has_partial_or_call(t) -> bool:
    for x in _subterms(t):
        if isinstance(x, Fun) and (x.op in ("div", "mod", "elm", "val")
                                   or x.op not in _BINOPS | {"neg", "not", "fld"}
                                   and x.op not in BUILTIN_FUNCTIONS):
            return True
    return False


def _is_literal(e) -> bool:
    return isinstance(e, (Num, BoolLit, CharLit)) or (
        isinstance(e, Unary) and e.op == "neg" and isinstance(e.operand, Num))


def _exprs(s) -> list:
    """Top-level expressions of a core statement."""
    if isinstance(s, CAssign):
        return [s.expr]
    if isinstance(s, CWrite):
        return [s.expr]
    if isinstance(s, CIf):
        return [s.cond]
    if isinstance(s, CReturn) and s.expr is not None:
        return [s.expr]
    return []


def _index_nodes(e) -> list:
    out = []
    if isinstance(e, Index):
        out.append(e)
        out += _index_nodes(e.base) + _index_nodes(e.index)
    elif isinstance(e, Field):
        out += _index_nodes(e.base)
    elif isinstance(e, Unary):
        out += _index_nodes(e.operand)
    elif isinstance(e, Binary):
        out += _index_nodes(e.left) + _index_nodes(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            out += _index_nodes(a)
    return out


def _units(core: CoreProgram) -> list[tuple[str, list]]:
    return [("", core.body)] + [(n, core.functions[n].body) for n in sorted(core.functions)]


class _Facts:
    """Per-result evaluation helpers shared by diagnose and optimize."""

    def __init__(self, r: AnalysisResult):
        self.r = r
        self.cfg = r.cfg
        self._eval: dict = {}

    def pre(self, s) -> EqState:
        return self.r.state(self.cfg.pre[s.sid])

    def post(self, s) -> EqState:
        return self.r.state(self.cfg.post[s.sid])

    def evaluate(self, s, e, unit: str):
        """(state, class id) of expression e in the pre-state of s."""
        key = (s.sid, id(e))
        if key not in self._eval:
            st = self.pre(s)
            if st.is_top:
                self._eval[key] = (st, None)
            else:
                st2, t = self.r.evaluate(st, e, unit)
                c = None if st2.kind != "graph" else resolve(st2, t)
                self._eval[key] = (st2, c)
        return self._eval[key]

    def constant(self, s, e, unit: str) -> Const | None:
        st, c = self.evaluate(s, e, unit)
        if c is None:
            return None
        k = st.const_of(c)
        if k is not None and k.kind in ("int", "bool", "char"):
            return k
        return None

    def cheaper(self, s, e, unit: str):
        """Cheapest visible term equal to e, when strictly cheaper."""
        st, c = self.evaluate(s, e, unit)
        if c is None:
            return None
        scope = self.r.scope_of(unit)
        base = cost(term_of(e, scope))
        terms = class_terms(st, 3, visible(unit)).get(c, [])
        best = None
        for t in terms:
            if _has_partial_or_call(t):
                continue
            key = (cost(t), show(t, unit))
            if best is None or key < best[0]:
                best = (key, t)
        if best is not None and best[0][0] < base:
            return best[1]
        return None

    def index_guarded(self, s, node: Index, unit: str) -> bool:
        """Index provably inside the array bounds."""
        st, c = self.evaluate(s, node.index, unit)
        if c is None or st.kind != "graph":
            return False
        scope = self.r.scope_of(unit)
        arr = term_of(node.base, scope)
        if not isinstance(arr, Var) or arr.name not in self.r.types.arrays:
            return False
        lo, hi = self.r.types.arrays[arr.name]
        k = st.const_of(c)
        if k is not None:
            return k.kind == "int" and lo <= k.value <= hi
        ranges = self.r.types.ranges
        low_ok = False
        for form, off in _offset_forms(st, c):
            for r in st.classes[form]:
                if isinstance(r, Var) and r.name in ranges and off >= 0 \
                        and ranges[r.name][0] + off >= lo:
                    low_ok = True
        if not low_ok:
            return False
        false = Const("bool", False)
        for cl, rs in st.classes.items():
            if false not in rs:
                continue
            for r in rs:
                if getattr(r, "op", None) == ">=" and r.args[0] == c:
                    for b in st.classes[r.args[1]]:
                        if isinstance(b, Var) and b.name in ranges and ranges[b.name][1] <= hi + 1:
                            return True
        return False


def _offset_forms(st: EqState, c: int) -> list:
    out = [(c, 0)]
    for r in st.classes[c]:
        if getattr(r, "op", None) == "+":
            for i in (0, 1):
                k = st.const_of(r.args[i])
                if k is not None and k.kind == "int" and st.const_of(r.args[1 - i]) is None:
                    out.append((r.args[1 - i], k.value))
    return out


# ---------------------------------------------------------------- diagnose

def diagnose(r: AnalysisResult) -> list[Diagnostic]:
    """The catalogue of findings for an analysed program."""
    facts = _Facts(r)
    core, cfg = r.program, r.cfg
    out: list[Diagnostic] = []
    # "+" stage, logged during the iterations.
    errors: dict[int, list] = {}
    for n in r.plus:
        s = cfg.stmts[n.sid]
        if n.kind == "eval-error":
            errors.setdefault(n.sid, []).append(n.detail.split(":")[0])
        else:
            out.append(_diag("indefinite-value", s.span,
                             "variable %s might be uninitialized" % n.detail, n.unit))
    for sid, kinds in errors.items():
        s = cfg.stmts[sid]
        unit = cfg.points[cfg.pre[sid]].unit
        out.append(_diag("eval-error", s.span, "error in evaluation of an expression (%s)"
                         % ", ".join(sorted(set(kinds))), unit))
    for unit, body in _units(core):
        if unit and r.state(cfg.entries[unit]).is_top:
            continue
        _diagnose_block(facts, body, unit, out)
    out.extend(_unused_declarations(core))
    return sorted(set(out), key=lambda d: (d.unit != "", d.unit, d.line, d.col, d.kind, d.detail))


def _diagnose_block(facts: _Facts, body: list, unit: str, out: list) -> None:
    r = facts.r
    for s in body:
        pre = facts.pre(s)
        if pre.is_top:
            out.append(_diag("inaccessible", s.span, "statement is inaccessible", unit))
            return
        _diagnose_stmt(facts, s, unit, out)
        if isinstance(s, CIf):
            te, _, ee, _ = facts.cfg.branch[s.sid]
            for entry, branch, name in ((te, s.then, "THEN"), (ee, s.else_, "ELSE")):
                if r.state(entry).is_top:
                    span = branch[0].span if branch else s.span
                    out.append(_diag("inaccessible", span,
                                     "%s branch is inaccessible" % name, unit))
                else:
                    _diagnose_block(facts, branch, unit, out)
        elif isinstance(s, CLoop):
            _diagnose_block(facts, s.body, unit, out)


def _diagnose_stmt(facts: _Facts, s, unit: str, out: list) -> None:
    r = facts.r
    scope = r.scope_of(unit)
    if isinstance(s, CAssign) and isinstance(s.target, Name) and r.config.primed:
        post = facts.post(s)
        v = Var(scope.qualify(s.target.id))
        if not post.is_top and knows(post, v, Var(primed(v.name))):
            out.append(_diag("redundant-assignment", s.span,
                             "assignment %s := %s is redundant"
                             % (s.target.id, expr_str(s.expr)), unit))
    for e in _exprs(s):
        if _is_literal(e):
            continue
        k = facts.constant(s, e, unit)
        if k is not None:
            lit = expr_str(term_to_expr(k))
            out.append(_diag("constant", s.span, "expression %s is constant: %s"
                             % (expr_str(e), lit), unit, lit))
            continue
        t = facts.cheaper(s, e, unit)
        if t is not None:
            txt = show(t, unit)
            out.append(_diag("cheaper-form", s.span, "expression %s can be simplified: %s"
                             % (expr_str(e), txt), unit, txt))
    nodes = []
    for e in _exprs(s):
        nodes += _index_nodes(e)
    if isinstance(s, (CAssign, CRead)):
        nodes += _index_nodes(s.target)
    for node in nodes:
        if not isinstance(node.index, Num) and facts.index_guarded(s, node, unit):
            out.append(_diag("range-check-removable", s.span,
                             "range check of %s can be removed" % expr_str(node), unit))


def _used_names(core: CoreProgram) -> tuple[set, set, set]:
    """Variables, functions and types referenced anywhere."""
    names, funcs, types = set(), set(), set()

    def expr(e):
        if isinstance(e, Name):
            names.add(e.id)
        elif isinstance(e, Index):
            expr(e.base)
            expr(e.index)
        elif isinstance(e, Field):
            expr(e.base)
        elif isinstance(e, Unary):
            expr(e.operand)
        elif isinstance(e, Binary):
            expr(e.left)
            expr(e.right)
        elif isinstance(e, Call):
            funcs.add(e.name)
            for a in e.args:
                expr(a)

    def ty(t):
        from .frontend import ArrayType as AT, NamedType, RecordType
        if isinstance(t, NamedType):
            types.add(t.name)
        elif isinstance(t, AT):
            ty(t.index)
            ty(t.elem)
        elif isinstance(t, RecordType):
            for _, x in t.fields:
                ty(x)

    main_names = set()
    for unit, body in _units(core):
        names.clear()
        for s in walk(body):
            for attr in ("target", "expr", "cond"):
                if getattr(s, attr, None) is not None:
                    expr(getattr(s, attr))
        if unit:
            f = core.functions[unit]
            for d in f.decl.decls:
                if isinstance(d, VarDecl):
                    ty(d.type)
            for _, t in f.decl.params:
                ty(t)
            if f.decl.result is not None:
                ty(f.decl.result)
        else:
            main_names = set(names)
    for d in core.ast.decls:
        if isinstance(d, VarDecl):
            ty(d.type)
            if d.init is not None:
                expr(d.init)
        elif isinstance(d, TypeDecl):
            ty(d.type)
    return main_names, funcs, types


def _unused_declarations(core: CoreProgram) -> list[Diagnostic]:
    used, funcs, types = _used_names(core)
    out = []
    for d in core.ast.decls:
        if isinstance(d, VarDecl):
            for n in d.names:
                if n not in used:
                    out.append(_diag("unused-definition", d.span, "variable %s is never used" % n))
        elif isinstance(d, FuncDecl) and d.name not in funcs:
            out.append(_diag("unused-definition", d.span, "function %s is never called" % d.name))
        elif isinstance(d, TypeDecl) and d.name not in types:
            out.append(_diag("unused-definition", d.span, "type %s is never used" % d.name))
    return out


# ---------------------------------------------------------------- query

@dataclass
class QueryAnswer:
    terms: list
    related: list
    inaccessible: bool = False


def parse_expr(text: str):
    p = _Parser(tokenize(text, "<query>"), "<query>")
    e = p.expr()
    if p.tok.kind != "eof":
        p.error("unexpected %s" % p.describe(p.tok))
    return e


def find_point(r: AnalysisResult, spec: str) -> int:
    """Point named by "end", "L:C", or "L:C:pre|post|then|else"."""
    cfg = r.cfg
    if spec == "end":
        return cfg.exits[""]
    parts = spec.split(":")
    if len(parts) < 2:
        raise ValueError("point must be line:col[:where] or end")
    line, col = int(parts[0]), int(parts[1])
    where = parts[2] if len(parts) > 2 else "pre"
    cands = sorted(sid for sid, s in cfg.stmts.items()
                   if s.span.line == line and s.span.col == col)
    if not cands:
        raise ValueError("no statement starts at %d:%d" % (line, col))
    sid = cands[0]
    if where == "pre":
        return cfg.pre[sid]
    if where == "post":
        return cfg.post[sid]
    if where in ("then", "else") and sid in cfg.branch:
        te, _, ee, _ = cfg.branch[sid]
        return te if where == "then" else ee
    raise ValueError("unknown point qualifier %r" % where)


def query(r: AnalysisResult, point: int, expr, depth: int = 3) -> QueryAnswer:
    """Terms equal to expr at the point, and equalities it takes part in."""
    if isinstance(expr, str):
        expr = parse_expr(expr)
    st = r.state(point)
    if st.is_top:
        return QueryAnswer([], [], True)
    unit = r.cfg.points[point].unit
    t = term_of(expr, r.scope_of(unit))
    c = resolve(st, t)
    if c is None:
        return QueryAnswer([], [])
    by_class = class_terms(st, depth, visible(unit))
    own = {show(t, unit)}
    terms = sorted({show(x, unit) for x in by_class.get(c, [])} - own,
                   key=lambda s: (len(s), s))
    related = []
    for cl, ts in by_class.items():
        if cl == c or len(ts) < 2:
            continue
        holders = [x for x in ts if any(y == t for y in _subterms(x))]
        others = [x for x in ts if x not in holders]
        if holders and others:
            h = min(holders, key=lambda x: (cost(x), show(x, unit)))
            o = min(others, key=lambda x: (cost(x), show(x, unit)))
            left = show(h, unit)
            related.append("%s = %s" % ("(%s)" % left if " " in left else left, show(o, unit)))
    return QueryAnswer(terms, sorted(set(related))[:50])


# ---------------------------------------------------------------- reports

@dataclass
class Report:
    points: list
    diagnostics: list
    rewrites: list
    stats: dict

    def to_json(self) -> dict:
        return {"points": self.points,
                "diagnostics": [d.to_json() for d in self.diagnostics],
                "rewrites": [w.to_json() for w in self.rewrites],
                "stats": self.stats}

    @classmethod
    def from_json(cls, d: dict) -> "Report":
        return cls(list(d["points"]),
                   [Diagnostic.from_json(x) for x in d["diagnostics"]],
                   [Rewrite.from_json(x) for x in d["rewrites"]],
                   dict(d["stats"]))


def state_json(s: EqState):
    if s.is_top:
        return "⊤"
    if s.kind != "graph" or not s.classes:
        return "⊥"
    return dump(s).split("\n")


def build_report(r: AnalysisResult, diagnostics: list, rewrites: list = ()) -> Report:
    points = []
    for p in r.cfg.points:
        st = r.state(p.id)
        entry = {"id": p.id, "line": p.span.line, "col": p.span.col, "unit": p.unit,
                 "kind": p.kind, "state": state_json(st)}
        if st.kind == "graph":
            groups = class_terms(st, 2, visible(p.unit))
            entry["classes"] = sorted(
                sorted({show(t, p.unit) for t in ts}) for ts in groups.values()
                if len({show(t, p.unit) for t in ts}) > 1)
        points.append(entry)
    loops = []
    for sid in sorted(r.stats):
        st = r.stats[sid]
        loops.append({"line": st.line, "col": st.col, "runs": st.runs,
                      "iterations": st.iterations, "widenings": st.widenings,
                      "max_size": st.max_size, "head_sizes": list(st.sizes)})
    stats = {"points": len(r.cfg.points), "loops": loops,
             "seconds": round(r.seconds, 4),
             "config": asdict(r.config)}
    return Report(points, list(diagnostics), list(rewrites), stats)


def annotate(text: str, diagnostics: list) -> str:
    """Source listing with findings appended as (*...*) comments."""
    by_line: dict[int, list] = {}
    for d in diagnostics:
        by_line.setdefault(d.line, []).append(d.detail)
    out = []
    for i, line in enumerate(text.splitlines(), 1):
        notes = by_line.get(i)
        out.append(line + ("   (*%s*)" % "; ".join(notes) if notes else ""))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- optimise

@dataclass
class Optimized:
    text: str
    program: CoreProgram
    rewrites: list
    diagnostics: list
    statements_before: int
    statements_after: int

    @property
    def reduction(self) -> float:
        if not self.statements_before:
            return 0.0
        return 1 - self.statements_after / self.statements_before


class _Rounds:
    """One optimisation round over an analysed core program."""

    def __init__(self, r: AnalysisResult, diags: list):
        self.r = r
        self.facts = _Facts(r)
        self.cfg = r.cfg
        self.rewrites: list = []
        self.by_pos: dict = {}
        for d in diags:
            self.by_pos.setdefault((d.unit, d.line, d.col, d.kind), d)
        self.assigned = _definitely_assigned(r.program)
        self.total = _total_functions(r)

    def diag(self, unit, span, kind):
        return self.by_pos.get((unit, span.line, span.col, kind))

    def log(self, s, action, before, after, why):
        self.rewrites.append(Rewrite(s.span.line, s.span.col, action, before, after, why))

    # -- safety

    def safe(self, s, e, unit: str, need_defined: bool = True) -> bool:
        """Evaluating e before s cannot trap and terminates."""
        st = self.facts.pre(s)
        if st.is_top:
            return False
        scope = self.r.scope_of(unit)
        assigned = self.assigned.get(s.sid, set())

        def ok(x) -> bool:
            if isinstance(x, (Num, BoolLit, CharLit)):
                return True
            if isinstance(x, Name):
                if not need_defined or x.id in assigned:
                    return True
                return self.facts.constant(s, x, unit) is not None
            if isinstance(x, Index):
                if not isinstance(x.base, Name) or not ok(x.index):
                    return False
                if not self.facts.index_guarded(s, x, unit):
                    return False
                if not need_defined or x.base.id in assigned and x.base.id in self.r.program.inits:
                    return True
                return self.facts.constant(s, x, unit) is not None
            if isinstance(x, Field):
                return ok(x.base)
            if isinstance(x, Unary):
                return ok(x.operand)
            if isinstance(x, Binary):
                if not (ok(x.left) and ok(x.right)):
                    return False
                if x.op in ("div", "mod"):
                    k = self.facts.constant(s, x.right, unit)
                    return k is not None and k.kind == "int" and k.value != 0
                return True
            if isinstance(x, Call):
                if x.name not in BUILTIN_FUNCTIONS and x.name not in self.total:
                    return False
                return all(ok(a) for a in x.args)
            return False

        return ok(e)

    # -- rewriting

    def block(self, body: list, unit: str) -> list:
        out = []
        for i, s in enumerate(body):
            if self.facts.pre(s).is_top:
                why = self.diag(unit, s.span, "inaccessible")
                if why is not None:
                    for rest in body[i:]:
                        self.log(rest, "remove", _stmt_text(rest), "", why)
                    return out
                out.append(s)
                continue
            new, stop = self.stmt(s, unit)
            out.extend(new)
            if stop:
                for rest in body[i + 1:]:
                    if not self.facts.pre(rest).is_top:
                        break
                else:
                    return out
        return out

    def stmt(self, s, unit: str) -> tuple[list, bool]:
        post = self.facts.post(s)
        if isinstance(s, (CAssign, CWrite, CRead)) and post.is_top:
            why = self.diag(unit, s.span, "eval-error")
            if why is not None:
                self.log(s, "trap", _stmt_text(s), "ERROR", why)
                return [CError(s.span)], True
            return [s], False
        if isinstance(s, CAssign):
            why = self.diag(unit, s.span, "redundant-assignment")
            if why is not None and self.safe(s, s.expr, unit, need_defined=False) \
                    and self.safe_target(s, unit):
                self.log(s, "remove", _stmt_text(s), "", why)
                return [], False
            e = self.substitute(s, s.expr, unit)
            if e is not s.expr:
                return [CAssign(s.span, target=s.target, expr=e)], False
            return [s], False
        if isinstance(s, CWrite):
            e = self.substitute(s, s.expr, unit)
            return ([CWrite(s.span, expr=e)] if e is not s.expr else [s]), False
        if isinstance(s, CReturn) and s.expr is not None:
            e = self.substitute(s, s.expr, unit)
            return ([CReturn(s.span, expr=e)] if e is not s.expr else [s]), False
        if isinstance(s, CIf):
            return self.branch(s, unit)
        if isinstance(s, CLoop):
            return [CLoop(s.span, body=self.block(s.body, unit))], False
        return [s], False

    def safe_target(self, s, unit: str) -> bool:
        t = s.target
        while not isinstance(t, Name):
            if isinstance(t, Index) and not self.safe(s, t.index, unit):
                return False
            t = t.base
        return True

    def substitute(self, s, e, unit: str):
        if _is_literal(e) or not self.safe(s, e, unit):
            return e
        for kind in ("constant", "cheaper-form"):
            why = self.diag(unit, s.span, kind)
            if why is None or not why.detail.startswith("expression %s " % expr_str(e)):
                continue
            new = parse_expr(why.replacement)
            if kind == "cheaper-form" and not self.safe(s, new, unit):
                continue
            self.log(s, "replace", expr_str(e), why.replacement, why)
            return new
        return e

    def branch(self, s: CIf, unit: str) -> tuple[list, bool]:
        te, _, ee, _ = self.cfg.branch[s.sid]
        dead_then = self.r.state(te).is_top
        dead_else = self.r.state(ee).is_top
        if dead_then and dead_else:
            why = self.diag(unit, s.span, "eval-error")
            if why is not None:
                self.log(s, "trap", "IF %s" % expr_str(s.cond), "ERROR", why)
                return [CError(s.span)], True
            return [s], False
        cond_safe = self.safe(s, s.cond, unit)
        for dead, live, branch in ((dead_then, s.else_, s.then), (dead_else, s.then, s.else_)):
            if dead and cond_safe:
                span = branch[0].span if branch else s.span
                why = self.diag(unit, span, "inaccessible")
                if why is None:
                    continue
                self.log(s, "unwrap", "IF %s" % expr_str(s.cond), "", why)
                return self.block(live, unit), False
        cond = s.cond
        why = self.diag(unit, s.span, "cheaper-form")
        if why is not None and cond_safe:
            new = parse_expr(why.replacement)
            if self.safe(s, new, unit):
                self.log(s, "replace", expr_str(cond), why.replacement, why)
                cond = new
        then = self.block(s.then, unit)
        else_ = self.block(s.else_, unit)
        if not then and not else_ and cond_safe:
            return [], False
        return [CIf(s.span, cond=cond, then=then, else_=else_, origin=s.origin)], False


def _stmt_text(s) -> str:
    from .frontend import _stmt_lines
    return " ".join(x.strip() for x in _stmt_lines(s, 0))


def _definitely_assigned(core: CoreProgram) -> dict:
    """sid -> scalar names assigned on every path reaching the statement."""
    out: dict[int, set] = {}

    def block(body, have: set) -> set | None:
        for s in body:
            if have is None:
                return None
            have = stmt(s, have)
        return have

    def stmt(s, have: set):
        out[s.sid] = set(have)
        if isinstance(s, (CAssign, CRead)):
            if isinstance(s.target, Name):
                return have | {s.target.id}
            return have
        if isinstance(s, CIf):
            a = block(s.then, set(have))
            b = block(s.else_, set(have))
            if a is None:
                return b
            if b is None:
                return a
            return a & b
        if isinstance(s, CLoop):
            block(s.body, set(have))
            return set(have)
        if isinstance(s, (CExit, CReturn, CError)):
            return None
        return have

    inits = set(core.inits)
    block(core.body, set(inits))
    for f in core.functions.values():
        block(f.body, set(f.params))
    return out


def _total_functions(r: AnalysisResult) -> set:
    """Functions whose calls always terminate without error."""
    core = r.program
    erring = {n.unit for n in r.plus}
    total: set = set()
    for name in _call_order(core):
        f = core.functions[name]
        ok = name not in erring
        for s in walk(f.body):
            if isinstance(s, (CLoop, CError, CRead, CWrite)):
                ok = False
            for e in _exprs(s) + ([s.target] if isinstance(s, CAssign) else []):
                if not _syntactically_total(e, total):
                    ok = False
        if f.has_result and not _always_returns(f.body):
            ok = False
        if ok:
            total.add(name)
    return total


def _call_order(core: CoreProgram) -> list:
    order, seen = [], set()

    def visit(n):
        if n in seen:
            return
        seen.add(n)
        for s in walk(core.functions[n].body):
            for e in _exprs(s):
                for c in _calls(e):
                    if c in core.functions:
                        visit(c)
        order.append(n)

    for n in sorted(core.functions):
        visit(n)
    return order


def _calls(e) -> list:
    out = []
    if isinstance(e, Call):
        out.append(e.name)
        for a in e.args:
            out += _calls(a)
    elif isinstance(e, Index):
        out += _calls(e.base) + _calls(e.index)
    elif isinstance(e, Field):
        out += _calls(e.base)
    elif isinstance(e, Unary):
        out += _calls(e.operand)
    elif isinstance(e, Binary):
        out += _calls(e.left) + _calls(e.right)
    return out


def _syntactically_total(e, total: set) -> bool:
    if isinstance(e, Index):
        return False
    if isinstance(e, Binary):
        if e.op in ("div", "mod"):
            return False
        return _syntactically_total(e.left, total) and _syntactically_total(e.right, total)
    if isinstance(e, Unary):
        return _syntactically_total(e.operand, total)
    if isinstance(e, Field):
        return _syntactically_total(e.base, total)
    if isinstance(e, Call):
        if e.name not in BUILTIN_FUNCTIONS and e.name not in total:
            return False
        return all(_syntactically_total(a, total) for a in e.args)
    return True


def _always_returns(body: list) -> bool:
    for s in body:
        if isinstance(s, CReturn):
            return True
        if isinstance(s, CIf) and _always_returns(s.then) and _always_returns(s.else_):
            return True
    return False


# -- liveness

def _live_block(body: list, live: set, exit_live: set | None, sink: dict) -> set:
    for s in reversed(body):
        live = _live_stmt(s, live, exit_live, sink)
    return live


def _names_in(e) -> set:
    return set(read_names(e)) if e is not None else set()


def _live_stmt(s, live: set, exit_live, sink: dict) -> set:
    if isinstance(s, CAssign):
        sink[s.sid] = set(live)
        uses = _names_in(s.expr)
        t = s.target
        if isinstance(t, Name):
            return (live - {t.id}) | uses
        while not isinstance(t, Name):
            if isinstance(t, Index):
                uses |= _names_in(t.index)
            t = t.base
        return live | uses | {t.id}
    if isinstance(s, CRead):
        t = s.target
        uses = set()
        if isinstance(t, Name):
            return live - {t.id}
        while not isinstance(t, Name):
            if isinstance(t, Index):
                uses |= _names_in(t.index)
            t = t.base
        return live | uses | {t.id}
    if isinstance(s, CWrite):
        return live | _names_in(s.expr)
    if isinstance(s, CIf):
        a = _live_block(s.then, set(live), exit_live, sink)
        b = _live_block(s.else_, set(live), exit_live, sink)
        return a | b | _names_in(s.cond)
    if isinstance(s, CLoop):
        head = set()
        while True:
            new = _live_block(s.body, set(head), live, sink)
            if new <= head:
                return head
            head |= new
    if isinstance(s, CExit):
        return set(exit_live or ())
    if isinstance(s, CReturn):
        return _names_in(s.expr)
    if isinstance(s, CError):
        return set()
    return live


def _remove_dead(rounds: _Rounds, body: list, unit: str, core: CoreProgram,
                 diags: list) -> list:
    sink: dict[int, set] = {}
    _live_block(body, set(), None, sink)
    types = core.functions[unit].types if unit else core.types

    def keep(s) -> bool:
        if not isinstance(s, CAssign) or not isinstance(s.target, Name):
            return True
        name = s.target.id
        if name in sink.get(s.sid, {name}):
            return True
        ty = types.get(name)
        bounded = isinstance(ty, IntType) and ty.lo is not None
        if bounded and not isinstance(s.expr, Num):
            return True
        if not _syntactically_safe(s.expr, rounds, unit):
            return True
        d = _diag("unused-definition", s.span, "value assigned to %s is never used" % name, unit)
        diags.append(d)
        rounds.log(s, "remove", _stmt_text(s), "", d)
        return False

    def walk_block(b: list) -> list:
        out = []
        for s in b:
            if isinstance(s, CIf):
                out.append(CIf(s.span, cond=s.cond, then=walk_block(s.then),
                               else_=walk_block(s.else_), origin=s.origin))
            elif isinstance(s, CLoop):
                out.append(CLoop(s.span, body=walk_block(s.body)))
            elif keep(s):
                out.append(s)
        return out

    return walk_block(body)


def _syntactically_safe(e, rounds: _Rounds, unit: str) -> bool:
    """Evaluation cannot trap: no partial operators, calls only to total
    functions; undefined operands propagate through total operators."""
    return _syntactically_total(e, rounds.total)


def _rebuild(core: CoreProgram, bodies: dict) -> CoreProgram:
    new = copy.copy(core)
    new.body = bodies[""]
    new.functions = {}
    for name, f in core.functions.items():
        g = copy.copy(f)
        g.body = bodies.get(name, f.body)
        new.functions[name] = g
    return new


def _drop_unused(core: CoreProgram, diags: list, rewrites: list) -> tuple[CoreProgram, list]:
    """Remove declarations nobody references; returns the program and the
    declarations to print."""
    decls = list(core.ast.decls)
    for _ in range(3):
        core2 = copy.copy(core)
        core2.ast = copy.copy(core.ast)
        object.__setattr__(core2.ast, "decls", tuple(decls))
        used, funcs, types = _used_names(core2)
        new_decls = []
        changed = False
        for d in decls:
            if isinstance(d, VarDecl):
                names = tuple(n for n in d.names if n in used)
                for n in d.names:
                    if n not in used:
                        why = _diag("unused-definition", d.span, "variable %s is never used" % n)
                        diags.append(why)
                        rewrites.append(Rewrite(d.span.line, d.span.col, "drop-declaration",
                                                n, "", why))
                        changed = True
                if names:
                    new_decls.append(VarDecl(names, d.type, d.init, d.span))
            elif isinstance(d, FuncDecl) and d.name not in funcs:
                why = _diag("unused-definition", d.span, "function %s is never called" % d.name)
                diags.append(why)
                rewrites.append(Rewrite(d.span.line, d.span.col, "drop-declaration",
                                        d.name, "", why))
                changed = True
            elif isinstance(d, TypeDecl) and d.name not in types:
                why = _diag("unused-definition", d.span, "type %s is never used" % d.name)
                diags.append(why)
                rewrites.append(Rewrite(d.span.line, d.span.col, "drop-declaration",
                                        d.name, "", why))
                changed = True
            else:
                new_decls.append(d)
        decls = new_decls
        if not changed:
            break
    functions = {n: f for n, f in core.functions.items()
                 if any(isinstance(d, FuncDecl) and d.name == n for d in decls)}
    new = copy.copy(core)
    new.functions = functions
    new.types = {n: t for n, t in core.types.items()
                 if any(isinstance(d, VarDecl) and n in d.names for d in decls)}
    new.inits = {n: e for n, e in core.inits.items() if n in new.types}
    return new, decls


def optimize(core: CoreProgram, config: EngineConfig | None = None,
             rounds: int = 4) -> Optimized:
    """Apply the rewrites the analysis justifies, re-analysing between
    rounds; every rewrite cites a diagnostic of this run."""
    config = config or EngineConfig()
    before = _count(core)
    all_diags: list = []
    rewrites: list = []
    cur = core
    for i in range(rounds):
        r = analyze(cur, config)
        diags = diagnose(r)
        all_diags.extend(diags)
        rd = _Rounds(r, diags)
        if i == 0:
            for d in diags:
                if d.kind == "range-check-removable":
                    rd.rewrites.append(Rewrite(d.line, d.col, "keep", d.detail, d.detail, d))
        bodies = {"": rd.block(cur.body, "")}
        for name, f in cur.functions.items():
            bodies[name] = rd.block(f.body, name)
        extra: list = []
        bodies = {u: _remove_dead(rd, b, u, cur, extra) for u, b in bodies.items()}
        all_diags.extend(extra)
        changed = [w for w in rd.rewrites if w.action != "keep"]
        rewrites.extend(rd.rewrites)
        cur = _rebuild(cur, bodies)
        if not changed:
            break
    cur, decls = _drop_unused(cur, all_diags, rewrites)
    text = pretty_core(cur, decls=decls)
    new_core = _reload(text, core.path)
    uniq = list(dict.fromkeys(all_diags))
    return Optimized(text, new_core, rewrites, uniq, before, _count(new_core))


def _reload(text: str, path: str) -> CoreProgram:
    from .frontend import SourceProgram, load
    return load(SourceProgram(path, text))


def _count(core: CoreProgram) -> int:
    n = count_statements(core.ast.body)
    for d in core.ast.decls:
        if isinstance(d, FuncDecl):
            n += count_statements(d.body)
    return n


def statement_count(core: CoreProgram) -> int:
    return _count(core)
