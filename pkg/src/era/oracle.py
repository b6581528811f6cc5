"""Concrete interpreter used as ground truth: soundness checks of analysis
states, equivalence of optimised programs, and random test programs."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .eqstate import Apply, Const, EqState, Omega, Var, class_terms, term_str
from .frontend import (ArrayLit, ArrayType, Assign, Binary, BoolLit, BoolType,
                       Call, Case, CAssign, CError, CExit, CharLit, CharType,
                       CIf, CLoop, CoreProgram, CRead, CReturn, CWrite, Error,
                       Exit, Field, If, Inc, Index, IntType, Loop, Name, Num,
                       Read, RecordType, Return, Unary, While, Write, load)
from .ops import BUILTIN_FUNCTIONS, INTERPRETED, Char, EvalError, apply_op, to_value
from .transformers import PRIME

DEFAULT_CAP = 10_000


class _Undef:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "ω"


UNDEF = _Undef()


class Trap(Exception):
    def __init__(self, kind: str, detail: str = ""):
        super().__init__(detail or kind)
        self.kind = kind


class _Timeout(Exception):
    pass


class _Eof(Exception):
    pass


class _ExitLoop(Exception):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


@dataclass
class Run:
    status: str             # ok, trap, timeout, eof
    outputs: tuple
    detail: str = ""
    steps: int = 0
    log: list = field(default_factory=list)

    @property
    def behaviour(self) -> tuple:
        return self.outputs, self.status


def defined(v) -> bool:
    """False for UNDEF and for composites holding UNDEF."""
    if v is UNDEF:
        return False
    if isinstance(v, tuple):
        return all(defined(x) for x in (v[1] if _is_array(v) else (y for _, y in v)))
    return True


def _is_array(v) -> bool:
    return isinstance(v, tuple) and len(v) == 2 and isinstance(v[0], int) \
        and not isinstance(v[0], bool) and isinstance(v[1], tuple)


def default_value(ty):
    if isinstance(ty, ArrayType):
        lo, hi = ty.index.lo, ty.index.hi
        return (lo, tuple(default_value(ty.elem) for _ in range(hi - lo + 1)))
    if isinstance(ty, RecordType):
        return tuple((n, default_value(t)) for n, t in ty.fields)
    return UNDEF


class _Machine:
    """Shared expression semantics; statements are interpreted by subclasses."""

    def __init__(self, core: CoreProgram, inputs, cap: int = DEFAULT_CAP, log: bool = False):
        self.core = core
        self.inputs = list(inputs)
        self.pos = 0
        self.cap = cap
        self.steps = 0
        self.outputs: list = []
        self.log = [] if log else None
        self.env: dict = {}
        for name, ty in core.types.items():
            init = core.inits.get(name)
            self.env[name] = default_value(ty) if init is None else self.literal(init, ty)

    # -- helpers

    def tick(self) -> None:
        self.steps += 1
        if self.steps > self.cap:
            raise _Timeout()

    def literal(self, e, ty=None):
        if isinstance(e, ArrayLit):
            lo = ty.index.lo if isinstance(ty, ArrayType) else 1
            sub = ty.elem if isinstance(ty, ArrayType) else None
            return (lo, tuple(self.literal(x, sub) for x in e.items))
        return self.expr(e, "")

    def types(self, unit: str) -> dict:
        return self.core.functions[unit].types if unit else self.core.types

    def qualify(self, name: str, unit: str) -> str:
        return unit + "." + name if unit else name

    def check_type(self, ty, v):
        if v is UNDEF:
            return v
        if isinstance(ty, IntType) and ty.lo is not None:
            if not isinstance(v, int) or not ty.lo <= v <= ty.hi:
                raise Trap("range-violation", "value %r out of type range" % (v,))
        return v

    def snapshot(self, span) -> None:
        if self.log is not None:
            self.log.append(((span.line, span.col), dict(self.env)))

    # -- expressions

    def expr(self, e, unit: str):
        if isinstance(e, Num):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, CharLit):
            return Char(e.value)
        if isinstance(e, Name):
            return self.env.get(self.qualify(e.id, unit), UNDEF)
        if isinstance(e, Index):
            base = self.expr(e.base, unit)
            i = self.expr(e.index, unit)
            if i is UNDEF:
                raise Trap("indefinite-operand", "undefined index")
            return self.op("elm", [base, i])
        if isinstance(e, Field):
            base = self.expr(e.base, unit)
            return dict(base)[e.name]
        if isinstance(e, Unary):
            v = self.expr(e.operand, unit)
            return UNDEF if v is UNDEF else self.op(e.op, [v])
        if isinstance(e, Binary):
            a = self.expr(e.left, unit)
            b = self.expr(e.right, unit)
            if e.op in ("div", "mod") and (a is UNDEF or b is UNDEF):
                raise Trap("indefinite-operand", "undefined operand of %s" % e.op)
            if a is UNDEF or b is UNDEF:
                return UNDEF
            return self.op(e.op, [a, b])
        if isinstance(e, Call):
            args = [self.expr(a, unit) for a in e.args]
            if e.name in BUILTIN_FUNCTIONS:
                return UNDEF if UNDEF in args else self.op(e.name, args)
            return self.call(e.name, args)
        raise TypeError(e)

    def op(self, name: str, vals: list):
        try:
            return apply_op(name, vals)
        except EvalError as err:
            raise Trap(err.kind, err.detail) from None

    def condition(self, e, unit: str) -> bool:
        v = self.expr(e, unit)
        if v is UNDEF:
            raise Trap("indefinite-operand", "undefined condition")
        return v

    # -- stores

    def store(self, target, v, unit: str, prime: bool) -> None:
        root, path = target, []
        while not isinstance(root, Name):
            if isinstance(root, Index):
                i = self.expr(root.index, unit)
                if i is UNDEF:
                    raise Trap("indefinite-operand", "undefined index")
                path.append(("i", i))
            else:
                path.append(("f", root.name))
            root = root.base
        name = self.qualify(root.id, unit)
        ty = self.types(unit)[root.id]
        if not path:
            v = self.check_type(ty, v)
            if prime:
                self.env[primed_name(name)] = self.env.get(name, UNDEF)
            self.env[name] = v
            return
        path.reverse()
        self.env[name] = self._update(self.env[name], ty, path, v)

    def _update(self, cur, ty, path, v):
        kind, key = path[0]
        if kind == "i":
            lo, items = cur
            if not lo <= key < lo + len(items):
                raise Trap("range-violation", "index %d out of range" % key)
            sub = ty.elem
            new = v if len(path) == 1 else self._update(items[key - lo], sub, path[1:], v)
            if len(path) == 1:
                new = self.check_type(sub, new)
            return (lo, items[:key - lo] + (new,) + items[key - lo + 1:])
        fields = dict(ty.fields)
        sub = fields[key]
        out = []
        for n, x in cur:
            if n == key:
                x = self.check_type(sub, v) if len(path) == 1 else self._update(x, sub, path[1:], v)
            out.append((n, x))
        return tuple(out)

    def read_value(self, target, unit: str):
        if self.pos >= len(self.inputs):
            raise _Eof()
        v = self.inputs[self.pos]
        self.pos += 1
        return v

    def write_value(self, v) -> None:
        if not defined(v):
            raise Trap("indefinite-operand", "undefined output")
        self.outputs.append(v)

    # -- calls

    def call(self, name: str, args: list):
        f = self.core.functions[name]
        saved = {k: v for k, v in self.env.items() if k.startswith(name + ".")}
        for p, v in zip(f.params, args):
            self.env[name + "." + p] = self.check_type(f.types[p], v)
        for loc in f.locals:
            self.env[name + "." + loc] = default_value(f.types[loc])
        try:
            self.run_function(name)
            result = UNDEF
        except _Return as r:
            result = r.value
        for k in [k for k in self.env if k.startswith(name + ".")]:
            del self.env[k]
        self.env.update(saved)
        return result

    def execute(self) -> Run:
        status, detail = "ok", ""
        try:
            self.run_main()
        except Trap as t:
            status, detail = "trap", str(t)
        except _Timeout:
            status = "timeout"
        except _Eof:
            status = "eof"
        except (TypeError, KeyError, ValueError) as err:
            status, detail = "trap", "ill-typed value: %s" % err
        return Run(status, tuple(self.outputs), detail, self.steps, self.log or [])


def primed_name(name: str) -> str:
    return name + PRIME


class CoreInterpreter(_Machine):
    """Runs the desugared core; observe(point, env) sees each point reached."""

    def __init__(self, core, inputs, cap=DEFAULT_CAP, cfg=None, observe=None,
                 log=False, primed=True):
        super().__init__(core, inputs, cap, log)
        self.cfg = cfg
        self.observe = observe if cfg is not None else None
        self.primed = primed

    def see(self, point) -> None:
        if self.observe is not None:
            self.observe(point, self.env)

    def run_main(self) -> None:
        self.block(self.core.body, "")
        cfg = self.cfg
        if cfg is not None:
            body = self.core.body
            # the last statement's post point usually is the exit already
            if not body or cfg.post[body[-1].sid] != cfg.exits[""]:
                self.see(cfg.exits[""])

    def run_function(self, name: str) -> None:
        self.block(self.core.functions[name].body, name)

    def block(self, body, unit: str) -> None:
        for s in body:
            self.stmt(s, unit)

    def stmt(self, s, unit: str) -> None:
        self.tick()
        cfg = self.cfg
        if cfg is not None:
            self.see(cfg.pre[s.sid])
        if isinstance(s, CAssign):
            self.snapshot(s.span)
            v = self.expr(s.expr, unit)
            self.store(s.target, v, unit, self.primed)
        elif isinstance(s, CRead):
            self.snapshot(s.span)
            self.store(s.target, self.read_value(s.target, unit), unit, False)
        elif isinstance(s, CWrite):
            self.snapshot(s.span)
            self.write_value(self.expr(s.expr, unit))
        elif isinstance(s, CIf):
            taken = self.condition(s.cond, unit)
            if cfg is not None:
                te, _, ee, _ = cfg.branch[s.sid]
                self.see(te if taken else ee)
            self.block(s.then if taken else s.else_, unit)
        elif isinstance(s, CLoop):
            try:
                while True:
                    self.tick()
                    self.block(s.body, unit)
            except _ExitLoop:
                pass
        elif isinstance(s, CExit):
            raise _ExitLoop()
        elif isinstance(s, CReturn):
            v = UNDEF if s.expr is None else self.expr(s.expr, unit)
            raise _Return(v)
        elif isinstance(s, CError):
            raise Trap("error", "ERROR statement")
        if cfg is not None:
            self.see(cfg.post[s.sid])


class AstInterpreter(_Machine):
    """Runs the surface syntax directly, before desugaring."""

    def run_main(self) -> None:
        self.block(self.core.ast.body, "")

    def run_function(self, name: str) -> None:
        self.block(self.core.functions[name].decl.body, name)

    def block(self, body, unit: str) -> None:
        for s in body:
            self.stmt(s, unit)

    def stmt(self, s, unit: str) -> None:
        self.tick()
        if isinstance(s, Assign):
            self.snapshot(s.span)
            self.store(s.target, self.expr(s.expr, unit), unit, True)
        elif isinstance(s, Inc):
            self.snapshot(s.span)
            amount = 1 if s.amount is None else self.expr(s.amount, unit)
            cur = self.expr(s.target, unit)
            if cur is UNDEF or amount is UNDEF:
                v = UNDEF
            else:
                v = self.op("-" if s.down else "+", [cur, amount])
            self.store(s.target, v, unit, True)
        elif isinstance(s, Read):
            self.snapshot(s.span)
            self.store(s.target, self.read_value(s.target, unit), unit, False)
        elif isinstance(s, Write):
            self.snapshot(s.span)
            self.write_value(self.expr(s.expr, unit))
        elif isinstance(s, If):
            self.block(s.then if self.condition(s.cond, unit) else s.else_, unit)
        elif isinstance(s, While):
            try:
                while self.condition(s.cond, unit):
                    self.tick()
                    self.block(s.body, unit)
            except _ExitLoop:
                pass
        elif isinstance(s, Loop):
            try:
                while True:
                    self.tick()
                    self.block(s.body, unit)
            except _ExitLoop:
                pass
        elif isinstance(s, Exit):
            raise _ExitLoop()
        elif isinstance(s, Case):
            v = self.expr(s.expr, unit)
            if v is UNDEF:
                raise Trap("indefinite-operand", "undefined selector")
            for labels, body in s.arms:
                if any(self.expr(x, unit) == v for x in labels):
                    self.block(body, unit)
                    break
            else:
                self.block(s.else_ or [], unit)
        elif isinstance(s, Return):
            raise _Return(UNDEF if s.expr is None else self.expr(s.expr, unit))
        elif isinstance(s, Error):
            raise Trap("error", "ERROR statement")
        else:
            raise TypeError(s)


def run(core: CoreProgram, inputs, cap: int = DEFAULT_CAP, **kw) -> Run:
    return CoreInterpreter(core, inputs, cap, **kw).execute()


def run_ast(core: CoreProgram, inputs, cap: int = DEFAULT_CAP, log: bool = False) -> Run:
    return AstInterpreter(core, inputs, cap, log).execute()


# ---------------------------------------------------------------- soundness

@dataclass
class Violation:
    point: int
    line: int
    col: int
    terms: tuple
    values: tuple
    inputs: tuple


@dataclass
class SoundnessReport:
    violations: list
    traces: int
    observations: int

    @property
    def ok(self) -> bool:
        return not self.violations


def _vkey(v):
    return (type(v).__name__, v)


class _Evaluator:
    """Concrete values of the terms a state knows, per class, to a depth."""

    def __init__(self, core: CoreProgram, cap: int):
        self.core = core
        self.cap = cap

    def call(self, name: str, args: list, env: dict):
        m = CoreInterpreter(self.core, [], self.cap)
        m.env = dict(env)
        try:
            return m.call(name, args)
        except (Trap, _Timeout, _Eof, TypeError, KeyError, ValueError):
            return UNDEF

    def values(self, s: EqState, env: dict, depth: int) -> dict:
        prev: dict = {c: {} for c in s.classes}
        for d in range(1, depth + 1):
            cur: dict = {}
            for c, rs in s.classes.items():
                out: dict = {}
                for r in rs:
                    if isinstance(r, Var):
                        v = env.get(r.name, UNDEF)
                        if defined(v):
                            out[_vkey(v)] = v
                    elif isinstance(r, Const):
                        try:
                            v = to_value(r)
                        except (TypeError, ValueError):
                            continue
                        out[_vkey(v)] = v
                    elif isinstance(r, Apply) and d > 1:
                        pools = [list(prev[a].values()) for a in r.args]
                        for combo in itertools.islice(itertools.product(*pools), 64):
                            v = self.apply(r.op, list(combo), env)
                            if defined(v):
                                out[_vkey(v)] = v
                cur[c] = out
            prev = cur
        return prev

    def apply(self, op: str, vals: list, env: dict):
        if op in self.core.functions:
            return self.call(op, vals, env)
        if op not in INTERPRETED:
            return UNDEF
        try:
            return apply_op(op, vals)
        except (EvalError, TypeError, KeyError, ValueError, IndexError):
            return UNDEF


def check_state(core: CoreProgram, s: EqState, env: dict, depth: int = 3,
                cap: int = DEFAULT_CAP) -> list:
    """Classes of s whose terms take two or more defined values in env."""
    if s.kind != "graph":
        return [] if s.is_top else []
    vals = _Evaluator(core, cap).values(s, env, depth)
    return [(c, tuple(v.values())) for c, v in vals.items() if len(v) > 1]


def check_soundness(result, inputs_list, depth: int = 3, cap: int = DEFAULT_CAP,
                    limit: int = 20) -> SoundnessReport:
    """Run every input sequence and test each reached point's state."""
    core, cfg = result.program, result.cfg
    ev = _Evaluator(core, cap)
    violations: list = []
    traces = observations = 0
    primed = result.config.primed
    for inputs in inputs_list:
        traces += 1

        def observe(p, env, inputs=tuple(inputs)):
            nonlocal observations
            st = result.state(p)
            if st.kind != "graph":
                return
            if st.is_top:
                return
            observations += 1
            vals = ev.values(st, env, depth)
            for c, v in vals.items():
                if len(v) > 1 and len(violations) < limit:
                    terms = tuple(term_str(t) for t in
                                  class_terms(st, depth).get(c, [])[:6])
                    pt = cfg.points[p]
                    violations.append(Violation(p, pt.span.line, pt.span.col, terms,
                                                tuple(v.values()), inputs))

        CoreInterpreter(core, inputs, cap, cfg=cfg, observe=observe,
                        primed=primed).execute()
    return SoundnessReport(violations, traces, observations)


@dataclass
class TraceRelations:
    """Per point, the ground equalities each trace establishes among the
    analysed terms (one relation per trace)."""

    relations: dict         # point -> list of frozenset of (term, term) pairs


def concrete_collect(result, inputs_list, depth: int = 2, cap: int = DEFAULT_CAP,
                     universe=None) -> TraceRelations:
    """Equalities among terms holding on each trace at each reached point.

    universe is a list of terms; by default the terms the analysis state at
    the point mentions (to the depth)."""
    from .eqstate import Fun
    core, cfg = result.program, result.cfg
    ev = _Evaluator(core, cap)
    rel: dict = {}

    def value(t, env):
        if isinstance(t, Var):
            return env.get(t.name, UNDEF)
        if isinstance(t, Const):
            return to_value(t)
        if isinstance(t, Fun):
            args = [value(a, env) for a in t.args]
            if any(not defined(a) for a in args):
                return UNDEF
            return ev.apply(t.op, args, env)
        return UNDEF

    for inputs in inputs_list:
        seen: dict = {}

        def observe(p, env):
            terms = universe
            if terms is None:
                st = result.state(p)
                terms = [] if st.kind != "graph" else sorted(
                    {t for ts in class_terms(st, depth).values() for t in ts}, key=term_str)
            vals = [(t, value(t, env)) for t in terms]
            pairs = frozenset((term_str(a), term_str(b)) for (a, va), (b, vb)
                              in itertools.combinations(vals, 2)
                              if defined(va) and defined(vb) and _vkey(va) == _vkey(vb))
            seen.setdefault(p, []).append(pairs)

        CoreInterpreter(core, inputs, cap, cfg=cfg, observe=observe).execute()
        for p, rs in seen.items():
            rel.setdefault(p, []).extend(rs)
    return TraceRelations(rel)


# ---------------------------------------------------------------- equivalence

@dataclass
class Equivalence:
    ok: bool
    runs: int
    counterexample: tuple | None = None
    left: Run | None = None
    right: Run | None = None


def input_sequences(domain, length: int):
    return [list(x) for x in itertools.product(list(domain), repeat=length)]


def equivalent(a: CoreProgram, b: CoreProgram, inputs_list, cap: int = DEFAULT_CAP) -> Equivalence:
    """Same outputs and termination status on every input sequence."""
    n = 0
    for inputs in inputs_list:
        n += 1
        ra, rb = run(a, inputs, cap), run(b, inputs, cap)
        if ra.behaviour != rb.behaviour:
            return Equivalence(False, n, tuple(inputs), ra, rb)
    return Equivalence(True, n)


# ---------------------------------------------------------------- generator

@dataclass
class ProgramGenerator:
    """Random well-typed programs: reads first, then up to max_stmts
    statements over a few integer variables, an array and a function."""

    seed: int = 0
    max_stmts: int = 30
    reads: int = 3
    domain: tuple = (-2, -1, 0, 1, 2)

    def __post_init__(self):
        self.rng = random.Random(self.seed)

    READ_VARS = ("x", "y", "z")
    OTHER_VARS = ("u", "v", "w")

    def program(self) -> str:
        """Source text of a program with at most max_stmts statements."""
        from .frontend import count_statements, parse
        while True:
            text = self._program()
            ast = parse(text)
            n = count_statements(ast.body) + sum(
                count_statements(d.body) for d in ast.decls if hasattr(d, "body"))
            if n <= self.max_stmts:
                return text

    def _program(self) -> str:
        rng = self.rng
        self.budget = rng.randint(3, self.max_stmts)
        self.counters = 0
        nreads = rng.randint(0, self.reads)
        self.use_fn = rng.random() < 0.4
        body = ["read(%s)" % v for v in self.READ_VARS[:nreads]]
        self.budget -= nreads
        body += self.block(0, in_loop=False)
        decls = ["VAR x, y, z, u, v, w: INTEGER;",
                 "VAR a: ARRAY [1..3] OF INTEGER = {1, 2, 3};",
                 "VAR b: BOOLEAN;"]
        if self.counters:
            decls.append("VAR %s: INTEGER;" % ", ".join("k%d" % i for i in range(self.counters)))
        if self.use_fn:
            decls.append("PROCEDURE F(p, q: INTEGER): INTEGER;\nBEGIN\n  IF p < q THEN RETURN q - p"
                         " ELSE RETURN p + q END\nEND F;")
        return "\n".join(decls) + "\nBEGIN\n  " + ";\n  ".join(body or ["u := 0"]) + "\nEND.\n"

    def var(self) -> str:
        return self.rng.choice(self.READ_VARS + self.OTHER_VARS)

    def atom(self) -> str:
        rng = self.rng
        r = rng.random()
        if r < 0.55:
            return self.var()
        if r < 0.8:
            k = rng.randint(-2, 3)
            return str(k) if k >= 0 else "(%d)" % k
        if r < 0.9:
            return "a[%d]" % rng.randint(1, 3)
        return "a[%s]" % self.var()

    def iexpr(self, depth: int = 2) -> str:
        rng = self.rng
        if depth == 0 or rng.random() < 0.35:
            return self.atom()
        r = rng.random()
        if r < 0.6:
            op = rng.choice(["+", "-", "*", "+", "-"])
            return "(%s %s %s)" % (self.iexpr(depth - 1), op, self.iexpr(depth - 1))
        if r < 0.72:
            return "(%s %s %s)" % (self.iexpr(depth - 1), rng.choice(["DIV", "MOD"]),
                                   self.iexpr(depth - 1))
        if r < 0.85:
            return "%s(%s)" % (rng.choice(["abs", "sign"]), self.iexpr(depth - 1))
        if self.use_fn:
            return "F(%s, %s)" % (self.iexpr(depth - 1), self.iexpr(depth - 1))
        return "(-%s)" % self.atom()

    def bexpr(self) -> str:
        rng = self.rng
        r = rng.random()
        if r < 0.7:
            return "%s %s %s" % (self.iexpr(1), rng.choice(["=", "#", "<", "<=", ">", ">="]),
                                 self.iexpr(1))
        if r < 0.8:
            return "odd(%s)" % self.iexpr(1)
        if r < 0.9:
            return "b"
        return "(%s) AND (%s)" % (self.bexpr(), self.bexpr())

    def block(self, depth: int, in_loop: bool) -> list:
        out = []
        n = self.rng.randint(1, 4)
        for _ in range(n):
            if self.budget <= 0:
                break
            out.append(self.stmt(depth, in_loop))
        return out or ["u := %d" % self.rng.randint(0, 2)]

    def stmt(self, depth: int, in_loop: bool) -> str:
        rng = self.rng
        self.budget -= 1
        r = rng.random()
        if depth >= 3:
            r = r * 0.5
        if r < 0.32:
            return "%s := %s" % (self.var(), self.iexpr())
        if r < 0.38:
            return "a[%s] := %s" % (rng.choice(["1", "2", "3", self.var()]), self.iexpr(1))
        if r < 0.42:
            return "b := %s" % self.bexpr()
        if r < 0.5:
            return "write(%s)" % self.iexpr(1)
        if r < 0.54:
            return "%s(%s)" % (rng.choice(["INC", "DEC"]), self.var())
        if r < 0.72:
            text = "IF %s THEN %s" % (self.bexpr(), "; ".join(self.block(depth + 1, in_loop)))
            if rng.random() < 0.6:
                text += " ELSE " + "; ".join(self.block(depth + 1, in_loop))
            return text + " END"
        if r < 0.8:
            arms = " | ".join("%d: %s" % (k, "; ".join(self.block(depth + 1, in_loop)))
                              for k in rng.sample(range(-1, 3), rng.randint(1, 2)))
            return "CASE %s OF %s ELSE %s END" % (self.iexpr(1), arms,
                                                   "; ".join(self.block(depth + 1, in_loop)))
        if r < 0.92:
            k = "k%d" % self.counters
            self.counters += 1
            body = self.block(depth + 1, True)
            return "%s := 0; WHILE %s < %d DO %s; INC(%s) END" % (
                k, k, rng.randint(1, 3), "; ".join(body), k)
        if in_loop and r < 0.96:
            return "IF %s THEN EXIT END" % self.bexpr()
        k = "k%d" % self.counters
        self.counters += 1
        body = self.block(depth + 1, True)
        return "%s := 0; LOOP IF %s > %d THEN EXIT END; %s; INC(%s) END" % (
            k, k, rng.randint(0, 2), "; ".join(body), k)

    def inputs(self) -> list:
        return input_sequences(self.domain, self.reads)


def random_program(seed: int, **kw) -> str:
    return ProgramGenerator(seed=seed, **kw).program()


def load_random(seed: int, **kw) -> CoreProgram:
    return load(random_program(seed, **kw))
