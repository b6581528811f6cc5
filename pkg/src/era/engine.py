"""Structured fixpoint driver.

Statements are interpreted recursively over the core program.  A loop is
first run once from its entry state (the peeled pass), then iterated from
the state after that pass, widening at every step until the head state
repeats.  Exit states of the peeled pass and of the stabilised iteration are
kept as two disjuncts and merged at the next join.  States are recorded per
program point only in the final passes; findings of the "+" stage are logged
in every pass.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .completion import TypeInfo
from .eqstate import (TOP, Builder, EqState, Fun, Omega, Var, canonical,
                      grammar_size, includes, intersect, normalize)
from .frontend import (CAssign, Cfg, CError, CExit, CIf, CLoop, CoreProgram,
                       CRead, CReturn, CWrite, Scope, build_cfg)
from .transformers import (Context, assume, bind_fresh, read_names, sem_assign,
                           sem_expr, sem_program, sem_read, sem_write,
                           target_reads, type_info)
from .widening import WideningConfig, default_threshold, fvs_transform, widen

HARD_LIMIT = 200


@dataclass(frozen=True)
class EngineConfig:
    level: int = 2
    widening: bool = True
    threshold: int | None = None    # None means 8 per declared variable
    cap: int = 64
    primed: bool = True
    strict: bool = True

    def __post_init__(self):
        if self.level not in (0, 1, 2):
            raise ValueError("interpretation level must be 0, 1 or 2")
        if self.threshold is not None and self.threshold < 1:
            raise ValueError("widening threshold must be at least 1")
        if self.cap < 1:
            raise ValueError("iteration cap must be positive")


class Divergence(Exception):
    """The loop head did not stabilise within the cap."""

    def __init__(self, line: int, sizes: list):
        self.line = line
        self.sizes = sizes
        super().__init__("no fixpoint at line %d after %d iterations; head sizes %s"
                         % (line, len(sizes), sizes))


@dataclass(frozen=True)
class PlusNote:
    """A finding logged while analysing: indefinite-value or eval-error."""

    kind: str
    point: int
    sid: int
    unit: str
    detail: str


@dataclass
class LoopStats:
    line: int
    col: int
    runs: int = 0
    iterations: int = 0
    widenings: int = 0
    max_size: float = 0
    sizes: list = field(default_factory=list)


@dataclass
class AnalysisResult:
    program: CoreProgram
    cfg: Cfg
    states: dict            # point -> EqState; absent means inaccessible
    plus: list              # PlusNote
    stats: dict             # loop sid -> LoopStats
    config: EngineConfig
    types: TypeInfo
    engine: "_Engine" = field(repr=False, default=None)
    seconds: float = 0.0

    def state(self, point: int) -> EqState:
        return self.states.get(point, TOP)

    def scope_of(self, unit: str) -> Scope:
        if unit:
            return self.program.functions[unit].scope
        return self.program.scope

    def evaluate(self, s: EqState, expr, unit: str = "") -> tuple[EqState, object]:
        """Evaluate an expression in a state without logging anything."""
        return self.engine.quiet_eval(s, expr, self.scope_of(unit))


def collapse(ds) -> EqState:
    out = TOP
    for d in ds:
        out = intersect(out, d)
    return out


class _Engine:
    def __init__(self, core: CoreProgram, config: EngineConfig):
        self.core = core
        self.config = config
        self.cfg = build_cfg(core)
        self.types = type_info(core)
        self.ctx = Context(self.types, config.level, config.strict, config.primed, self.call)
        self.states: dict[int, EqState] = {}
        self.plus: dict[tuple, PlusNote] = {}
        self.stats: dict[int, LoopStats] = {}
        self.loop_exits: list[list] = []
        self.returns: list[list] = []
        self.rec = True
        self.logging = True

    # -- bookkeeping

    def record(self, point: int, ds) -> None:
        if self.rec and ds:
            self.states[point] = intersect(self.states.get(point, TOP), collapse(ds))

    def log(self, kind: str, point: int, sid: int, unit: str, detail: str) -> None:
        if self.logging:
            key = (kind, point, detail)
            if key not in self.plus:
                self.plus[key] = PlusNote(kind, point, sid, unit, detail)

    def threshold(self, unit: str) -> int:
        if self.config.threshold is not None:
            return self.config.threshold
        if unit:
            f = self.core.functions[unit]
            return default_threshold(len(f.params) + len(f.locals))
        return default_threshold(len(self.core.types))

    # -- driver

    def run(self) -> None:
        s0 = sem_program(self.ctx, self.core)
        entry = self.cfg.entries[""]
        ds = () if s0.is_top else (s0,)
        self.record(entry, ds)
        self.block(self.core.body, ds, "", self.core.scope)

    def quiet_eval(self, s: EqState, expr, scope: Scope):
        saved = (self.rec, self.logging, self.ctx.notes)
        self.rec, self.logging, self.ctx.notes = False, False, []
        try:
            return sem_expr(self.ctx, s, expr, scope)
        finally:
            self.rec, self.logging, self.ctx.notes = saved

    def block(self, body: list, ds: tuple, unit: str, scope: Scope) -> tuple:
        for s in body:
            if not ds:
                return ()
            ds = self.stmt(s, ds, unit, scope)
        if body:
            self.record(self.cfg.post[body[-1].sid], ds)
        return ds

    def stmt(self, s, ds: tuple, unit: str, scope: Scope) -> tuple:
        pre = self.cfg.pre[s.sid]
        self.record(pre, ds)
        if isinstance(s, (CAssign, CRead, CWrite)):
            return self.simple(s, ds, pre, unit, scope)
        if isinstance(s, CIf):
            return self.branch(s, ds, pre, unit, scope)
        if isinstance(s, CLoop):
            return self.loop(s, ds, unit, scope)
        if isinstance(s, CExit):
            self.loop_exits[-1].extend(ds)
            return ()
        if isinstance(s, CReturn):
            self.do_return(s, ds, pre, unit, scope)
            return ()
        if isinstance(s, CError):
            return ()
        raise TypeError(s)

    def transfer(self, d: EqState, s, scope: Scope) -> EqState:
        if isinstance(s, CAssign):
            return sem_assign(self.ctx, d, s.target, s.expr, scope)
        if isinstance(s, CRead):
            return sem_read(self.ctx, d, s.target, scope)
        return sem_write(self.ctx, d, s.expr, scope)

    def reads(self, s) -> list[str]:
        if isinstance(s, CAssign):
            return target_reads(s.target) + read_names(s.expr)
        if isinstance(s, CRead):
            return target_reads(s.target)
        if isinstance(s, CWrite):
            return read_names(s.expr)
        if isinstance(s, CIf):
            return read_names(s.cond)
        if isinstance(s, CReturn) and s.expr is not None:
            return read_names(s.expr)
        return []

    def check(self, s, d: EqState, notes: list, failed: bool, pre: int, unit: str,
              scope: Scope) -> None:
        """Log the "+" findings of one statement on one disjunct."""
        fatal = [n for n in notes if n.fatal]
        if fatal:
            for n in fatal:
                self.log("eval-error", pre, s.sid, unit, "%s: %s" % (n.kind, n.detail))
            return
        if failed or d.kind != "graph":
            return
        for name in dict.fromkeys(self.reads(s)):
            c = d.where.get(Var(scope.qualify(name)))
            if c is not None and any(isinstance(r, Omega) for r in d.classes[c]):
                self.log("indefinite-value", pre, s.sid, unit, name)

    def simple(self, s, ds: tuple, pre: int, unit: str, scope: Scope) -> tuple:
        out = []
        for d in ds:
            notes = self.ctx.notes = []
            r = self.transfer(d, s, scope)
            self.check(s, d, notes, r.is_top, pre, unit, scope)
            if not r.is_top:
                out.append(r)
        return tuple(out)

    def branch(self, s: CIf, ds: tuple, pre: int, unit: str, scope: Scope) -> tuple:
        then_in, else_in = [], []
        for d in ds:
            notes = self.ctx.notes = []
            d1, t = sem_expr(self.ctx, d, s.cond, scope)
            self.check(s, d, notes, d1.is_top, pre, unit, scope)
            if d1.is_top:
                continue
            self.ctx.notes = []
            for value, acc in ((True, then_in), (False, else_in)):
                b = assume(self.ctx, d1, t, value)
                if not b.is_top:
                    acc.append(b)
        te, _, ee, _ = self.cfg.branch[s.sid]
        self.record(te, then_in)
        self.record(ee, else_in)
        out = self.block(s.then, tuple(then_in), unit, scope)
        out += self.block(s.else_, tuple(else_in), unit, scope)
        j = collapse(out)
        return () if j.is_top else (j,)

    def loop(self, s: CLoop, ds: tuple, unit: str, scope: Scope) -> tuple:
        head = self.cfg.loops[s.sid]
        entry = collapse(ds)
        if entry.is_top:
            return ()
        st = self.stats.setdefault(s.sid, LoopStats(s.span.line, s.span.col))
        st.runs += 1
        d = self.threshold(unit)
        wcfg = WideningConfig(d, self.config.widening, self.config.cap)
        # Peeled pass from the entry state.
        self.loop_exits.append([])
        self.record(head, (entry,))
        h = collapse(self.block(s.body, (entry,), unit, scope))
        first_exit = collapse(self.loop_exits.pop())
        second_exit = TOP
        iterations = 1
        sizes = [grammar_size(h)]
        if not h.is_top:
            saved = self.rec
            self.rec = False
            try:
                while True:
                    iterations += 1
                    self.loop_exits.append([])
                    b = collapse(self.block(s.body, (h,), unit, scope))
                    self.loop_exits.pop()
                    if grammar_size(h) > d and grammar_size(b) > d and wcfg.enabled:
                        st.widenings += 1
                    hn = widen(h, b, wcfg)
                    if canonical(hn) == canonical(h):
                        break
                    h = hn
                    sizes.append(grammar_size(h))
                    if not wcfg.enabled and iterations >= wcfg.cap:
                        raise Divergence(s.span.line, sizes)
                    if iterations >= HARD_LIMIT:
                        h = fvs_transform(h)
            finally:
                self.rec = saved
            # Recording pass over the stabilised head.
            self.loop_exits.append([])
            self.record(head, (h,))
            self.block(s.body, (h,), unit, scope)
            second_exit = collapse(self.loop_exits.pop())
        st.iterations = max(st.iterations, iterations)
        st.max_size = max([st.max_size] + [x for x in sizes if x != float("inf")])
        st.sizes = sizes
        out = [e for e in (first_exit, second_exit) if not e.is_top]
        if len(out) == 2 and canonical(out[0]) == canonical(out[1]):
            out = out[:1]
        return tuple(out)

    def do_return(self, s: CReturn, ds: tuple, pre: int, unit: str, scope: Scope) -> None:
        for d in ds:
            if s.expr is None:
                self.returns[-1].append(d)
                continue
            notes = self.ctx.notes = []
            d1, t = sem_expr(self.ctx, d, s.expr, scope)
            self.check(s, d, notes, d1.is_top, pre, unit, scope)
            if d1.is_top:
                continue
            b = Builder(d1)
            b.add_to(Var(unit + ".$ret"), b.add_term(t))
            self.returns[-1].append(b.freeze())

    # -- calls

    def call(self, s: EqState, name: str, args: list) -> EqState:
        f = self.core.functions[name]
        scope = f.scope
        saved_notes = self.ctx.notes
        b = Builder(s)
        for p, t in zip(f.params, args):
            c = b.add_term(t)
            v = Var(scope.qualify(p))
            b.remove_rhs([v], protect=[c])
            b.add_to(v, c)
        for n in f.locals:
            bind_fresh(self.ctx, b, scope.qualify(n), ("local", name, n))
        self.ctx.notes = []
        start = self.ctx.complete(b.freeze())
        self.returns.append([])
        if not start.is_top:
            self.record(self.cfg.entries[name], (start,))
            rest = self.block(f.body, (start,), name, scope)
            if not f.has_result:
                self.returns[-1].extend(rest)
        rets = self.returns.pop()
        self.record(self.cfg.exits[name], rets)
        self.ctx.notes = saved_notes
        r = collapse(rets)
        if r.is_top:
            return TOP
        b = Builder(r)
        keep = []
        if f.has_result:
            call_class = b.add_term(normalize(Fun(name, tuple(args))))
            ret = b.where.get(Var(name + ".$ret"))
            if ret is not None:
                b.merge(call_class, ret)
            keep.append(call_class)
        prefix = name + "."
        local = [r for r in b.where if isinstance(r, Var) and r.name.startswith(prefix)]
        b.remove_rhs(local, protect=keep)
        if b.top:
            return TOP
        return self.ctx.complete(b.freeze())


def analyze(core: CoreProgram, config: EngineConfig | None = None) -> AnalysisResult:
    """Run the analysis; raises Divergence when widening is off and a loop
    head keeps changing past the cap."""
    config = config or EngineConfig()
    t0 = time.perf_counter()
    eng = _Engine(core, config)
    eng.run()
    plus = sorted(eng.plus.values(), key=lambda n: (n.point, n.kind, n.detail))
    return AnalysisResult(core, eng.cfg, eng.states, plus, eng.stats, config,
                          eng.types, eng, time.perf_counter() - t0)


def fixpoint_holds(result: AnalysisResult, loop_sid: int) -> bool:
    """Re-running a loop body on its recorded head state stays inside it."""
    eng = result.engine
    s = next(x for x in _walk_all(result.program) if x.sid == loop_sid)
    head = result.cfg.loops[loop_sid]
    h = result.state(head)
    if h.is_top:
        return True
    unit = result.cfg.points[head].unit
    saved = (eng.rec, eng.logging)
    eng.rec, eng.logging = False, False
    try:
        eng.loop_exits.append([])
        b = collapse(eng.block(s.body, (h,), unit, result.scope_of(unit)))
        eng.loop_exits.pop()
    finally:
        eng.rec, eng.logging = saved
    return includes(b, h)


def _walk_all(core: CoreProgram):
    from .frontend import walk
    yield from walk(core.body)
    for f in core.functions.values():
        yield from walk(f.body)
