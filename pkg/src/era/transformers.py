"""Abstract semantics of single statements over equality states.

Control structure (branches, loops, calls into function bodies) is driven by
the engine; this module supplies the state-level steps it composes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .completion import TypeInfo, complete
from .eqstate import (FALSE, TOP, TRUE, Apply, Builder, Const, EqState, Fun,
                      Omega, Var, evaluate, int_const, normalize)
from .frontend import (ArrayLit, ArrayType, Binary, BoolLit, Call, CharLit,
                       Field, IntType, Index, Name, Num, Scope, Unary)
from .ops import BUILTIN_FUNCTIONS, INT_MAX

PRIME = "'"


def primed(name: str) -> str:
    return name + PRIME


def is_artificial(sym) -> bool:
    """Primed copies, omegas and hidden function variables."""
    if isinstance(sym, Omega):
        return True
    if isinstance(sym, Var):
        return sym.name.endswith(PRIME) or "$" in sym.name
    return False


@dataclass
class Context:
    """Settings and side channels shared by the transformers of one run."""

    types: TypeInfo = field(default_factory=TypeInfo)
    level: int = 2
    strict: bool = True
    primed: bool = True
    call: Callable | None = None    # (state, function name, arg terms) -> state
    notes: list = field(default_factory=list)
    omegas: dict = field(default_factory=dict)

    def omega(self, site) -> Omega:
        """One omega per introduction site, stable across passes."""
        if site not in self.omegas:
            self.omegas[site] = Omega(len(self.omegas) + 1)
        return self.omegas[site]

    def complete(self, s: EqState) -> EqState:
        out = complete(s, self.level, self.types, self.strict)
        self.notes.extend(out.notes)
        return out.state


# ---------------------------------------------------------------- terms

def term_of(e, scope: Scope):
    """The program term of an expression; user calls become applications
    of the function symbol."""
    if isinstance(e, Num):
        return int_const(e.value)
    if isinstance(e, BoolLit):
        return TRUE if e.value else FALSE
    if isinstance(e, CharLit):
        return Const("char", e.value)
    if isinstance(e, Name):
        return Var(scope.qualify(e.id))
    if isinstance(e, Index):
        return normalize(Fun("elm", (term_of(e.base, scope), term_of(e.index, scope))))
    if isinstance(e, Field):
        return Fun("fld", (term_of(e.base, scope), Const("field", e.name)))
    if isinstance(e, Unary):
        return normalize(Fun(e.op, (term_of(e.operand, scope),)))
    if isinstance(e, Binary):
        return normalize(Fun(e.op, (term_of(e.left, scope), term_of(e.right, scope))))
    if isinstance(e, Call):
        return normalize(Fun(e.name, tuple(term_of(a, scope) for a in e.args)))
    if isinstance(e, ArrayLit):
        raise ValueError("array literal outside an initialiser")
    raise TypeError(e)


def user_calls(e) -> list:
    """Calls of user functions in e, innermost first."""
    out = []
    if isinstance(e, Call):
        for a in e.args:
            out.extend(user_calls(a))
        if e.name not in BUILTIN_FUNCTIONS:
            out.append(e)
    elif isinstance(e, (Index,)):
        out += user_calls(e.base) + user_calls(e.index)
    elif isinstance(e, Field):
        out += user_calls(e.base)
    elif isinstance(e, Unary):
        out += user_calls(e.operand)
    elif isinstance(e, Binary):
        out += user_calls(e.left) + user_calls(e.right)
    return out


def read_names(e) -> list[str]:
    """Scalar variable names whose value e reads."""
    if isinstance(e, Name):
        return [e.id]
    if isinstance(e, Index):
        return read_names(e.base) + read_names(e.index)
    if isinstance(e, Field):
        return read_names(e.base)
    if isinstance(e, Unary):
        return read_names(e.operand)
    if isinstance(e, Binary):
        return read_names(e.left) + read_names(e.right)
    if isinstance(e, Call):
        return [n for a in e.args for n in read_names(a)]
    return []


def target_reads(target) -> list[str]:
    """Names read while locating an assignment target (its indices)."""
    if isinstance(target, Index):
        return target_reads(target.base) + read_names(target.index)
    if isinstance(target, Field):
        return target_reads(target.base)
    return []


def root_name(target) -> str:
    while not isinstance(target, Name):
        target = target.base
    return target.id


# ---------------------------------------------------------------- expressions

def sem_expr(ctx: Context, s: EqState, e, scope: Scope) -> tuple[EqState, object]:
    """Evaluate e in s (after its calls) and complete; returns the state and
    the term of e."""
    if s.is_top:
        return s, None
    for c in user_calls(e):
        s = ctx.call(s, c.name, [term_of(a, scope) for a in c.args])
        if s.is_top:
            return s, None
    t = term_of(e, scope)
    s, _ = evaluate(s, t)
    return ctx.complete(s), t


def assume(ctx: Context, s: EqState, t, value: bool) -> EqState:
    """[s]{t == value}: the state on the branch where t has that value."""
    if s.is_top:
        return s
    b = Builder(s)
    c = b.add_term(t)
    b.merge(c, b.add(TRUE if value else FALSE))
    if b.top:
        return TOP
    return ctx.complete(b.freeze())


# ---------------------------------------------------------------- access terms

def acc_roots(s: EqState, t) -> set:
    """0-ary roots whose knowledge an update of access term t may change.

    A constant-index element write only disturbs elements whose index is not
    a different constant; the engine's update keeps the others, so the root
    set here names the whole array only when that is not the case.
    """
    if isinstance(t, Var):
        return {t}
    if isinstance(t, Fun) and t.op in ("elm", "fld", "val"):
        root = t
        while isinstance(root, Fun):
            root = root.args[0]
        if t.op == "elm" and isinstance(t.args[0], Var) and s.kind == "graph":
            k = s.where.get(t.args[1]) if isinstance(t.args[1], Const) else None
            if k is not None:
                return {t}
        return {root}
    return set()


def _selectors(b: Builder, target, scope: Scope) -> tuple[str, list]:
    """Root name and [(op, arg class, constant or None)] from the root out."""
    sels = []
    while not isinstance(target, Name):
        if isinstance(target, Index):
            c = b.add_term(term_of(target.index, scope))
            sels.append(("elm", c, b.const_of(c)))
        else:
            c = b.add(Const("field", target.name))
            sels.append(("fld", c, Const("field", target.name)))
        target = target.base
    sels.reverse()
    return scope.qualify(target.id), sels


def _update(b: Builder, old: int | None, sels: list, value: int) -> int:
    """Class of the aggregate that equals old except along sels."""
    if not sels:
        return value
    op, arg, k = sels[0]
    new = b.new_class()
    if old is not None and k is not None:
        old = b.find(old)
        for r in list(b.uses.get(old, ())):
            if r.op != op or b.find(r.args[0]) != old:
                continue
            other = b.const_of(r.args[1])
            if other is not None and other != k:
                home = b.where.get(b.canon(r))
                if home is not None:
                    b.add_to(Apply(op, (new, b.find(r.args[1]))), home)
    sub_old = None
    if old is not None and k is not None:
        sub_old = b.lookup(Apply(op, (old, arg)))
    sub_new = _update(b, sub_old, sels[1:], value)
    b.add_to(Apply(op, (b.find(new), b.find(arg))), sub_new)
    return b.find(new)


def _store(ctx: Context, s: EqState, target, scope: Scope, value_term, fresh: bool,
           prime: bool) -> EqState:
    """Bind target to the value (a term, or a fresh unknown when fresh)."""
    b = Builder(s)
    if fresh:
        e = b.new_class()
    else:
        e = b.add_term(value_term)
    if isinstance(target, Name):
        v = Var(scope.qualify(target.id))
        if prime:
            vp = Var(primed(v.name))
            b.remove_rhs([vp], protect=[e])
            old = b.where.get(v)
            if old is not None:
                b.add_to(vp, old)
        b.remove_rhs([v], protect=[e])
        b.add_to(v, e)
    else:
        name, sels = _selectors(b, target, scope)
        v = Var(name)
        old = b.where.get(v)
        root = _update(b, old, sels, e)
        b.remove_rhs([v], protect=[root, e])
        b.add_to(v, root)
    if b.top:
        return TOP
    return ctx.complete(b.freeze())


def sem_assign(ctx: Context, s: EqState, target, expr, scope: Scope) -> EqState:
    """target := expr, keeping the evaluated class and, for scalars, the
    previous value under the primed name."""
    s = _eval_target(ctx, s, target, scope)
    s, t = sem_expr(ctx, s, expr, scope)
    if s.is_top:
        return s
    return _store(ctx, s, target, scope, t, False,
                  ctx.primed and isinstance(target, Name))


def sem_read(ctx: Context, s: EqState, target, scope: Scope) -> EqState:
    """The target becomes unconstrained."""
    s = _eval_target(ctx, s, target, scope)
    if s.is_top:
        return s
    return _store(ctx, s, target, scope, None, True, False)


def sem_write(ctx: Context, s: EqState, e, scope: Scope) -> EqState:
    return sem_expr(ctx, s, e, scope)[0]


def _eval_target(ctx: Context, s: EqState, target, scope: Scope) -> EqState:
    while not isinstance(target, Name):
        if isinstance(target, Index):
            s, _ = sem_expr(ctx, s, target.index, scope)
            if s.is_top:
                return s
        target = target.base
    return s


def sem_exit_like(s: EqState) -> EqState:
    """Control does not fall through EXIT, RETURN or ERROR."""
    return TOP


# ---------------------------------------------------------------- declarations

def type_info(core) -> TypeInfo:
    """Declared ranges of every scalar and array variable, qualified."""
    ranges, arrays = {}, {}

    def add(name, ty):
        if isinstance(ty, IntType) and ty.lo is not None:
            ranges[name] = (ty.lo, ty.hi)
        elif isinstance(ty, ArrayType) and isinstance(ty.index, IntType) and ty.index.lo is not None:
            arrays[name] = (ty.index.lo, ty.index.hi)

    for n, ty in core.types.items():
        add(n, ty)
    for f in core.functions.values():
        for n, ty in f.types.items():
            add(f.name + "." + n, ty)
    return TypeInfo(ranges, arrays)


def constant_value(e, ty):
    """Const for an initialiser expression, or None when not constant."""
    if isinstance(e, ArrayLit):
        if not (isinstance(ty, ArrayType) and isinstance(ty.index, IntType)):
            return None
        items = [constant_value(x, ty.elem) for x in e.items]
        if any(i is None for i in items) or len(items) != ty.index.hi - ty.index.lo + 1:
            return None
        return Const("array", (ty.index.lo, tuple(items)))
    if isinstance(e, (Num, BoolLit, CharLit)):
        return term_of(e, Scope("", {}))
    if isinstance(e, Unary) and e.op == "neg" and isinstance(e.operand, Num):
        return int_const(-e.operand.value)
    return None


def bind_fresh(ctx: Context, b: Builder, name: str, site) -> None:
    """name := omega, in a builder."""
    v = Var(name)
    b.remove_rhs([v])
    b.add_to(v, b.add(ctx.omega(site)))


def sem_program(ctx: Context, core) -> EqState:
    """Initial state: every variable indefinite, initialisers evaluated."""
    b = Builder()
    for name, ty in core.types.items():
        init = core.inits.get(name)
        k = constant_value(init, ty) if init is not None else None
        if k is None:
            bind_fresh(ctx, b, name, ("init", name))
            continue
        c = b.add(k)
        b.add_to(Var(name), c)
        if k.kind == "array":
            lo, items = k.value
            for i, item in enumerate(items):
                b.add_to(Apply("elm", (b.find(c), b.add(int_const(lo + i)))), b.add(item))
    s = b.freeze(reduce_it=False)
    for name in core.inits:
        ty = core.types[name]
        if constant_value(core.inits[name], ty) is None:
            s, t = sem_expr(ctx, s, core.inits[name], core.scope)
            if s.is_top:
                return s
            s = _store(ctx, s, Name(name), core.scope, t, False, False)
    return ctx.complete(s)


__all__ = [
    "Context", "PRIME", "acc_roots", "assume", "bind_fresh", "constant_value",
    "is_artificial", "primed", "read_names", "root_name", "sem_assign",
    "sem_exit_like", "sem_expr", "sem_program", "sem_read", "sem_write",
    "target_reads", "term_of", "type_info", "user_calls", "INT_MAX",
]
