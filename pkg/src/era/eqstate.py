"""Abstract states as grammars of term equalities.

A state is Bottom (nothing computed), Top (inaccessible point) or a graph of
equality classes.  Each class is a set of right-hand sides; a right-hand side
is either a 0-ary symbol or an application of an operator to class ids.  Two
terms are known equal when both derive from the same class.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator

COMMUTATIVE = frozenset({"+", "*", "=", "#", "and", "or", "xor"})

BINARY_SYMBOLS = {
    "+": "+", "-": "-", "*": "*", "div": " DIV ", "mod": " MOD ",
    "=": "=", "#": "#", "<": "<", "<=": "<=", ">": ">", ">=": ">=",
    "and": " AND ", "or": " OR ", "xor": " XOR ",
}
_PREC = {"=": 1, "#": 1, "<": 1, "<=": 1, ">": 1, ">=": 1,
         "+": 2, "-": 2, "or": 2, "xor": 2,
         "*": 3, "div": 3, "mod": 3, "and": 3}


# ---------------------------------------------------------------- symbols

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    """A typed constant.  kind is one of int, bool, char, array, field."""

    kind: str
    value: object

    def __str__(self) -> str:
        if self.kind == "bool":
            return "TRUE" if self.value else "FALSE"
        if self.kind == "char":
            return "'%s'" % self.value
        if self.kind == "array":
            _, items = self.value
            return "{" + ",".join(str(c) for c in items) + "}"
        return str(self.value)


@dataclass(frozen=True)
class Omega:
    """The indefinite value; every introduction gets its own id."""

    id: int

    def __str__(self) -> str:
        return "ω%d" % self.id


@dataclass(frozen=True)
class Fun:
    """A term application op(args...)."""

    op: str
    args: tuple

    def __str__(self) -> str:
        return term_str(self)


@dataclass(frozen=True)
class Apply:
    """A class-level right-hand side: op applied to class ids."""

    op: str
    args: tuple

    def __str__(self) -> str:
        return "%s(%s)" % (self.op, ",".join("C%d" % a for a in self.args))


Leaf = (Var, Const, Omega)

TRUE = Const("bool", True)
FALSE = Const("bool", False)


def int_const(v: int) -> Const:
    return Const("int", v)


def is_leaf(x) -> bool:
    return isinstance(x, Leaf)


def T(op: str, *args) -> Fun:
    """Build a term, normalising argument order of commutative operators."""
    return normalize(Fun(op, tuple(args)))


def normalize(t):
    if isinstance(t, Fun):
        args = tuple(normalize(a) for a in t.args)
        if t.op in COMMUTATIVE:
            args = tuple(sorted(args, key=term_key))
        return Fun(t.op, args)
    return t


def term_height(t) -> int:
    if isinstance(t, Fun):
        return 1 + max((term_height(a) for a in t.args), default=0)
    return 1


def term_size(t) -> int:
    if isinstance(t, Fun):
        return 1 + sum(term_size(a) for a in t.args)
    return 1


def term_symbols(t) -> Iterator:
    """Yield every 0-ary symbol and operator name occurring in t."""
    if isinstance(t, Fun):
        yield t.op
        for a in t.args:
            yield from term_symbols(a)
    else:
        yield t


def term_str(t, prec: int = 0) -> str:
    if not isinstance(t, Fun):
        return str(t)
    op, args = t.op, t.args
    if op == "elm":
        return "%s[%s]" % (term_str(args[0], 5), term_str(args[1]))
    if op == "fld":
        return "%s.%s" % (term_str(args[0], 5), args[1].value)
    if op == "val":
        return "%s^" % term_str(args[0], 5)
    if op == "neg":
        return "-" + term_str(args[0], 4)
    if op == "not":
        return "NOT " + term_str(args[0], 4)
    if op in BINARY_SYMBOLS and len(args) == 2:
        p = _PREC[op]
        s = "%s%s%s" % (term_str(args[0], p), BINARY_SYMBOLS[op],
                        term_str(args[1], p + 1))
        return "(%s)" % s if p < prec else s
    return "%s(%s)" % (op, ",".join(term_str(a) for a in args))


def term_key(t) -> tuple:
    return (term_height(t), term_str(t))


def leaf_key(x) -> tuple:
    order = {Var: 0, Const: 1, Omega: 2}
    if isinstance(x, Omega):
        return (2, "", x.id)
    return (order[type(x)], str(x), 0)


def rhs_key(r) -> tuple:
    if isinstance(r, Apply):
        return (3, r.op, r.args)
    return leaf_key(r)


# ---------------------------------------------------------------- states

class EqState:
    """Immutable abstract state.  kind is "bottom", "top" or "graph"."""

    __slots__ = ("kind", "classes", "_where")

    def __init__(self, kind: str, classes: dict | None = None):
        self.kind = kind
        self.classes = classes or {}
        self._where = None

    @property
    def is_top(self) -> bool:
        return self.kind == "top"

    @property
    def is_bottom(self) -> bool:
        return self.kind == "bottom"

    @property
    def where(self) -> dict:
        """Map from right-hand side to the class holding it."""
        if self._where is None:
            self._where = {r: c for c, rs in self.classes.items() for r in rs}
        return self._where

    def class_of_leaf(self, sym) -> int | None:
        return self.where.get(sym)

    def leaves(self, cid: int) -> list:
        return sorted((r for r in self.classes[cid] if not isinstance(r, Apply)),
                      key=leaf_key)

    def const_of(self, cid: int) -> Const | None:
        for r in self.classes.get(cid, ()):
            if isinstance(r, Const):
                return r
        return None

    def __repr__(self) -> str:
        return "EqState<%s>" % dump(self).replace("\n", "; ")

    def __eq__(self, other) -> bool:
        return isinstance(other, EqState) and canonical(self) == canonical(other)

    def __hash__(self) -> int:
        return hash(canonical(self))


BOTTOM = EqState("bottom")
TOP = EqState("top")


def from_classes(classes: Iterable[Iterable]) -> EqState:
    """Build a state from explicit classes, for tests and examples.

    Each class is an iterable of leaves or (op, [class index...]) pairs that
    refer to classes by their position in the input.
    """
    classes = [list(c) for c in classes]
    out = {}
    for i, rs in enumerate(classes):
        out[i] = frozenset(
            Apply(r[0], _sort_args(r[0], tuple(r[1]))) if isinstance(r, tuple) else r
            for r in rs)
    return EqState("graph", out)


def _sort_args(op: str, args: tuple) -> tuple:
    return tuple(sorted(args)) if op in COMMUTATIVE else args


# ---------------------------------------------------------------- builder

class Builder:
    """Mutable working copy of a graph state with congruence closure.

    Class ids of the source state are kept; merged classes are reachable
    through find().
    """

    def __init__(self, state: EqState = BOTTOM):
        if state.is_top:
            raise ValueError("cannot edit the inaccessible state")
        self.cls: dict[int, set] = {c: set(rs) for c, rs in state.classes.items()}
        self.where: dict = {}
        self.uses: dict[int, set] = defaultdict(set)
        for c, rs in self.cls.items():
            for r in rs:
                self.where[r] = c
                if isinstance(r, Apply):
                    for a in set(r.args):
                        self.uses[a].add(r)
        self.parent: dict[int, int] = {}
        self.next_id = max(self.cls, default=-1) + 1
        self.top = False
        self.clash: tuple | None = None
        self.pending: list = []

    # -- lookup

    def find(self, c: int) -> int:
        root = c
        while root in self.parent:
            root = self.parent[root]
        while c != root:
            nxt = self.parent[c]
            self.parent[c] = root
            c = nxt
        return root

    def canon(self, r):
        if isinstance(r, Apply):
            return Apply(r.op, _sort_args(r.op, tuple(self.find(a) for a in r.args)))
        return r

    def lookup(self, r) -> int | None:
        return self.where.get(self.canon(r))

    def const_of(self, c: int) -> Const | None:
        for r in self.cls.get(self.find(c), ()):
            if isinstance(r, Const):
                return r
        return None

    # -- growth

    def add(self, r) -> int:
        r = self.canon(r)
        c = self.where.get(r)
        if c is not None:
            return c
        c = self.next_id
        self.next_id += 1
        self.cls[c] = {r}
        self._link(r, c)
        return c

    def add_to(self, r, c: int) -> int:
        """Put r into class c, merging if r already lives elsewhere."""
        c = self.find(c)
        r = self.canon(r)
        old = self.where.get(r)
        if old is None:
            if isinstance(r, Const):
                have = self.const_of(c)
                if have is not None and have != r:
                    self.top = True
                    self.clash = (have, r)
            self.cls[c].add(r)
            self._link(r, c)
            return c
        return self.merge(old, c)

    def add_term(self, t) -> int:
        if isinstance(t, Fun):
            return self.add(Apply(t.op, tuple(self.add_term(a) for a in t.args)))
        return self.add(t)

    def new_class(self) -> int:
        c = self.next_id
        self.next_id += 1
        self.cls[c] = set()
        return c

    def _link(self, r, c: int) -> None:
        self.where[r] = c
        if isinstance(r, Apply):
            for a in set(r.args):
                self.uses[a].add(r)

    def _unlink(self, r) -> None:
        self.where.pop(r, None)
        if isinstance(r, Apply):
            for a in set(r.args):
                s = self.uses.get(a)
                if s is not None:
                    s.discard(r)

    # -- identification

    def merge(self, a: int, b: int) -> int:
        self.pending.append((a, b))
        self._close()
        return self.find(a)

    def _close(self) -> None:
        while self.pending:
            a, b = self.pending.pop()
            a, b = self.find(a), self.find(b)
            if a == b:
                continue
            if len(self.cls[a]) + len(self.uses[a]) < len(self.cls[b]) + len(self.uses[b]):
                a, b = b, a
            ca, cb = self.const_of(a), self.const_of(b)
            if ca is not None and cb is not None and ca != cb:
                self.top = True
                self.clash = (ca, cb)
            self.parent[b] = a
            for r in self.cls.pop(b):
                self.cls[a].add(r)
                self.where[r] = a
            moved = self.uses.pop(b, set())
            for r in moved:
                if self.where.get(r) is None:
                    continue
                home = self.find(self.where[r])
                self._unlink(r)
                self.cls[home].discard(r)
                r2 = self.canon(r)
                other = self.where.get(r2)
                if other is None:
                    self.cls[home].add(r2)
                    self._link(r2, home)
                elif self.find(other) != home:
                    self.pending.append((home, other))

    # -- removal

    def remove_rhs(self, rs: Iterable, protect: Iterable[int] = ()) -> None:
        """Delete right-hand sides; apps over emptied classes cascade away."""
        keep = {self.find(c) for c in protect}
        work = list(rs)
        while work:
            r = self.canon(work.pop())
            c = self.where.get(r)
            if c is None:
                continue
            self._unlink(r)
            self.cls[c].discard(r)
            if not self.cls[c] and c not in keep:
                del self.cls[c]
                work.extend(self.uses.pop(c, ()))

    def remove_class(self, c: int) -> None:
        c = self.find(c)
        if c in self.cls:
            self.remove_rhs(list(self.cls[c]))

    # -- output

    def freeze(self, reduce_it: bool = True, protect: Iterable[int] = ()) -> EqState:
        if self.top:
            return TOP
        classes = {c: frozenset(rs) for c, rs in self.cls.items() if rs}
        st = EqState("graph", classes)
        if reduce_it:
            return reduce(st, protect={self.find(p) for p in protect})
        return st if classes else BOTTOM


# ---------------------------------------------------------------- operations

def reduce(s: EqState, protect: Iterable[int] = ()) -> EqState:
    """Drop unproductive classes and useless single-term classes."""
    if s.kind != "graph":
        return s
    keep = set(protect)
    classes = {c: set(rs) for c, rs in s.classes.items()}
    # Productive classes: least fixpoint.
    prod: set[int] = set()
    changed = True
    while changed:
        changed = False
        for c, rs in classes.items():
            if c in prod:
                continue
            for r in rs:
                if not isinstance(r, Apply) or all(a in prod for a in r.args):
                    prod.add(c)
                    changed = True
                    break
    for c in list(classes):
        if c not in prod:
            del classes[c]
            continue
        classes[c] = {r for r in classes[c]
                      if not isinstance(r, Apply) or all(a in prod for a in r.args)}
    # Useless classes: a single derived term that is nobody's argument.
    refs: dict[int, int] = defaultdict(int)
    for rs in classes.values():
        for r in rs:
            if isinstance(r, Apply):
                for a in set(r.args):
                    refs[a] += 1
    single: dict[int, bool] = {}

    def is_single(c: int, stack=()) -> bool:
        if c in single:
            return single[c]
        rs = classes[c]
        if len(rs) != 1 or c in stack:
            single[c] = False
            return False
        (r,) = rs
        ok = not isinstance(r, Apply) or all(is_single(a, stack + (c,)) for a in r.args)
        single[c] = ok
        return ok

    work = [c for c in classes if refs[c] == 0]
    while work:
        c = work.pop()
        if c not in classes or c in keep or refs[c] != 0 or not is_single(c):
            continue
        (r,) = classes.pop(c)
        if isinstance(r, Apply):
            for a in set(r.args):
                refs[a] -= 1
                if refs[a] == 0:
                    work.append(a)
    if not classes:
        return BOTTOM
    return EqState("graph", {c: frozenset(rs) for c, rs in classes.items()})


def remove(s: EqState, roots: Iterable, protect: Iterable[int] = ()) -> EqState:
    """Forget every right-hand side whose symbol is in roots.

    roots may hold 0-ary symbols, operator names, or Apply entries.
    """
    if s.kind != "graph":
        return s
    b = Builder(s)
    b.remove_rhs(matching_rhs(s, roots), protect)
    return b.freeze(protect=protect)


def matching_rhs(s: EqState, roots: Iterable) -> list:
    roots = set(roots)
    out = []
    for rs in s.classes.values():
        for r in rs:
            if r in roots or (isinstance(r, Apply) and r.op in roots):
                out.append(r)
    return out


def evaluate(s: EqState, t) -> tuple[EqState, int | None]:
    """Return a state knowing t, and the class of t in it."""
    if s.is_top:
        return s, None
    b = Builder(s)
    c = b.add_term(t)
    return b.freeze(reduce_it=False), c


def identify(s: EqState, c1: int, c2: int) -> EqState:
    if s.kind != "graph":
        return s
    if c1 == c2:
        return s
    b = Builder(s)
    b.merge(c1, c2)
    return b.freeze()


def identify_terms(s: EqState, t1, t2) -> EqState:
    if s.is_top:
        return s
    b = Builder(s)
    b.merge(b.add_term(t1), b.add_term(t2))
    return b.freeze()


def resolve(s: EqState, t) -> int | None:
    """Class deriving t, or None when t is not known."""
    if s.kind != "graph":
        return None
    if isinstance(t, Fun):
        args = []
        for a in t.args:
            c = resolve(s, a)
            if c is None:
                return None
            args.append(c)
        return s.where.get(Apply(t.op, _sort_args(t.op, tuple(args))))
    return s.where.get(t)


def knows(s: EqState, t1, t2) -> bool:
    if s.is_top:
        return True
    c1 = resolve(s, t1)
    return c1 is not None and c1 == resolve(s, t2)


def grammar_size(s: EqState) -> float:
    if s.is_top:
        return math.inf
    return sum(len(rs) for rs in s.classes.values())


def intersect(s1: EqState, s2: EqState) -> EqState:
    """Product construction: the state knowing what both operands know."""
    if s1.is_top:
        return s2
    if s2.is_top:
        return s1
    if s1.is_bottom or s2.is_bottom:
        return BOTTOM
    w2 = s2.where
    ids: dict[tuple, int] = {}
    out: dict[int, set] = {}

    def pair(a: int, b: int) -> int:
        k = (a, b)
        if k not in ids:
            ids[k] = len(ids)
            out[ids[k]] = set()
        return ids[k]

    apps1 = []
    for c1, rs in s1.classes.items():
        for r in rs:
            if isinstance(r, Apply):
                apps1.append((c1, r))
            elif r in w2:
                out[pair(c1, w2[r])].add(r)
    apps2: dict[tuple, list] = defaultdict(list)
    for c2, rs in s2.classes.items():
        for r in rs:
            if isinstance(r, Apply):
                apps2[(r.op, len(r.args))].append((c2, r))
    done: set = set()
    changed = True
    while changed:
        changed = False
        for c1, r1 in apps1:
            for c2, r2 in apps2.get((r1.op, len(r1.args)), ()):
                orders = [r2.args]
                if r1.op in COMMUTATIVE and len(r1.args) == 2 and r2.args[0] != r2.args[1]:
                    orders.append((r2.args[1], r2.args[0]))
                for o in orders:
                    key = (r1, r2, o)
                    if key in done or not all((a, b) in ids for a, b in zip(r1.args, o)):
                        continue
                    done.add(key)
                    args = tuple(ids[(a, b)] for a, b in zip(r1.args, o))
                    out[pair(c1, c2)].add(Apply(r1.op, _sort_args(r1.op, args)))
                    changed = True
    return reduce(EqState("graph", {c: frozenset(rs) for c, rs in out.items()}))


def canonical(s: EqState) -> tuple:
    """Rename-invariant serialisation of a state."""
    if s.kind != "graph":
        return (s.kind,)
    s = reduce(s)
    if s.kind != "graph":
        return (s.kind,)
    order = _canonical_order(s)
    label = {c: i for i, c in enumerate(order)}
    rows = []
    for c in order:
        rows.append(tuple(sorted(_canon_rhs(r, label) for r in s.classes[c])))
    return ("graph",) + tuple(rows)


def _canon_rhs(r, label: dict) -> tuple:
    if isinstance(r, Apply):
        return (3, r.op, _sort_args(r.op, tuple(label[a] for a in r.args)))
    return leaf_key(r)


def _canonical_order(s: EqState) -> list[int]:
    color = {}
    for c, rs in s.classes.items():
        color[c] = tuple(sorted(leaf_key(r) for r in rs if not isinstance(r, Apply)))
    color = _rank(color)
    while True:
        sig = {}
        for c, rs in s.classes.items():
            apps = sorted((r.op, _sort_args(r.op, tuple(color[a] for a in r.args)))
                          for r in rs if isinstance(r, Apply))
            sig[c] = (color[c], tuple(apps))
        new = _rank(sig)
        if len(set(new.values())) == len(set(color.values())):
            color = new
            break
        color = new
    # Productive deterministic grammars refine to singletons; any leftover
    # ties are broken by the old ids, which keeps the result deterministic.
    return sorted(s.classes, key=lambda c: (color[c], c))


def _rank(sig: dict) -> dict:
    values = sorted(set(sig.values()))
    rank = {v: i for i, v in enumerate(values)}
    return {c: rank[v] for c, v in sig.items()}


def includes(s1: EqState, s2: EqState) -> bool:
    """True when s1 knows every equality s2 knows."""
    return canonical(intersect(s1, s2)) == canonical(s2)


def relabel(s: EqState) -> EqState:
    """Return the state with class ids 1..n in canonical order."""
    if s.kind != "graph":
        return s
    order = _canonical_order(s)
    label = {c: i + 1 for i, c in enumerate(order)}
    return EqState("graph", {
        label[c]: frozenset(
            Apply(r.op, _sort_args(r.op, tuple(label[a] for a in r.args)))
            if isinstance(r, Apply) else r
            for r in rs)
        for c, rs in s.classes.items()})


def dump(s: EqState) -> str:
    """One class per line, "C3: x, f(C1,C2)"; Top prints ⊤ and Bottom ⊥."""
    if s.is_top:
        return "⊤"
    if s.is_bottom or not s.classes:
        return "⊥"
    s = relabel(s)
    lines = []
    for c in sorted(s.classes):
        rs = sorted(s.classes[c], key=rhs_key)
        lines.append("C%d: %s" % (c, ", ".join(str(r) for r in rs)))
    return "\n".join(lines)


# ---------------------------------------------------------------- enumeration

def class_terms(s: EqState, depth: int, accept=None, limit: int = 4000) -> dict[int, list]:
    """Terms of height <= depth derived by each class.

    accept filters 0-ary symbols (for example to hide artificial ones).
    """
    if s.kind != "graph":
        return {}
    memo: dict[tuple, list] = {}

    def terms(c: int, d: int) -> list:
        key = (c, d)
        if key in memo:
            return memo[key]
        memo[key] = []
        acc: dict = {}
        for r in s.classes[c]:
            if not isinstance(r, Apply):
                if accept is None or accept(r):
                    acc[r] = None
            elif d > 1:
                pools = [terms(a, d - 1) for a in r.args]
                if any(not p for p in pools):
                    continue
                for combo in product(*pools):
                    acc[normalize(Fun(r.op, combo))] = None
                    if len(acc) >= limit:
                        break
            if len(acc) >= limit:
                break
        res = sorted(acc, key=term_key)
        memo[key] = res
        return res

    return {c: terms(c, depth) for c in s.classes}


def enumerate_known_equalities(s: EqState, depth: int, accept=None) -> set[tuple]:
    """All pairs of distinct terms of height <= depth known to be equal."""
    out = set()
    for ts in class_terms(s, depth, accept).values():
        for i in range(len(ts)):
            for j in range(i + 1, len(ts)):
                out.add((ts[i], ts[j]))
    return out
