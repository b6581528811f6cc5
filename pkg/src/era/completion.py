"""Semantic completion: interpret primitive operators inside a state.

Level 0 adds nothing.  Level 1 folds constants, simplifies applications to
equal arguments and uses neutral and absorbing constants.  Level 2 adds
boolean and equality back-propagation, constant-offset normalisation and the
offset-monotone comparison rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .eqstate import (FALSE, TRUE, Apply, Builder, Const, EqState, Omega,
                      Var, int_const)
from .ops import INTERPRETED, PARTIAL, EvalError, apply_op, to_const, to_value

OFFSET_LIMIT = 1000
CREATION_LIMIT = 200
_ORDER = frozenset({"<", "<=", ">", ">="})


@dataclass(frozen=True)
class Note:
    """A completion finding; kind is division-by-zero, range-violation,
    inconsistency or indefinite-operand."""

    kind: str
    detail: str
    fatal: bool = True


@dataclass(frozen=True)
class TypeInfo:
    """Declared ranges that completion may check."""

    ranges: Mapping[str, tuple] = field(default_factory=dict)
    arrays: Mapping[str, tuple] = field(default_factory=dict)


@dataclass
class CompletionOutcome:
    state: EqState
    notes: list


def complete(s: EqState, level: int = 2, types: TypeInfo | None = None,
             strict: bool = True) -> CompletionOutcome:
    """Add the equalities implied by the interpretation, to a fixed point."""
    if s.kind != "graph" or level <= 0:
        return CompletionOutcome(s, [])
    b = Builder(s)
    run = _Run(b, level, types or TypeInfo(), strict)
    run.loop()
    if b.top:
        if not any(n.fatal for n in run.notes):
            run.notes.append(Note("inconsistency", "%s = %s" % b.clash if b.clash
                                  else "contradiction"))
        return CompletionOutcome(EqState("top"), run.notes)
    return CompletionOutcome(b.freeze(), run.notes)


class _Run:
    def __init__(self, b: Builder, level: int, types: TypeInfo, strict: bool):
        self.b = b
        self.level = level
        self.types = types
        self.strict = strict
        self.notes: list[Note] = []
        self.created = 0
        self.changed = False

    # -- helpers

    def fail(self, kind: str, detail: str) -> None:
        self.notes.append(Note(kind, detail))
        self.b.top = True

    def const(self, c: int):
        return self.b.const_of(c)

    def has_omega(self, c: int) -> bool:
        return any(isinstance(r, Omega) for r in self.b.cls.get(self.b.find(c), ()))

    def merge(self, a: int, c: int) -> None:
        if self.b.find(a) != self.b.find(c):
            self.b.merge(a, c)
            self.changed = True

    def put(self, r, c: int) -> None:
        before = self.b.where.get(self.b.canon(r))
        if before is None or self.b.find(before) != self.b.find(c):
            self.b.add_to(r, c)
            self.changed = True

    def create(self, r, c: int) -> None:
        if self.b.lookup(r) is None:
            if self.created >= CREATION_LIMIT:
                return
            self.created += 1
        self.put(r, c)

    # -- driver

    def loop(self) -> None:
        b = self.b
        while not b.top:
            self.changed = False
            self.check_ranges()
            if self.level >= 1 and self.types.arrays:
                self.aggregate_arrays()
            apps = [r for r in list(b.where) if isinstance(r, Apply)]
            for r in apps:
                if b.top:
                    return
                c = b.where.get(r)
                if c is None:
                    continue
                self.visit(r, c)
            if not b.top and self.level >= 2:
                self.compare_offsets()
            if not self.changed:
                return

    def check_ranges(self) -> None:
        b = self.b
        for name, (lo, hi) in self.types.ranges.items():
            c = b.where.get(Var(name))
            if c is None:
                continue
            k = b.const_of(c)
            if k is not None and k.kind == "int" and not lo <= k.value <= hi:
                self.fail("range-violation", "%s = %s outside [%d..%d]" % (name, k, lo, hi))
                return

    def aggregate_arrays(self) -> None:
        b = self.b
        for name, (lo, hi) in self.types.arrays.items():
            c = b.where.get(Var(name))
            if c is None or b.const_of(c) is not None:
                continue
            items = []
            for k in range(lo, hi + 1):
                kc = b.where.get(int_const(k))
                e = None if kc is None else b.where.get(b.canon(Apply("elm", (c, kc))))
                v = None if e is None else b.const_of(e)
                if v is None:
                    break
                items.append(v)
            else:
                self.put(Const("array", (lo, tuple(items))), c)

    def visit(self, r: Apply, c: int) -> None:
        op, args = r.op, r.args
        if op not in INTERPRETED:
            return
        b = self.b
        ks = [self.const(a) for a in args]
        # Definite errors.
        if op in ("div", "mod") and ks[1] is not None and ks[1].value == 0:
            self.fail("division-by-zero", "%s by zero" % op.upper())
            return
        if op in PARTIAL:
            operands = args if op != "elm" else args[1:]
            if any(self.has_omega(a) for a in operands):
                note = Note("indefinite-operand", "indefinite operand of %s" % op,
                            fatal=self.strict)
                if note not in self.notes:
                    self.notes.append(note)
                if self.strict:
                    b.top = True
                    return
        if op == "elm" and ks[0] is None and ks[1] is not None:
            if self.index_out_of_range(args[0], ks[1]):
                return
        # Constant folding.
        if all(k is not None for k in ks):
            try:
                v = apply_op(op, [to_value(k) for k in ks])
            except EvalError as e:
                self.fail(e.kind, e.detail)
                return
            except (TypeError, KeyError, ValueError):
                return
            self.put(to_const(v), c)
            return
        # Equal arguments.
        if len(args) == 2 and b.find(args[0]) == b.find(args[1]):
            self.equal_args(op, args[0], c)
            return
        self.neutral(op, args, ks, c)
        if self.level >= 2:
            self.back_propagate(op, args, c)
            if op in ("+", "-"):
                self.offsets(op, args, ks, c)

    def index_out_of_range(self, arr: int, k: Const) -> bool:
        for r in self.b.cls.get(self.b.find(arr), ()):
            if isinstance(r, Var) and r.name in self.types.arrays:
                lo, hi = self.types.arrays[r.name]
                if k.kind == "int" and not lo <= k.value <= hi:
                    self.fail("range-violation", "index %s outside %s[%d..%d]"
                              % (k, r.name, lo, hi))
                    return True
        return False

    def equal_args(self, op: str, a: int, c: int) -> None:
        b = self.b
        if op == "-":
            self.put(int_const(0), c)
        elif op in ("=", "<=", ">="):
            self.put(TRUE, c)
        elif op in ("#", "<", ">", "xor"):
            self.put(FALSE, c)
        elif op in ("and", "or"):
            self.merge(a, c)
        elif op in ("div", "mod") and self.nonzero(a):
            self.put(int_const(1 if op == "div" else 0), c)
        elif op == "+":
            two = b.add(int_const(2))
            self.create(Apply("*", (two, b.find(a))), c)

    def nonzero(self, a: int) -> bool:
        b = self.b
        k = self.const(a)
        if k is not None:
            return k.value != 0
        z = b.where.get(int_const(0))
        if z is None:
            return False
        for op, want in (("=", FALSE), ("#", TRUE)):
            e = b.lookup(Apply(op, (a, z)))
            if e is not None and self.const(e) == want:
                return True
        return False

    def neutral(self, op: str, args: tuple, ks: list, c: int) -> None:
        if len(args) != 2:
            return
        for i in (0, 1):
            k, other = ks[i], args[1 - i]
            if k is None:
                continue
            if op == "*" and k == int_const(0):
                self.put(k, c)
            elif op == "*" and k == int_const(1):
                self.merge(other, c)
            elif op == "and":
                self.put(FALSE, c) if k == FALSE else self.merge(other, c)
            elif op == "or":
                self.put(TRUE, c) if k == TRUE else self.merge(other, c)
            elif op == "+" and k == int_const(0) and self.level >= 2:
                self.merge(other, c)

    def back_propagate(self, op: str, args: tuple, c: int) -> None:
        v = self.const(c)
        if v not in (TRUE, FALSE):
            return
        if op == "and" and v == TRUE or op == "or" and v == FALSE:
            for a in args:
                self.put(v, a)
        elif op == "not":
            self.put(FALSE if v == TRUE else TRUE, args[0])
        elif op == "=" and v == TRUE or op == "#" and v == FALSE:
            self.merge(args[0], args[1])

    # -- constant offsets

    def split_offset(self, r) -> tuple | None:
        """(base class, k) when r is base + k with an integer constant k."""
        if not isinstance(r, Apply) or r.op != "+":
            return None
        for i in (0, 1):
            k = self.const(r.args[i])
            if k is not None and k.kind == "int" and self.const(r.args[1 - i]) is None:
                return self.b.find(r.args[1 - i]), k.value
        return None

    def offsets(self, op: str, args: tuple, ks: list, c: int) -> None:
        b = self.b
        if op == "-":
            k = ks[1]
            if k is not None and k.kind == "int" and ks[0] is None and abs(k.value) <= OFFSET_LIMIT:
                self.create(Apply("+", (b.find(args[0]), b.add(int_const(-k.value)))), c)
            return
        split = self.split_offset(Apply("+", args))
        if split is None:
            return
        base, k = split
        if k == 0:
            return
        c = b.find(c)
        if base == c:
            self.fail("inconsistency", "a value equals itself plus %d" % k)
            return
        for r in list(b.cls.get(base, ())):
            inner = self.split_offset(r)
            if inner is None:
                continue
            d, k2 = inner
            total = k + k2
            if abs(total) > OFFSET_LIMIT:
                continue
            self.create(Apply("+", (d, b.add(int_const(total)))), c)
            if b.top:
                return
        seen: dict[int, int] = {}
        for r in list(b.cls.get(b.find(c), ())):
            sp = self.split_offset(r)
            if sp is None:
                continue
            d, k3 = sp
            if d in seen and seen[d] != k3:
                self.fail("inconsistency", "two offsets of one value are equal")
                return
            seen[d] = k3

    def offset_forms(self, x: int) -> list[tuple]:
        x = self.b.find(x)
        out = [(x, 0)]
        for r in self.b.cls.get(x, ()):
            sp = self.split_offset(r)
            if sp is not None:
                out.append(sp)
        return out

    def compare_offsets(self) -> None:
        """(t+k >= r) = FALSE gives (t+j >= r) = FALSE for j <= k, and so on."""
        b = self.b
        groups: dict[tuple, list] = {}
        for r, c in list(b.where.items()):
            if isinstance(r, Apply) and r.op in _ORDER:
                groups.setdefault((r.op, b.find(r.args[1])), []).append(r)
        for (op, _), rs in groups.items():
            if len(rs) < 2:
                continue
            known = []
            for r in rs:
                c = b.where.get(b.canon(r))
                v = None if c is None else self.const(c)
                if v in (TRUE, FALSE):
                    known.append((r, v))
            if not known:
                continue
            upward = op in (">", ">=")
            for r1, v in known:
                forms1 = self.offset_forms(r1.args[0])
                for r2 in rs:
                    if r2 is r1:
                        continue
                    c2 = b.where.get(b.canon(r2))
                    if c2 is None or self.const(c2) is not None:
                        continue
                    for base, k1 in forms1:
                        hit = False
                        for base2, k2 in self.offset_forms(r2.args[0]):
                            if base2 != base:
                                continue
                            smaller = k2 <= k1
                            larger = k2 >= k1
                            if upward and (v == FALSE and smaller or v == TRUE and larger) or \
                                    not upward and (v == FALSE and larger or v == TRUE and smaller):
                                self.put(v, c2)
                                hit = True
                                break
                        if hit or b.top:
                            break
                    if b.top:
                        return
