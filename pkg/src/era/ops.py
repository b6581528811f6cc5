"""Concrete semantics of the primitive operators.

Shared by constant folding and by the concrete interpreter so that both agree
on what every operator computes and when it fails.
"""
from __future__ import annotations

from .eqstate import Const

INT_MIN = -(2 ** 63)
INT_MAX = 2 ** 63 - 1

PARTIAL = frozenset({"div", "mod", "elm"})
INTERPRETED = frozenset({
    "+", "-", "*", "div", "mod", "neg", "=", "#", "<", "<=", ">", ">=",
    "and", "or", "xor", "not", "odd", "abs", "sign", "elm", "fld",
})
BUILTIN_FUNCTIONS = {"odd": 1, "abs": 1, "sign": 1}


class EvalError(Exception):
    """A run-time error.  kind is division-by-zero or range-violation."""

    def __init__(self, kind: str, detail: str = ""):
        super().__init__(detail or kind)
        self.kind = kind
        self.detail = detail or kind


class Char(str):
    """A character value; kept apart from field names and strings."""


def _int(v: int) -> int:
    if v < INT_MIN or v > INT_MAX:
        raise EvalError("range-violation", "integer overflow")
    return v


def apply_op(op: str, vals: list):
    if op == "+":
        return _int(vals[0] + vals[1])
    if op == "-":
        return _int(vals[0] - vals[1])
    if op == "*":
        return _int(vals[0] * vals[1])
    if op in ("div", "mod"):
        if vals[1] == 0:
            raise EvalError("division-by-zero", "%s by zero" % op.upper())
        return _int(vals[0] // vals[1]) if op == "div" else vals[0] % vals[1]
    if op == "neg":
        return _int(-vals[0])
    if op == "=":
        return vals[0] == vals[1]
    if op == "#":
        return vals[0] != vals[1]
    if op in ("<", "<=", ">", ">="):
        a, b = vals
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    if op == "and":
        return vals[0] and vals[1]
    if op == "or":
        return vals[0] or vals[1]
    if op == "xor":
        return vals[0] != vals[1]
    if op == "not":
        return not vals[0]
    if op == "odd":
        return vals[0] % 2 != 0
    if op == "abs":
        return _int(abs(vals[0]))
    if op == "sign":
        return (vals[0] > 0) - (vals[0] < 0)
    if op == "elm":
        (lo, items), i = vals
        if not lo <= i < lo + len(items):
            raise EvalError("range-violation", "index %d out of range" % i)
        return items[i - lo]
    if op == "fld":
        return dict(vals[0])[vals[1]]
    raise KeyError(op)


def to_value(c: Const):
    if c.kind == "char":
        return Char(c.value)
    if c.kind == "array":
        lo, items = c.value
        return (lo, tuple(to_value(x) for x in items))
    return c.value


def to_const(v) -> Const:
    if isinstance(v, bool):
        return Const("bool", v)
    if isinstance(v, int):
        return Const("int", v)
    if isinstance(v, Char):
        return Const("char", str(v))
    if isinstance(v, tuple) and len(v) == 2 and isinstance(v[1], tuple):
        return Const("array", (v[0], tuple(to_const(x) for x in v[1])))
    raise TypeError("no constant for %r" % (v,))
