import itertools
import random

import pytest

from era.completion import TypeInfo, complete
from era.eqstate import (BOTTOM, FALSE, TRUE, Builder, Const, Fun, Omega, T, Var, canonical,
                         class_terms, evaluate, from_classes, identify_terms, includes,
                         int_const, knows)
from era.ops import EvalError, apply_op, to_value

x, y, z, p, q = Var("x"), Var("y"), Var("z"), Var("p"), Var("q")
ZERO, ONE, TWO, THREE = (int_const(v) for v in range(4))


def state(*equalities):
    s = BOTTOM
    for t1, t2 in equalities:
        s = identify_terms(s, t1, t2)
    return s


def test_constant_times_zero_collapses():
    s = from_classes([[x, ("+", [2, 1])], [y, ("*", [2, 3])], [z], [ZERO]])
    out = complete(s, 2)
    assert not out.notes
    assert knows(out.state, y, ZERO)
    assert knows(out.state, x, z)
    assert knows(out.state, x, T("+", x, y))


def test_xor_not_reading_is_inconsistent():
    s = from_classes([[TRUE, ("xor", [1, 2])], [("not", [3])],
                      [("xor", [1, 4]), ("not", [4])], [x], [FALSE]])
    assert complete(s, 2).state.kind == "graph"
    out = complete(identify_terms(s, x, FALSE), 2)
    assert out.state.is_top
    assert [n.kind for n in out.notes] == ["inconsistency"]


def test_level_zero_is_identity():
    s = state((x, T("+", ONE, TWO)), (y, T("-", z, z)))
    assert complete(s, 0).state == s


def test_division_by_zero_is_fatal():
    s, _ = evaluate(BOTTOM, T("div", x, ZERO))
    out = complete(s, 1)
    assert out.state.is_top
    assert out.notes[0].kind == "division-by-zero"


def test_range_violation_against_declared_subrange():
    types = TypeInfo(ranges={"i": (0, 20)})
    out = complete(state((Var("i"), int_const(21))), 1, types)
    assert out.state.is_top
    assert out.notes[0].kind == "range-violation"


@pytest.mark.parametrize("strict", [True, False])
def test_indefinite_divisor(strict):
    s = state((x, Omega(1)))
    s, _ = evaluate(s, T("div", y, x))
    out = complete(s, 2, strict=strict)
    assert any(n.kind == "indefinite-operand" for n in out.notes)
    assert out.state.is_top == strict


@pytest.mark.parametrize("premise, known", [
    ((T("and", p, q), TRUE), [(p, TRUE), (q, TRUE)]),
    ((T("or", p, q), FALSE), [(p, FALSE), (q, FALSE)]),
    ((T("not", p), TRUE), [(p, FALSE)]),
    ((T("=", x, y), TRUE), [(x, y)]),
    ((T("-", x, x), y), [(y, ZERO)]),
    ((T("+", T("+", x, ONE), TWO), y), [(y, T("+", x, THREE))]),
    ((T("+", x, ZERO), y), [(x, y)]),
])
def test_level_two_rules(premise, known):
    out = complete(state(premise), 2)
    for t1, t2 in known:
        assert knows(out.state, t1, t2)


def test_equal_constants_compared_false_is_top():
    s = state((x, ONE), (y, ONE))
    s = identify_terms(s, T("=", x, y), FALSE)
    assert s.is_top or complete(s, 2).state.is_top


def test_constant_folding_at_level_one():
    out = complete(state((x, TWO), (y, THREE), (z, T("*", x, y))), 1)
    assert knows(out.state, z, int_const(6))


# ---------------------------------------------------------------- properties

INT_VARS = (x, y, z)


def random_term(rng, height=3):
    if height == 1 or rng.random() < 0.35:
        return rng.choice(INT_VARS + (ZERO, ONE, TWO))
    op = rng.choice(["+", "-", "*", "div"])
    return T(op, random_term(rng, height - 1), random_term(rng, height - 1))


def random_state(rng):
    b = Builder(BOTTOM)
    ids = [b.add_term(random_term(rng)) for _ in range(3)]
    for _ in range(2):
        b.merge(rng.choice(ids), rng.choice(ids))
    return b.freeze()


def test_extensive_and_idempotent():
    rng = random.Random(21)
    for _ in range(300):
        s = random_state(rng)
        for level in (1, 2):
            once = complete(s, level).state
            if once.is_top:
                continue
            assert includes(once, s)
            assert canonical(complete(once, level).state) == canonical(once)


def test_monotone_in_level():
    rng = random.Random(22)
    for _ in range(300):
        s = random_state(rng)
        one, two = complete(s, 1).state, complete(s, 2).state
        assert two.is_top or one.is_top or includes(two, one)


# ---------------------------------------------------------------- rule soundness

DOMAIN = range(-2, 3)


def value(t, env):
    if isinstance(t, Var):
        return env[t.name]
    if isinstance(t, Const):
        return to_value(t)
    return apply_op(t.op, [value(a, env) for a in t.args])


def holds(s, env, depth):
    """Whether every class of s has one value under env; None if undefined."""
    for terms in class_terms(s, depth).values():
        seen = set()
        for t in terms:
            try:
                seen.add(value(t, env))
            except EvalError:
                return None
        if len(seen) > 1:
            return False
    return True


TEMPLATES = [
    [(T("and", p, q), TRUE)],
    [(T("or", p, q), FALSE)],
    [(T("not", p), TRUE)],
    [(T("xor", p, q), TRUE), (p, TRUE)],
    [(T("=", x, y), TRUE)],
    [(T("=", x, y), FALSE)],
    [(T("#", x, y), FALSE)],
    [(T("-", x, y), ZERO)],
    [(T("+", T("+", x, ONE), TWO), y)],
    [(T("+", x, ZERO), y)],
    [(T("*", y, ZERO), x)],
    [(T("<", x, y), TRUE), (z, T("+", x, ONE))],
    [(T(">=", T("+", x, ONE), y), FALSE), (z, T("+", x, TWO))],
    [(T("<=", x, y), TRUE), (T(">=", x, y), TRUE)],
    [(T("div", x, x), y)],
    [(T("mod", x, TWO), y), (T("odd", x), TRUE)],
    [(x, TWO), (T("abs", T("-", ZERO, x)), y)],
    [(T("sign", x), ONE), (y, T("*", x, x))],
]


@pytest.mark.parametrize("premises", TEMPLATES, ids=lambda ps: " & ".join(
    "%s=%s" % pair for pair in ps))
@pytest.mark.parametrize("level", [1, 2])
def test_rule_soundness_exhaustive(premises, level):
    s = state(*premises)
    out = complete(s, level).state
    names = sorted({v.name for t in itertools.chain(*premises)
                    for v in _vars(t)})
    for combo in itertools.product(*[
            (True, False) if n in "pq" else DOMAIN for n in names]):
        env = dict(zip(names, combo))
        if holds(s, env, 3) is not True:
            continue
        assert not out.is_top, env
        assert holds(out, env, 3) is not False, env


def _vars(t):
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Fun):
        for a in t.args:
            yield from _vars(a)
