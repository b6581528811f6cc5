import dataclasses
import itertools
import random

import pytest

from conftest import corpus
from era.engine import analyze
from era.eqstate import T, Var, from_classes, identify_terms, int_const, intersect
from era.frontend import count_statements, load, parse
from era.oracle import (ProgramGenerator, check_soundness, check_state, concrete_collect,
                        equivalent, input_sequences, run)

X, Y, Z = Var("x"), Var("y"), Var("z")


def test_branch_merge_is_sound(branch_merge):
    rep = check_soundness(branch_merge, [[v] for v in range(-4, 5)])
    assert rep.ok and rep.traces == 9 and rep.observations > 0


def test_corrupted_state_is_caught(branch_merge):
    end = branch_merge.cfg.exits[""]
    states = dict(branch_merge.states)
    states[end] = identify_terms(states[end], X, int_const(1))
    bad = dataclasses.replace(branch_merge, states=states)
    rep = check_soundness(bad, [[2]])
    # one bad observation; x = 1 also spreads to a[x] and 3-x
    assert {(v.point, v.inputs) for v in rep.violations} == {(end, (2,))}
    assert any("x" in v.terms and set(v.values) == {1, 2} for v in rep.violations)
    assert check_soundness(bad, [[1]]).ok


def test_concrete_collect_branch_merge(branch_merge):
    end = branch_merge.cfg.exits[""]
    rel = concrete_collect(branch_merge, [[2], [3]]).relations[end]
    assert len(rel) == 2
    common = rel[0] & rel[1]
    assert ("a[1]", "i") in common or ("i", "a[1]") in common


def test_check_state_ignores_top_and_bottom():
    core = load("VAR x: INTEGER;\nBEGIN\n  x := 0\nEND.\n")
    from era.eqstate import BOTTOM, TOP
    assert check_state(core, TOP, {"x": 1}) == []
    assert check_state(core, BOTTOM, {"x": 1}) == []


# ---------------------------------------------------------------- abstraction

_CORE = None


def _core():
    global _CORE
    if _CORE is None:
        _CORE = load("VAR x, y, z: INTEGER;\nBEGIN\n  x := 0\nEND.\n")
    return _CORE


def _random_state(rng):
    atoms = [X, Y, Z, int_const(0), int_const(1), T("+", X, Y), T("*", X, Z), T("-", Y, int_const(1))]
    s = from_classes([])
    for _ in range(rng.randint(0, 3)):
        a, b = rng.sample(atoms, 2)
        s = identify_terms(s, a, b)
    return s


def _models(s):
    envs = [dict(zip("xyz", vs)) for vs in itertools.product(range(-1, 3), repeat=3)]
    if s.is_top:
        return set()
    return {tuple(e.values()) for e in envs if not check_state(_core(), s, e)}


def test_abstraction_is_monotone():
    # knowing less (the join) admits at least the same environments
    rng = random.Random(3)
    for _ in range(150):
        a, b = _random_state(rng), _random_state(rng)
        j = intersect(a, b)
        ma, mb, mj = _models(a), _models(b), _models(j)
        assert ma <= mj and mb <= mj


# ---------------------------------------------------------------- generator

@pytest.mark.parametrize("seed", range(40))
def test_generator_respects_budget(seed):
    text = ProgramGenerator(seed=seed).program()
    ast = parse(text)
    n = count_statements(ast.body) + sum(count_statements(d.body)
                                         for d in ast.decls if hasattr(d, "body"))
    assert n <= 30


def test_generator_is_deterministic():
    assert ProgramGenerator(seed=5).program() == ProgramGenerator(seed=5).program()


def test_generated_programs_are_sound():
    for seed in range(25):
        g = ProgramGenerator(seed=seed)
        r = analyze(load(g.program()))
        rep = check_soundness(r, g.inputs()[::7])
        assert rep.ok, (seed, rep.violations[:1])


# ---------------------------------------------------------------- equivalence

def test_input_sequences():
    seqs = input_sequences([0, 1], 2)
    assert seqs == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_equivalent_finds_difference():
    a = load("VAR x: INTEGER;\nBEGIN\n  READ(x);\n  WRITE(x)\nEND.\n")
    b = load("VAR x: INTEGER;\nBEGIN\n  READ(x);\n  WRITE(abs(x))\nEND.\n")
    assert equivalent(a, a, input_sequences(range(-2, 3), 1)).ok
    eq = equivalent(a, b, input_sequences(range(-2, 3), 1))
    assert not eq.ok and eq.counterexample == (-2,)


def test_run_statuses():
    r = run(corpus("loop_findings"), [5])
    assert r.status == "trap"
    assert run(corpus("loop_findings"), [-1, -1], cap=500).status in ("eof", "timeout")
