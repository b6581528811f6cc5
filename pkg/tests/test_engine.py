import pytest

from era.engine import EngineConfig, analyze, fixpoint_holds
from era.eqstate import (FALSE, TRUE, T, Var, canonical, enumerate_known_equalities,
                         includes, int_const, intersect, knows)
from era.frontend import CIf, CLoop, load, walk
from era.oracle import ProgramGenerator
from era.report import visible

from conftest import corpus

i, j, a, x = Var("i"), Var("j"), Var("a"), Var("x")
ONE, TWO, THREE = int_const(1), int_const(2), int_const(3)


def elm(k):
    return T("elm", a, k)


def branch_points(r):
    (cond,) = [s for s in r.program.body if isinstance(s, CIf)]
    return r.cfg.branch[cond.sid] + (r.cfg.post[cond.sid],)


def all_know(s, *groups):
    return all(knows(s, g[0], t) for g in groups for t in g[1:])


ARRAY = {1: ONE, 2: TWO, 3: THREE}


def test_branch_entries(branch_merge):
    then_in, _, else_in, _, _ = branch_points(branch_merge)
    for p, flag in [(then_in, TRUE), (else_in, FALSE)]:
        s = branch_merge.state(p)
        assert all_know(s, (elm(ONE), ONE), (elm(TWO), j, TWO), (elm(THREE), i, THREE),
                        (T("odd", x), flag))


def test_branch_exits(branch_merge):
    _, then_out, _, else_out, _ = branch_points(branch_merge)
    assert all_know(branch_merge.state(then_out), (elm(ONE), i, j, ONE), (elm(TWO), TWO),
                    (elm(THREE), THREE), (T("odd", x), TRUE))
    assert all_know(branch_merge.state(else_out), (elm(ONE), i, j, THREE), (elm(TWO), TWO),
                    (elm(THREE), ONE), (T("odd", x), FALSE))


def test_merged_exit_is_intersection(branch_merge):
    _, then_out, _, else_out, merged = branch_points(branch_merge)
    s = branch_merge.state(merged)
    assert all_know(s, (elm(ONE), i, j), (elm(TWO), TWO))
    assert not knows(s, i, ONE) and not knows(s, i, THREE)
    assert not knows(s, elm(THREE), THREE)
    both = intersect(branch_merge.state(then_out), branch_merge.state(else_out))
    assert canonical(both) == canonical(s)


def test_branch_merge_runs_fast(branch_merge):
    assert branch_merge.seconds < 1.0


def test_straight_line_composes():
    r = analyze(load("var x, y: integer; begin read(x); y := x + 1; x := y - 1 end."))
    end = r.state(r.cfg.exits[""])
    assert knows(end, Var("x"), T("-", Var("y"), ONE))
    assert knows(end, Var("y"), T("+", Var("x'"), ONE))


def test_loop_without_exit_makes_the_rest_inaccessible():
    r = analyze(load("var x: integer; begin loop read(x) end; write(x) end."))
    assert r.state(r.cfg.exits[""]).is_top


def test_loop_with_only_exit_passes_entry_through():
    r = analyze(load("var x: integer; begin x := 1; loop exit end end."))
    assert knows(r.state(r.cfg.exits[""]), x, ONE)


def test_two_exits_intersect():
    r = analyze(load("var x, y: integer; begin read(y); loop read(x); "
                     "if x = 1 then y := 1; exit end; "
                     "if x = 2 then y := 1; exit end end end."))
    end = r.state(r.cfg.exits[""])
    assert knows(end, Var("y"), ONE)
    assert not knows(end, x, ONE)


def test_plus_notes_are_logged_from_intermediate_passes(loop_findings):
    kinds = {(n.kind, r_line(loop_findings, n)) for n in loop_findings.plus}
    assert ("indefinite-value", 10) in kinds
    details = " ".join(n.detail for n in loop_findings.plus if n.kind == "eval-error")
    assert "division-by-zero" in details


def r_line(r, note):
    return r.cfg.points[note.point].span.line


def test_consistent_program_has_no_plus_notes():
    r = analyze(load("var x, y: integer; begin read(x); y := x + 1; write(y) end."))
    assert r.plus == []


@pytest.mark.parametrize("name", ["loop_findings", "kmp", "diverge"])
def test_loop_heads_are_fixpoints(name):
    r = analyze(corpus(name))
    loops = [s.sid for s in walk(r.program.body) if isinstance(s, CLoop)]
    assert loops
    for sid in loops:
        assert fixpoint_holds(r, sid)


def test_random_loop_heads_are_fixpoints():
    for seed in range(60):
        r = analyze(load(ProgramGenerator(seed=seed).program()))
        for sid in r.cfg.loops:
            assert fixpoint_holds(r, sid), seed


def snapshot(r):
    return {p: canonical(s) for p, s in r.states.items()}, [n for n in r.plus]


@pytest.mark.parametrize("name", ["branch_merge", "loop_findings", "kmp"])
def test_deterministic(name):
    assert snapshot(analyze(corpus(name))) == snapshot(analyze(corpus(name)))


def test_kmp_arm_invariants(kmp):
    counter = Var("_cfg_counter")
    (loop,) = [s for s in kmp.program.body if isinstance(s, CLoop)][-1:]
    arms = [s for s in walk(loop.body) if isinstance(s, CIf)
            and getattr(s.cond, "op", None) == "="
            and getattr(s.cond.left, "id", None) == "_cfg_counter"]
    for arm in arms:
        then_in = kmp.cfg.branch[arm.sid][0]
        assert knows(kmp.state(then_in), counter, int_const(arm.cond.right.value))


def test_levels_are_ordered(loop_findings):
    for level in (0, 1):
        r = analyze(loop_findings.program, EngineConfig(level=level))
        assert set(r.states) <= set(loop_findings.states) | set(r.states)
        for p, s in r.states.items():
            if p in loop_findings.states and not s.is_top:
                hi = loop_findings.state(p)
                assert hi.is_top or includes(hi, s) or _visible_subset(s, hi)


def _visible_subset(lo, hi):
    eq = lambda s: {frozenset(p) for p in enumerate_known_equalities(s, 2, visible(""))}
    return eq(lo) <= eq(hi)
