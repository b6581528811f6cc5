import pytest

from era import corpus_path
from era.frontend import (CExit, CIf, CLoop, CReturn, ParseError, SourceProgram, build_cfg,
                          count_statements, desugar, load, parse, pretty, walk)
from era.oracle import ProgramGenerator, run, run_ast

from conftest import corpus


def walk_all(core):
    yield from walk(core.body)
    for f in core.functions.values():
        yield from walk(f.body)


def errors_of(text):
    with pytest.raises(ParseError) as info:
        load(text)
    return info.value.lines()


def test_empty_program_has_empty_body():
    ast = parse("")
    assert ast.body == ()
    assert ast.decls == ()


def test_branch_merge_parses_to_two_branch_if():
    ast = parse(SourceProgram.read(corpus_path("branch_merge")))
    cond = ast.body[-1]
    assert type(cond).__name__ == "If"
    assert len(cond.then) == 2 and len(cond.else_) == 3


def test_missing_expression_reports_semicolon_position():
    text = "var x: integer; x := ;"
    (line,) = errors_of(text)
    assert line.startswith("<input>:1:%d:" % (text.index(";", 16) + 1))


@pytest.mark.parametrize("text, message", [
    ("exit", "exit outside loop"),
    ("var x: integer; begin return end.", "return outside function"),
    ("var x: integer; begin y := 1 end.", "undeclared identifier y"),
    ("procedure F(a: integer): integer; begin return F(a) end F; begin end.",
     "recursive function F"),
    ("var x: integer; begin if x = 1 then x := 2 end.", "expected 'end'"),
    ("var x: integer; begin x := 1 $ end.", ""),
])
def test_rejected_programs(text, message):
    lines = errors_of(text)
    assert lines and message in lines[0]


def test_while_desugars_to_loop_with_exit_in_else():
    core = load("var x: integer; begin while x <= 0 do read(x) end end.")
    (loop,) = core.body
    assert isinstance(loop, CLoop)
    (test,) = loop.body
    assert isinstance(test, CIf)
    assert isinstance(test.else_[0], CExit)


def test_case_with_range_becomes_if_chain():
    core = load("var x: integer; begin case x of 0..2: x := 1 | 3: x := 2 else x := 0 end end.")
    (top,) = core.body
    assert isinstance(top, CIf)
    assert isinstance(top.else_[0], CIf)
    assert not any(type(s).__name__ in ("While", "Case") for s in walk(core.body))


def test_kmp_case_has_one_test_per_arm():
    core = corpus("kmp")
    tests = [s for s in walk(core.body) if isinstance(s, CIf)
             and getattr(s.cond, "op", None) == "="
             and getattr(s.cond.left, "id", None) == "_cfg_counter"]
    assert sorted(t.cond.right.value for t in tests) == [0, 1, 2, 3, 4, 10, 12, 14]


@pytest.mark.parametrize("name", ["branch_merge", "loop_findings", "diverge", "kmp", "loop_findings_hand"])
def test_pretty_print_round_trip(name):
    ast = parse(SourceProgram.read(corpus_path(name)))
    assert parse(pretty(ast)) == ast


def test_single_assignment_cfg():
    cfg = build_cfg(load("var x: integer; begin x := 1 end."))
    assert len(cfg.points) == 2
    assert len(cfg.edges) == 1


def test_branch_merge_cfg_has_table_points():
    core = corpus("branch_merge")
    cfg = build_cfg(core)
    (cond,) = [s for s in core.body if isinstance(s, CIf)]
    then_in, then_out, else_in, else_out = cfg.branch[cond.sid]
    merged = cfg.post[cond.sid]
    assert len({then_in, then_out, else_in, else_out, merged}) == 5


def test_two_exits_target_the_same_point():
    core = load("var x: integer; begin loop if x = 1 then exit end; "
                "if x = 2 then exit end; read(x) end end.")
    cfg = build_cfg(core)
    targets = {dst for _, dst, label in cfg.edges if label == "exit"}
    assert len([e for e in cfg.edges if e[2] == "exit"]) == 2
    assert len(targets) == 1


@pytest.mark.parametrize("name", ["branch_merge", "loop_findings", "kmp"])
def test_every_point_reachable(name):
    core = corpus(name)
    cfg = build_cfg(core)
    # The fall-through point after exit or return is never reached.
    dead = {cfg.post[s.sid] for s in walk_all(core) if isinstance(s, (CExit, CReturn))}
    seen, todo = set(cfg.entries.values()), list(cfg.entries.values())
    succ = {}
    for a, b, _ in cfg.edges:
        succ.setdefault(a, []).append(b)
    while todo:
        for b in succ.get(todo.pop(), []):
            if b not in seen:
                seen.add(b)
                todo.append(b)
    assert seen == {p.id for p in cfg.points} - dead


def test_statement_count_includes_nested_bodies():
    core = load("var x: integer; begin read(x); if x = 1 then write(x) else x := 2; x := 3 end end.")
    assert count_statements(core.body) == 5


def test_desugaring_keeps_concrete_behaviour():
    checked = 0
    for seed in range(200):
        g = ProgramGenerator(seed=seed)
        core = load(g.program())
        for inputs in g.inputs()[::25]:
            a = run(core, inputs, log=True)
            b = run_ast(core, inputs, log=True)
            assert (a.behaviour, a.log) == (b.behaviour, b.log), seed
            checked += 1
    assert checked >= 200
