import random

import networkx as nx
import pytest

from era.engine import Divergence, EngineConfig, analyze
from era.eqstate import (BOTTOM, Builder, T, Var, canonical, enumerate_known_equalities,
                         from_classes, includes, intersect)
from era.widening import (WideningConfig, cyclomatic_graph, default_threshold,
                          feedback_vertex_set, fvs_transform, widen)

from conftest import corpus

x, y, z, a = Var("x"), Var("y"), Var("z"), Var("a")


def test_acyclic_grammar_has_acyclic_graph():
    s = from_classes([[x, ("f", [1])], [y, ("g", [2, 2])], [z]])
    g = cyclomatic_graph(s)
    assert nx.is_directed_acyclic_graph(g)
    assert feedback_vertex_set(g) == set()
    assert fvs_transform(s) == s


def test_one_rule_cycle_is_a_self_loop():
    s = from_classes([[x, ("f", [0])]])
    g = cyclomatic_graph(s)
    (v,) = g.nodes
    assert g.has_edge(v, v)
    assert feedback_vertex_set(g) == {v}
    out = fvs_transform(s)
    assert enumerate_known_equalities(out, 3) == set()


def test_vertex_count_is_application_count():
    s = from_classes([[x, ("f", [1, 2]), a], [("g", [3, 3]), ("r", [2])],
                      [("h", [3]), y, ("f", [1, 0])], [("h", [1]), z]])
    assert cyclomatic_graph(s).number_of_nodes() == 6


def test_fvs_transformation_of_drawn_net():
    s = from_classes([[x, ("f", [1, 2]), a], [("g", [3, 3]), ("r", [2])],
                      [("h", [3]), y, ("f", [1, 0])], [("h", [1]), z]])
    expected = from_classes([[x, ("f", [1, 2]), a], [("g", [3, 3]), ("r", [2])],
                             [y, ("h", [3])], [z]])
    out = fvs_transform(s)
    assert canonical(out) == canonical(expected)
    assert nx.is_directed_acyclic_graph(cyclomatic_graph(out))
    assert includes(s, out)


def random_digraph(rng, n=10):
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    p = rng.uniform(0.05, 0.4)
    for u in range(n):
        for v in range(n):
            if rng.random() < p:
                g.add_edge(u, v)
    return g


def test_fvs_leaves_random_digraphs_acyclic():
    rng = random.Random(31)
    for _ in range(1000):
        g = random_digraph(rng)
        fvs = feedback_vertex_set(g)
        rest = g.copy()
        rest.remove_nodes_from(fvs)
        assert nx.is_directed_acyclic_graph(rest)


# ---------------------------------------------------------------- widen

def random_term(rng, height=3):
    if height == 1 or rng.random() < 0.3:
        return rng.choice((x, y, z))
    if rng.random() < 0.5:
        return T("f", random_term(rng, height - 1))
    return T("g", random_term(rng, height - 1), random_term(rng, height - 1))


def random_state(rng, terms=5):
    b = Builder(BOTTOM)
    ids = [b.add_term(random_term(rng)) for _ in range(terms)]
    for _ in range(rng.randint(1, 4)):
        b.merge(rng.choice(ids), rng.choice(ids))
    return b.freeze()


def test_plain_intersection_below_threshold():
    s1 = from_classes([[x, y]])
    s2 = from_classes([[x, y, z]])
    cfg = WideningConfig(d=8)
    assert canonical(widen(s1, s2, cfg)) == canonical(intersect(s1, s2))


def test_large_cyclic_accumulator_is_acyclified():
    big = from_classes([[x, ("f", [0]), ("g", [0, 1])], [y, z]])
    small = from_classes([[y, z]])
    out = widen(big, small, WideningConfig(d=1))
    assert canonical(out) == canonical(intersect(fvs_transform(big), small))


def test_dual_widening_laws():
    rng = random.Random(32)
    for _ in range(500):
        s1, s2 = random_state(rng), random_state(rng)
        cfg = WideningConfig(d=rng.randint(1, 10))
        out = widen(s1, s2, cfg)
        assert includes(s1, out)
        assert includes(s2, out)


def test_decreasing_chain_reaches_a_repeat():
    rng = random.Random(34)
    for _ in range(500):
        cfg = WideningConfig(d=rng.randint(1, 8))
        acc = random_state(rng, terms=6)
        for step in range(200):
            nxt = widen(acc, intersect(acc, random_state(rng, terms=6)), cfg)
            if canonical(nxt) == canonical(acc):
                break
            acc = nxt
        assert step < 200


def test_threshold_validation():
    assert default_threshold(3) == 24
    with pytest.raises(ValueError):
        WideningConfig(d=0)


def test_divergence_without_widening():
    with pytest.raises(Divergence) as info:
        analyze(corpus("diverge"), EngineConfig(widening=False, cap=20))
    sizes = info.value.sizes
    assert len(sizes) == 20
    assert all(b > a for a, b in zip(sizes, sizes[1:]))


@pytest.mark.parametrize("d", [1, 2, 4, 8])
def test_widening_stabilises_divergence_program(d):
    r = analyze(corpus("diverge"), EngineConfig(threshold=d))
    (stats,) = r.stats.values()
    assert stats.widenings >= 1
    assert stats.iterations <= 3
