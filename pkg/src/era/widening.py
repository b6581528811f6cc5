"""Widening by feedback vertex sets of the cyclomatic graph."""
from __future__ import annotations

from dataclasses import dataclass

import networkx as nx

from .eqstate import Apply, Builder, EqState, grammar_size, intersect, rhs_key


@dataclass(frozen=True)
class WideningConfig:
    """d is the size threshold; cap bounds iterations when widening is off."""

    d: int = 8
    enabled: bool = True
    cap: int = 64

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("widening threshold must be at least 1")


def default_threshold(live_variables: int) -> int:
    return 8 * max(1, live_variables)


def cyclomatic_graph(s: EqState) -> nx.DiGraph:
    """Vertices are the applications of s; f -> g when g lives in an argument
    class of f."""
    g = nx.DiGraph()
    if s.kind != "graph":
        return g
    apps_of = {c: sorted((r for r in rs if isinstance(r, Apply)), key=rhs_key)
               for c, rs in s.classes.items()}
    for c in sorted(apps_of):
        for r in apps_of[c]:
            g.add_node(r)
    for c in sorted(apps_of):
        for r in apps_of[c]:
            for a in r.args:
                for target in apps_of.get(a, ()):
                    g.add_edge(r, target)
    return g


def feedback_vertex_set(g: nx.DiGraph) -> set:
    """Peel strongly connected components, dropping a vertex of maximum
    degree from each cyclic one until the rest is acyclic."""
    g = g.copy()
    removed = set()
    while True:
        cyclic = [comp for comp in nx.strongly_connected_components(g)
                  if len(comp) > 1 or any(g.has_edge(v, v) for v in comp)]
        if not cyclic:
            break
        for comp in cyclic:
            sub = g.subgraph(comp)
            v = max(sorted(comp, key=_vertex_key),
                    key=lambda u: sub.in_degree(u) + sub.out_degree(u))
            removed.add(v)
        g.remove_nodes_from(removed)
    return removed


def _vertex_key(v) -> tuple:
    return rhs_key(v) if isinstance(v, Apply) else (repr(v),)


def fvs_transform(s: EqState) -> EqState:
    """Remove a feedback vertex set of applications, leaving an acyclic
    grammar that knows only equalities s knew."""
    if s.kind != "graph":
        return s
    fvs = feedback_vertex_set(cyclomatic_graph(s))
    if not fvs:
        return s
    b = Builder(s)
    b.remove_rhs(fvs)
    return b.freeze()


def widen(a: EqState, b: EqState, cfg: WideningConfig) -> EqState:
    """a is the accumulated state and b the next iterate."""
    if not cfg.enabled:
        return intersect(a, b)
    na, nb, d = grammar_size(a), grammar_size(b), cfg.d
    if a.kind == "graph" and b.kind == "graph":
        if nb >= na > d:
            return intersect(fvs_transform(a), b)
        if na > nb > d:
            return intersect(a, fvs_transform(b))
    return intersect(a, b)
