from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdgkit.graph_core import (
    BluntLoopError,
    Graph,
    GraphError,
    GraphParseError,
    add_edge,
    ancestors,
    ancestral_sets,
    bits,
    blunt_components,
    descendants,
    directed_part,
    induced_subgraph,
    parse_graph,
    random_cdg,
    remove_edge,
    restrict,
    serialize_graph,
    strongly_connected_components,
    validate,
    with_all_loops,
)

from .strategies import cdgs, dmgs, fixture_graph


def chain(*edges: str, blunt=()) -> Graph:
    nodes = sorted({x for e in edges for x in e.split(">")} | {x for e in blunt for x in e})
    return Graph.from_edges(nodes, [tuple(e.split(">")) for e in edges], blunt, loops=True)


# -- parsing ------------------------------------------------------------------------------


def test_parse_directed_and_blunt_edges():
    g = parse_graph("a -> a\nb -> b\na -> b\nb |-| a")
    assert g.nodes == ("a", "b")
    assert g.directed == {(0, 0), (1, 1), (0, 1)}
    assert g.blunt == {(0, 1)}
    assert g.class_tag == "cDG"


def test_parse_rejects_blunt_loop():
    with pytest.raises(BluntLoopError):
        parse_graph("a |-| a")


def test_parse_empty_text_gives_empty_graph():
    g = parse_graph("")
    assert g.n == 0 and g.all_nodes == 0


def test_parse_errors_carry_line_numbers():
    with pytest.raises(GraphParseError, match="line 2"):
        parse_graph("a -> b\na => b")


@pytest.mark.parametrize(
    "text",
    [
        "a |-| b\nc <-> d",
        "class: cDG\na <-> b",
        "class: DMG\na |-| b",
        "class: DG\na |-| b",
        "nodes: a\na -> b",
        "nodes: a a",
        "class: XYZ",
    ],
)
def test_parse_rejects_malformed_input(text):
    with pytest.raises(GraphError):
        parse_graph(text)


def test_nodes_header_fixes_order_and_declares_isolated_nodes():
    g = parse_graph("nodes: z y x\nz -> y")
    assert g.nodes == ("z", "y", "x")
    assert g.labels(g.all_nodes) == ["x", "y", "z"]


def test_comments_are_ignored():
    g = parse_graph("# header\na -> b  # trailing\n")
    assert g.directed == {(0, 1)}


@given(cdgs(0, 6))
def test_serialize_round_trip(g):
    assert parse_graph(serialize_graph(g)) == g


@given(dmgs(1, 5))
def test_serialize_round_trip_dmg(g):
    assert parse_graph(serialize_graph(g)) == g


def test_graph_rejects_mixed_edge_classes():
    with pytest.raises(GraphError):
        Graph(("a", "b"), blunt=frozenset({(0, 1)}), bidirected=frozenset({(0, 1)}))


# -- ancestry -------------------------------------------------------------------------------


def test_ancestors_one_step():
    g = chain("a>b")
    assert ancestors(g, g.mask(["b"])) == g.mask(["a", "b"])


def test_ancestors_of_empty_set():
    assert ancestors(chain("a>b"), 0) == 0


def test_ancestors_fixture_with_parent_into_alpha():
    g = fixture_graph("fig2_left")
    assert g.labels(ancestors(g, g.mask(["alpha"]))) == ["alpha", "delta"]


def _matrix_closure(g: Graph, C: int) -> int:
    n = g.n
    adj = np.zeros((n, n), dtype=bool)
    for i, j in g.directed:
        adj[i, j] = True
    reach = adj | np.eye(n, dtype=bool)
    for _ in range(n):
        reach = (reach.astype(int) @ reach.astype(int)) > 0
    return sum(1 << i for i in range(n) if any(reach[i, j] for j in bits(C)))


@given(cdgs(1, 8), st.data())
def test_ancestors_match_boolean_matrix_closure(g, data):
    C = data.draw(st.integers(0, g.all_nodes))
    assert ancestors(g, C) == _matrix_closure(g, C)


@given(cdgs(1, 7), st.data())
def test_ancestor_closure_is_idempotent(g, data):
    C = data.draw(st.integers(0, g.all_nodes))
    once = ancestors(g, C)
    assert ancestors(g, once) == once
    assert once & C == C


@given(cdgs(1, 6), st.data())
def test_descendants_are_ancestors_reversed(g, data):
    C = data.draw(st.integers(0, g.all_nodes))
    for v in range(g.n):
        assert bool(descendants(g, C) >> v & 1) == bool(ancestors(g, 1 << v) & C)


# -- strongly connected components ---------------------------------------------------------------


def test_two_cycle_is_one_component():
    g = chain("a>b", "b>a")
    assert strongly_connected_components(g).components == (0b11,)


def test_single_edge_gives_two_components_and_a_dag_edge():
    cond = strongly_connected_components(chain("a>b"))
    assert cond.components == (0b01, 0b10)
    assert cond.dag_edges == {(0, 1)}


def test_components_of_two_cycle_fixture():
    g = fixture_graph("fig8_left")
    cond = strongly_connected_components(g)
    assert sorted(g.labels(c) for c in cond.components) == [["alpha"], ["beta", "delta"], ["epsilon", "gamma"], ["zeta"]]


@given(cdgs(1, 7))
def test_components_match_mutual_ancestry(g):
    cond = strongly_connected_components(g)
    for a, b in itertools.product(range(g.n), repeat=2):
        mutual = ancestors(g, 1 << a) >> b & 1 and ancestors(g, 1 << b) >> a & 1
        assert bool(mutual) == (cond.component_of[a] == cond.component_of[b])


def test_completed_condensation_root_is_ancestor_of_everything():
    cond = strongly_connected_components(chain("a>b"))
    nodes = cond.completed_nodes()
    assert nodes[0] == 0
    assert all(cond.completed_is_ancestor(0, x) for x in nodes)
    assert not cond.completed_is_ancestor(0b01 << 1, 0)
    assert cond.completed_is_ancestor(0b01, 0b10)
    assert not cond.completed_is_ancestor(0b10, 0b01)


# -- ancestral sets ---------------------------------------------------------------------------------


def test_ancestral_sets_of_a_chain():
    assert list(ancestral_sets(chain("a>b"))) == [0b01, 0b11]


def test_ancestral_sets_of_loops_only():
    g = Graph.from_edges(["a", "b", "c"], loops=True)
    assert sorted(ancestral_sets(g)) == list(range(1, 8))


def test_ancestral_sets_of_two_cycle():
    assert list(ancestral_sets(chain("a>b", "b>a"))) == [0b11]


@given(cdgs(1, 6))
def test_ancestral_sets_are_exactly_the_closed_sets(g):
    found = list(ancestral_sets(g))
    assert len(found) == len(set(found))
    expected = [S for S in range(1, 1 << g.n) if ancestors(g, S) == S]
    assert sorted(found) == expected


# -- blunt components ------------------------------------------------------------------------------


def test_blunt_components_of_single_blunt_edge():
    g = fixture_graph("fig1_left")
    assert sorted(g.labels(c) for c in blunt_components(g)) == [["alpha"], ["beta", "gamma"]]


def test_no_blunt_edges_gives_singletons():
    g = chain("a>b", "b>c")
    assert sorted(blunt_components(g)) == [1, 2, 4]


def test_blunt_components_of_two_maximal_chains():
    g = fixture_graph("fig7_left")
    comps = sorted(g.labels(c) for c in blunt_components(g))
    assert comps == [["alpha", "gamma"], ["beta", "delta"]]


@given(cdgs(1, 7))
def test_blunt_components_partition_and_match_blunt_paths(g):
    comps = blunt_components(g)
    union = 0
    for c in comps:
        assert c and not union & c
        union |= c
    assert union == g.all_nodes
    for a, b in itertools.combinations(range(g.n), 2):
        seen, stack = {a}, [a]
        while stack:
            v = stack.pop()
            for w in bits(g.blunt_nb[v]):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        same = any(c >> a & 1 and c >> b & 1 for c in comps)
        assert same == (b in seen)


# -- transforms and validation ---------------------------------------------------------------------


def test_induced_subgraph_identity_and_empty():
    g = fixture_graph("fig3")
    assert induced_subgraph(g, g.all_nodes) == g
    assert induced_subgraph(g, 0).n == 0


def test_induced_subgraph_keeps_edges_inside():
    g = fixture_graph("fig3")
    sub = induced_subgraph(g, g.mask(["alpha", "beta"]))
    assert serialize_graph(sub, header=False) == "alpha -> alpha\nalpha -> beta\nbeta -> beta\n"


def test_restrict_keeps_node_indices():
    g = fixture_graph("fig3")
    r = restrict(g, g.mask(["alpha", "beta"]))
    assert r.nodes == g.nodes
    assert r.edge_count() == 3


def test_directed_part_drops_blunt_edges():
    g = fixture_graph("fig1_left")
    d = directed_part(g)
    assert serialize_graph(d, header=False).splitlines() == ["alpha -> alpha", "alpha -> beta", "beta -> beta", "gamma -> gamma"]


@given(cdgs(2, 5), st.data())
def test_add_existing_edge_is_a_no_op(g, data):
    a, b = data.draw(st.sampled_from(sorted(g.directed)))
    assert add_edge(g, "->", g.nodes[a], g.nodes[b]) == g


def test_add_then_remove_blunt_edge():
    g = chain("a>b")
    h = add_edge(g, "|-|", "b", "a")
    assert h.blunt == {(0, 1)} and h.class_tag == "cDG"
    assert remove_edge(h, "|-|", "a", "b").blunt == frozenset()


def test_add_blunt_loop_is_rejected():
    with pytest.raises(BluntLoopError):
        add_edge(chain("a>b"), "|-|", "a", "a")


def test_validate_reports_missing_loop():
    g = parse_graph("alpha -> alpha\nbeta -> beta\nalpha -> gamma")
    assert [d.message for d in validate(g)] == ["missing directed loop: gamma"]
    assert validate(with_all_loops(g)) == []


def test_random_cdg_is_reproducible():
    import random

    assert random_cdg(6, random.Random(3)) == random_cdg(6, random.Random(3))
