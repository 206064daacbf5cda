from __future__ import annotations

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdgkit.graph_core import Graph, add_edge, ancestors, bits, default_labels
from cdgkit.separation import (
    CapExceeded,
    SeparationQuery,
    augmented_separated,
    brute_force_separated,
    canonical_separator,
    collider_connected,
    collider_path,
    find_connecting_walk,
    independence_model,
    m_connected_walk_search,
    m_separated,
    mu_reachable,
    mu_separated,
    neck_reachable,
    walk_state_search,
    weak_inducing_path_exists,
)

from .strategies import all_cdgs_with_loops, cdgs, dmgs, fixture_graph, graph_and_query


def q(g: Graph, A, B, C=()):
    s = SeparationQuery.from_labels(g, A, B, C)
    return s.A, s.B, s.C


# -- fixtures with known verdicts -------------------------------------------------------------------


@pytest.mark.parametrize(
    "name, A, B, C, expected",
    [
        ("fig2_left", ["delta"], ["gamma"], ["alpha"], True),
        ("fig2_left", ["beta"], ["alpha"], ["alpha", "delta"], True),
        ("fig2_left", ["beta"], ["alpha"], ["alpha"], False),
        ("fig2_left", ["beta"], ["alpha"], [], False),
        ("fig2_right", ["beta"], ["alpha"], ["alpha", "delta"], False),
        ("fig2_right", ["beta"], ["alpha"], ["alpha", "gamma", "delta"], False),
        ("fig3", ["alpha"], ["gamma"], [], True),
        ("fig3", ["alpha"], ["gamma"], ["beta"], False),
    ],
)
def test_fixture_separations(name, A, B, C, expected):
    g = fixture_graph(name)
    args = q(g, A, B, C)
    assert mu_separated(g, *args) is expected
    assert walk_state_search(g, *args) is expected
    assert brute_force_separated(g, *args) is expected


def test_connecting_walk_through_common_parent():
    g = fixture_graph("fig2_left")
    walk = find_connecting_walk(g, *q(g, ["beta"], ["alpha"], ["alpha"]))
    assert walk == ["beta", "delta -> beta", "delta", "delta -> alpha", "alpha"]


def test_loop_connects_a_node_to_itself():
    g = Graph.from_edges(["b"], loops=True)
    assert not mu_separated(g, 1, 1, 0)


def test_separation_is_asymmetric():
    g = Graph.from_edges(["u", "v"], directed=[("v", "u")], blunt=[("u", "v")])
    assert mu_separated(g, *q(g, ["u"], ["v"]))
    assert not mu_separated(g, *q(g, ["v"], ["u"]))


def test_empty_source_or_source_inside_c_is_separated():
    g = fixture_graph("fig3")
    assert mu_separated(g, 0, g.all_nodes, 0)
    assert mu_separated(g, *q(g, ["alpha"], ["beta"], ["alpha"]))


def test_subset_check():
    g = fixture_graph("fig3")
    with pytest.raises(ValueError):
        mu_separated(g, 1 << 5, 1, 0)


# -- decider agreement -------------------------------------------------------------------------------


def test_deciders_agree_on_all_three_node_cdgs():
    for g in all_cdgs_with_loops(3):
        for a, b, C in itertools.product(range(3), range(3), range(8)):
            v = augmented_separated(g, 1 << a, 1 << b, C)
            assert v == walk_state_search(g, 1 << a, 1 << b, C)
            assert v == brute_force_separated(g, 1 << a, 1 << b, C)


@given(graph_and_query(cdgs(1, 5)))
def test_deciders_agree_on_random_cdg_queries(case):
    g, A, B, C = case
    v = augmented_separated(g, A, B, C)
    assert v == walk_state_search(g, A, B, C)
    assert v == brute_force_separated(g, A, B, C)


@given(graph_and_query(cdgs(1, 4, loops=False)))
def test_deciders_agree_without_loops(case):
    g, A, B, C = case
    assert augmented_separated(g, A, B, C) == walk_state_search(g, A, B, C) == brute_force_separated(g, A, B, C)


@given(graph_and_query(dmgs(1, 4)))
def test_deciders_agree_on_dmgs(case):
    g, A, B, C = case
    assert augmented_separated(g, A, B, C) == walk_state_search(g, A, B, C) == brute_force_separated(g, A, B, C)


@given(graph_and_query(cdgs(6, 8)))
def test_deciders_agree_at_eight_nodes(case):
    g, A, B, C = case
    assert augmented_separated(g, A, B, C) == walk_state_search(g, A, B, C)


@given(graph_and_query(cdgs(1, 6)))
def test_set_query_is_conjunction_of_singletons(case):
    g, A, B, C = case
    pairwise = all(mu_separated(g, 1 << a, 1 << b, C) for a in bits(A) for b in bits(B))
    assert mu_separated(g, A, B, C) == pairwise


@given(graph_and_query(cdgs(1, 6)))
def test_connecting_walk_exists_iff_not_separated(case):
    g, A, B, C = case
    walk = find_connecting_walk(g, A, B, C)
    assert (walk is None) == mu_separated(g, A, B, C)
    if walk is not None:
        assert walk[0] in g.labels(A & ~C) and walk[-1] in g.labels(B)


@given(cdgs(1, 6), st.data())
def test_mu_reachable_matches_decider(g, data):
    a = data.draw(st.integers(0, g.n - 1))
    C = data.draw(st.integers(0, g.all_nodes))
    reach = mu_reachable(g, a, C)
    for b in range(g.n):
        assert bool(reach >> b & 1) == (not mu_separated(g, 1 << a, 1 << b, C))


# -- structural properties ------------------------------------------------------------------------------


@given(cdgs(1, 6))
def test_directed_edges_are_detected_by_separation(g):
    for a, b in itertools.product(range(g.n), repeat=2):
        rest = g.all_nodes & ~(1 << a)
        assert ((a, b) in g.directed) == (not mu_separated(g, 1 << a, 1 << b, rest))


@given(cdgs(2, 5), st.data())
def test_adding_an_edge_never_creates_a_separation(g, data):
    kind = data.draw(st.sampled_from(["->", "|-|"]))
    a, b = data.draw(st.lists(st.integers(0, g.n - 1), min_size=2, max_size=2, unique=True))
    h = add_edge(g, kind, g.nodes[a], g.nodes[b])
    for x, y, C in itertools.product(range(g.n), range(g.n), range(1 << g.n)):
        if mu_separated(h, 1 << x, 1 << y, C):
            assert mu_separated(g, 1 << x, 1 << y, C)


@given(cdgs(2, 5))
def test_weak_inducing_path_iff_no_separator(g):
    for a, b in itertools.combinations(range(g.n), 2):
        others = g.all_nodes & ~(1 << a | 1 << b)
        separable = any(mu_separated(g, 1 << a, 1 << b, C) for C in range(1 << g.n) if C & ~others == 0)
        assert weak_inducing_path_exists(g, a, b) == (not separable)
        assert weak_inducing_path_exists(g, b, a) == weak_inducing_path_exists(g, a, b)


@given(cdgs(2, 6))
def test_canonical_separator_separates(g):
    for a, b in itertools.permutations(range(g.n), 2):
        if weak_inducing_path_exists(g, a, b):
            with pytest.raises(ValueError):
                canonical_separator(g, a, b)
        else:
            S = canonical_separator(g, a, b)
            assert not S & (1 << a | 1 << b)
            assert mu_separated(g, 1 << a, 1 << b, S)


def test_canonical_separator_on_fixture():
    g = fixture_graph("fig3")
    a, c = g.index("alpha"), g.index("gamma")
    assert canonical_separator(g, a, c) == 0
    assert weak_inducing_path_exists(g, g.index("beta"), c)
    assert not weak_inducing_path_exists(g, a, c)


def test_disconnected_pair_has_empty_separator():
    g = Graph.from_edges(["a", "b"], loops=True)
    assert canonical_separator(g, 0, 1) == 0


@given(cdgs(2, 6), st.data())
def test_collider_paths_open_an_m_connection(g, data):
    a, b = data.draw(st.lists(st.integers(0, g.n - 1), min_size=2, max_size=2, unique=True))
    C = data.draw(st.integers(0, g.all_nodes)) & ~(1 << a | 1 << b)
    allowed = ancestors(g, 1 << a | 1 << b | C)
    if collider_connected(g, a, b, allowed):
        assert not m_connected_walk_search(g, 1 << a, 1 << b, C)


def test_collider_path_through_blunt_chain():
    g = Graph.from_edges(["a", "b", "c", "d"], directed=[("a", "c"), ("b", "d")], blunt=[("c", "d")], loops=True)
    a, b, c, d = range(4)
    assert collider_path(g, a, b, 1 << c | 1 << d) == [a, c, d, b]
    assert collider_path(g, a, b, 1 << c) is None
    assert collider_connected(g, a, b, 1 << c | 1 << d)
    assert not collider_connected(g, a, b, 1 << c)


def test_directed_edge_is_a_collider_path():
    g = Graph.from_edges(["a", "b"], directed=[("a", "b")], loops=True)
    assert collider_path(g, 0, 1, 0) == [0, 1]
    assert weak_inducing_path_exists(g, 0, 1)


def test_uncovered_blunt_path_in_fixture():
    g = fixture_graph("fig6_right")
    a, gm = g.index("alpha"), g.index("gamma")
    interior = g.mask(["delta", "epsilon"])
    assert not collider_connected(g, a, gm, interior)
    assert collider_connected(fixture_graph("fig6_left"), a, gm, interior)


# -- m-separation -----------------------------------------------------------------------------------


def test_m_separation_fixtures():
    g = fixture_graph("fig2_left")
    assert m_separated(g, *q(g, ["delta"], ["gamma"], ["alpha"]))
    # beta in C opens the collider delta -> beta <- gamma.
    assert not m_separated(g, *q(g, ["delta"], ["gamma"], ["alpha", "beta"]))
    single = Graph.from_edges(["a", "b"], blunt=[("a", "b")], loops=True)
    assert not m_separated(single, 1, 2, 0)


def test_m_separation_needs_disjoint_sets():
    g = fixture_graph("fig3")
    with pytest.raises(ValueError):
        m_separated(g, 1, 1, 0)


def _disjoint_query(g, data):
    roles = data.draw(st.lists(st.integers(0, 3), min_size=g.n, max_size=g.n))
    A = sum(1 << v for v in range(g.n) if roles[v] == 1)
    B = sum(1 << v for v in range(g.n) if roles[v] == 2)
    C = sum(1 << v for v in range(g.n) if roles[v] == 3)
    return A, B, C


@given(cdgs(1, 6), st.data())
def test_m_separation_is_symmetric_and_matches_walk_search(g, data):
    A, B, C = _disjoint_query(g, data)
    v = m_separated(g, A, B, C)
    assert v == m_separated(g, B, A, C)
    assert v == m_connected_walk_search(g, A, B, C)


@given(cdgs(1, 6), st.data())
def test_m_separation_implies_mu_separation(g, data):
    A, B, C = _disjoint_query(g, data)
    if m_separated(g, A, B, C):
        assert mu_separated(g, A, B, C)


# -- neck reachability -------------------------------------------------------------------------------


def test_neck_reachable_basic_cases():
    into = Graph.from_edges(["a", "w"], directed=[("a", "w")], loops=True)
    assert neck_reachable(into, 1, 1, 2)
    out = Graph.from_edges(["a", "w"], directed=[("w", "a")], loops=True)
    assert not neck_reachable(out, 1, 1, 2)


def _neck_reachable_brute(g: Graph, A: int, w: int, W: int) -> bool:
    """Enumerate walks edge by edge; a walk never repeats a (node, arrival mark) state."""
    anW = ancestors(g, W)
    edges = []
    for i, j in g.directed:
        edges.append((i, j, "tail", "head"))
        edges.append((j, i, "head", "tail"))
    for i, j in g.blunt:
        edges.append((i, j, "stump", "stump"))
        edges.append((j, i, "stump", "stump"))

    def walk(v, arrived, used):
        for x, y, mx, my in edges:
            if x != v:
                continue
            if arrived is not None:
                collider = arrived != "tail" and mx != "tail"
                if collider and not anW >> v & 1:
                    continue
                if not collider and W >> v & 1:
                    continue
            if y == w and my != "tail":
                return True
            if (y, my) in used:
                continue
            if walk(y, my, used | {(y, my)}):
                return True
        return False

    return any(walk(a, None, frozenset()) for a in bits(A & ~W))


@given(cdgs(1, 4), st.data())
def test_neck_reachable_matches_walk_enumeration(g, data):
    W = data.draw(st.integers(1, g.all_nodes))
    A = data.draw(st.integers(0, g.all_nodes)) & ~W
    w = data.draw(st.sampled_from(list(bits(W))))
    assert neck_reachable(g, A, w, W) == _neck_reachable_brute(g, A, w, W)


# -- independence model -------------------------------------------------------------------------------


def test_model_of_single_looped_node_has_only_vacuous_triples():
    g = Graph.from_edges(["b"], loops=True)
    model = independence_model(g)
    assert list(model.triples()) == [(0, 0, 1)]


def test_model_respects_cap():
    g = Graph.from_edges(default_labels(4), loops=True)
    with pytest.raises(CapExceeded):
        independence_model(g, cap=3)


def test_model_contains_fixture_separations():
    g = fixture_graph("fig3")
    model = independence_model(g)
    a, b, c = (g.index(x) for x in ("alpha", "beta", "gamma"))
    assert model.separated(1 << a, 1 << c, 0)
    assert not model.separated(1 << a, 1 << c, 1 << b)


def test_equivalent_fixtures_have_equal_models():
    m1 = independence_model(fixture_graph("fig5_row2_left"))
    m2 = independence_model(fixture_graph("fig5_row2_center"))
    assert m1.difference(m2) is None


@given(cdgs(1, 4), st.data())
def test_model_table_matches_decider(g, data):
    model = independence_model(g)
    A = data.draw(st.integers(0, g.all_nodes))
    B = data.draw(st.integers(0, g.all_nodes))
    C = data.draw(st.integers(0, g.all_nodes))
    assert model.separated(A, B, C) == mu_separated(g, A, B, C)
