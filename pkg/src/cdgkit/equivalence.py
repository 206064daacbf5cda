"""Markov equivalence of cDGs.

Three deciders that must agree:

* :func:`markov_equivalent` compares directed parts, then collider
  connections inside every ancestral set (polynomial per ancestral set).
* :func:`collider_equivalent` enumerates collider paths of each graph and
  checks that the other graph covers them.
* :func:`markov_equivalent_oracle` compares the full independence models.

Around them sit the virtual-collider-tripath prescreen, blunt-edge
permutations, maximality checks and brute-force class enumeration.

All deciders assume every node carries a directed loop. Graphs missing
loops are refused unless ``add_loops=True`` completes them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, Mapping

from .graph_core import (
    Graph,
    GraphError,
    NodeSet,
    add_edge,
    ancestors,
    ancestral_sets,
    bits,
    blunt_components,
    serialize_graph,
    strongly_connected_components,
    with_all_loops,
)
from .separation import (
    CapExceeded,
    SeparationQuery,
    collider_connected,
    collider_path,
    independence_model,
    mu_separated,
    walk_state_search,
)

__all__ = [
    "LoopAssumptionError",
    "ClaimViolation",
    "EquivalenceWitness",
    "ColliderPath",
    "VirtualColliderTripath",
    "EquivalenceClass",
    "MaximalityReport",
    "PermutationCheck",
    "same_directed_part",
    "collider_relation",
    "same_collider_connections",
    "markov_equivalence_witness",
    "markov_equivalent",
    "markov_equivalent_oracle",
    "collider_paths",
    "collider_path_covered",
    "uncovered_collider_path",
    "collider_equivalent",
    "collider_witness",
    "oracle_witness",
    "virtual_collider_tripaths",
    "maximal_vcts",
    "vct_prescreen",
    "permutation_graph",
    "permutation_equivalent_sufficient",
    "is_maximal",
    "blunt_path_edge_addition",
    "enumerate_class",
]

DEFAULT_ORACLE_CAP = 10
DEFAULT_PATH_CAP = 12
DEFAULT_SLOT_CAP = 20


class LoopAssumptionError(GraphError):
    """A graph lacks a directed loop and auto-completion was not requested."""


class ClaimViolation(AssertionError):
    """A sufficient condition held but its promised conclusion failed."""


def _prepare(g: Graph, add_loops: bool = False) -> Graph:
    if g.class_tag == "DMG":
        raise GraphError("equivalence operations accept cDGs only")
    if g.has_all_loops():
        return g
    if add_loops:
        return with_all_loops(g)
    missing = [label for i, label in enumerate(g.nodes) if (i, i) not in g.directed]
    raise LoopAssumptionError(f"missing directed loop: {', '.join(missing)}")


def _prepare_pair(g1: Graph, g2: Graph, add_loops: bool) -> tuple[Graph, Graph]:
    if g1.nodes != g2.nodes:
        raise GraphError("graphs must share the same ordered node set")
    return _prepare(g1, add_loops), _prepare(g2, add_loops)


# -- directed part and collider connections --------------------------------------


def same_directed_part(g1: Graph, g2: Graph) -> bool:
    if g1.nodes != g2.nodes:
        raise GraphError("graphs must share the same ordered node set")
    return g1.directed == g2.directed


def collider_relation(g: Graph, A: NodeSet) -> tuple[NodeSet, ...]:
    """``rel[x]`` = nodes of ``A`` collider connected to ``x`` in the graph induced on ``A``.

    Two nodes are collider connected iff both lie in ``U | pa(U)`` for some
    blunt component ``U`` of the induced graph (a singleton ``U = {y}``
    covers plain adjacency ``x -> y``). Entries outside ``A`` are 0 and no
    node is related to itself.
    """
    rel = [0] * g.n
    for U in blunt_components(g, within=A):
        group = U
        for u in bits(U):
            group |= g.parents[u]
        group &= A
        for x in bits(group):
            rel[x] |= group
    for x in range(g.n):
        rel[x] &= ~(1 << x)
    return tuple(rel)


def same_collider_connections(g1: Graph, g2: Graph, A: NodeSet) -> bool:
    return collider_relation(g1, A) == collider_relation(g2, A)


@dataclass(frozen=True)
class EquivalenceWitness:
    """Certificate that two graphs are not Markov equivalent.

    ``kind`` is ``"directed"`` (``edge`` present in exactly one graph),
    ``"collider"`` (``pair`` collider connected inside ``ancestral_set`` in
    graph ``connected_in`` only), ``"path"`` (a collider path of graph
    ``connected_in`` uncovered in the other) or ``"model"`` (an independence
    triple present in exactly one model). ``query``, when set, is a
    separation that holds in exactly one of the graphs.
    """

    kind: str
    connected_in: int = 0
    edge: tuple[int, int] | None = None
    ancestral_set: NodeSet = 0
    pair: tuple[int, int] | None = None
    path: tuple[int, ...] = ()
    query: SeparationQuery | None = None
    separated_in: int = 0

    def to_dict(self, g: Graph) -> dict:
        out: dict = {"kind": self.kind}
        if self.edge is not None:
            out["edge"] = f"{g.nodes[self.edge[0]]} -> {g.nodes[self.edge[1]]}"
            out["present_in"] = self.connected_in
        if self.kind == "collider":
            out["ancestral_set"] = g.labels(self.ancestral_set)
            out["connected_in"] = self.connected_in
        if self.pair is not None:
            out["pair"] = [g.nodes[self.pair[0]], g.nodes[self.pair[1]]]
        if self.path:
            out["path"] = [g.nodes[v] for v in self.path]
            out["path_in"] = self.connected_in
        if self.query is not None:
            out["query"] = {
                "A": g.labels(self.query.A),
                "B": g.labels(self.query.B),
                "C": g.labels(self.query.C),
                "separated_in": self.separated_in,
            }
        return out


def _separating_query(g_conn: Graph, g_other: Graph, x: int, y: int, allowed: NodeSet) -> tuple[SeparationQuery, bool] | None:
    """A query separated in exactly one graph, built from a collider path ``x .. y``.

    The separator is ``an({x, y} | interior) - {x, y}``: the path (closed by
    the loop at its end) connects in ``g_conn``. Candidates are confirmed
    with two independent deciders before being returned. The flag is true
    when the separation holds in ``g_conn`` rather than ``g_other``.
    """
    path = collider_path(g_conn, x, y, allowed)
    if path is None:
        return None
    interior = 0
    for v in path[1:-1]:
        interior |= 1 << v
    ends = 1 << x | 1 << y
    core = ancestors(g_conn, ends | interior) & ~ends
    for a, b, C in ((x, y, core), (y, x, core), (x, y, allowed & ~ends), (y, x, allowed & ~ends)):
        A, B = 1 << a, 1 << b
        s_conn = mu_separated(g_conn, A, B, C)
        s_other = mu_separated(g_other, A, B, C)
        if s_conn == s_other:
            continue
        if s_conn != walk_state_search(g_conn, A, B, C) or s_other != walk_state_search(g_other, A, B, C):
            continue
        return SeparationQuery(A, B, C), s_conn
    return None


def markov_equivalence_witness(g1: Graph, g2: Graph, add_loops: bool = False) -> EquivalenceWitness | None:
    """``None`` when the graphs are Markov equivalent, else a witness.

    Checks the directed parts, then walks the ancestral sets (smallest
    first) comparing collider connections of the induced graphs.
    """
    g1, g2 = _prepare_pair(g1, g2, add_loops)
    if g1.directed != g2.directed:
        diff = sorted(g1.directed ^ g2.directed)[0]
        return EquivalenceWitness("directed", connected_in=1 if diff in g1.directed else 2, edge=diff)
    for A in ancestral_sets(g1):
        r1 = collider_relation(g1, A)
        r2 = collider_relation(g2, A)
        if r1 == r2:
            continue
        for x in bits(A):
            d = r1[x] ^ r2[x]
            if not d:
                continue
            y = (d & -d).bit_length() - 1
            which = 1 if r1[x] >> y & 1 else 2
            g_conn, g_other = (g1, g2) if which == 1 else (g2, g1)
            found = _separating_query(g_conn, g_other, x, y, A)
            query, sep_in = None, 0
            if found:
                query = found[0]
                sep_in = which if found[1] else 3 - which
            return EquivalenceWitness(
                "collider",
                connected_in=which,
                ancestral_set=A,
                pair=(x, y),
                path=tuple(collider_path(g_conn, x, y, A) or ()),
                query=query,
                separated_in=sep_in,
            )
    return None


def markov_equivalent(g1: Graph, g2: Graph, add_loops: bool = False) -> bool:
    return markov_equivalence_witness(g1, g2, add_loops) is None


def markov_equivalent_oracle(g1: Graph, g2: Graph, cap: int = DEFAULT_ORACLE_CAP, add_loops: bool = False) -> bool:
    """Compare the full independence models (exponential; ``n <= cap``)."""
    g1, g2 = _prepare_pair(g1, g2, add_loops)
    if g1.n > cap:
        raise CapExceeded(f"oracle limited to {cap} nodes, graphs have {g1.n}")
    return independence_model(g1, cap).table == independence_model(g2, cap).table


def oracle_witness(g1: Graph, g2: Graph, cap: int = DEFAULT_ORACLE_CAP, add_loops: bool = False) -> EquivalenceWitness | None:
    g1, g2 = _prepare_pair(g1, g2, add_loops)
    if g1.n > cap:
        raise CapExceeded(f"oracle limited to {cap} nodes, graphs have {g1.n}")
    m1, m2 = independence_model(g1, cap), independence_model(g2, cap)
    diff = m1.difference(m2)
    if diff is None:
        return None
    a, b, C = diff
    sep_in = 1 if m1.table[a][C] >> b & 1 else 2
    return EquivalenceWitness("model", query=SeparationQuery(1 << a, 1 << b, C), separated_in=sep_in)


# -- collider paths and coverage ------------------------------------------------


@dataclass(frozen=True)
class ColliderPath:
    """Node sequence ``a, g1, ..., gm, b`` whose interior nodes are colliders."""

    nodes: tuple[int, ...]

    @property
    def ends(self) -> tuple[int, int]:
        return self.nodes[0], self.nodes[-1]

    @property
    def interior(self) -> NodeSet:
        out = 0
        for v in self.nodes[1:-1]:
            out |= 1 << v
        return out

    def labels(self, g: Graph) -> list[str]:
        return [g.nodes[v] for v in self.nodes]


def _neck_into(g: Graph, x: int) -> NodeSet:
    """Nodes ``u`` joined to ``x`` by an edge with a neck at ``x``."""
    return g.parents[x] | g.blunt_nb[x] | g.bidirected_nb[x]


def _neck_from(g: Graph, x: int) -> NodeSet:
    """Nodes ``u`` joined to ``x`` by an edge with a neck at ``u``."""
    return g.children[x] | g.blunt_nb[x] | g.bidirected_nb[x]


def collider_paths(g: Graph, cap: int = DEFAULT_PATH_CAP) -> Iterator[ColliderPath]:
    """Every collider path between distinct endpoints, each direction once.

    Paths are listed from their first endpoint; a path and its reversal are
    both produced. Exponential in the worst case, hence ``n <= cap``.
    """
    if g.n > cap:
        raise CapExceeded(f"collider path enumeration limited to {cap} nodes, graph has {g.n}")
    chain = [b | d for b, d in zip(g.blunt_nb, g.bidirected_nb)]
    for a in range(g.n):
        for b in bits(g.adjacent[a] & ~(1 << a)):
            yield ColliderPath((a, b))
        stack = [(u, (a, u), 1 << a | 1 << u) for u in reversed(list(bits(_neck_from(g, a) & ~(1 << a))))]
        while stack:
            u, path, used = stack.pop()
            for b in bits(_neck_into(g, u) & ~used):
                yield ColliderPath(path + (b,))
            for w in reversed(list(bits(chain[u] & ~used))):
                stack.append((w, path + (w,), used | 1 << w))


def collider_path_covered(path: ColliderPath, g_src: Graph, g2: Graph) -> bool:
    """Whether ``g2`` has a collider path between the same endpoints inside
    ``an({a, b} | interior)`` (ancestry read in ``g_src``; the directed parts
    are assumed equal)."""
    a, b = path.ends
    allowed = ancestors(g_src, 1 << a | 1 << b | path.interior)
    return collider_connected(g2, a, b, allowed)


def uncovered_collider_path(g1: Graph, g2: Graph, cap: int = DEFAULT_PATH_CAP) -> ColliderPath | None:
    """First collider path of ``g1`` not covered in ``g2``.

    Coverage depends only on the endpoints and the ancestor closure of the
    interior, so checks are memoised on that key.
    """
    seen: dict[tuple[int, int, NodeSet], bool] = {}
    for path in collider_paths(g1, cap):
        a, b = path.ends
        allowed = ancestors(g1, 1 << a | 1 << b | path.interior)
        key = (a, b, allowed)
        if key not in seen:
            seen[key] = collider_connected(g2, a, b, allowed)
        if not seen[key]:
            return path
    return None


def collider_equivalent(g1: Graph, g2: Graph, cap: int = DEFAULT_PATH_CAP, add_loops: bool = False) -> bool:
    """Each graph covers every collider path of the other."""
    return collider_witness(g1, g2, cap, add_loops) is None


def collider_witness(g1: Graph, g2: Graph, cap: int = DEFAULT_PATH_CAP, add_loops: bool = False) -> EquivalenceWitness | None:
    g1, g2 = _prepare_pair(g1, g2, add_loops)
    for which, (src, dst) in ((1, (g1, g2)), (2, (g2, g1))):
        path = uncovered_collider_path(src, dst, cap)
        if path is not None:
            return EquivalenceWitness("path", connected_in=which, pair=path.ends, path=path.nodes)
    return None


# -- virtual collider tripaths ------------------------------------------------------


@dataclass(frozen=True, order=True)
class VirtualColliderTripath:
    """Unordered pair ``a < b`` plus a completed-condensation node ``C`` (0 is the root)."""

    a: int
    b: int
    C: NodeSet

    def labels(self, g: Graph) -> tuple[str, str, list[str]]:
        return g.nodes[self.a], g.nodes[self.b], g.labels(self.C)


def virtual_collider_tripaths(g: Graph, add_loops: bool = False) -> set[VirtualColliderTripath]:
    """All ``(a, b, C)`` with a collider path inside ``an({a, b} | C)``."""
    g = _prepare(g, add_loops)
    cond = strongly_connected_components(g)
    out = set()
    for a, b in combinations(range(g.n), 2):
        for C in cond.completed_nodes():
            if collider_connected(g, a, b, ancestors(g, 1 << a | 1 << b | C)):
                out.add(VirtualColliderTripath(a, b, C))
    return out


def maximal_vcts(g: Graph, add_loops: bool = False) -> set[VirtualColliderTripath]:
    """Tripaths ``(a, b, C)`` with no other tripath ``(a, b, C')``, ``C'`` a
    proper ancestor of ``C`` in the completed condensation."""
    g = _prepare(g, add_loops)
    cond = strongly_connected_components(g)
    vcts = virtual_collider_tripaths(g)
    out = set()
    for t in vcts:
        dominated = any(
            u.C != t.C and (u.a, u.b) == (t.a, t.b) and cond.completed_is_ancestor(u.C, t.C)
            for u in vcts
        )
        if not dominated:
            out.add(t)
    return out


def vct_prescreen(g1: Graph, g2: Graph, add_loops: bool = False) -> str:
    """``"distinct"`` when a necessary condition for equivalence fails,
    otherwise ``"indistinguishable"`` (which does not imply equivalence)."""
    g1, g2 = _prepare_pair(g1, g2, add_loops)
    if g1.directed != g2.directed:
        return "distinct"
    return "indistinguishable" if maximal_vcts(g1) == maximal_vcts(g2) else "distinct"


# -- permutations --------------------------------------------------------------------


def _as_index_map(g: Graph, rho: Mapping[str, str]) -> list[int]:
    perm = list(range(g.n))
    for src, dst in rho.items():
        perm[g.index(src)] = g.index(dst)
    if sorted(perm) != list(range(g.n)):
        raise GraphError("permutation is not a bijection on the node set")
    return perm


def permutation_graph(g: Graph, rho: Mapping[str, str]) -> Graph:
    """Relabel blunt-edge endpoints through ``rho``; directed edges stay put.

    Nodes missing from ``rho`` are fixed.
    """
    perm = _as_index_map(g, rho)
    blunt = frozenset((min(perm[i], perm[j]), max(perm[i], perm[j])) for i, j in g.blunt)
    return Graph(g.nodes, g.directed, blunt, g.bidirected, g.class_tag)


@dataclass(frozen=True)
class PermutationCheck:
    hypothesis: bool
    equivalent: bool


def permutation_equivalent_sufficient(g: Graph, rho: Mapping[str, str], S: NodeSet, add_loops: bool = False) -> PermutationCheck:
    """Test the sufficient condition for ``permutation_graph(g, rho)`` to be equivalent to ``g``.

    The condition: ``rho`` moves only nodes of ``S``, every ordered pair in
    ``S`` is joined by a directed edge, and all nodes of ``S`` share one
    parent set. Equivalence is decided either way; if the condition holds
    and equivalence fails, :class:`ClaimViolation` is raised.
    """
    g = _prepare(g, add_loops)
    perm = _as_index_map(g, rho)
    if any(perm[v] != v for v in range(g.n) if not S >> v & 1):
        raise GraphError("permutation must fix every node outside S")
    members = list(bits(S))
    hypothesis = all((b, c) in g.directed for b in members for c in members) and len(
        {g.parents[v] for v in members}
    ) <= 1
    equivalent = markov_equivalent(g, permutation_graph(g, rho))
    if hypothesis and not equivalent:
        raise ClaimViolation("permutation hypothesis held but graphs are not Markov equivalent")
    return PermutationCheck(hypothesis, equivalent)


# -- maximality and edge additions ------------------------------------------------------


@dataclass(frozen=True)
class MaximalityReport:
    maximal: bool
    addable: tuple[tuple[str, str, str], ...] = field(default_factory=tuple)


def is_maximal(g: Graph, add_loops: bool = False) -> MaximalityReport:
    """Try every absent directed and blunt edge; list those addable equivalently."""
    g = _prepare(g, add_loops)
    addable = []
    for i in range(g.n):
        for j in range(g.n):
            if (i, j) not in g.directed and markov_equivalent(g, add_edge(g, "->", g.nodes[i], g.nodes[j])):
                addable.append((g.nodes[i], "->", g.nodes[j]))
    for i, j in combinations(range(g.n), 2):
        if (i, j) not in g.blunt and markov_equivalent(g, add_edge(g, "|-|", g.nodes[i], g.nodes[j])):
            addable.append((g.nodes[i], "|-|", g.nodes[j]))
    return MaximalityReport(not addable, tuple(addable))


def blunt_path_edge_addition(g: Graph, a: int, b: int, add_loops: bool = False) -> bool:
    """Whether a blunt-only weak inducing path joins ``a`` and ``b``.

    When it does, adding ``a |-| b`` must give an equivalent graph; this is
    checked and a :class:`ClaimViolation` raised otherwise.
    """
    g = _prepare(g, add_loops)
    if a == b:
        raise GraphError("blunt edges join distinct nodes")
    if (min(a, b), max(a, b)) in g.blunt:
        raise GraphError("the blunt edge is already present")
    allowed = ancestors(g, 1 << a | 1 << b) | 1 << b
    seen = frontier = 1 << a
    while frontier and not seen >> b & 1:
        nxt = 0
        for v in bits(frontier):
            nxt |= g.blunt_nb[v]
        frontier = nxt & allowed & ~seen
        seen |= frontier
    hypothesis = bool(seen >> b & 1)
    if hypothesis and not markov_equivalent(g, add_edge(g, "|-|", g.nodes[a], g.nodes[b])):
        raise ClaimViolation("blunt weak inducing path present but the edge is not addable")
    return hypothesis


# -- class enumeration --------------------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceClass:
    """All graphs Markov equivalent to ``representative``.

    Members differ only in blunt edges; ``greatest``/``least`` are the
    members whose blunt-edge sets contain/are contained in every other
    member's, when such a member exists.
    """

    representative: Graph
    members: tuple[Graph, ...]
    greatest: Graph | None
    least: Graph | None

    def __len__(self) -> int:
        return len(self.members)


def _blunt_variant(g: Graph, blunt: frozenset) -> Graph:
    return Graph(g.nodes, g.directed, blunt, class_tag="cDG")


def enumerate_class(g: Graph, slot_cap: int = DEFAULT_SLOT_CAP, add_loops: bool = False) -> EquivalenceClass:
    """Try every blunt-edge subset on the directed part of ``g``.

    The collider relations of ``g`` on its ancestral sets are computed once
    and every candidate is compared against them.
    """
    g = _prepare(g, add_loops)
    slots = list(combinations(range(g.n), 2))
    if len(slots) > slot_cap:
        raise CapExceeded(f"class enumeration limited to {slot_cap} blunt slots, graph has {len(slots)}")
    reference = [(A, collider_relation(g, A)) for A in ancestral_sets(g)]
    members = []
    for mask in range(1 << len(slots)):
        blunt = frozenset(slots[k] for k in bits(mask))
        cand = _blunt_variant(g, blunt)
        if all(collider_relation(cand, A) == rel for A, rel in reference):
            members.append(cand)
    members.sort(key=serialize_graph)
    union = frozenset().union(*(m.blunt for m in members))
    inter = frozenset(slots).intersection(*(m.blunt for m in members))
    greatest = next((m for m in members if m.blunt == union), None)
    least = next((m for m in members if m.blunt == inter), None)
    return EquivalenceClass(g, tuple(members), greatest, least)
