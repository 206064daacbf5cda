"""Separation deciders for cDGs and DMGs.

Three independent routes decide whether ``B`` is mu-separated from ``A``
given ``C``:

* :func:`augmented_separated` builds the proxy graph, restricts it to an
  ancestral set, joins collider-connected pairs and tests plain undirected
  separation. This is the production decider behind :func:`mu_separated`.
* :func:`walk_state_search` explores ``(node, arrival mark)`` states.
* :func:`brute_force_separated` enumerates walks explicitly.

A walk from ``a`` to ``b`` is mu-connecting given ``C`` when ``a`` is not in
``C``, every collider lies in ``an(C)``, no noncollider lies in ``C`` and the
final edge has a head at ``b``. A node instance is a collider when both of
its incident edges carry a neck (a head or a blunt stump) at it. Queries with
``A`` inside ``C`` are separations by vacuity.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator

from .graph_core import Graph, NodeSet, ancestors, bits

__all__ = [
    "HEAD",
    "STUMP",
    "TAIL",
    "SeparationQuery",
    "IndependenceModel",
    "CapExceeded",
    "mu_separated",
    "augmented_separated",
    "walk_state_search",
    "brute_force_separated",
    "find_connecting_walk",
    "m_separated",
    "m_connected_walk_search",
    "neck_reachable",
    "collider_connected",
    "collider_path",
    "weak_inducing_path_exists",
    "canonical_separator",
    "independence_model",
    "mu_reachable",
]

HEAD, STUMP, TAIL = "head", "stump", "tail"
_NECK = (HEAD, STUMP)

DEFAULT_MODEL_CAP = 12


class CapExceeded(ValueError):
    """An exponential enumeration was asked for a graph above its size cap."""


@dataclass(frozen=True)
class SeparationQuery:
    A: NodeSet
    B: NodeSet
    C: NodeSet = 0

    @classmethod
    def from_labels(cls, g: Graph, A, B, C=()) -> "SeparationQuery":
        return cls(g.mask(A), g.mask(B), g.mask(C))


def _check_subset(g: Graph, *sets: NodeSet) -> None:
    for s in sets:
        if s & ~g.all_nodes:
            raise ValueError("node set contains nodes outside the graph")


# -- augmentation criterion ---------------------------------------------------


def _augmented_adjacency(parents: list[NodeSet], neck_adj: list[NodeSet], S: NodeSet) -> list[NodeSet]:
    """Undirected graph on ``S`` joining all collider-connected pairs.

    Within an ancestral set, two nodes are collider connected exactly when
    both lie in ``U | pa(U)`` for some component ``U`` of the blunt and
    bidirected edges, so each such set becomes a clique.
    """
    size = len(parents)
    aug = [0] * size
    remaining = S
    while remaining:
        start = remaining & -remaining
        comp = start
        frontier = start
        while frontier:
            nxt = 0
            for v in bits(frontier):
                nxt |= neck_adj[v]
            frontier = nxt & S & ~comp
            comp |= frontier
        remaining &= ~comp
        closed = comp
        for u in bits(comp):
            closed |= parents[u]
        closed &= S
        for v in bits(closed):
            aug[v] |= closed
    for v in range(size):
        aug[v] &= ~(1 << v)
    return aug


def _undirected_separated(adj: list[NodeSet], X: NodeSet, Y: NodeSet, Z: NodeSet) -> bool:
    """Every path from ``X`` to ``Y`` meets ``Z`` (``X``, ``Y`` outside ``Z``)."""
    seen = X & ~Z
    frontier = seen
    while frontier:
        if frontier & Y:
            return False
        nxt = 0
        for v in bits(frontier):
            nxt |= adj[v]
        frontier = nxt & ~Z & ~seen
        seen |= frontier
    return True


def augmented_separated(g: Graph, A: NodeSet, B: NodeSet, C: NodeSet = 0) -> bool:
    """Decide mu-separation through the augmentation criterion.

    Each target ``b`` gets a proxy node whose parents are the parents of
    ``b`` (and, in a DMG, which shares the bidirected edges of ``b``).
    ``A \\ C`` and the proxies must be separated by ``C`` in the augmented
    graph of the proxy graph restricted to ``an(A | proxies | C)``.
    """
    _check_subset(g, A, B, C)
    n = g.n
    targets = list(bits(B))
    parents = list(g.parents) + [0] * len(targets)
    neck_adj = [b | d & ~(1 << v) for v, (b, d) in enumerate(zip(g.blunt_nb, g.bidirected_nb))]
    neck_adj += [0] * len(targets)
    proxies = 0
    for k, b in enumerate(targets):
        p = n + k
        proxies |= 1 << p
        parents[p] = g.parents[b]
        for d in bits(g.bidirected_nb[b]):
            neck_adj[p] |= 1 << d
            neck_adj[d] |= 1 << p
    start = A & ~C
    if not start:
        return True
    S = _closure_up(parents, start | proxies | C)
    aug = _augmented_adjacency(parents, neck_adj, S)
    return _undirected_separated(aug, start, proxies, C)


def _closure_up(parents: list[NodeSet], start: NodeSet) -> NodeSet:
    seen = frontier = start
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= parents[v]
        frontier = nxt & ~seen
        seen |= frontier
    return seen


def mu_separated(g: Graph, A: NodeSet, B: NodeSet, C: NodeSet = 0) -> bool:
    """True when ``B`` is mu-separated from ``A`` given ``C``."""
    return augmented_separated(g, A, B, C)


def m_separated(g: Graph, A: NodeSet, B: NodeSet, C: NodeSet = 0) -> bool:
    """Symmetric m-separation of ``A`` and ``B`` given ``C`` (pairwise disjoint sets)."""
    _check_subset(g, A, B, C)
    if A & B or A & C or B & C:
        raise ValueError("m-separation needs pairwise disjoint A, B, C")
    if not A or not B:
        return True
    parents = list(g.parents)
    neck_adj = [b | d & ~(1 << v) for v, (b, d) in enumerate(zip(g.blunt_nb, g.bidirected_nb))]
    S = _closure_up(parents, A | B | C)
    aug = _augmented_adjacency(parents, neck_adj, S)
    return _undirected_separated(aug, A, B, C)


# -- walk-state search ----------------------------------------------------------


def _moves(g: Graph, v: int) -> Iterator[tuple[int, str, str, str]]:
    """Edges at ``v`` as ``(w, mark at v, mark at w, edge text)``."""
    name = g.nodes
    for w in bits(g.children[v]):
        yield w, TAIL, HEAD, f"{name[v]} -> {name[w]}"
    for w in bits(g.parents[v]):
        yield w, HEAD, TAIL, f"{name[w]} -> {name[v]}"
    for w in bits(g.blunt_nb[v]):
        yield w, STUMP, STUMP, f"{name[v]} |-| {name[w]}"
    for w in bits(g.bidirected_nb[v]):
        yield w, HEAD, HEAD, f"{name[v]} <-> {name[w]}"


_FINAL = {"head": (HEAD,), "neck": _NECK, "any": (HEAD, STUMP, TAIL)}


def _search(
    g: Graph,
    sources: NodeSet,
    targets: NodeSet,
    C: NodeSet,
    final: str,
    want_walk: bool = False,
    collect: bool = False,
):
    """Breadth-first search over ``(node, arrived with a neck)`` states.

    Returns the set of reached targets when ``collect`` is set, otherwise the
    first connecting walk (or ``True``) or ``None``. The walk is a list
    alternating node labels and edge strings.
    """
    anC = ancestors(g, C)
    ok_final = _FINAL[final]
    moves = [list(_moves(g, v)) for v in range(g.n)]
    parent: dict = {}
    queue: deque = deque()
    reached = 0

    def finish(state, w, text):
        if not want_walk:
            return True
        walk = [g.nodes[w], text, g.nodes[state[0]]]
        cur = state
        while parent[cur] is not None:
            prev, edge = parent[cur]
            walk += [edge, g.nodes[prev[0]]]
            cur = prev
        walk.reverse()
        return walk

    for a in bits(sources):
        start = (a, None)
        parent[start] = None
        queue.append(start)
    while queue:
        state = queue.popleft()
        v, arrived_neck = state
        for w, mark_v, mark_w, text in moves[v]:
            if arrived_neck is not None:
                collider = arrived_neck and mark_v in _NECK
                if collider and not anC >> v & 1:
                    continue
                if not collider and C >> v & 1:
                    continue
            if mark_w in ok_final and targets >> w & 1:
                if collect:
                    reached |= 1 << w
                else:
                    return finish(state, w, text)
            nxt = (w, mark_w in _NECK)
            if nxt not in parent:
                parent[nxt] = (state, text)
                queue.append(nxt)
    return reached if collect else None


def walk_state_search(g: Graph, A: NodeSet, B: NodeSet, C: NodeSet = 0) -> bool:
    """Decide mu-separation by searching walks directly (independent of augmentation)."""
    _check_subset(g, A, B, C)
    return _search(g, A & ~C, B, C, "head") is None


def find_connecting_walk(g: Graph, A: NodeSet, B: NodeSet, C: NodeSet = 0) -> list[str] | None:
    """A shortest mu-connecting walk from ``A`` to ``B`` given ``C``, or ``None``.

    The walk alternates node labels and edge strings, e.g.
    ``["a", "a -> b", "b"]``.
    """
    _check_subset(g, A, B, C)
    return _search(g, A & ~C, B, C, "head", want_walk=True)


def mu_reachable(g: Graph, a: int, C: NodeSet = 0) -> NodeSet:
    """All ``b`` reached from ``a`` by a mu-connecting walk given ``C``."""
    if C >> a & 1:
        return 0
    return _search(g, 1 << a, g.all_nodes, C, "head", collect=True)


def m_connected_walk_search(g: Graph, A: NodeSet, B: NodeSet, C: NodeSet = 0) -> bool:
    """Walk-state route to m-separation: True when ``A`` and ``B`` are m-separated."""
    _check_subset(g, A, B, C)
    return _search(g, A & ~C, B, C, "any") is None


def neck_reachable(g: Graph, A: NodeSet, w: int, W: NodeSet) -> bool:
    """Is there a walk from ``A`` to ``w`` with colliders in ``an(W)``, no
    noncollider in ``W`` and a neck at ``w`` on the final edge?"""
    if not W >> w & 1:
        raise ValueError("w must belong to W")
    return _search(g, A, 1 << w, W, "neck") is not None


def brute_force_separated(g: Graph, A: NodeSet, B: NodeSet, C: NodeSet = 0, max_len: int | None = None) -> bool:
    """Decide mu-separation by enumerating walks of at most ``max_len`` edges.

    Default bound is ``2 n**2``. Within one walk, a repeated interior
    ``(node, arrived with a neck)`` state is pruned: cutting the loop between
    the two visits leaves a shorter walk that is connecting whenever the
    original is, so the enumeration still finds a shortest connecting walk.
    """
    _check_subset(g, A, B, C)
    n = g.n
    limit = 2 * n * n if max_len is None else max_len
    anC = ancestors(g, C)
    moves = [list(_moves(g, v)) for v in range(n)]

    def dfs(v: int, arrived_neck: bool | None, depth: int, used: set) -> bool:
        if depth == limit:
            return False
        for w, mark_v, mark_w, _ in moves[v]:
            if arrived_neck is not None:
                collider = arrived_neck and mark_v in _NECK
                if collider and not anC >> v & 1:
                    continue
                if not collider and C >> v & 1:
                    continue
            if mark_w == HEAD and B >> w & 1:
                return True
            state = (w, mark_w in _NECK)
            if state in used:
                continue
            used.add(state)
            if dfs(w, state[1], depth + 1, used):
                return True
            used.discard(state)
        return False

    return not any(dfs(a, None, 0, set()) for a in bits(A & ~C))


# -- collider connectivity --------------------------------------------------------


def _neck_from(g: Graph, x: int) -> NodeSet:
    """Nodes ``u`` such that some edge between ``x`` and ``u`` has a neck at ``u``."""
    return g.children[x] | g.blunt_nb[x] | g.bidirected_nb[x]


def collider_path(g: Graph, a: int, b: int, allowed: NodeSet | None = None) -> list[int] | None:
    """A collider path ``[a, g1, ..., gm, b]`` with interior inside ``allowed``.

    Interior-to-interior edges must carry necks at both ends, so they are
    blunt or bidirected; the boundary edges need a neck at the interior end.
    A direct edge between ``a`` and ``b`` is a collider path of length one.
    """
    if a == b:
        raise ValueError("collider paths join two distinct nodes")
    if g.adjacent[a] >> b & 1:
        return [a, b]
    interior = (g.all_nodes if allowed is None else allowed) & ~(1 << a | 1 << b)
    goal = _neck_from(g, b)
    chain = [bb | d for bb, d in zip(g.blunt_nb, g.bidirected_nb)]
    start = _neck_from(g, a) & interior
    prev: dict[int, int | None] = {u: None for u in bits(start)}
    queue = deque(bits(start))
    while queue:
        u = queue.popleft()
        if goal >> u & 1:
            path = [b, u]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            path.append(a)
            path.reverse()
            return path
        for w in bits(chain[u] & interior):
            if w not in prev:
                prev[w] = u
                queue.append(w)
    return None


def collider_connected(g: Graph, a: int, b: int, allowed: NodeSet | None = None) -> bool:
    """Whether a collider path joins ``a`` and ``b`` with interior inside ``allowed``."""
    if a == b:
        raise ValueError("collider connection is defined for distinct nodes")
    if g.adjacent[a] >> b & 1:
        return True
    interior = (g.all_nodes if allowed is None else allowed) & ~(1 << a | 1 << b)
    goal = _neck_from(g, b) & interior
    seen = frontier = _neck_from(g, a) & interior
    while frontier:
        if frontier & goal:
            return True
        nxt = 0
        for u in bits(frontier):
            nxt |= g.blunt_nb[u] | g.bidirected_nb[u]
        frontier = nxt & interior & ~seen
        seen |= frontier
    return False


def weak_inducing_path_exists(g: Graph, a: int, b: int) -> bool:
    """Collider path between ``a`` and ``b`` whose interior lies in ``an({a, b})``.

    When one exists no ``C`` outside ``{a, b}`` separates ``b`` from ``a``
    (with every loop present); otherwise :func:`canonical_separator` does.
    """
    if a == b:
        raise ValueError("weak inducing paths join two distinct nodes")
    return collider_connected(g, a, b, ancestors(g, 1 << a | 1 << b))


def canonical_separator(g: Graph, a: int, b: int) -> NodeSet:
    """Ancestors of ``{a, b}`` collider connected to ``b``, minus ``a`` and ``b``.

    Separates ``b`` from ``a`` whenever no weak inducing path joins them.
    """
    if weak_inducing_path_exists(g, a, b):
        raise ValueError(
            f"weak inducing path between {g.nodes[a]} and {g.nodes[b]}: no separator exists"
        )
    out = 0
    for c in bits(ancestors(g, 1 << a | 1 << b) & ~(1 << a | 1 << b)):
        if collider_connected(g, c, b):
            out |= 1 << c
    return out


# -- independence model -------------------------------------------------------------


@dataclass(frozen=True)
class IndependenceModel:
    """All singleton mu-separations of a graph.

    ``table[a][C]`` is the mask of targets ``b`` with ``b`` separated from
    ``a`` given ``C``. Set queries follow by conjunction over pairs.
    """

    nodes: tuple[str, ...]
    table: tuple[tuple[NodeSet, ...], ...]

    def separated(self, A: NodeSet, B: NodeSet, C: NodeSet) -> bool:
        return all(self.table[a][C] & B == B for a in bits(A))

    def triples(self) -> Iterator[tuple[int, int, NodeSet]]:
        for a, row in enumerate(self.table):
            for C, sep in enumerate(row):
                for b in bits(sep):
                    yield a, b, C

    def __len__(self) -> int:
        return sum(bin(sep).count("1") for row in self.table for sep in row)

    def difference(self, other: "IndependenceModel") -> tuple[int, int, NodeSet] | None:
        """First triple present in exactly one of the two models."""
        for a, (r1, r2) in enumerate(zip(self.table, other.table)):
            for C, (s1, s2) in enumerate(zip(r1, r2)):
                diff = s1 ^ s2
                if diff:
                    return a, (diff & -diff).bit_length() - 1, C
        return None


def independence_model(g: Graph, cap: int = DEFAULT_MODEL_CAP) -> IndependenceModel:
    """Enumerate every ``(a, b, C)`` separation, one walk search per ``(a, C)``.

    Triples with ``a`` in ``C`` hold by vacuity and are included.
    """
    if g.n > cap:
        raise CapExceeded(f"independence model limited to {cap} nodes, graph has {g.n}")
    full = g.all_nodes
    table = tuple(
        tuple(full & ~mu_reachable(g, a, C) for C in range(1 << g.n)) for a in range(g.n)
    )
    return IndependenceModel(g.nodes, table)
