"""Graph representation and structural primitives.

A :class:`Graph` holds a node list plus three edge sets: directed edges
(``a -> b``), blunt edges (``a |-| b``, correlated noise) and bidirected edges
(``a <-> b``). Node sets are plain Python ``int`` bitmasks indexed by node
position, so set algebra is ``|``, ``&`` and ``& ~``; width is unbounded.

Everything here is pure: graphs are immutable and every transform returns a
new graph.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

__all__ = [
    "Graph",
    "GraphError",
    "GraphParseError",
    "BluntLoopError",
    "Condensation",
    "Diagnostic",
    "NodeSet",
    "bits",
    "popcount",
    "parse_graph",
    "serialize_graph",
    "ancestors",
    "descendants",
    "strongly_connected_components",
    "ancestral_sets",
    "blunt_components",
    "induced_subgraph",
    "directed_part",
    "blunt_part",
    "add_edge",
    "remove_edge",
    "with_all_loops",
    "validate",
    "random_cdg",
]

NodeSet = int
"""Bitmask over node indices; bit ``i`` set means node ``i`` is a member."""

_LABEL_RE = re.compile(r"^[A-Za-z0-9_]+$")
_EDGE_RE = re.compile(r"^([A-Za-z0-9_]+)\s*(->|\|-\||<->)\s*([A-Za-z0-9_]+)$")

CLASS_TAGS = ("cDG", "DMG", "DG")


class GraphError(ValueError):
    """Invalid graph construction or operation."""


class GraphParseError(GraphError):
    """Syntax error in ``.cdg`` text; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class BluntLoopError(GraphError):
    """Blunt edges must join two distinct nodes."""


def bits(mask: NodeSet) -> Iterator[int]:
    """Yield the indices of the set bits of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def popcount(mask: NodeSet) -> int:
    return bin(mask).count("1")


@dataclass(frozen=True)
class Graph:
    """Immutable graph with directed, blunt and bidirected edges.

    Edges are stored as index pairs. Blunt pairs are normalised to
    ``(i, j)`` with ``i < j``; bidirected pairs to ``i <= j`` (bidirected
    loops are allowed). ``class_tag`` is inferred when not given.
    """

    nodes: tuple[str, ...]
    directed: frozenset[tuple[int, int]] = frozenset()
    blunt: frozenset[tuple[int, int]] = frozenset()
    bidirected: frozenset[tuple[int, int]] = frozenset()
    class_tag: str = ""
    _index: dict[str, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.nodes)
        if len(set(self.nodes)) != n:
            raise GraphError("duplicate node labels")
        for label in self.nodes:
            if not _LABEL_RE.match(label):
                raise GraphError(f"invalid node label {label!r}")
        for i, j in self.directed:
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError("directed edge index out of range")
        for i, j in self.blunt:
            if i == j:
                raise BluntLoopError(f"blunt loop at {self.nodes[i]}")
            if not (0 <= i < j < n):
                raise GraphError("blunt edge must be normalised as (i, j) with i < j")
        for i, j in self.bidirected:
            if not (0 <= i <= j < n):
                raise GraphError("bidirected edge must be normalised as (i, j) with i <= j")
        inferred = "DMG" if self.bidirected else ("cDG" if self.blunt else "DG")
        tag = self.class_tag or inferred
        if tag not in CLASS_TAGS:
            raise GraphError(f"unknown class tag {tag!r}")
        if tag == "cDG" and self.bidirected:
            raise GraphError("a cDG cannot contain bidirected edges")
        if tag == "DMG" and self.blunt:
            raise GraphError("a DMG cannot contain blunt edges")
        if tag == "DG" and (self.blunt or self.bidirected):
            raise GraphError("a DG contains directed edges only")
        object.__setattr__(self, "class_tag", tag)
        self._index.update({label: i for i, label in enumerate(self.nodes)})

    # -- construction -----------------------------------------------------

    @classmethod
    def from_edges(
        cls,
        nodes: Sequence[str],
        directed: Iterable[tuple[str, str]] = (),
        blunt: Iterable[tuple[str, str]] = (),
        bidirected: Iterable[tuple[str, str]] = (),
        loops: bool = False,
        class_tag: str = "",
    ) -> "Graph":
        """Build a graph from label pairs; ``loops=True`` adds every ``a -> a``."""
        index = {label: i for i, label in enumerate(nodes)}

        def idx(label: str) -> int:
            try:
                return index[label]
            except KeyError:
                raise GraphError(f"unknown node {label!r}") from None

        d = {(idx(a), idx(b)) for a, b in directed}
        if loops:
            d |= {(i, i) for i in range(len(nodes))}
        u = set()
        for a, b in blunt:
            i, j = idx(a), idx(b)
            if i == j:
                raise BluntLoopError(f"blunt loop at {a}")
            u.add((min(i, j), max(i, j)))
        bd = {(min(idx(a), idx(b)), max(idx(a), idx(b))) for a, b in bidirected}
        return cls(tuple(nodes), frozenset(d), frozenset(u), frozenset(bd), class_tag)

    # -- lookups ------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def all_nodes(self) -> NodeSet:
        return (1 << len(self.nodes)) - 1

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise GraphError(f"unknown node {label!r}") from None

    def mask(self, labels: Iterable[str]) -> NodeSet:
        out = 0
        for label in labels:
            out |= 1 << self.index(label)
        return out

    def labels(self, mask: NodeSet) -> list[str]:
        """Labels of ``mask`` in lexicographic order (the output convention)."""
        return sorted(self.nodes[i] for i in bits(mask))

    @cached_property
    def parents(self) -> tuple[NodeSet, ...]:
        out = [0] * self.n
        for i, j in self.directed:
            out[j] |= 1 << i
        return tuple(out)

    @cached_property
    def children(self) -> tuple[NodeSet, ...]:
        out = [0] * self.n
        for i, j in self.directed:
            out[i] |= 1 << j
        return tuple(out)

    @cached_property
    def blunt_nb(self) -> tuple[NodeSet, ...]:
        out = [0] * self.n
        for i, j in self.blunt:
            out[i] |= 1 << j
            out[j] |= 1 << i
        return tuple(out)

    @cached_property
    def bidirected_nb(self) -> tuple[NodeSet, ...]:
        out = [0] * self.n
        for i, j in self.bidirected:
            out[i] |= 1 << j
            out[j] |= 1 << i
        return tuple(out)

    @cached_property
    def neck_nb(self) -> tuple[NodeSet, ...]:
        """``neck_nb[v]``: nodes with an edge carrying a neck at ``v``."""
        return tuple(p | b | d for p, b, d in zip(self.parents, self.blunt_nb, self.bidirected_nb))

    @cached_property
    def adjacent(self) -> tuple[NodeSet, ...]:
        """Adjacency through any edge type, loops excluded."""
        return tuple(
            (p | c | b | d) & ~(1 << v)
            for v, (p, c, b, d) in enumerate(
                zip(self.parents, self.children, self.blunt_nb, self.bidirected_nb)
            )
        )

    def has_directed(self, a: str, b: str) -> bool:
        return (self.index(a), self.index(b)) in self.directed

    def has_blunt(self, a: str, b: str) -> bool:
        i, j = self.index(a), self.index(b)
        return (min(i, j), max(i, j)) in self.blunt

    def edge_count(self) -> int:
        return len(self.directed) + len(self.blunt) + len(self.bidirected)

    def has_all_loops(self) -> bool:
        return all((i, i) in self.directed for i in range(self.n))

    def __str__(self) -> str:
        return serialize_graph(self)


# -- text format -------------------------------------------------------------


def parse_graph(text: str) -> Graph:
    """Parse ``.cdg`` text.

    One edge per line: ``a -> b``, ``a |-| b`` or ``a <-> b``. Optional
    headers ``nodes: a b c`` (declares isolated nodes and fixes the order)
    and ``class: cDG|DMG|DG``. ``#`` starts a comment. Without a ``nodes``
    header, nodes are ordered lexicographically.
    """
    declared: list[str] | None = None
    class_tag = ""
    edges: list[tuple[str, str, str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("nodes:"):
            if declared is not None:
                raise GraphParseError("duplicate nodes header", lineno)
            declared = line[len("nodes:"):].split()
            for label in declared:
                if not _LABEL_RE.match(label):
                    raise GraphParseError(f"invalid node label {label!r}", lineno)
            if len(set(declared)) != len(declared):
                raise GraphParseError("duplicate label in nodes header", lineno)
            continue
        if line.startswith("class:"):
            class_tag = line[len("class:"):].strip()
            if class_tag not in CLASS_TAGS:
                raise GraphParseError(f"unknown class {class_tag!r}", lineno)
            continue
        m = _EDGE_RE.match(line)
        if not m:
            raise GraphParseError(f"cannot parse {line!r}", lineno)
        a, op, b = m.groups()
        if op == "|-|" and a == b:
            raise BluntLoopError(f"line {lineno}: blunt loop at {a}")
        if class_tag == "cDG" and op == "<->":
            raise GraphParseError("bidirected edge in a cDG", lineno)
        if class_tag == "DMG" and op == "|-|":
            raise GraphParseError("blunt edge in a DMG", lineno)
        if class_tag == "DG" and op != "->":
            raise GraphParseError("only directed edges allowed in a DG", lineno)
        edges.append((a, op, b, lineno))

    seen = {x for a, _, b, _ in edges for x in (a, b)}
    if declared is None:
        nodes = sorted(seen)
    else:
        missing = seen - set(declared)
        if missing:
            raise GraphParseError(f"undeclared nodes: {' '.join(sorted(missing))}")
        nodes = declared
    if any(op == "<->" for _, op, _, _ in edges) and any(op == "|-|" for _, op, _, _ in edges):
        raise GraphParseError("graph mixes blunt and bidirected edges")

    return Graph.from_edges(
        nodes,
        directed=[(a, b) for a, op, b, _ in edges if op == "->"],
        blunt=[(a, b) for a, op, b, _ in edges if op == "|-|"],
        bidirected=[(a, b) for a, op, b, _ in edges if op == "<->"],
        class_tag=class_tag,
    )


def serialize_graph(g: Graph, header: bool = True) -> str:
    """Canonical text: ``nodes:`` and ``class:`` headers, then sorted directed, blunt, bidirected lines."""
    names = g.nodes
    lines = []
    if header:
        lines.append("nodes: " + " ".join(names))
        lines.append(f"class: {g.class_tag}")
    lines += sorted(f"{names[i]} -> {names[j]}" for i, j in g.directed)
    lines += sorted(
        f"{min(names[i], names[j])} |-| {max(names[i], names[j])}" for i, j in g.blunt
    )
    lines += sorted(
        f"{min(names[i], names[j])} <-> {max(names[i], names[j])}" for i, j in g.bidirected
    )
    return "\n".join(lines) + "\n"


# -- ancestry and components -------------------------------------------------


def _closure(step: Sequence[NodeSet], start: NodeSet) -> NodeSet:
    seen = start
    frontier = start
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= step[v]
        frontier = nxt & ~seen
        seen |= frontier
    return seen


def ancestors(g: Graph, C: NodeSet) -> NodeSet:
    """an(C): nodes with a (possibly trivial) directed path into ``C``."""
    return _closure(g.parents, C)


def descendants(g: Graph, C: NodeSet) -> NodeSet:
    return _closure(g.children, C)


@dataclass(frozen=True)
class Condensation:
    """Strongly connected components and the DAG between them.

    ``components[k]`` is a node mask; components are ordered by their lowest
    node index. ``dag_edges`` holds ``(k, l)`` when some node of component
    ``k`` has a directed edge into component ``l`` (``k != l``).
    """

    components: tuple[NodeSet, ...]
    dag_edges: frozenset[tuple[int, int]]
    component_of: tuple[int, ...]

    def dag_parents(self, k: int) -> list[int]:
        return sorted(a for a, b in self.dag_edges if b == k)

    @cached_property
    def dag_ancestors(self) -> tuple[int, ...]:
        """Bitmask over component indices: proper and improper ancestors of each."""
        m = len(self.components)
        parents = [0] * m
        for a, b in self.dag_edges:
            parents[b] |= 1 << a
        return tuple(_closure(parents, 1 << k) for k in range(m))

    def completed_nodes(self) -> list[NodeSet]:
        """Nodes of the completed condensation: the empty set root, then the SCCs."""
        return [0, *self.components]

    def completed_is_ancestor(self, x: NodeSet, y: NodeSet) -> bool:
        """Whether ``x`` is an ancestor of ``y`` in the completed condensation.

        The empty root is an ancestor of everything; nothing else is an
        ancestor of the root. Ancestry is reflexive.
        """
        if x == 0:
            return True
        if y == 0:
            return False
        kx = self.components.index(x)
        ky = self.components.index(y)
        return bool(self.dag_ancestors[ky] >> kx & 1)


def strongly_connected_components(g: Graph) -> Condensation:
    """Tarjan's algorithm (iterative) over the directed edges."""
    n = g.n
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[NodeSet] = []
    counter = 0
    children = [list(bits(c)) for c in g.children]
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < len(children[v]):
                work[-1] = (v, pos + 1)
                w = children[v][pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = 0
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp |= 1 << w
                    if w == v:
                        break
                comps.append(comp)
    comps.sort(key=lambda c: (c & -c).bit_length())
    component_of = [0] * n
    for k, comp in enumerate(comps):
        for v in bits(comp):
            component_of[v] = k
    dag = frozenset(
        (component_of[i], component_of[j])
        for i, j in g.directed
        if component_of[i] != component_of[j]
    )
    return Condensation(tuple(comps), dag, tuple(component_of))


def ancestral_sets(g: Graph) -> Iterator[NodeSet]:
    """Every nonempty ancestral set (``A == an(A)``), each exactly once.

    Ancestral sets are unions of down-closed families of the condensation.
    Output is sorted by cardinality, then by bitmask value.
    """
    cond = strongly_connected_components(g)
    m = len(cond.components)
    parents = [0] * m
    for a, b in cond.dag_edges:
        parents[b] |= 1 << a
    # Topological order so each component is decided after its parents.
    order: list[int] = []
    placed = 0
    while len(order) < m:
        for k in range(m):
            if not placed >> k & 1 and parents[k] & ~placed == 0:
                order.append(k)
                placed |= 1 << k
    found: list[NodeSet] = []

    def extend(pos: int, chosen: int, nodes: NodeSet) -> None:
        if pos == m:
            if nodes:
                found.append(nodes)
            return
        k = order[pos]
        extend(pos + 1, chosen, nodes)
        if parents[k] & ~chosen == 0:
            extend(pos + 1, chosen | 1 << k, nodes | cond.components[k])

    extend(0, 0, 0)
    found.sort(key=lambda s: (popcount(s), s))
    yield from found


def _components(adj: Sequence[NodeSet], universe: NodeSet) -> list[NodeSet]:
    comps = []
    remaining = universe
    while remaining:
        start = remaining & -remaining
        comp = start
        frontier = start
        while frontier:
            nxt = 0
            for v in bits(frontier):
                nxt |= adj[v]
            frontier = nxt & universe & ~comp
            comp |= frontier
        comps.append(comp)
        remaining &= ~comp
    return comps


def blunt_components(g: Graph, within: NodeSet | None = None) -> list[NodeSet]:
    """Connected components of the blunt-edge graph, singletons included.

    With ``within``, components of the blunt graph induced on that set.
    Singletons can be recognised by ``popcount(c) == 1``.
    """
    universe = g.all_nodes if within is None else within
    return _components(g.blunt_nb, universe)


def neck_components(g: Graph, within: NodeSet) -> list[NodeSet]:
    """Components of the blunt-plus-bidirected graph induced on ``within``."""
    adj = [b | d for b, d in zip(g.blunt_nb, g.bidirected_nb)]
    return _components(adj, within)


# -- transforms --------------------------------------------------------------


def induced_subgraph(g: Graph, A: NodeSet) -> Graph:
    """Subgraph on ``A`` keeping node order and exactly the edges inside ``A``."""
    keep = [i for i in range(g.n) if A >> i & 1]
    remap = {old: new for new, old in enumerate(keep)}
    return Graph(
        tuple(g.nodes[i] for i in keep),
        frozenset((remap[i], remap[j]) for i, j in g.directed if i in remap and j in remap),
        frozenset((remap[i], remap[j]) for i, j in g.blunt if i in remap and j in remap),
        frozenset((remap[i], remap[j]) for i, j in g.bidirected if i in remap and j in remap),
        g.class_tag,
    )


def restrict(g: Graph, A: NodeSet) -> Graph:
    """Like :func:`induced_subgraph` but keeps every node (edges outside ``A`` dropped).

    Node indices stay valid, which lets callers reuse masks.
    """
    inside = lambda i, j: A >> i & 1 and A >> j & 1  # noqa: E731
    return Graph(
        g.nodes,
        frozenset(e for e in g.directed if inside(*e)),
        frozenset(e for e in g.blunt if inside(*e)),
        frozenset(e for e in g.bidirected if inside(*e)),
        g.class_tag,
    )


def directed_part(g: Graph) -> Graph:
    return Graph(g.nodes, g.directed, class_tag="DG")


def blunt_part(g: Graph) -> Graph:
    return Graph(g.nodes, blunt=g.blunt, class_tag="cDG")


def _edge_key(g: Graph, kind: str, a: str, b: str) -> tuple[int, int]:
    i, j = g.index(a), g.index(b)
    if kind == "->":
        return (i, j)
    if kind == "|-|":
        if i == j:
            raise BluntLoopError(f"blunt loop at {a}")
        return (min(i, j), max(i, j))
    if kind == "<->":
        return (min(i, j), max(i, j))
    raise GraphError(f"unknown edge kind {kind!r}")


def add_edge(g: Graph, kind: str, a: str, b: str) -> Graph:
    """Return ``g`` plus one edge; adding an existing edge is a no-op."""
    e = _edge_key(g, kind, a, b)
    if kind == "->":
        return Graph(g.nodes, g.directed | {e}, g.blunt, g.bidirected, g.class_tag)
    tag = g.class_tag
    if kind == "|-|":
        tag = "cDG" if tag == "DG" else tag
        return Graph(g.nodes, g.directed, g.blunt | {e}, g.bidirected, tag)
    tag = "DMG" if tag == "DG" else tag
    return Graph(g.nodes, g.directed, g.blunt, g.bidirected | {e}, tag)


def remove_edge(g: Graph, kind: str, a: str, b: str) -> Graph:
    e = _edge_key(g, kind, a, b)
    return Graph(
        g.nodes,
        g.directed - {e} if kind == "->" else g.directed,
        g.blunt - {e} if kind == "|-|" else g.blunt,
        g.bidirected - {e} if kind == "<->" else g.bidirected,
        g.class_tag,
    )


def with_all_loops(g: Graph) -> Graph:
    loops = frozenset((i, i) for i in range(g.n))
    return Graph(g.nodes, g.directed | loops, g.blunt, g.bidirected, g.class_tag)


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    message: str


def validate(g: Graph) -> list[Diagnostic]:
    """Structural report: missing directed loops and class violations.

    Blunt loops and class violations cannot exist in a constructed
    :class:`Graph`, so in practice this reports missing loops; the other
    checks guard graphs assembled by hand.
    """
    out = []
    for i, label in enumerate(g.nodes):
        if (i, i) not in g.directed:
            out.append(Diagnostic("error", f"missing directed loop: {label}"))
    for i, j in g.blunt:
        if i == j:
            out.append(Diagnostic("error", f"blunt loop: {g.nodes[i]}"))
    if g.class_tag == "cDG" and g.bidirected:
        out.append(Diagnostic("error", "bidirected edge in a cDG"))
    if g.class_tag == "DMG" and g.blunt:
        out.append(Diagnostic("error", "blunt edge in a DMG"))
    return out


# -- random generation -------------------------------------------------------


def default_labels(n: int) -> list[str]:
    return [f"v{i}" for i in range(n)]


def random_cdg(
    n: int,
    rng: random.Random,
    p_directed: float = 0.3,
    p_blunt: float = 0.3,
    loops: bool = True,
    labels: Sequence[str] | None = None,
) -> Graph:
    """Random cDG with independent edge inclusion."""
    labels = list(labels) if labels is not None else default_labels(n)
    directed = {(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < p_directed}
    if loops:
        directed |= {(i, i) for i in range(n)}
    blunt = {(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p_blunt}
    return Graph(tuple(labels), frozenset(directed), frozenset(blunt), class_tag="cDG")


def random_dmg(
    n: int,
    rng: random.Random,
    p_directed: float = 0.3,
    p_bidirected: float = 0.3,
    loops: bool = True,
) -> Graph:
    """Random DMG; bidirected loops included with probability ``p_bidirected``."""
    directed = {(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < p_directed}
    if loops:
        directed |= {(i, i) for i in range(n)}
    bidirected = {(i, j) for i in range(n) for j in range(i, n) if rng.random() < p_bidirected}
    return Graph(tuple(default_labels(n)), frozenset(directed), bidirected=frozenset(bidirected), class_tag="DMG")
