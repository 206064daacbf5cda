"""Shared hypothesis strategies and fixture loading."""

from __future__ import annotations

import itertools
from pathlib import Path

from hypothesis import strategies as st

from cdgkit.graph_core import Graph, default_labels, parse_graph

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "cdgkit" / "fixtures"


def fixture_graph(name: str) -> Graph:
    return parse_graph((FIXTURES / f"{name}.cdg").read_text(encoding="utf-8"))


@st.composite
def cdgs(draw, min_n: int = 1, max_n: int = 5, loops: bool = True) -> Graph:
    """cDGs with every directed loop (unless ``loops`` is false) and arbitrary other edges."""
    n = draw(st.integers(min_n, max_n))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    directed = {e for e in pairs if draw(st.booleans())}
    if loops:
        directed |= {(i, i) for i in range(n)}
    blunt = {e for e in itertools.combinations(range(n), 2) if draw(st.booleans())}
    return Graph(tuple(default_labels(n)), frozenset(directed), frozenset(blunt), class_tag="cDG")


@st.composite
def dmgs(draw, min_n: int = 1, max_n: int = 5) -> Graph:
    n = draw(st.integers(min_n, max_n))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    directed = {e for e in pairs if draw(st.booleans())} | {(i, i) for i in range(n)}
    bidirected = {(i, j) for i in range(n) for j in range(i, n) if draw(st.booleans())}
    return Graph(tuple(default_labels(n)), frozenset(directed), bidirected=frozenset(bidirected), class_tag="DMG")


@st.composite
def graph_and_query(draw, graphs=None):
    """A graph with masks ``(A, B, C)``, ``A`` and ``B`` nonempty; the sets may overlap."""
    g = draw(graphs if graphs is not None else cdgs())
    full = g.all_nodes
    A = draw(st.integers(1, full))
    B = draw(st.integers(1, full))
    C = draw(st.integers(0, full))
    return g, A, B, C


def all_cdgs_with_loops(n: int):
    """Every cDG on ``n`` nodes with all directed loops present."""
    labels = tuple(default_labels(n))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    slots = list(itertools.combinations(range(n), 2))
    loops = frozenset((i, i) for i in range(n))
    for dmask in range(1 << len(pairs)):
        directed = loops | {pairs[k] for k in range(len(pairs)) if dmask >> k & 1}
        for bmask in range(1 << len(slots)):
            blunt = frozenset(slots[k] for k in range(len(slots)) if bmask >> k & 1)
            yield Graph(labels, frozenset(directed), blunt, class_tag="cDG")
