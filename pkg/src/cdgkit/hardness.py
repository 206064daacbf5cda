"""Reduction from 3DNF tautology to Markov equivalence of cDGs.

A formula ``H`` maps to a pair of graphs ``(D, D_plus)`` where ``D_plus``
adds ``alpha |-| x_1`` and ``alpha |-| u_1`` to ``D``. ``H`` is a tautology
exactly when the two graphs are Markov equivalent; a falsifying assignment
yields a separation that holds in ``D`` but fails in ``D_plus``.

Node names: ``alpha``, ``beta``, ``z_<j>_<i>`` for the ``i``-th literal of
term ``j``, ``x_<l>``/``u_<l>`` for variable ``l`` and its negation, and
``g_<node>`` for the helper attached to each of those.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Iterator

from .graph_core import Graph, NodeSet, ancestors
from .separation import mu_separated, walk_state_search
from .equivalence import markov_equivalent

__all__ = [
    "DnfError",
    "TermTooLong",
    "EmptyTerm",
    "NoFalsifier",
    "DnfFormula",
    "ReductionPair",
    "SeparatorCertificate",
    "ReductionCheck",
    "parse_dnf",
    "is_tautology",
    "falsifying_assignments",
    "reduce_to_graph_pair",
    "expected_sizes",
    "falsifying_assignment_to_separator",
    "check_reduction",
    "generate_corpus",
]

MAX_TAUTOLOGY_VARS = 20
MAX_TERM_SIZE = 3

Literal = tuple[int, bool]  # (variable index from 1, positive?)


class DnfError(ValueError):
    pass


class TermTooLong(DnfError):
    pass


class EmptyTerm(DnfError):
    pass


class NoFalsifier(DnfError):
    """The formula is a tautology, or the given assignment satisfies it."""


@dataclass(frozen=True)
class DnfFormula:
    """Disjunction of terms; each term is a conjunction of 1 to 3 literals.

    ``n_vars`` is the largest variable index mentioned (variables are
    ``x1 .. x<n_vars>``). Assignments are bitmasks with bit ``l - 1`` holding
    ``x<l>``.
    """

    n_vars: int
    terms: tuple[tuple[Literal, ...], ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise DnfError("a formula needs at least one term")
        for term in self.terms:
            if not term:
                raise EmptyTerm("empty term")
            if len(term) > MAX_TERM_SIZE:
                raise TermTooLong(f"term has {len(term)} literals, at most {MAX_TERM_SIZE} allowed")
            for var, _ in term:
                if not 1 <= var <= self.n_vars:
                    raise DnfError(f"variable x{var} out of range")

    def __str__(self) -> str:
        return " | ".join(
            "(" + " & ".join(("" if pos else "!") + f"x{v}" for v, pos in term) + ")" for term in self.terms
        )

    def satisfied_by(self, assignment: int) -> bool:
        return any(all((assignment >> (v - 1) & 1) == pos for v, pos in term) for term in self.terms)


_LITERAL_RE = re.compile(r"^(!?)x([1-9][0-9]*)$")


def parse_dnf(text: str) -> DnfFormula:
    """Parse ``(x1 & !x2 & x3) | (x2)``; parentheses around terms are optional."""
    terms = []
    n_vars = 0
    for raw in text.split("|"):
        body = raw.strip()
        if body.startswith("(") and body.endswith(")"):
            body = body[1:-1].strip()
        if "(" in body or ")" in body:
            raise DnfError(f"unbalanced parentheses in term {raw.strip()!r}")
        if not body:
            raise EmptyTerm("empty term")
        term = []
        for lit in body.split("&"):
            m = _LITERAL_RE.match(lit.strip())
            if not m:
                raise DnfError(f"bad literal {lit.strip()!r}")
            var = int(m.group(2))
            term.append((var, m.group(1) != "!"))
            n_vars = max(n_vars, var)
        if len(term) > MAX_TERM_SIZE:
            raise TermTooLong(f"term {raw.strip()!r} has {len(term)} literals, at most {MAX_TERM_SIZE} allowed")
        terms.append(tuple(term))
    return DnfFormula(n_vars, tuple(terms))


def falsifying_assignments(f: DnfFormula) -> Iterator[int]:
    """Every assignment making all terms false, in increasing bitmask order."""
    if f.n_vars > MAX_TAUTOLOGY_VARS:
        raise DnfError(f"brute force limited to {MAX_TAUTOLOGY_VARS} variables, formula has {f.n_vars}")
    masks = []
    for term in f.terms:
        pos = sum(1 << (v - 1) for v, p in term if p)
        neg = sum(1 << (v - 1) for v, p in term if not p)
        masks.append((pos, neg))
    for x in range(1 << f.n_vars):
        if not any(x & pos == pos and not x & neg for pos, neg in masks):
            yield x


def is_tautology(f: DnfFormula) -> bool:
    return next(falsifying_assignments(f), None) is None


# -- the graph pair ---------------------------------------------------------------------


@dataclass(frozen=True)
class ReductionPair:
    formula: DnfFormula
    D: Graph
    D_plus: Graph

    @property
    def alpha(self) -> int:
        return self.D.index("alpha")

    @property
    def beta(self) -> int:
        return self.D.index("beta")


def _literal_nodes(f: DnfFormula) -> list[str]:
    out = [f"z_{j}_{i}" for j, term in enumerate(f.terms, 1) for i in range(1, len(term) + 1)]
    for l in range(1, f.n_vars + 1):
        out += [f"x_{l}", f"u_{l}"]
    return out


def expected_sizes(f: DnfFormula) -> dict[str, int]:
    """Closed-form node and edge counts of ``D``.

    With ``L`` literal occurrences, ``N`` terms and ``n`` variables, the
    inner node set has ``L + 2n`` members and every one of them gets a
    helper node.
    """
    L = sum(len(t) for t in f.terms)
    N = len(f.terms)
    n = f.n_vars
    inner = L + 2 * n
    nodes = 2 + 2 * inner
    directed = nodes + inner + 2 * inner + N + 2 * L
    blunt = (L - N) + 2 * N + 4 * (n - 1) + 2 + 1
    return {"inner": inner, "nodes": nodes, "directed": directed, "blunt": blunt}


def reduce_to_graph_pair(f: DnfFormula) -> ReductionPair:
    """Build ``D`` and ``D_plus`` for formula ``f``.

    Terms shorter than three literals chain the literals they have; the
    last one is joined to both ``x_1`` and ``u_1``.
    """
    inner = _literal_nodes(f)
    nodes = ["alpha", "beta", *inner, *(f"g_{v}" for v in inner)]
    directed: set[tuple[str, str]] = set()
    blunt: set[tuple[str, str]] = set()

    def both_ways(a: str, b: str) -> None:
        directed.add((a, b))
        directed.add((b, a))

    for v in inner:
        directed.add(("alpha", f"g_{v}"))
        both_ways(f"g_{v}", v)
    for j, term in enumerate(f.terms, 1):
        chain = [f"z_{j}_{i}" for i in range(1, len(term) + 1)]
        directed.add(("alpha", chain[0]))
        blunt.update(zip(chain, chain[1:]))
        blunt.add((chain[-1], "x_1"))
        blunt.add((chain[-1], "u_1"))
        for z, (var, pos) in zip(chain, term):
            both_ways(f"x_{var}" if pos else f"u_{var}", z)
    n = f.n_vars
    for l in range(1, n):
        for a in (f"x_{l}", f"u_{l}"):
            for b in (f"x_{l + 1}", f"u_{l + 1}"):
                blunt.add((a, b))
    blunt.add((f"x_{n}", "beta"))
    blunt.add((f"u_{n}", "beta"))
    blunt.add(("x_1", "u_1"))
    D = Graph.from_edges(nodes, directed, blunt, loops=True, class_tag="cDG")
    D_plus = Graph.from_edges(
        nodes, directed, blunt | {("alpha", "x_1"), ("alpha", "u_1")}, loops=True, class_tag="cDG"
    )
    return ReductionPair(f, D, D_plus)


# -- certificates -----------------------------------------------------------------------


@dataclass(frozen=True)
class SeparatorCertificate:
    """Evidence that ``D`` and ``D_plus`` differ, from a falsifying assignment.

    ``path_nodes`` holds ``x_l`` for true and ``u_l`` for false variables:
    the interior of a collider path ``alpha .. beta`` of ``D_plus`` that
    ``D`` does not cover. ``separator`` is ``an({alpha, beta} | path_nodes)``
    minus the endpoints; ``beta`` is separated from ``alpha`` by it in ``D``
    but not in ``D_plus``. The two flags record what both deciders found.
    """

    assignment: int
    path_nodes: NodeSet
    separator: NodeSet
    separated_in_D: bool
    separated_in_D_plus: bool

    @property
    def valid(self) -> bool:
        return self.separated_in_D and not self.separated_in_D_plus


def falsifying_assignment_to_separator(pair: ReductionPair, assignment: int | None = None) -> SeparatorCertificate:
    """Certificate for ``assignment`` (default: the first falsifying one).

    Both separation deciders are run on both graphs; a disagreement between
    deciders raises ``RuntimeError``.
    """
    f = pair.formula
    if assignment is None:
        assignment = next(falsifying_assignments(f), None)
        if assignment is None:
            raise NoFalsifier("formula is a tautology")
    elif f.satisfied_by(assignment):
        raise NoFalsifier("assignment satisfies the formula")
    D = pair.D
    path_nodes = 0
    for l in range(1, f.n_vars + 1):
        name = f"x_{l}" if assignment >> (l - 1) & 1 else f"u_{l}"
        path_nodes |= 1 << D.index(name)
    ends = 1 << pair.alpha | 1 << pair.beta
    separator = ancestors(D, ends | path_nodes) & ~ends
    A, B = 1 << pair.alpha, 1 << pair.beta
    verdicts = []
    for g in (pair.D, pair.D_plus):
        s = mu_separated(g, A, B, separator)
        if s != walk_state_search(g, A, B, separator):
            raise RuntimeError("separation deciders disagree")
        verdicts.append(s)
    return SeparatorCertificate(assignment, path_nodes, separator, verdicts[0], verdicts[1])


@dataclass(frozen=True)
class ReductionCheck:
    formula: DnfFormula
    tautology: bool
    equivalent: bool
    certificate: SeparatorCertificate | None

    @property
    def consistent(self) -> bool:
        if self.tautology != self.equivalent:
            return False
        return self.tautology or (self.certificate is not None and self.certificate.valid)


def check_reduction(f: DnfFormula) -> ReductionCheck:
    """Compare brute-force tautology with equivalence of the reduced pair."""
    pair = reduce_to_graph_pair(f)
    taut = is_tautology(f)
    equiv = markov_equivalent(pair.D, pair.D_plus)
    cert = None if taut else falsifying_assignment_to_separator(pair)
    return ReductionCheck(f, taut, equiv, cert)


# -- corpus ---------------------------------------------------------------------------------


def _random_term(rng: random.Random, n: int) -> tuple[Literal, ...]:
    size = rng.randint(1, min(MAX_TERM_SIZE, n))
    vars_ = rng.sample(range(1, n + 1), size)
    return tuple((v, rng.random() < 0.5) for v in sorted(vars_))


def _complete_cover(rng: random.Random, n: int) -> list[tuple[Literal, ...]]:
    """Terms covering every assignment of one or two chosen variables."""
    k = rng.randint(1, min(2, n))
    vars_ = sorted(rng.sample(range(1, n + 1), k))
    terms = []
    for x in range(1 << k):
        terms.append(tuple((v, bool(x >> i & 1)) for i, v in enumerate(vars_)))
    return terms


def generate_corpus(count: int = 240, seed: int = 0, max_vars: int = 4, max_terms: int = 4) -> list[DnfFormula]:
    """Deterministic mix of random formulas and planted tautologies.

    Every formula uses at most ``max_vars`` variables and ``max_terms``
    terms. Roughly a third are built from a complete cover of one or two
    variables (tautologies, sometimes with a literal flipped to break
    them); the rest are uniform random.
    """
    rng = random.Random(seed)
    fixed = ["(x1) | (!x1)", "(x1)", "(x1 & x2) | (!x1) | (x1 & !x2)", "(x1 & !x2)", "(x1 & x2 & x3)"]
    out = [parse_dnf(s) for s in fixed]
    seen = {str(f) for f in out}
    while len(out) < count:
        n = rng.randint(1, max_vars)
        if rng.random() < 0.35:
            terms = _complete_cover(rng, n)
            while len(terms) < max_terms and rng.random() < 0.5:
                terms.append(_random_term(rng, n))
            if rng.random() < 0.3:
                j = rng.randrange(len(terms))
                i = rng.randrange(len(terms[j]))
                v, p = terms[j][i]
                terms[j] = terms[j][:i] + ((v, not p),) + terms[j][i + 1 :]
            rng.shuffle(terms)
        else:
            terms = [_random_term(rng, n) for _ in range(rng.randint(1, max_terms))]
        used = max(v for t in terms for v, _ in t)
        f = DnfFormula(used, tuple(terms))
        if str(f) not in seen:
            seen.add(str(f))
            out.append(f)
    return out
