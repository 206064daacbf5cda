"""Command-line front end: ``cdgkit <subcommand> ...``.

Every subcommand prints one JSON document (or a plain-text rendering with
``--format text``). Exit status is 0 on success, 2 on usage or input
errors, and 1 on a negative verdict when ``--exit-status`` is given.
``corpus`` always exits 1 when an expectation fails.

Graph arguments are ``.cdg`` paths; a bare name such as ``fig7_left``
refers to a fixture shipped with the package. The default seed comes from
``CDGKIT_SEED`` (else 0). Output is byte-stable for fixed arguments unless
``--timings`` asks for wall-clock figures.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .equivalence import (
    collider_witness,
    enumerate_class,
    is_maximal,
    markov_equivalence_witness,
    maximal_vcts,
    oracle_witness,
    vct_prescreen,
    virtual_collider_tripaths,
)
from .graph_core import Graph, GraphError, parse_graph, random_cdg, random_dmg, serialize_graph, validate
from .hardness import DnfError, check_reduction, expected_sizes, generate_corpus, parse_dnf, reduce_to_graph_pair
from .ou_numerics import NumericsError, OUModel, canonical_lig, verify_global_markov
from .separation import (
    CapExceeded,
    brute_force_separated,
    find_connecting_walk,
    mu_separated,
    walk_state_search,
    weak_inducing_path_exists,
)

SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


# -- input helpers -----------------------------------------------------------------


def _fixture_dir():
    return resources.files("cdgkit") / "fixtures"


def load_graph(ref: str) -> Graph:
    path = Path(ref)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    else:
        name = ref if ref.endswith(".cdg") else ref + ".cdg"
        fixture = _fixture_dir() / name
        if not fixture.is_file():
            raise UsageError(f"no such graph file or fixture: {ref}")
        text = fixture.read_text(encoding="utf-8")
    return parse_graph(text)


def _node_list(text: str | None) -> list[str]:
    if not text:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _mask(g: Graph, text: str | None) -> int:
    try:
        return g.mask(_node_list(text))
    except (KeyError, GraphError) as exc:
        raise UsageError(f"unknown node in {text!r}") from exc


def default_seed() -> int:
    raw = os.environ.get("CDGKIT_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CDGKIT_SEED must be an integer, got {raw!r}") from None


# -- subcommands -------------------------------------------------------------------
# Each handler returns (payload, negative); ``negative`` drives --exit-status.


def cmd_validate(args) -> tuple[dict, bool]:
    g = load_graph(args.graph)
    diags = validate(g)
    ok = not any(d.level == "error" for d in diags)
    payload = {
        "valid": ok,
        "class": g.class_tag,
        "nodes": list(g.nodes),
        "all_loops": g.has_all_loops(),
        "diagnostics": [{"level": d.level, "message": d.message} for d in diags],
    }
    return payload, not ok


_SEP_METHODS = {"aug": mu_separated, "walk": walk_state_search, "brute": brute_force_separated}


def _graph_arg(args) -> str:
    if (args.graph is None) == (args.graph_opt is None):
        raise UsageError("give the graph once, positionally or with --graph")
    return args.graph if args.graph is not None else args.graph_opt


def cmd_query_sep(args) -> tuple[dict, bool]:
    g = load_graph(_graph_arg(args))
    A, B, C = _mask(g, args.source), _mask(g, args.target), _mask(g, args.given)
    if not A or not B:
        raise UsageError("--from and --to must name at least one node each")
    sep = _SEP_METHODS[args.method](g, A, B, C)
    if args.method != "walk" and sep != walk_state_search(g, A, B, C):
        raise RuntimeError("separation deciders disagree")
    payload: dict = {"method": args.method, "A": g.labels(A), "B": g.labels(B), "C": g.labels(C), "separated": sep}
    if not sep:
        payload["witness_walk"] = find_connecting_walk(g, A, B, C)
    return payload, not sep


_WITNESS_FUNCS = {"alg1": markov_equivalence_witness, "collider": collider_witness, "oracle": oracle_witness}


def cmd_equiv(args) -> tuple[dict, bool]:
    g1, g2 = load_graph(args.graph1), load_graph(args.graph2)
    if args.method == "prescreen":
        verdict = vct_prescreen(g1, g2, add_loops=args.add_loops)
        return {"method": "prescreen", "prescreen": verdict}, verdict == "distinct"
    witness = _WITNESS_FUNCS[args.method](g1, g2, add_loops=args.add_loops)
    payload: dict = {"method": args.method, "equivalent": witness is None}
    if witness is not None:
        payload["witness"] = witness.to_dict(g1)
    return payload, witness is not None


def _blunt_text(g: Graph) -> list[str]:
    return [f"{g.nodes[a]} |-| {g.nodes[b]}" for a, b in sorted(g.blunt)]


def cmd_class(args) -> tuple[dict, bool]:
    g = load_graph(args.graph)
    cls = enumerate_class(g, slot_cap=args.slot_cap, add_loops=args.add_loops)
    payload = {
        "size": len(cls),
        "greatest": None if cls.greatest is None else _blunt_text(cls.greatest),
        "least": None if cls.least is None else _blunt_text(cls.least),
        "members": [_blunt_text(m) for m in cls.members],
    }
    return payload, False


def cmd_vct(args) -> tuple[dict, bool]:
    g = load_graph(args.graph)
    found = maximal_vcts(g, add_loops=args.add_loops) if args.maximal else virtual_collider_tripaths(g, add_loops=args.add_loops)
    rows = sorted(v.labels(g) for v in found)
    return {"maximal_only": args.maximal, "count": len(rows), "tripaths": [{"pair": [a, b], "C": C} for a, b, C in rows]}, False


def cmd_maximal(args) -> tuple[dict, bool]:
    g = load_graph(args.graph)
    rep = is_maximal(g, add_loops=args.add_loops)
    return {"maximal": rep.maximal, "addable": [" ".join(e) for e in rep.addable]}, not rep.maximal


def cmd_reduce_dnf(args) -> tuple[dict, bool]:
    f = parse_dnf(args.formula)
    pair = reduce_to_graph_pair(f)
    payload: dict = {"formula": str(f), "sizes": expected_sizes(f)}
    written = []
    for key, target, g in (("D", args.out_d, pair.D), ("D_plus", args.out_dplus, pair.D_plus)):
        if target:
            path = Path(target)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(serialize_graph(g), encoding="utf-8")
            written.append(str(path))
        else:
            payload[key] = serialize_graph(g)
    if written:
        payload["written"] = written
    return payload, False


def _check_payload(check) -> dict:
    out: dict = {
        "formula": str(check.formula),
        "tautology": check.tautology,
        "equivalent": check.equivalent,
        "consistent": check.consistent,
    }
    cert = check.certificate
    if cert is not None:
        D = reduce_to_graph_pair(check.formula).D
        out["certificate"] = {
            "assignment": [bool(cert.assignment >> i & 1) for i in range(check.formula.n_vars)],
            "path_nodes": D.labels(cert.path_nodes),
            "separator": D.labels(cert.separator),
            "separated_in_D": cert.separated_in_D,
            "separated_in_D_plus": cert.separated_in_D_plus,
        }
    return out


def cmd_check_reduction(args) -> tuple[dict, bool]:
    if (args.formula is None) == (args.corpus is None):
        raise UsageError("give exactly one of --formula and --corpus")
    if args.formula is not None:
        payload = _check_payload(check_reduction(parse_dnf(args.formula)))
        return payload, not payload["consistent"]
    seed = default_seed() if args.seed is None else args.seed
    checks = [check_reduction(f) for f in generate_corpus(args.corpus, seed=seed)]
    bad = [str(c.formula) for c in checks if not c.consistent]
    payload = {
        "count": len(checks),
        "seed": seed,
        "tautologies": sum(c.tautology for c in checks),
        "inconsistent": bad,
        "consistent": not bad,
    }
    return payload, bool(bad)


def cmd_random_graph(args) -> tuple[dict, bool]:
    seed = default_seed() if args.seed is None else args.seed
    rng = random.Random(seed)
    if args.dmg:
        g = random_dmg(args.nodes, rng, p_directed=args.p_directed, p_bidirected=args.p_blunt, loops=not args.no_loops)
    else:
        g = random_cdg(args.nodes, rng, p_directed=args.p_directed, p_blunt=args.p_blunt, loops=not args.no_loops)
    return {"seed": seed, "graph": serialize_graph(g)}, False


def _load_model(ref: str) -> OUModel:
    try:
        return OUModel.from_json(Path(ref).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise UsageError(f"no such model file: {ref}") from exc
    except (KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"malformed model file {ref}: {exc}") from exc


def cmd_ou_extract(args) -> tuple[dict, bool]:
    g = canonical_lig(_load_model(args.model))
    return {"graph": serialize_graph(g)}, False


def cmd_ou_verify(args) -> tuple[dict, bool]:
    model = _load_model(args.model)
    g = canonical_lig(model)
    A, B, C = _mask(g, args.source), _mask(g, args.target), _mask(g, args.given)
    if not B:
        raise UsageError("--to must name at least one node")
    seed = default_seed() if args.seed is None else args.seed
    rep = verify_global_markov(model, A, B, C, T=args.T, dt=args.dt, seed=seed, n_paths=args.paths, tol=args.tol, mode=args.mode)
    payload = rep.to_dict()
    if rep.mode == "positive":
        payload["verdict"] = "PASS" if rep.passed else "FAIL"
        return payload, not rep.passed
    # A non-separated query is expected to show a discrepancy above tolerance.
    payload["verdict"] = "DIFFERENT" if not rep.passed else "SAME"
    return payload, False


def run_corpus(fixtures=None) -> list[dict]:
    """Check every expectation in ``expectations.json``; one result row each."""
    base = _fixture_dir() if fixtures is None else Path(fixtures)
    table = json.loads((base / "expectations.json").read_text(encoding="utf-8"))
    cache: dict[str, Graph] = {}

    def graph(name: str) -> Graph:
        if name not in cache:
            cache[name] = parse_graph((base / f"{name}.cdg").read_text(encoding="utf-8"))
        return cache[name]

    rows = []

    def record(kind: str, subject: str, expected, actual) -> None:
        rows.append({"check": kind, "subject": subject, "expected": expected, "actual": actual, "ok": expected == actual})

    for e in table.get("separation", []):
        g = graph(e["graph"])
        A, B, C = g.mask(e["A"]), g.mask(e["B"]), g.mask(e["C"])
        got = mu_separated(g, A, B, C)
        if got != walk_state_search(g, A, B, C):
            got = "deciders disagree"
        record("separation", f"{e['graph']}: {e['B']} from {e['A']} given {e['C']}", e["separated"], got)
    for e in table.get("weak_inducing_path", []):
        g = graph(e["graph"])
        a, b = (g.index(x) for x in e["pair"])
        record("weak_inducing_path", f"{e['graph']}: {e['pair']}", e["exists"], weak_inducing_path_exists(g, a, b))
    for e in table.get("equivalent", []):
        g1, g2 = (graph(x) for x in e["graphs"])
        verdicts = {markov_equivalence_witness(g1, g2) is None, collider_witness(g1, g2) is None}
        got = verdicts.pop() if len(verdicts) == 1 else "deciders disagree"
        record("equivalent", " vs ".join(e["graphs"]), e["equivalent"], got)
    for e in table.get("class", []):
        cls = enumerate_class(graph(e["graph"]))
        actual = {"size": len(cls), "greatest": cls.greatest is not None, "least": cls.least is not None}
        expected = {k: e[k] for k in ("size", "greatest", "least") if k in e}
        record("class", e["graph"], expected, {k: actual[k] for k in expected})
    for e in table.get("maximal", []):
        record("maximal", e["graph"], e["maximal"], is_maximal(graph(e["graph"])).maximal)
    for e in table.get("prescreen", []):
        g1, g2 = (graph(x) for x in e["graphs"])
        record("prescreen", " vs ".join(e["graphs"]), e["verdict"], vct_prescreen(g1, g2))
    return rows


def cmd_corpus(args) -> tuple[dict, bool]:
    rows = run_corpus(args.fixtures)
    failed = [r for r in rows if not r["ok"]]
    return {"checks": len(rows), "failed": len(failed), "results": rows}, bool(failed)


# -- parser ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, graph_output: bool = False) -> None:
    p.add_argument("--format", choices=("json", "text"), default="text" if graph_output else "json")
    p.add_argument("--exit-status", action="store_true", help="exit 1 on a negative verdict")
    p.add_argument("--timings", action="store_true", help="add timing_ms to the output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdgkit", description="Separation and Markov equivalence for directed correlation graphs.")
    parser.add_argument("--version", action="version", version=f"cdgkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable, help_: str, graph_output: bool = False) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        _add_common(p, graph_output)
        p.set_defaults(handler=handler, graph_output=graph_output)
        return p

    p = add("validate", cmd_validate, "check a .cdg file")
    p.add_argument("graph")

    p = add("query-sep", cmd_query_sep, "is B mu-separated from A given C")
    p.add_argument("graph", nargs="?")
    p.add_argument("--graph", dest="graph_opt")
    p.add_argument("--method", choices=tuple(_SEP_METHODS), default="aug", help="augmentation, walk-state search or brute force")
    p.add_argument("--from", dest="source", required=True, help="comma-separated nodes of A")
    p.add_argument("--to", dest="target", required=True, help="comma-separated nodes of B")
    p.add_argument("--given", default="", help="comma-separated nodes of C")

    p = add("equiv", cmd_equiv, "Markov equivalence of two cDGs")
    p.add_argument("graph1")
    p.add_argument("graph2")
    p.add_argument("--method", choices=("alg1", "collider", "oracle", "prescreen"), default="alg1")
    p.add_argument("--add-loops", action="store_true", help="add missing directed loops first")

    p = add("class", cmd_class, "enumerate the Markov equivalence class")
    p.add_argument("graph")
    p.add_argument("--slot-cap", type=int, default=20, help="refuse graphs with more blunt slots")
    p.add_argument("--add-loops", action="store_true")

    p = add("vct", cmd_vct, "list virtual collider tripaths")
    p.add_argument("graph")
    p.add_argument("--maximal", action="store_true", help="only the maximal ones")
    p.add_argument("--add-loops", action="store_true")

    p = add("maximal", cmd_maximal, "is the graph maximal in its class")
    p.add_argument("graph")
    p.add_argument("--add-loops", action="store_true")

    p = add("reduce-dnf", cmd_reduce_dnf, "build the graph pair for a DNF formula")
    p.add_argument("--formula", required=True)
    p.add_argument("--out-d", help="write D here instead of printing it")
    p.add_argument("--out-dplus", help="write D_plus here instead of printing it")

    p = add("check-reduction", cmd_check_reduction, "tautology vs equivalence of the reduced pair")
    p.add_argument("--formula")
    p.add_argument("--corpus", type=int, help="check this many generated formulas")
    p.add_argument("--seed", type=int)

    p = add("random-graph", cmd_random_graph, "sample a random graph", graph_output=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--p-directed", type=float, default=0.3)
    p.add_argument("--p-blunt", type=float, default=0.3, help="blunt (or bidirected with --dmg) edge probability")
    p.add_argument("--dmg", action="store_true")
    p.add_argument("--no-loops", action="store_true")
    p.add_argument("--seed", type=int)

    p = add("ou-extract", cmd_ou_extract, "canonical graph of an OU model", graph_output=True)
    p.add_argument("model")

    p = add("ou-verify", cmd_ou_verify, "simulate filters to check a separation numerically")
    p.add_argument("model")
    p.add_argument("--from", dest="source", default="")
    p.add_argument("--to", dest="target", required=True)
    p.add_argument("--given", default="")
    p.add_argument("--paths", type=int, default=10)
    p.add_argument("--T", type=float, default=5.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--mode", choices=("auto", "positive", "negative"), default="auto")
    p.add_argument("--seed", type=int)

    p = add("corpus", cmd_corpus, "run the figure fixtures against their expectations")
    p.add_argument("--fixtures", help="directory with .cdg files and expectations.json")
    return parser


def _render_text(payload: dict, graph_output: bool) -> str:
    if graph_output and "graph" in payload:
        return payload["graph"].rstrip("\n")
    lines = []
    for key, value in payload.items():
        if isinstance(value, str) and "\n" in value:
            lines.append(f"{key}:")
            lines.extend("  " + line for line in value.rstrip("\n").splitlines())
        elif isinstance(value, (dict, list)):
            lines.append(f"{key}: {json.dumps(value, ensure_ascii=False)}")
        else:
            lines.append(f"{key}: {value}")
    return "\n".join(lines)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        payload, negative = args.handler(args)
    except (UsageError, GraphError, DnfError, NumericsError, CapExceeded, ValueError) as exc:
        print(f"cdgkit {args.command}: {exc}", file=sys.stderr)
        return 2
    out = {"schema": SCHEMA_VERSION, "command": args.command}
    out.update(payload)
    if args.timings:
        out["timing_ms"] = round((time.perf_counter() - start) * 1000, 3)
    if args.format == "json":
        print(json.dumps(out, indent=2, ensure_ascii=False))
    else:
        print(_render_text(payload if args.graph_output else out, args.graph_output))
    if args.command == "corpus" and negative:
        return 1
    return 1 if args.exit_status and negative else 0


if __name__ == "__main__":
    sys.exit(main())
