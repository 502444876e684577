"""Relation-typed technique graphs and centrality scores.

Recurring pairs plus human-coded relation annotations yield one graph per
relation type (directed for follow/require, undirected otherwise) and an
all-pairs undirected graph. Centrality follows the worked-example
normalization: degree divided by the node count, with the conventional
n - 1 normalization available behind a flag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import AnnotationError, ParameterError
from .rule_miner import RecurringPair

# Relation taxonomy: name -> directed. Follow and require orient
# antecedent -> consequent; the rest are symmetric.
RELATION_TYPES: dict[str, bool] = {
    "same_asset": False,
    "follow": True,
    "implementation_overlap": False,
    "happens_together": False,
    "require": True,
    "alternative": False,
    "same_platform": False,
}

DIRECTIONS = ("ab", "ba", "none")


@dataclass(frozen=True)
class RelationAnnotation:
    tech_a: str
    tech_b: str
    relation: str
    direction: str  # "ab", "ba", or "none"

    @property
    def pair_key(self) -> tuple[str, str]:
        return (min(self.tech_a, self.tech_b), max(self.tech_a, self.tech_b))


@dataclass(frozen=True)
class TechniqueGraph:
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]  # undirected edges stored (min, max)
    directed: bool
    relation: str | None = None


def load_annotations(path: Path | str) -> list[RelationAnnotation]:
    """Read the relation annotation CSV: tech_a,tech_b,relation,direction."""
    path = Path(path)
    annotations = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        required = {"tech_a", "tech_b", "relation", "direction"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise AnnotationError(f"{path}: expected columns {sorted(required)}")
        for i, row in enumerate(reader):
            relation = row["relation"].strip()
            direction = (row["direction"] or "none").strip() or "none"
            if relation not in RELATION_TYPES:
                raise AnnotationError(f"{path} row {i}: unknown relation {relation!r}")
            if direction not in DIRECTIONS:
                raise AnnotationError(f"{path} row {i}: direction must be one of {DIRECTIONS}")
            annotations.append(
                RelationAnnotation(
                    tech_a=row["tech_a"].strip(),
                    tech_b=row["tech_b"].strip(),
                    relation=relation,
                    direction=direction,
                )
            )
    return annotations


def relation_label_map(
    annotations: Sequence[RelationAnnotation],
) -> dict[tuple[str, str], frozenset[str]]:
    """Unordered pair key -> set of relation names annotated on it."""
    labels: dict[tuple[str, str], set[str]] = {}
    for annotation in annotations:
        labels.setdefault(annotation.pair_key, set()).add(annotation.relation)
    return {key: frozenset(names) for key, names in labels.items()}


def build_graph(
    pairs: Sequence[RecurringPair],
    annotations: Sequence[RelationAnnotation] = (),
    relation: str | None = None,
) -> TechniqueGraph:
    """Build the technique graph for one relation, or the all-pairs graph.

    Without a relation filter this is the undirected graph joining the two
    techniques of every recurring pair (multi-label pairs collapse to a
    single edge). With a relation, edges come from the annotations carrying
    that label; directed relations take their orientation from the
    annotation's direction column.
    """
    pair_keys = {pair.key for pair in pairs}
    for annotation in annotations:
        if annotation.pair_key not in pair_keys:
            raise AnnotationError(
                f"annotation references unknown pair ({annotation.tech_a}, {annotation.tech_b})"
            )

    if relation is None:
        edges = frozenset(pair.key for pair in pairs)
        nodes = frozenset(t for edge in edges for t in edge)
        return TechniqueGraph(nodes=nodes, edges=edges, directed=False, relation=None)

    if relation not in RELATION_TYPES:
        raise ParameterError(f"unknown relation {relation!r}")
    directed = RELATION_TYPES[relation]
    edges = set()
    for annotation in annotations:
        if annotation.relation != relation:
            continue
        if directed:
            if annotation.direction == "ab":
                edges.add((annotation.tech_a, annotation.tech_b))
            elif annotation.direction == "ba":
                edges.add((annotation.tech_b, annotation.tech_a))
            else:
                raise AnnotationError(
                    f"directed relation {relation!r} requires an orientation for "
                    f"({annotation.tech_a}, {annotation.tech_b})"
                )
        else:
            edges.add(annotation.pair_key)
    nodes = frozenset(t for edge in edges for t in edge)
    return TechniqueGraph(nodes=nodes, edges=frozenset(edges), directed=directed, relation=relation)


def _normalizer(graph: TechniqueGraph, conventional: bool) -> float:
    n = len(graph.nodes)
    return float(n - 1) if conventional else float(n)


def degree_centrality(graph: TechniqueGraph, conventional: bool = False) -> dict[str, float]:
    """Degree centrality of an undirected graph: degree / node count.

    ``conventional=True`` divides by node count - 1 instead.
    """
    if graph.directed:
        raise TypeError("degree_centrality requires an undirected graph")
    if not graph.nodes:
        return {}
    denominator = _normalizer(graph, conventional)
    degrees = {node: 0 for node in graph.nodes}
    for u, v in graph.edges:
        degrees[u] += 1
        degrees[v] += 1
    return {node: degrees[node] / denominator for node in sorted(degrees)}


def directed_centrality(
    graph: TechniqueGraph, conventional: bool = False
) -> dict[str, tuple[float, float]]:
    """In- and out-degree centrality of a directed graph, same normalization."""
    if not graph.directed:
        raise TypeError("directed_centrality requires a directed graph")
    if not graph.nodes:
        return {}
    denominator = _normalizer(graph, conventional)
    in_deg = {node: 0 for node in graph.nodes}
    out_deg = {node: 0 for node in graph.nodes}
    for u, v in graph.edges:
        out_deg[u] += 1
        in_deg[v] += 1
    return {
        node: (in_deg[node] / denominator, out_deg[node] / denominator)
        for node in sorted(graph.nodes)
    }


def partner_count(graph: TechniqueGraph) -> dict[str, int]:
    """Number of distinct partner techniques per node (all-pairs graph)."""
    if graph.directed:
        raise TypeError("partner_count requires an undirected graph")
    partners: dict[str, set[str]] = {node: set() for node in graph.nodes}
    for u, v in graph.edges:
        partners[u].add(v)
        partners[v].add(u)
    return {node: len(partners[node]) for node in sorted(partners)}


def top_k(scores: Mapping[str, float], k: int) -> list[str]:
    """Top-k ids by descending score, ties broken by ascending id."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    ranked = sorted(scores, key=lambda node: (-scores[node], node))
    return ranked[:k]


def to_dot(graph: TechniqueGraph) -> str:
    """DOT rendering of the graph for external visualization tools."""
    kind = "digraph" if graph.directed else "graph"
    arrow = "->" if graph.directed else "--"
    name = graph.relation or "all_pairs"
    lines = [f'{kind} "{name}" {{']
    for node in sorted(graph.nodes):
        lines.append(f'  "{node}";')
    for u, v in sorted(graph.edges):
        lines.append(f'  "{u}" {arrow} "{v}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
