"""Directed acyclic graphs, arc constraints, and structure serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .dataset import GROWTH_COLUMN, TIME_COLUMN, TREATMENT_COLUMN
from .errors import ConstraintError, CycleError, DataError

Arc = tuple[str, str]


def topological_order(nodes: Iterable[str], arcs: Iterable[Arc]) -> list[str] | None:
    """Kahn's algorithm; returns None when the arc set contains a cycle.

    Ties are broken by the given node order, so the result is deterministic.
    """
    nodes = list(nodes)
    arcs = set(arcs)
    indeg = {n: 0 for n in nodes}
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for u, v in arcs:
        indeg[v] += 1
        children[u].append(v)
    ready = [n for n in nodes if indeg[n] == 0]
    order: list[str] = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(order) != len(nodes):
        return None
    return order


def is_acyclic(nodes: Iterable[str], arcs: Iterable[Arc]) -> bool:
    return topological_order(nodes, arcs) is not None


@dataclass(frozen=True)
class Dag:
    """Immutable directed acyclic graph over named nodes."""

    nodes: tuple[str, ...]
    arcs: frozenset[Arc]

    def __post_init__(self):
        if len(set(self.nodes)) != len(self.nodes):
            raise DataError("duplicate node names")
        known = set(self.nodes)
        for u, v in self.arcs:
            if u == v:
                raise CycleError(f"self-arc {u} -> {v}")
            if u not in known or v not in known:
                raise DataError(f"arc references unknown node: {u} -> {v}")
        if topological_order(self.nodes, self.arcs) is None:
            raise CycleError("arc set contains a cycle")

    @classmethod
    def build(cls, nodes: Iterable[str], arcs: Iterable[Arc] = ()) -> "Dag":
        return cls(nodes=tuple(nodes), arcs=frozenset((u, v) for u, v in arcs))

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(u for u in self.nodes if (u, node) in self.arcs)

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(v for v in self.nodes if (node, v) in self.arcs)

    def in_degree(self, node: str) -> int:
        return sum(1 for u, v in self.arcs if v == node)

    def topological_order(self) -> list[str]:
        order = topological_order(self.nodes, self.arcs)
        assert order is not None
        return order

    def with_arc(self, arc: Arc) -> "Dag":
        return Dag(nodes=self.nodes, arcs=self.arcs | {arc})

    def without_arc(self, arc: Arc) -> "Dag":
        return Dag(nodes=self.nodes, arcs=self.arcs - {arc})

    def with_reversed(self, arc: Arc) -> "Dag":
        u, v = arc
        return Dag(nodes=self.nodes, arcs=(self.arcs - {arc}) | {(v, u)})

    def skeleton(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset(a) for a in self.arcs)


@dataclass(frozen=True)
class ArcConstraints:
    """Arcs forced present (whitelist) and arcs forbidden (blacklist)."""

    whitelist: frozenset[Arc] = frozenset()
    blacklist: frozenset[Arc] = frozenset()

    def __post_init__(self):
        overlap = self.whitelist & self.blacklist
        if overlap:
            raise ConstraintError(f"arc both whitelisted and blacklisted: {sorted(overlap)}")
        for u, v in self.whitelist | self.blacklist:
            if u == v:
                raise ConstraintError(f"self-arc in constraints: {u}")
        wl_nodes = sorted({n for arc in self.whitelist for n in arc})
        if not is_acyclic(wl_nodes, self.whitelist):
            raise ConstraintError("whitelist alone is cyclic")

    def allows(self, arc: Arc) -> bool:
        return arc not in self.blacklist

    def without_node(self, node: str) -> "ArcConstraints":
        drop = lambda arcs: frozenset(a for a in arcs if node not in a)
        return ArcConstraints(whitelist=drop(self.whitelist), blacklist=drop(self.blacklist))


def default_constraints(
    nodes: Iterable[str],
    time_col: str = TIME_COLUMN,
    treatment_col: str = TREATMENT_COLUMN,
    growth_col: str = GROWTH_COLUMN,
) -> ArcConstraints:
    """The study's prior-knowledge constraint set for a given node list.

    Nothing may point at the elapsed-time or treatment columns; difference
    features may not point at the prognosis column; the dANB -> dIMPA <- dPPPM
    structure and the elapsed-time -> prognosis arc are forced when those
    columns are present.  Rules involving an absent special column are
    skipped, which is what subgroup networks rely on.
    """
    nodes = tuple(nodes)
    if len(set(nodes)) != len(nodes):
        raise ConstraintError("duplicate node names")
    special = [c for c in (time_col, treatment_col, growth_col) if c is not None]
    if len(set(special)) != len(special):
        raise ConstraintError("special column names must be distinct")
    features = [n for n in nodes if n not in (time_col, treatment_col, growth_col)]
    blacklist: set[Arc] = set()
    for sink in (time_col, treatment_col):
        if sink in nodes:
            blacklist |= {(n, sink) for n in nodes if n != sink}
    if growth_col in nodes:
        blacklist |= {(f, growth_col) for f in features}
    whitelist: set[Arc] = set()
    for u, v in (("dANB", "dIMPA"), ("dPPPM", "dIMPA")):
        if u in nodes and v in nodes:
            whitelist.add((u, v))
    if time_col in nodes and growth_col in nodes:
        whitelist.add((time_col, growth_col))
    return ArcConstraints(whitelist=frozenset(whitelist), blacklist=frozenset(blacklist))


def to_dot(
    g: Dag,
    strengths: Mapping[Arc, float] | None = None,
    whitelist: Iterable[Arc] | None = None,
    name: str = "network",
) -> str:
    """Deterministic DOT text; pen width is proportional to arc strength.

    Whitelisted arcs are drawn in red, matching the convention of forcing
    them into the structure.
    """
    forced = set(whitelist or ())
    lines = [f"digraph {name} {{"]
    for node in sorted(g.nodes):
        lines.append(f'  "{node}";')
    for u, v in sorted(g.arcs):
        attrs = []
        if strengths is not None and (u, v) in strengths:
            attrs.append(f'penwidth={3.0 * strengths[(u, v)]:.3f}')
            attrs.append(f'label="{strengths[(u, v)]:.2f}"')
        if (u, v) in forced:
            attrs.append('color="red"')
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f'  "{u}" -> "{v}"{suffix};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def dag_to_json(g: Dag, strengths: Mapping[Arc, float] | None = None) -> str:
    payload = {
        "nodes": list(g.nodes),
        "arcs": [list(a) for a in sorted(g.arcs)],
    }
    if strengths is not None:
        payload["strengths"] = {f"{u}->{v}": s for (u, v), s in sorted(strengths.items())}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def dag_from_json(text: str) -> Dag:
    payload = json.loads(text)
    return Dag.build(payload["nodes"], [tuple(a) for a in payload["arcs"]])
