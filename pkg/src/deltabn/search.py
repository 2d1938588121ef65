"""BIC-maximizing greedy hill climbing over DAGs under arc constraints."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator

from .clg import LocalScorer
from .dataset import DeltaDataset
from .errors import (
    CollinearityError,
    ConstraintError,
    InsufficientDataError,
    SearchOverflowError,
)
from .graph import Arc, ArcConstraints, Dag

MOVE_ADD = "add"
MOVE_DELETE = "delete"
MOVE_REVERSE = "reverse"


@dataclass(frozen=True)
class Move:
    kind: str
    arc: Arc
    delta: float


@dataclass
class SearchTrace:
    initial_score: float
    moves: list[Move] = field(default_factory=list)
    final_score: float = math.nan
    iterations: int = 0

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {"move": m.kind, "from": m.arc[0], "to": m.arc[1], "delta": m.delta},
                sort_keys=True,
            )
            for m in self.moves
        ]
        lines.append(
            json.dumps(
                {
                    "initial_score": self.initial_score,
                    "final_score": self.final_score,
                    "iterations": self.iterations,
                },
                sort_keys=True,
            )
        )
        return "\n".join(lines) + "\n"


def _reachable(g: Dag, start: str, goal: str, skip: Arc | None = None) -> bool:
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        for u, v in g.arcs:
            if u == node and (u, v) != skip and v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def legal_moves(g: Dag, c: ArcConstraints, allow_reversals: bool = True) -> Iterator[tuple[str, Arc]]:
    """Single-arc moves that keep the graph acyclic and honor the constraints.

    Blacklisted arcs are filtered out before any scoring happens, so a
    forbidden arc is never even evaluated.
    """
    for u in g.nodes:
        for v in g.nodes:
            if u == v:
                continue
            arc = (u, v)
            if arc in g.arcs:
                continue
            if (v, u) in g.arcs:
                continue  # covered by reverse
            if not c.allows(arc):
                continue
            if _reachable(g, v, u):
                continue  # would close a cycle
            yield MOVE_ADD, arc
    for arc in sorted(g.arcs):
        u, v = arc
        if arc in c.whitelist:
            continue
        yield MOVE_DELETE, arc
        if allow_reversals and c.allows((v, u)) and not _reachable(g, u, v, skip=arc):
            yield MOVE_REVERSE, arc


def _move_delta(scorer: LocalScorer, g: Dag, kind: str, arc: Arc, locals_: dict[str, float]) -> float:
    u, v = arc
    try:
        if kind == MOVE_ADD:
            return scorer.local_score(v, set(g.parents(v)) | {u}) - locals_[v]
        if kind == MOVE_DELETE:
            return scorer.local_score(v, set(g.parents(v)) - {u}) - locals_[v]
        delta_u = scorer.local_score(u, set(g.parents(u)) | {v}) - locals_[u]
        delta_v = scorer.local_score(v, set(g.parents(v)) - {u}) - locals_[v]
        return delta_u + delta_v
    except (InsufficientDataError, CollinearityError):
        return math.nan  # candidate not scorable on this sample; skip it


def _best_move(
    scorer: LocalScorer,
    g: Dag,
    c: ArcConstraints,
    locals_: dict[str, float],
    allow_reversals: bool,
) -> Move | None:
    best: Move | None = None
    best_key: tuple | None = None
    for kind, arc in legal_moves(g, c, allow_reversals):
        delta = _move_delta(scorer, g, kind, arc, locals_)
        if math.isnan(delta) or not delta > 0.0:
            continue
        key = (-delta, arc[0], arc[1], kind)
        if best_key is None or key < best_key:
            best = Move(kind=kind, arc=arc, delta=delta)
            best_key = key
    return best


def _apply(g: Dag, move: Move) -> Dag:
    if move.kind == MOVE_ADD:
        return g.with_arc(move.arc)
    if move.kind == MOVE_DELETE:
        return g.without_arc(move.arc)
    return g.with_reversed(move.arc)


def hill_climb(
    d: DeltaDataset,
    c: ArcConstraints | None = None,
    allow_reversals: bool = True,
    scorer: LocalScorer | None = None,
) -> tuple[Dag, SearchTrace]:
    """Greedy search: start from the whitelist-only graph, apply the best
    strictly improving add/delete/reverse until none remains.

    Ties between equal-delta moves go to the lexicographically smallest
    (from, to, kind) triple, so the search is deterministic.
    """
    c = c if c is not None else ArcConstraints()
    scorer = scorer if scorer is not None and scorer.data is d else LocalScorer(d)
    g = Dag.build(d.order, c.whitelist)
    locals_ = {node: scorer.local_score(node, g.parents(node)) for node in g.nodes}
    trace = SearchTrace(initial_score=_total(locals_))
    cap = max(len(g.nodes) ** 2 * 10, 10)
    while True:
        move = _best_move(scorer, g, c, locals_, allow_reversals)
        if move is None:
            break
        g = _apply(g, move)
        _check_constraints(g, c)
        for node in set(move.arc):
            locals_[node] = scorer.local_score(node, g.parents(node))
        trace.moves.append(move)
        trace.iterations += 1
        if trace.iterations > cap:
            raise SearchOverflowError(f"exceeded {cap} iterations")
    trace.final_score = _total(locals_)
    return g, trace


def _total(locals_: dict[str, float]) -> float:
    finite = sum(v for v in locals_.values() if math.isfinite(v))
    if any(v == math.inf for v in locals_.values()):
        return math.inf
    return finite


def _check_constraints(g: Dag, c: ArcConstraints) -> None:
    missing = c.whitelist - g.arcs
    if missing:
        raise ConstraintError(f"whitelist arc lost during search: {sorted(missing)}")
    hit = c.blacklist & g.arcs
    if hit:
        raise ConstraintError(f"blacklisted arc present: {sorted(hit)}")


def best_move_oracle(
    d: DeltaDataset,
    g: Dag,
    c: ArcConstraints | None = None,
    allow_reversals: bool = True,
    scorer: LocalScorer | None = None,
) -> Move | None:
    """The single move hill climbing would take from state g; None at a local optimum."""
    c = c if c is not None else ArcConstraints()
    scorer = scorer if scorer is not None and scorer.data is d else LocalScorer(d)
    locals_ = {node: scorer.local_score(node, g.parents(node)) for node in g.nodes}
    return _best_move(scorer, g, c, locals_, allow_reversals)
