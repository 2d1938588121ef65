"""Bootstrap-resampled structure learning, arc strengths, and consensus DAGs."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .clg import LocalScorer
from .dataset import DeltaDataset
from .errors import DataError, DeltaBnError
from .graph import Arc, ArcConstraints, Dag, topological_order
from .search import hill_climb


@dataclass(frozen=True)
class ArcStrengthTable:
    """Bootstrap frequencies: skeleton strength per pair, direction split per arc.

    ``skeleton_counts`` maps a sorted pair to the number of replicate DAGs
    containing the arc in either direction; ``direction_counts`` maps each
    ordered arc to its count.  Strengths are counts over ``replicates``.
    """

    nodes: tuple[str, ...]
    replicates: int
    skeleton_counts: Mapping[tuple[str, str], int]
    direction_counts: Mapping[Arc, int]

    def __post_init__(self):
        for (a, b), count in self.skeleton_counts.items():
            if not 0 <= count <= self.replicates:
                raise DataError("skeleton count outside [0, B]")
            if self.direction_counts.get((a, b), 0) + self.direction_counts.get((b, a), 0) != count:
                raise DataError(f"direction counts for ({a}, {b}) do not sum to the pair count")

    def pairs(self) -> list[tuple[str, str]]:
        names = sorted(self.nodes)
        return [(a, b) for i, a in enumerate(names) for b in names[i + 1 :]]

    def skeleton_strength(self, a: str, b: str) -> float:
        key = (a, b) if a <= b else (b, a)
        return self.skeleton_counts.get(key, 0) / self.replicates

    def direction_probability(self, a: str, b: str) -> float:
        """P(a -> b | the pair is present); 0/0 guards return 0."""
        key = (a, b) if a <= b else (b, a)
        total = self.skeleton_counts.get(key, 0)
        if total == 0:
            return 0.0
        return self.direction_counts.get((a, b), 0) / total

    def skeleton_strengths(self) -> list[Fraction]:
        """Strengths of every unordered node pair, zeros included."""
        return [
            Fraction(self.skeleton_counts.get(pair, 0), self.replicates)
            for pair in self.pairs()
        ]

    def arc_strength_map(self) -> dict[Arc, float]:
        return {
            arc: self.skeleton_strength(*arc)
            for arc, count in self.direction_counts.items()
            if count > 0
        }

    def write_csv(self, stream: IO[str], delimiter: str = ",") -> None:
        writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["from", "to", "skeleton_strength", "direction_probability"])
        for a, b in self.pairs():
            if self.skeleton_counts.get((a, b), 0) == 0:
                continue
            for u, v in ((a, b), (b, a)):
                writer.writerow(
                    [
                        u,
                        v,
                        repr(self.skeleton_strength(u, v)),
                        repr(self.direction_probability(u, v)),
                    ]
                )


@dataclass(frozen=True)
class BootstrapResult:
    dags: tuple[Dag, ...]
    requested: int
    failures: tuple[tuple[int, str], ...] = ()


def bootstrap_dags(
    d: DeltaDataset,
    c: ArcConstraints | None = None,
    replicates: int = 200,
    seed: int | None = None,
    allow_reversals: bool = True,
) -> BootstrapResult:
    """Learn one structure per bootstrap resample of the rows.

    Replicate RNG streams are spawned from the master seed, so the list is
    reproducible and independent of execution order.  A replicate whose fit
    fails is skipped with a warning and recorded.
    """
    if replicates < 1:
        raise DataError("need at least one replicate")
    if d.n < 2:
        raise DataError("need at least two rows to resample")
    master = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = master.spawn(replicates)
    dags: list[Dag] = []
    failures: list[tuple[int, str]] = []
    for b, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        rows = rng.integers(0, d.n, size=d.n)
        try:
            dag, _ = hill_climb(d.subset(rows), c, allow_reversals=allow_reversals)
        except DeltaBnError as exc:
            failures.append((b, str(exc)))
            warnings.warn(f"bootstrap replicate {b} skipped: {exc}")
            continue
        dags.append(dag)
    if not dags:
        raise DataError("every bootstrap replicate failed")
    return BootstrapResult(dags=tuple(dags), requested=replicates, failures=tuple(failures))


def arc_strengths(dags: Sequence[Dag]) -> ArcStrengthTable:
    """Count how often each arc (and each direction) appears across DAGs."""
    if not dags:
        raise DataError("no DAGs to summarize")
    nodes = dags[0].nodes
    node_set = set(nodes)
    skeleton: dict[tuple[str, str], int] = {}
    direction: dict[Arc, int] = {}
    for dag in dags:
        if set(dag.nodes) != node_set:
            raise DataError("DAGs with mismatched node sets")
        for u, v in dag.arcs:
            pair = (u, v) if u <= v else (v, u)
            skeleton[pair] = skeleton.get(pair, 0) + 1
            direction[(u, v)] = direction.get((u, v), 0) + 1
    return ArcStrengthTable(
        nodes=nodes,
        replicates=len(dags),
        skeleton_counts=skeleton,
        direction_counts=direction,
    )


def _l1_to_step_cdf(strengths: Sequence[Fraction], cutoff: Fraction) -> Fraction:
    """Exact L1 distance on [0, 1] between the empirical CDF of the strengths
    and the two-point CDF that keeps the fraction of strengths >= cutoff at 1."""
    m = len(strengths)
    keep = sum(1 for s in strengths if s >= cutoff)
    level = Fraction(m - keep, m)  # ideal CDF value on [0, 1)
    points = sorted(set(strengths) | {Fraction(0), Fraction(1)})
    total = Fraction(0)
    below = 0
    for lo, hi in zip(points, points[1:]):
        below += sum(1 for s in strengths if s == lo)
        empirical = Fraction(below, m)
        total += abs(empirical - level) * (hi - lo)
    return total


def l1_threshold(strengths: Sequence[Fraction | float]) -> float:
    """Split point whose induced 0/1 step CDF is L1-closest to the strengths.

    Candidates are the observed strengths themselves; exact rational
    arithmetic makes ties deterministic (smallest candidate wins).
    """
    if not strengths:
        raise DataError("no candidate arcs")
    exact = [s if isinstance(s, Fraction) else Fraction(s) for s in strengths]
    for s in exact:
        if not 0 <= s <= 1:
            raise DataError("strengths must lie in [0, 1]")
    best_t: Fraction | None = None
    best_obj: Fraction | None = None
    for t in sorted(set(exact)):
        obj = _l1_to_step_cdf(exact, t)
        if best_obj is None or obj < best_obj:
            best_obj = obj
            best_t = t
    return float(best_t)


def estimate_threshold(table: ArcStrengthTable) -> float:
    """Data-driven inclusion threshold estimated from all pair strengths."""
    return l1_threshold(table.skeleton_strengths())


def consensus(
    table: ArcStrengthTable,
    threshold: float,
    constraints: ArcConstraints | None = None,
) -> Dag:
    """Arcs at or above the threshold, oriented by majority direction.

    Whitelisted arcs are always included.  If majority orientations close a
    cycle, the weakest non-whitelisted arc in the cycle is dropped until the
    graph is acyclic; each removal is reported as a warning.
    """
    whitelist = constraints.whitelist if constraints is not None else frozenset()
    arcs: set[Arc] = set(whitelist)
    covered = {frozenset(a) for a in arcs}
    for a, b in table.pairs():
        if frozenset((a, b)) in covered:
            continue
        if table.skeleton_strength(a, b) < threshold:
            continue
        p_forward = table.direction_probability(a, b)
        if p_forward > 0.5:
            arcs.add((a, b))
        elif p_forward < 0.5:
            arcs.add((b, a))
        else:
            arcs.add((a, b))  # exact tie: lexicographic orientation
    while topological_order(table.nodes, arcs) is None:
        cycle = _find_cycle(table.nodes, arcs)
        removable = [arc for arc in cycle if arc not in whitelist]
        victim = min(removable, key=lambda arc: (table.skeleton_strength(*arc), arc))
        arcs.discard(victim)
        warnings.warn(f"consensus cycle repaired by dropping {victim[0]} -> {victim[1]}")
    return Dag.build(table.nodes, arcs)


def _find_cycle(nodes: Iterable[str], arcs: set[Arc]) -> list[Arc]:
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for u, v in sorted(arcs):
        children[u].append(v)
    state: dict[str, int] = {}
    stack_arcs: list[Arc] = []

    def visit(node: str) -> list[Arc] | None:
        state[node] = 1
        for child in children[node]:
            if state.get(child, 0) == 1:
                start = next(i for i, (a, _) in enumerate(stack_arcs) if a == child)
                return stack_arcs[start:] + [(node, child)]
            if state.get(child, 0) == 0:
                stack_arcs.append((node, child))
                found = visit(child)
                if found is not None:
                    return found
                stack_arcs.pop()
        state[node] = 2
        return None

    for node in sorted(children):
        if state.get(node, 0) == 0:
            found = visit(node)
            if found is not None:
                return found
    raise AssertionError("no cycle found in a cyclic graph")


@dataclass(frozen=True)
class AveragingResult:
    consensus: Dag
    strengths: ArcStrengthTable
    threshold: float
    requested: int
    failures: tuple[tuple[int, str], ...] = ()


def average_network(
    d: DeltaDataset,
    c: ArcConstraints | None = None,
    replicates: int = 200,
    seed: int | None = None,
    threshold: float | str = "auto",
    allow_reversals: bool = True,
) -> AveragingResult:
    """The full bootstrap -> strengths -> threshold -> consensus pipeline."""
    boot = bootstrap_dags(d, c, replicates=replicates, seed=seed, allow_reversals=allow_reversals)
    table = arc_strengths(boot.dags)
    if threshold == "auto":
        # a single-node table has no candidate pairs; nothing to include
        cut = estimate_threshold(table) if table.pairs() else 1.0
    else:
        cut = float(threshold)
    dag = consensus(table, cut, constraints=c)
    return AveragingResult(
        consensus=dag,
        strengths=table,
        threshold=cut,
        requested=boot.requested,
        failures=boot.failures,
    )
