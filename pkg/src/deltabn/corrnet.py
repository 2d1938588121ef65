"""Descriptive Pearson correlation network over the difference dataset."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Mapping

import numpy as np

from .dataset import DeltaDataset
from .errors import UndefinedCorrelationError


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray

    def value(self, a: str, b: str) -> float:
        i, j = self.labels.index(a), self.labels.index(b)
        return float(self.values[i, j])

    def write_csv(self, stream: IO[str], delimiter: str = ",") -> None:
        writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
        writer.writerow(("",) + self.labels)
        for i, label in enumerate(self.labels):
            writer.writerow([label] + [repr(float(v)) for v in self.values[i]])


@dataclass(frozen=True)
class UndirectedGraph:
    """Correlation network: edges carry the signed r; weight is |r|."""

    nodes: tuple[str, ...]
    edges: Mapping[tuple[str, str], float]

    def weight(self, a: str, b: str) -> float:
        key = (a, b) if a <= b else (b, a)
        return abs(self.edges[key])

    def has_edge(self, a: str, b: str) -> bool:
        key = (a, b) if a <= b else (b, a)
        return key in self.edges


def pearson(xa, xb) -> float:
    """Pearson correlation of two equal-length vectors.

    Raises :class:`UndefinedCorrelationError` when either vector has zero
    variance.
    """
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    if xa.shape != xb.shape or xa.ndim != 1:
        raise ValueError("pearson expects two equal-length vectors")
    if len(xa) < 2:
        raise ValueError("pearson needs at least two observations")
    da = xa - xa.mean()
    db = xb - xb.mean()
    ssa = float(da @ da)
    ssb = float(db @ db)
    if ssa == 0.0 or ssb == 0.0:
        raise UndefinedCorrelationError("zero variance")
    r = float(da @ db) / np.sqrt(ssa * ssb)
    return float(min(1.0, max(-1.0, r)))


def _heatmap_columns(d: DeltaDataset, include_discrete: bool) -> dict[str, np.ndarray]:
    columns: dict[str, np.ndarray] = {}
    for name in d.order:
        if name in d.continuous:
            columns[name] = d.continuous[name]
        elif include_discrete and len(d.levels[name]) == 2:
            # binary labels enter the heatmap as 0/1 in declared level order
            lo, hi = d.levels[name]
            columns[name] = np.where(d.discrete[name] == hi, 1.0, 0.0)
    return columns


def correlation_network(
    d: DeltaDataset, threshold: float = 0.4, include_discrete: bool = True
) -> tuple[UndirectedGraph, CorrelationMatrix]:
    """Pairwise correlations plus the thresholded network.

    An edge is present iff |r| is strictly above ``threshold``.  Binary
    discrete columns are encoded 0/1; columns with more than two levels are
    left out.
    """
    columns = _heatmap_columns(d, include_discrete)
    labels = tuple(columns)
    k = len(labels)
    values = np.eye(k)
    edges: dict[tuple[str, str], float] = {}
    for i in range(k):
        for j in range(i + 1, k):
            try:
                r = pearson(columns[labels[i]], columns[labels[j]])
            except UndefinedCorrelationError:
                bad = labels[i] if np.ptp(columns[labels[i]]) == 0 else labels[j]
                raise UndefinedCorrelationError(
                    f"zero variance in column {bad}"
                ) from None
            values[i, j] = values[j, i] = r
            if abs(r) > threshold:
                a, b = sorted((labels[i], labels[j]))
                edges[(a, b)] = r
    return (
        UndirectedGraph(nodes=labels, edges=edges),
        CorrelationMatrix(labels=labels, values=values),
    )


def graph_to_dot(g: UndirectedGraph, name: str = "correlations") -> str:
    """Deterministic DOT text; edge labels are r rounded to two decimals."""
    lines = [f"graph {name} {{"]
    for node in sorted(g.nodes):
        lines.append(f'  "{node}";')
    for (a, b), r in sorted(g.edges.items()):
        lines.append(f'  "{a}" -- "{b}" [label="{r:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
