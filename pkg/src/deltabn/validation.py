"""Cross-validation of the learn-average-fit-predict pipeline and subgroup networks."""

from __future__ import annotations

import csv
import json
import secrets
from dataclasses import dataclass, field
from typing import IO, Mapping

import numpy as np

from .averaging import ArcStrengthTable, AveragingResult, average_network
from .clg import ClgNetwork, LocalScorer, fit_parameters
from .corrnet import pearson
from .dataset import DeltaDataset
from .errors import DataError, DeltaBnError, UndefinedCorrelationError
from .graph import ArcConstraints, Dag, default_constraints
from .inference import predict_node
from .search import hill_climb


@dataclass(frozen=True)
class FoldRecord:
    index: int
    test_rows: tuple[int, ...]
    arcs: tuple[tuple[str, str], ...]
    threshold: float | None


@dataclass
class CvReport:
    k: int
    seed: int
    learner: str
    folds: list[FoldRecord]
    predictive_correlation: dict[str, float]
    classification_error: dict[str, float]
    per_fold_correlation: dict[str, list[float]]
    # raw pooled pairs in fold order, populated only on request; not serialized
    observed: dict[str, list] | None = None
    predicted: dict[str, list] | None = None

    def to_json(self) -> str:
        clean = lambda v: None if isinstance(v, float) and v != v else v
        payload = {
            "k": self.k,
            "seed": self.seed,
            "learner": self.learner,
            "folds": [
                {
                    "index": f.index,
                    "test_rows": list(f.test_rows),
                    "arcs": [list(a) for a in f.arcs],
                    "threshold": f.threshold,
                }
                for f in self.folds
            ],
            "predictive_correlation": {
                k: clean(v) for k, v in self.predictive_correlation.items()
            },
            "classification_error": self.classification_error,
            "per_fold_correlation": {
                k: [clean(v) for v in vs] for k, vs in self.per_fold_correlation.items()
            },
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def write_summary_csv(self, stream: IO[str], delimiter: str = ",") -> None:
        writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["variable", "metric", "value"])
        for name in sorted(self.predictive_correlation):
            writer.writerow(
                [name, "predictive_correlation", repr(self.predictive_correlation[name])]
            )
        for name in sorted(self.classification_error):
            writer.writerow(
                [name, "classification_error", repr(self.classification_error[name])]
            )


def _fold_partition(n: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    permutation = rng.permutation(n)
    folds = np.array_split(permutation, k)
    assert sum(len(f) for f in folds) == n
    return folds


def _learn_structure(
    train: DeltaDataset,
    c: ArcConstraints,
    learner: str,
    replicates: int,
    threshold,
    seed,
) -> tuple[Dag, float | None]:
    if learner == "single":
        dag, _ = hill_climb(train, c)
        return dag, None
    result = average_network(train, c, replicates=replicates, seed=seed, threshold=threshold)
    return result.consensus, result.threshold


def cross_validate(
    d: DeltaDataset,
    c: ArcConstraints | None = None,
    k: int = 10,
    learner: str = "averaged",
    replicates: int = 50,
    threshold: float | str = "auto",
    seed: int | None = None,
    keep_predictions: bool = False,
) -> CvReport:
    """k-fold CV: per fold, learn structure and parameters on the training
    rows only, then predict every variable of every test row from the others.

    Pools (observed, predicted) pairs across folds; reports the Pearson
    correlation per continuous variable and the misclassification rate per
    discrete variable.
    """
    if learner not in ("single", "averaged"):
        raise DataError(f"unknown learner {learner!r}")
    if not 2 <= k <= d.n:
        raise DataError("need n >= k >= 2")
    if c is None:
        c = ArcConstraints()
    if seed is None:
        seed = secrets.randbits(32)
    master = np.random.SeedSequence(seed)
    streams = master.spawn(k + 1)
    folds = _fold_partition(d.n, k, np.random.default_rng(streams[0]))
    _assert_partition(folds, d.n)

    observed: dict[str, list] = {name: [] for name in d.order}
    predicted: dict[str, list] = {name: [] for name in d.order}
    fold_slices: dict[str, list[tuple[int, int]]] = {name: [] for name in d.order}
    records: list[FoldRecord] = []
    for i, test_rows in enumerate(folds):
        train_mask = np.ones(d.n, dtype=bool)
        train_mask[test_rows] = False
        train = d.subset(np.nonzero(train_mask)[0])
        test = d.subset(test_rows)
        try:
            dag, used_threshold = _learn_structure(
                train, c, learner, replicates, threshold, streams[i + 1]
            )
            model = fit_parameters(dag, train)
        except DeltaBnError as exc:
            raise DataError(f"fold {i}: {exc}") from exc
        records.append(
            FoldRecord(
                index=i,
                test_rows=tuple(int(r) for r in test_rows),
                arcs=tuple(sorted(dag.arcs)),
                threshold=used_threshold,
            )
        )
        for name in d.order:
            start = len(observed[name])
            for r in range(test.n):
                row = {col: test.column(col)[r] for col in d.order if col != name}
                predicted[name].append(predict_node(model, name, row))
                observed[name].append(test.column(name)[r])
            fold_slices[name].append((start, len(observed[name])))

    correlations: dict[str, float] = {}
    per_fold: dict[str, list[float]] = {}
    errors: dict[str, float] = {}
    for name in d.order:
        if d.is_discrete(name):
            obs = np.array(observed[name], dtype=object)
            pred = np.array(predicted[name], dtype=object)
            errors[name] = float(np.mean(obs != pred))
        else:
            obs = np.array(observed[name], dtype=float)
            pred = np.array(predicted[name], dtype=float)
            correlations[name] = _safe_pearson(obs, pred)
            per_fold[name] = [
                _safe_pearson(obs[a:b], pred[a:b]) if b - a >= 2 else float("nan")
                for a, b in fold_slices[name]
            ]
    return CvReport(
        k=k,
        seed=seed,
        learner=learner,
        folds=records,
        predictive_correlation=correlations,
        classification_error=errors,
        per_fold_correlation=per_fold,
        observed=observed if keep_predictions else None,
        predicted=predicted if keep_predictions else None,
    )


def _safe_pearson(obs: np.ndarray, pred: np.ndarray) -> float:
    try:
        return pearson(obs, pred)
    except UndefinedCorrelationError:
        return float("nan")


def _assert_partition(folds, n: int) -> None:
    seen = np.concatenate(folds)
    if len(seen) != n or len(np.unique(seen)) != n:
        raise AssertionError("fold assignment is not a partition")
    sizes = [len(f) for f in folds]
    if max(sizes) - min(sizes) > 1:
        raise AssertionError("fold sizes differ by more than one")


@dataclass(frozen=True)
class SubgroupResult:
    level: str
    rows: int
    consensus: Dag
    strengths: ArcStrengthTable
    threshold: float


def subgroup_networks(
    d: DeltaDataset,
    by: str,
    c: ArcConstraints | None = None,
    replicates: int = 200,
    threshold: float | str = "auto",
    seed: int | None = None,
) -> dict[str, SubgroupResult]:
    """One consensus network per level of a discrete column.

    Rows are filtered per level, the grouping column is dropped, and the
    averaging pipeline reruns with the constraints restricted to the
    remaining nodes.
    """
    if by not in d.discrete:
        raise DataError(f"{by} is not a discrete column")
    base = c if c is not None else default_constraints(d.order)
    constraints = base.without_node(by)
    level_rows = {
        level: np.nonzero(d.discrete[by] == level)[0] for level in d.levels[by]
    }
    for level, rows in level_rows.items():
        if len(rows) < 2:
            raise DataError(f"subgroup {by}={level} has too few rows ({len(rows)})")
    streams = np.random.SeedSequence(seed).spawn(len(d.levels[by]))
    results: dict[str, SubgroupResult] = {}
    for level, stream in zip(d.levels[by], streams):
        rows = level_rows[level]
        subset = d.subset(rows).drop(by)
        result = average_network(
            subset, constraints, replicates=replicates, seed=stream, threshold=threshold
        )
        results[level] = SubgroupResult(
            level=level,
            rows=len(rows),
            consensus=result.consensus,
            strengths=result.strengths,
            threshold=result.threshold,
        )
    return results
