"""Longitudinal two-timepoint tables, difference datasets and atlas adjustment.

Input format: delimited text with a header row and one subject per row.
Paired measurement columns are named ``<feature>_t1`` / ``<feature>_t2``;
visit ages live in ``t1`` / ``t2``; ``treatment``, ``growth`` and ``id``
complete the schema.  An atlas file has columns ``feature``, ``age``,
``value``.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

TREATMENT_LEVELS = ("NT", "TB", "TG")
GROWTH_LEVELS = ("Good", "Bad")
BINARY_TREATMENT_LEVELS = ("untreated", "treated")

TIME_COLUMN = "dT"
TREATMENT_COLUMN = "Treatment"
GROWTH_COLUMN = "Growth"


@dataclass(frozen=True)
class TableSchema:
    """Column naming convention for longitudinal input files."""

    id: str = "id"
    t1: str = "t1"
    t2: str = "t2"
    treatment: str = "treatment"
    growth: str = "growth"
    t1_suffix: str = "_t1"
    t2_suffix: str = "_t2"
    delimiter: str = ","


@dataclass(frozen=True)
class SubjectRecord:
    id: str
    t1: float
    t2: float
    m1: Mapping[str, float]
    m2: Mapping[str, float]
    treatment: str
    growth: str


@dataclass(frozen=True)
class LongitudinalTable:
    """Validated per-subject paired measurements at two visits."""

    features: tuple[str, ...]
    subjects: tuple[SubjectRecord, ...]

    def __post_init__(self):
        for rec in self.subjects:
            if not rec.t2 > rec.t1:
                raise DataError(f"subject {rec.id}: t2 must exceed t1")
            if set(rec.m1) != set(self.features) or set(rec.m2) != set(self.features):
                raise DataError(f"subject {rec.id}: measurement keys do not match features")
            if rec.treatment not in TREATMENT_LEVELS:
                raise DataError(f"subject {rec.id}: unknown treatment level {rec.treatment!r}")
            if rec.growth not in GROWTH_LEVELS:
                raise DataError(f"subject {rec.id}: unknown growth level {rec.growth!r}")

    def __len__(self) -> int:
        return len(self.subjects)


@dataclass(frozen=True)
class DeltaDataset:
    """The modeling table: continuous difference columns plus discrete labels.

    ``order`` fixes column identity and ordering for the life of the dataset;
    subsetting and column drops return new instances.
    """

    order: tuple[str, ...]
    continuous: Mapping[str, np.ndarray]
    discrete: Mapping[str, np.ndarray]
    levels: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        names = set(self.continuous) | set(self.discrete)
        if names != set(self.order) or len(self.order) != len(names):
            raise DataError("column order does not match the declared columns")
        if set(self.levels) != set(self.discrete):
            raise DataError("levels must be declared for exactly the discrete columns")
        lengths = {len(col) for col in self.continuous.values()}
        lengths |= {len(col) for col in self.discrete.values()}
        if len(lengths) > 1:
            raise DataError("columns differ in length")
        for name, col in self.continuous.items():
            if not np.all(np.isfinite(col)):
                raise DataError(f"non-finite value in column {name}")
        for name, col in self.discrete.items():
            known = set(self.levels[name])
            bad = [v for v in col.tolist() if v not in known]
            if bad:
                raise DataError(f"value {bad[0]!r} outside declared levels of {name}")

    @property
    def n(self) -> int:
        for col in self.continuous.values():
            return len(col)
        for col in self.discrete.values():
            return len(col)
        return 0

    @property
    def continuous_names(self) -> tuple[str, ...]:
        return tuple(c for c in self.order if c in self.continuous)

    @property
    def discrete_names(self) -> tuple[str, ...]:
        return tuple(c for c in self.order if c in self.discrete)

    def is_discrete(self, name: str) -> bool:
        return name in self.discrete

    def column(self, name: str) -> np.ndarray:
        if name in self.continuous:
            return self.continuous[name]
        return self.discrete[name]

    def subset(self, rows) -> "DeltaDataset":
        rows = np.asarray(rows)
        return DeltaDataset(
            order=self.order,
            continuous={k: v[rows] for k, v in self.continuous.items()},
            discrete={k: v[rows] for k, v in self.discrete.items()},
            levels=dict(self.levels),
        )

    def drop(self, name: str) -> "DeltaDataset":
        if name not in self.order:
            raise DataError(f"unknown column {name}")
        return DeltaDataset(
            order=tuple(c for c in self.order if c != name),
            continuous={k: v for k, v in self.continuous.items() if k != name},
            discrete={k: v for k, v in self.discrete.items() if k != name},
            levels={k: v for k, v in self.levels.items() if k != name},
        )

    def write_csv(self, stream: IO[str], delimiter: str = ",") -> None:
        writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
        writer.writerow(self.order)
        cols = [self.column(c) for c in self.order]
        for i in range(self.n):
            writer.writerow(
                [repr(float(c[i])) if c.dtype.kind == "f" else str(c[i]) for c in cols]
            )


@dataclass(frozen=True)
class ReferenceAtlas:
    """Population reference values per feature over age, linearly interpolated.

    Ages outside the tabulated range clamp to the nearest endpoint.
    """

    ages: Mapping[str, np.ndarray]
    values: Mapping[str, np.ndarray]

    def __post_init__(self):
        for feature, ages in self.ages.items():
            if len(ages) != len(self.values[feature]):
                raise DataError(f"atlas feature {feature}: ages/values length mismatch")
            if len(ages) == 0:
                raise DataError(f"atlas feature {feature}: empty")
            if np.any(np.diff(ages) <= 0):
                raise DataError(f"atlas feature {feature}: ages must be strictly increasing")

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(self.ages)

    def reference(self, feature: str, age: float) -> float:
        if feature not in self.ages:
            raise DataError(f"atlas does not cover feature {feature}")
        return float(np.interp(age, self.ages[feature], self.values[feature]))


def _open_source(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", newline=""), True
    return source, False


def _parse_float(raw: str, column: str, row: int) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise DataError(f"non-numeric value {raw!r} in column {column} at row {row}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value in column {column} at row {row}")
    return value


def load_table(source, schema: TableSchema = TableSchema()) -> LongitudinalTable:
    """Read a delimited longitudinal file into a validated table.

    Every malformed row raises :class:`DataError` with its 1-based data row
    index; no partial table is ever returned.
    """
    stream, owned = _open_source(source)
    try:
        reader = csv.reader(stream, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty input: no header row") from None
        header = [h.strip() for h in header]
        required = [schema.id, schema.t1, schema.t2, schema.treatment, schema.growth]
        for col in required:
            if col not in header:
                raise DataError(f"missing column {col}")
        features = []
        for col in header:
            if col.endswith(schema.t1_suffix) and col not in required:
                name = col[: -len(schema.t1_suffix)]
                if name + schema.t2_suffix not in header:
                    raise DataError(f"missing column {name + schema.t2_suffix}")
                features.append(name)
        for col in header:
            if col.endswith(schema.t2_suffix) and col not in required:
                name = col[: -len(schema.t2_suffix)]
                if name not in features:
                    raise DataError(f"missing column {name + schema.t1_suffix}")
        if not features:
            raise DataError("no <feature>_t1/<feature>_t2 column pairs found")
        index = {col: i for i, col in enumerate(header)}

        def cell(row_values, col, row_no):
            try:
                raw = row_values[index[col]]
            except IndexError:
                raise DataError(f"missing value in column {col} at row {row_no}") from None
            if raw is None or raw.strip() == "":
                raise DataError(f"missing value in column {col} at row {row_no}")
            return raw.strip()

        subjects = []
        for row_no, row_values in enumerate(reader, start=1):
            if not row_values or all(v.strip() == "" for v in row_values):
                continue
            t1 = _parse_float(cell(row_values, schema.t1, row_no), schema.t1, row_no)
            t2 = _parse_float(cell(row_values, schema.t2, row_no), schema.t2, row_no)
            if not t2 > t1:
                raise DataError(f"non-positive dT at row {row_no}")
            treatment = cell(row_values, schema.treatment, row_no)
            if treatment not in TREATMENT_LEVELS:
                raise DataError(
                    f"unknown treatment level {treatment!r} at row {row_no}"
                )
            growth = cell(row_values, schema.growth, row_no)
            if growth not in GROWTH_LEVELS:
                raise DataError(f"unknown growth level {growth!r} at row {row_no}")
            m1 = {}
            m2 = {}
            for feature in features:
                c1 = feature + schema.t1_suffix
                c2 = feature + schema.t2_suffix
                m1[feature] = _parse_float(cell(row_values, c1, row_no), c1, row_no)
                m2[feature] = _parse_float(cell(row_values, c2, row_no), c2, row_no)
            subjects.append(
                SubjectRecord(
                    id=cell(row_values, schema.id, row_no),
                    t1=t1,
                    t2=t2,
                    m1=m1,
                    m2=m2,
                    treatment=treatment,
                    growth=growth,
                )
            )
        return LongitudinalTable(features=tuple(features), subjects=tuple(subjects))
    finally:
        if owned:
            stream.close()


def write_table(table: LongitudinalTable, stream: IO[str], schema: TableSchema = TableSchema()) -> None:
    writer = csv.writer(stream, delimiter=schema.delimiter, lineterminator="\n")
    header = [schema.id, schema.t1, schema.t2, schema.treatment, schema.growth]
    for feature in table.features:
        header += [feature + schema.t1_suffix, feature + schema.t2_suffix]
    writer.writerow(header)
    for rec in table.subjects:
        row = [rec.id, repr(rec.t1), repr(rec.t2), rec.treatment, rec.growth]
        for feature in table.features:
            row += [repr(rec.m1[feature]), repr(rec.m2[feature])]
        writer.writerow(row)


def compute_deltas(table: LongitudinalTable, treatment_coding: str = "binary") -> DeltaDataset:
    """Turn a longitudinal table into the difference dataset the networks learn from.

    Per row: ``d<feature> = m2 - m1`` and ``dT = t2 - t1``.  Binary coding
    merges TB and TG into "treated"; three-level keeps the raw labels.
    """
    if treatment_coding not in ("binary", "three_level"):
        raise DataError(f"unknown treatment coding {treatment_coding!r}")
    delta_names = tuple("d" + f for f in table.features)
    order = delta_names + (TIME_COLUMN, TREATMENT_COLUMN, GROWTH_COLUMN)
    continuous = {
        "d" + f: np.array([rec.m2[f] - rec.m1[f] for rec in table.subjects], dtype=float)
        for f in table.features
    }
    continuous[TIME_COLUMN] = np.array(
        [rec.t2 - rec.t1 for rec in table.subjects], dtype=float
    )
    if treatment_coding == "binary":
        treatment = np.array(
            ["untreated" if rec.treatment == "NT" else "treated" for rec in table.subjects],
            dtype=object,
        )
        treatment_levels = BINARY_TREATMENT_LEVELS
    else:
        treatment = np.array([rec.treatment for rec in table.subjects], dtype=object)
        treatment_levels = TREATMENT_LEVELS
    growth = np.array([rec.growth for rec in table.subjects], dtype=object)
    return DeltaDataset(
        order=order,
        continuous=continuous,
        discrete={TREATMENT_COLUMN: treatment, GROWTH_COLUMN: growth},
        levels={TREATMENT_COLUMN: treatment_levels, GROWTH_COLUMN: GROWTH_LEVELS},
    )


def load_atlas(source, delimiter: str = ",") -> ReferenceAtlas:
    """Read an atlas file with columns feature, age, value."""
    stream, owned = _open_source(source)
    try:
        reader = csv.reader(stream, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty atlas: no header row") from None
        for col in ("feature", "age", "value"):
            if col not in header:
                raise DataError(f"missing column {col}")
        index = {col: i for i, col in enumerate(header)}
        rows: dict[str, list[tuple[float, float]]] = {}
        for row_no, row_values in enumerate(reader, start=1):
            if not row_values or all(v.strip() == "" for v in row_values):
                continue
            feature = row_values[index["feature"]].strip()
            age = _parse_float(row_values[index["age"]].strip(), "age", row_no)
            value = _parse_float(row_values[index["value"]].strip(), "value", row_no)
            rows.setdefault(feature, []).append((age, value))
        ages = {}
        values = {}
        for feature, pairs in rows.items():
            pairs.sort()
            ages[feature] = np.array([p[0] for p in pairs], dtype=float)
            values[feature] = np.array([p[1] for p in pairs], dtype=float)
        return ReferenceAtlas(ages=ages, values=values)
    finally:
        if owned:
            stream.close()


def adjust_with_atlas(table: LongitudinalTable, atlas: ReferenceAtlas) -> LongitudinalTable:
    """Express every measurement as a deviation from the atlas reference at that age."""
    for feature in table.features:
        if feature not in atlas.features:
            raise DataError(f"atlas does not cover feature {feature}")
    adjusted = []
    for rec in table.subjects:
        m1 = {f: rec.m1[f] - atlas.reference(f, rec.t1) for f in table.features}
        m2 = {f: rec.m2[f] - atlas.reference(f, rec.t2) for f in table.features}
        adjusted.append(replace(rec, m1=m1, m2=m2))
    return LongitudinalTable(features=table.features, subjects=tuple(adjusted))
