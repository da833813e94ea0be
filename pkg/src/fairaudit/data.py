"""Tabular dataset ingestion: schema declaration, CSV loading, encoding.

A loaded :class:`Dataset` always uses one internal coding regardless of
the raw file labels: outcome 0 = favorable, 1 = unfavorable, and group
membership as an is-protected flag. The raw-label mappings are kept on
the dataset for reporting.
"""

from __future__ import annotations

import csv
import json
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyGroupError, ParseError, SchemaError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PROTECTED = "protected"
UNPROTECTED = "unprotected"

NUMERIC = "numeric"
CATEGORICAL = "categorical"
FEATURE_KINDS = (NUMERIC, CATEGORICAL)

FAVORABLE = 0
UNFAVORABLE = 1


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise SchemaError(
                f"feature {self.name!r}: kind must be one of {FEATURE_KINDS}, "
                f"got {self.kind!r}"
            )


@dataclass(frozen=True)
class Schema:
    """Declares how to interpret a delimited data file.

    All raw values are compared as strings against the stripped cell
    text, so numeric-looking labels may be given as either ``0`` or
    ``"0"`` in config files.

    ``unfavorable_outcome`` may be omitted; the loader then infers it as
    the single other outcome value present in the file.
    """

    features: tuple[FeatureSpec, ...]
    outcome_column: str
    group_column: str
    protected_value: str
    unprotected_value: str
    favorable_outcome: str = "0"
    unfavorable_outcome: str | None = None

    def __post_init__(self):
        if not self.features:
            raise SchemaError("schema declares no feature columns")
        names = [f.name for f in self.features]
        dupes = [n for n, c in Counter(names).items() if c > 1]
        if dupes:
            raise SchemaError(f"duplicate feature columns: {dupes}")
        for reserved in (self.outcome_column, self.group_column):
            if reserved in names:
                raise SchemaError(
                    f"column {reserved!r} cannot be both a feature and the "
                    "outcome/group column"
                )
        if self.outcome_column == self.group_column:
            raise SchemaError("outcome and group columns must differ")
        if self.protected_value == self.unprotected_value:
            raise SchemaError("protected and unprotected group values must differ")
        if (
            self.unfavorable_outcome is not None
            and self.unfavorable_outcome == self.favorable_outcome
        ):
            raise SchemaError("favorable and unfavorable outcome values must differ")


def schema_from_dict(raw: dict) -> Schema:
    """Build a Schema from a parsed config mapping."""
    try:
        features = tuple(
            FeatureSpec(name=str(f["name"]), kind=str(f["kind"]))
            for f in raw["features"]
        )
        unfavorable = raw.get("unfavorable_outcome")
        return Schema(
            features=features,
            outcome_column=str(raw["outcome_column"]),
            group_column=str(raw["group_column"]),
            protected_value=str(raw["protected_value"]),
            unprotected_value=str(raw["unprotected_value"]),
            favorable_outcome=str(raw.get("favorable_outcome", "0")),
            unfavorable_outcome=None if unfavorable is None else str(unfavorable),
        )
    except KeyError as exc:
        raise SchemaError(f"schema config is missing key {exc.args[0]!r}") from exc


def schema_from_file(path: str | Path) -> Schema:
    """Load a Schema from a TOML or JSON config file (by extension)."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"schema file not found: {path}")
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text(encoding="utf-8"))
    else:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    if not isinstance(raw, dict):
        raise SchemaError(f"schema file {path} must contain a table/object")
    return schema_from_dict(raw)


def schema_to_toml(schema: Schema) -> str:
    """Render a Schema as a TOML document (inverse of schema_from_file)."""

    def q(value: str) -> str:
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = [
        f"outcome_column = {q(schema.outcome_column)}",
        f"group_column = {q(schema.group_column)}",
        f"favorable_outcome = {q(schema.favorable_outcome)}",
    ]
    if schema.unfavorable_outcome is not None:
        lines.append(f"unfavorable_outcome = {q(schema.unfavorable_outcome)}")
    lines += [
        f"protected_value = {q(schema.protected_value)}",
        f"unprotected_value = {q(schema.unprotected_value)}",
    ]
    for feat in schema.features:
        lines += ["", "[[features]]", f"name = {q(feat.name)}", f"kind = {q(feat.kind)}"]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Dataset:
    """Immutable encoded dataset.

    ``outcome`` uses the internal coding (0 favorable, 1 unfavorable);
    ``outcome_labels`` and ``group_labels`` record the raw file values
    behind that coding as (favorable, unfavorable) and
    (protected, unprotected) pairs.
    """

    row_ids: np.ndarray
    features: np.ndarray
    outcome: np.ndarray
    is_protected: np.ndarray
    feature_names: tuple[str, ...]
    outcome_labels: tuple[str, str]
    group_labels: tuple[str, str]

    def __post_init__(self):
        n = self.row_ids.shape[0]
        if self.features.shape != (n, len(self.feature_names)):
            raise ValueError("feature matrix shape does not match names/rows")
        if self.outcome.shape != (n,) or self.is_protected.shape != (n,):
            raise ValueError("outcome/group arrays must have one entry per row")
        if len(np.unique(self.row_ids)) != n:
            raise ValueError("row_ids must be unique")
        for arr in (self.row_ids, self.features, self.outcome, self.is_protected):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.row_ids.shape[0])

    @property
    def n_protected(self) -> int:
        return int(self.is_protected.sum())

    @property
    def n_unprotected(self) -> int:
        return self.n - self.n_protected

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset, preserving the given order."""
        return Dataset(
            row_ids=self.row_ids[indices].copy(),
            features=self.features[indices].copy(),
            outcome=self.outcome[indices].copy(),
            is_protected=self.is_protected[indices].copy(),
            feature_names=self.feature_names,
            outcome_labels=self.outcome_labels,
            group_labels=self.group_labels,
        )


@dataclass(frozen=True)
class LoadResult:
    dataset: Dataset
    dropped: int
    drop_reasons: dict = field(default_factory=dict)


def validate_schema(schema: Schema, header: list[str]) -> list[str]:
    """Return every way the header fails the schema (empty means ok)."""
    violations = []
    present = set(header)
    if schema.outcome_column not in present:
        violations.append(f"outcome column {schema.outcome_column!r} not in header")
    if schema.group_column not in present:
        violations.append(f"group column {schema.group_column!r} not in header")
    for feat in schema.features:
        if feat.name not in present:
            violations.append(f"feature column {feat.name!r} not in header")
    dupes = sorted(n for n, c in Counter(header).items() if c > 1)
    for name in dupes:
        violations.append(f"column {name!r} appears more than once in header")
    return violations


def load_dataset(path: str | Path, schema: Schema) -> LoadResult:
    """Load and encode a comma-separated data file against ``schema``.

    Rows are dropped (and counted per reason) when a needed cell is
    empty or when the group/outcome value is outside the declared ones.
    A non-empty, non-numeric cell in a numeric column is an error, not a
    drop. Categorical columns are one-hot encoded over the full set of
    observed levels, in sorted order, with no reference level removed.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"data file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        violations = validate_schema(schema, header)
        if violations:
            raise SchemaError(f"{path}: " + "; ".join(violations))
        col_index = {name: i for i, name in enumerate(header)}
        raw_rows = list(reader)

    group_values = {schema.protected_value, schema.unprotected_value}
    needed = [f.name for f in schema.features] + [
        schema.outcome_column,
        schema.group_column,
    ]
    needed_idx = [col_index[name] for name in needed]

    kept: list[tuple[int, list[str], str, str]] = []
    drop_reasons: Counter = Counter()
    unfavorable = schema.unfavorable_outcome
    seen_other_outcomes: set[str] = set()

    for row_id, row in enumerate(raw_rows):
        if not row or all(cell.strip() == "" for cell in row):
            drop_reasons["blank_row"] += 1
            continue
        if len(row) != len(header):
            raise ParseError(
                f"{path}: line {row_id + 2} has {len(row)} cells, expected "
                f"{len(header)}"
            )
        cells = [row[i].strip() for i in needed_idx]
        if any(cell == "" for cell in cells):
            drop_reasons["missing_value"] += 1
            continue
        group = cells[-1]
        if group not in group_values:
            drop_reasons["group_value"] += 1
            continue
        outcome = cells[-2]
        if outcome != schema.favorable_outcome:
            if unfavorable is None:
                seen_other_outcomes.add(outcome)
            elif outcome != unfavorable:
                drop_reasons["outcome_value"] += 1
                continue
        kept.append((row_id, cells[: len(schema.features)], outcome, group))

    if unfavorable is None:
        if len(seen_other_outcomes) > 1:
            raise SchemaError(
                f"{path}: outcome column {schema.outcome_column!r} has "
                f"{len(seen_other_outcomes) + 1} distinct values "
                f"{sorted(seen_other_outcomes)}; declare unfavorable_outcome "
                "to disambiguate"
            )
        if not seen_other_outcomes:
            raise SchemaError(
                f"{path}: outcome column {schema.outcome_column!r} only ever "
                f"takes the favorable value {schema.favorable_outcome!r}"
            )
        unfavorable = seen_other_outcomes.pop()

    # Second pass over kept rows: collect categorical levels, parse numerics.
    cat_levels: dict[int, set[str]] = {
        i: set() for i, f in enumerate(schema.features) if f.kind == CATEGORICAL
    }
    for _, feat_cells, _, _ in kept:
        for i in cat_levels:
            cat_levels[i].add(feat_cells[i])
    sorted_levels = {i: sorted(levels) for i, levels in cat_levels.items()}

    feature_names: list[str] = []
    for i, feat in enumerate(schema.features):
        if feat.kind == NUMERIC:
            feature_names.append(feat.name)
        else:
            feature_names.extend(f"{feat.name}={level}" for level in sorted_levels[i])

    n = len(kept)
    features = np.zeros((n, len(feature_names)), dtype=np.float64)
    outcome_arr = np.zeros(n, dtype=np.int8)
    protected_arr = np.zeros(n, dtype=bool)
    row_ids = np.zeros(n, dtype=np.int64)

    for out_idx, (row_id, feat_cells, outcome, group) in enumerate(kept):
        row_ids[out_idx] = row_id
        col = 0
        for i, feat in enumerate(schema.features):
            cell = feat_cells[i]
            if feat.kind == NUMERIC:
                try:
                    features[out_idx, col] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: line {row_id + 2}, column {feat.name!r}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
                col += 1
            else:
                offset = sorted_levels[i].index(cell)
                features[out_idx, col + offset] = 1.0
                col += len(sorted_levels[i])
        outcome_arr[out_idx] = FAVORABLE if outcome == schema.favorable_outcome else UNFAVORABLE
        protected_arr[out_idx] = group == schema.protected_value

    n_protected = int(protected_arr.sum())
    if n == 0 or n_protected == 0 or n_protected == n:
        missing = (
            "both groups"
            if n == 0
            else (schema.protected_value if n_protected == 0 else schema.unprotected_value)
        )
        raise EmptyGroupError(
            f"{path}: no usable rows for {missing} after filtering "
            f"({sum(drop_reasons.values())} rows dropped)"
        )

    dataset = Dataset(
        row_ids=row_ids,
        features=features,
        outcome=outcome_arr,
        is_protected=protected_arr,
        feature_names=tuple(feature_names),
        outcome_labels=(schema.favorable_outcome, unfavorable),
        group_labels=(schema.protected_value, schema.unprotected_value),
    )
    return LoadResult(
        dataset=dataset,
        dropped=int(sum(drop_reasons.values())),
        drop_reasons=dict(drop_reasons),
    )


def split_by_group(dataset: Dataset) -> tuple[Dataset, Dataset]:
    """Partition into (protected rows, unprotected rows), order preserved."""
    idx = np.arange(dataset.n)
    return (
        dataset.take(idx[dataset.is_protected]),
        dataset.take(idx[~dataset.is_protected]),
    )


def write_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset back out in the load_dataset file format.

    Only valid for datasets whose features are all numeric columns
    (no '=' one-hot names), e.g. synthetic data.
    """
    onehot = [n for n in dataset.feature_names if "=" in n]
    if onehot:
        raise ValueError(f"cannot write one-hot encoded columns back to CSV: {onehot}")
    favorable, unfavorable = dataset.outcome_labels
    protected, unprotected = dataset.group_labels
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.feature_names) + ["outcome", "group"])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(v)) for v in dataset.features[i]]
                + [
                    favorable if dataset.outcome[i] == FAVORABLE else unfavorable,
                    protected if dataset.is_protected[i] else unprotected,
                ]
            )
