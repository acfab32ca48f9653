"""Tabular data model, CSV ingestion/export, source joins and train/test splits.

Rows are always kept in sorted instance-id order so that every downstream
result is reproducible bit for bit.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateSplit,
    DuplicateAttribute,
    EmptyDataset,
    ExportError,
    IdMismatch,
    InvalidDataset,
    InvalidLabel,
    MissingColumn,
    NonNumericCell,
)

DEFAULT_ID_COLUMN = "id"
DEFAULT_LABEL_COLUMN = "label"
SOURCES_PREFIX = "# sources:"
CLASSES = (1, 2)


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    source_table: str = ""
    kind: str = "numeric"

    def __post_init__(self):
        if not self.name:
            raise InvalidDataset("attribute name must be nonempty")
        if self.kind != "numeric":
            raise InvalidDataset(f"unsupported attribute kind {self.kind!r}")


@dataclass(frozen=True)
class SchemaSelection:
    """Which columns of a table feed classification."""

    selected: tuple[str, ...]
    label_column: str | None = None
    id_column: str = DEFAULT_ID_COLUMN

    def __post_init__(self):
        object.__setattr__(self, "selected", tuple(self.selected))
        if not self.selected:
            raise InvalidDataset("selection must name at least one attribute")
        if len(set(self.selected)) != len(self.selected):
            dup = next(s for s in self.selected if self.selected.count(s) > 1)
            raise DuplicateAttribute(dup)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Named-attribute numeric table with optional class labels in {1, 2}.

    The constructor validates every invariant, so any ``Dataset`` that exists
    is well formed.
    """

    attributes: tuple[AttributeSpec, ...]
    instance_ids: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        attrs = tuple(self.attributes)
        ids = tuple(str(i) for i in self.instance_ids)
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1 and len(attrs) == 1:
            values = values.reshape(-1, 1)
        values.setflags(write=False)
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "instance_ids", ids)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64).reshape(-1)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        validate(self)

    @property
    def n(self) -> int:
        return len(self.instance_ids)

    @property
    def d(self) -> int:
        return len(self.attributes)

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.attribute_names.index(name)
        except ValueError:
            raise MissingColumn(name) from None
        return self.values[:, j]

    def select(self, names: Sequence[str]) -> "Dataset":
        """Column subset in the order given."""
        idx = []
        for name in names:
            if name not in self.attribute_names:
                raise MissingColumn(name)
            idx.append(self.attribute_names.index(name))
        return Dataset(
            attributes=tuple(self.attributes[j] for j in idx),
            instance_ids=self.instance_ids,
            values=self.values[:, idx],
            labels=self.labels,
        )

    def take(self, rows: Sequence[int]) -> "Dataset":
        """Row subset; ``rows`` are positions, re-sorted to keep id order."""
        rows = sorted(rows)
        return Dataset(
            attributes=self.attributes,
            instance_ids=tuple(self.instance_ids[i] for i in rows),
            values=self.values[rows, :],
            labels=None if self.labels is None else self.labels[rows],
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.labels is None or other.labels is None:
            labels_equal = self.labels is None and other.labels is None
        else:
            labels_equal = np.array_equal(self.labels, other.labels)
        return (
            self.attributes == other.attributes
            and self.instance_ids == other.instance_ids
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
            and labels_equal
        )

    __hash__ = None


def validate(ds: Dataset) -> None:
    """Raise if ``ds`` violates any Dataset invariant."""
    if ds.n == 0:
        raise EmptyDataset("dataset has no instances")
    if ds.d == 0:
        raise InvalidDataset("dataset has no attributes")
    names = [a.name for a in ds.attributes]
    if len(set(names)) != len(names):
        dup = next(s for s in names if names.count(s) > 1)
        raise DuplicateAttribute(dup)
    if len(set(ds.instance_ids)) != ds.n:
        raise InvalidDataset("instance ids must be unique")
    if ds.values.shape != (ds.n, ds.d):
        raise InvalidDataset(f"values shape {ds.values.shape} != ({ds.n}, {ds.d})")
    if not np.all(np.isfinite(ds.values)):
        i, j = np.argwhere(~np.isfinite(ds.values))[0]
        raise NonNumericCell(ds.instance_ids[i], names[j], ds.values[i, j])
    if ds.labels is not None:
        if ds.labels.shape != (ds.n,):
            raise InvalidDataset("labels length must equal number of instances")
        bad = ~np.isin(ds.labels, CLASSES)
        if bad.any():
            i = int(np.argmax(bad))
            raise InvalidLabel(ds.instance_ids[i], int(ds.labels[i]))


def _parse_number(text: str, row, col) -> float:
    try:
        x = float(text)
    except ValueError:
        raise NonNumericCell(row, col, text) from None
    if not math.isfinite(x):
        raise NonNumericCell(row, col, text)
    return x


def _parse_label(text: str, row) -> int:
    try:
        x = float(text)
    except ValueError:
        raise InvalidLabel(row, text) from None
    if x not in CLASSES:
        raise InvalidLabel(row, text)
    return int(x)


def _read_table(path) -> tuple[list[str], list[list[str]], dict[str, str]]:
    path = Path(path)
    sources: dict[str, str] = {}
    lines = []
    with path.open(encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                if line.startswith(SOURCES_PREFIX):
                    for item in line[len(SOURCES_PREFIX):].split():
                        name, _, tag = item.partition("=")
                        sources[name] = tag
                continue
            if line.strip():
                lines.append(line)
    rows = list(csv.reader(lines))
    if not rows:
        raise EmptyDataset(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    return header, rows[1:], sources


def default_selection(path, label_column: str | None = DEFAULT_LABEL_COLUMN) -> SchemaSelection:
    """Selection used when none is given.

    Attributes are the columns listed in a ``# sources:`` comment when the
    file has one, otherwise every column except the id and label columns.
    ``label_column`` is kept only if the header contains it.
    """
    header, _, sources = _read_table(path)
    if sources:
        selected = [h for h in header if h in sources]
    else:
        selected = [h for h in header if h not in (DEFAULT_ID_COLUMN, label_column)]
    if not selected:
        raise EmptyDataset(f"{path}: no attribute columns")
    label = label_column if label_column in header else None
    return SchemaSelection(tuple(selected), label_column=label)


def ingest_csv(path, selection: SchemaSelection | None = None) -> Dataset:
    """Load a comma-separated file into a validated :class:`Dataset`.

    With ``selection=None`` the :func:`default_selection` is used. If the id
    column is absent, ids ``row0001``... are generated in file order. Lines
    starting with ``#`` are comments; a ``# sources: a=tag ...`` comment
    restores attribute source tags.
    """
    if selection is None:
        selection = default_selection(path)
    header, body, sources = _read_table(path)

    for name in selection.selected:
        if name not in header:
            raise MissingColumn(name)
    if selection.label_column is not None and selection.label_column not in header:
        raise MissingColumn(selection.label_column)
    if not body:
        raise EmptyDataset(f"{path}: header only")

    col_idx = [header.index(name) for name in selection.selected]
    id_idx = header.index(selection.id_column) if selection.id_column in header else None
    label_idx = None if selection.label_column is None else header.index(selection.label_column)
    width = max(4, len(str(len(body))))

    records = []
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise NonNumericCell(r, "<row>", ",".join(row))
        rid = row[id_idx].strip() if id_idx is not None else f"row{r:0{width}d}"
        vals = [_parse_number(row[j].strip(), r, header[j]) for j in col_idx]
        lab = None if label_idx is None else _parse_label(row[label_idx].strip(), r)
        records.append((rid, vals, lab))
    records.sort(key=lambda rec: rec[0])

    stem = Path(path).stem
    attributes = tuple(AttributeSpec(name, sources.get(name, stem)) for name in selection.selected)
    return Dataset(
        attributes=attributes,
        instance_ids=tuple(rec[0] for rec in records),
        values=np.array([rec[1] for rec in records], dtype=np.float64).reshape(len(records), -1),
        labels=None if label_idx is None else np.array([rec[2] for rec in records]),
    )


def format_number(x: float) -> str:
    """Shortest string that parses back to exactly ``x``."""
    return repr(float(x))


def export_csv(ds: Dataset, path, comments: Iterable[str] = (), extra_columns=None) -> None:
    """Write ``ds`` in the ingestion dialect (re-ingesting gives an equal Dataset).

    ``extra_columns`` maps column name to a per-instance sequence written after
    the id column; they are ignored by a selection that does not name them.
    """
    extra_columns = dict(extra_columns or {})
    header = [DEFAULT_ID_COLUMN, *extra_columns, *ds.attribute_names]
    if ds.labels is not None:
        header.append(DEFAULT_LABEL_COLUMN)
    out = [f"# {c}" if not c.startswith("#") else c for c in comments]
    tags = " ".join(f"{a.name}={a.source_table}" for a in ds.attributes)
    out.append(f"{SOURCES_PREFIX} {tags}")
    out.append(",".join(header))
    for i, rid in enumerate(ds.instance_ids):
        cells = [rid]
        cells += [format_number(col[i]) for col in extra_columns.values()]
        cells += [format_number(x) for x in ds.values[i]]
        if ds.labels is not None:
            cells.append(str(int(ds.labels[i])))
        out.append(",".join(cells))
    try:
        Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc


def join_sources(tables, selection: SchemaSelection | None = None) -> Dataset:
    """Inner-join ``(tag, Dataset)`` pairs on instance id.

    Columns are tagged with their table and ordered as in ``selection`` (or by
    tag then table order when no selection is given). Labels come from the
    labeled tables, which must agree.
    """
    tables = sorted(((str(tag), ds) for tag, ds in tables), key=lambda t: t[0])
    if not tables:
        raise EmptyDataset("no tables to join")
    tags = [t for t, _ in tables]
    if len(set(tags)) != len(tags):
        raise InvalidDataset("table tags must be unique")

    owner: dict[str, tuple[str, Dataset]] = {}
    for tag, ds in tables:
        for name in ds.attribute_names:
            if name in owner:
                raise DuplicateAttribute(name)
            owner[name] = (tag, ds)

    all_ids = sorted(set().union(*(ds.instance_ids for _, ds in tables)))
    positions = [{rid: i for i, rid in enumerate(ds.instance_ids)} for _, ds in tables]
    for rid in all_ids:
        for (tag, _), pos in zip(tables, positions):
            if rid not in pos:
                raise IdMismatch(rid, tag)

    names = list(selection.selected) if selection is not None else list(owner)
    columns, attributes = [], []
    for name in names:
        if name not in owner:
            raise MissingColumn(name)
        tag, ds = owner[name]
        pos = positions[tags.index(tag)]
        rows = [pos[rid] for rid in all_ids]
        columns.append(ds.column(name)[rows])
        attributes.append(AttributeSpec(name, tag))

    labels = None
    for (tag, ds), pos in zip(tables, positions):
        if ds.labels is None:
            continue
        these = ds.labels[[pos[rid] for rid in all_ids]]
        if labels is not None and not np.array_equal(labels, these):
            raise InvalidDataset(f"table {tag!r} disagrees on labels")
        labels = these

    return Dataset(
        attributes=tuple(attributes),
        instance_ids=tuple(all_ids),
        values=np.column_stack(columns),
        labels=labels,
    )


def split_train_test(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified, seeded split into ``(train, test)``.

    The test size is ``round(n * test_fraction)``, shared between the classes
    by largest remainder (ties to class 1).
    """
    if not ds.is_labeled:
        raise DegenerateSplit("dataset has no labels")
    if not 0.0 < test_fraction < 1.0:
        raise DegenerateSplit(f"test_fraction must be in (0, 1), got {test_fraction}")

    n_test = int(round(ds.n * test_fraction))
    members = {c: np.flatnonzero(ds.labels == c) for c in CLASSES}
    quotas = {c: len(members[c]) * test_fraction for c in CLASSES}
    alloc = {c: int(math.floor(quotas[c])) for c in CLASSES}
    by_remainder = sorted(CLASSES, key=lambda c: (-(quotas[c] - alloc[c]), c))
    for c in by_remainder[: max(0, n_test - sum(alloc.values()))]:
        alloc[c] += 1

    rng = np.random.default_rng(seed)
    test_rows: list[int] = []
    for c in CLASSES:
        perm = rng.permutation(members[c])
        test_rows.extend(int(i) for i in perm[: alloc[c]])
    test_set = set(test_rows)
    train_rows = [i for i in range(ds.n) if i not in test_set]

    if not test_rows or not train_rows:
        raise DegenerateSplit("split leaves an empty part")
    train_classes = set(ds.labels[train_rows].tolist())
    if len(train_classes) < 2:
        raise DegenerateSplit("training part contains a single class")
    return ds.take(train_rows), ds.take(test_rows)
