"""Immutable tabular model shared by every other module.

A Dataset is a frozen table of scans (or slices) with typed columns.
Columns carry a semantic role: raw annotator labels, model prediction
scores, free-form metadata, or values derived by analytics. Cells may
hold MISSING, a dedicated marker distinct from 0 and 0.0, so absent
labels never silently count as negatives.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import MismatchedDatasetError, SchemaError, UnknownColumnError

ROLES = ("annotation", "prediction", "metadata", "derived")
VALUE_KINDS = ("binary", "score", "numeric", "categorical", "text")


class _Missing:
    """Singleton missing-cell marker. Use the module-level MISSING instance."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MISSING"

    def __bool__(self):
        return False


MISSING = _Missing()

Cell = object  # int | float | str | _Missing


def is_missing(cell) -> bool:
    return cell is MISSING


@dataclass(frozen=True)
class ScanKey:
    """Identifies one row: a CT scan, or one slice of it.

    scan_id is an opaque non-empty text key; slice_index is None for
    CT-level rows.
    """

    scan_id: str
    slice_index: int | None = None

    def __post_init__(self):
        if not isinstance(self.scan_id, str) or not self.scan_id:
            raise SchemaError("scan_id must be a non-empty string")
        if self.slice_index is not None:
            if not isinstance(self.slice_index, int) or isinstance(self.slice_index, bool) or self.slice_index < 0:
                raise SchemaError(f"slice_index must be a non-negative integer, got {self.slice_index!r}")

    def label(self) -> str:
        if self.slice_index is None:
            return self.scan_id
        return f"{self.scan_id}:{self.slice_index}"


@dataclass(frozen=True)
class ColumnSchema:
    """Name, semantic role and value kind of one column.

    annotator is required iff role == "annotation"; subtype is required
    for annotation and prediction columns and optional elsewhere.
    """

    name: str
    role: str
    value_kind: str
    annotator: str | None = None
    subtype: str | None = None

    def __post_init__(self):
        if not self.name:
            raise SchemaError("column name must be non-empty")
        if self.role not in ROLES:
            raise SchemaError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.value_kind not in VALUE_KINDS:
            raise SchemaError(f"column {self.name!r}: unknown value_kind {self.value_kind!r}")
        if self.role == "annotation":
            if not self.annotator:
                raise SchemaError(f"annotation column {self.name!r} requires an annotator id")
            if self.value_kind != "binary":
                raise SchemaError(f"annotation column {self.name!r} must have value_kind 'binary'")
        elif self.annotator is not None:
            raise SchemaError(f"column {self.name!r}: annotator only allowed for annotation columns")
        if self.role in ("annotation", "prediction") and not self.subtype:
            raise SchemaError(f"{self.role} column {self.name!r} requires a subtype label")
        if self.role == "prediction" and self.value_kind != "score":
            raise SchemaError(f"prediction column {self.name!r} must have value_kind 'score'")


def _check_cell(cell, schema: ColumnSchema):
    """Validate and normalize one cell for the column's value kind."""
    if cell is MISSING:
        return cell
    kind = schema.value_kind
    if kind == "binary":
        if isinstance(cell, bool) or not isinstance(cell, int) or cell not in (0, 1):
            raise SchemaError(f"column {schema.name!r}: binary cell must be 0, 1 or MISSING, got {cell!r}")
        return cell
    if kind == "score":
        if isinstance(cell, bool) or not isinstance(cell, (int, float)):
            raise SchemaError(f"column {schema.name!r}: score cell must be numeric, got {cell!r}")
        value = float(cell)
        if not 0.0 <= value <= 1.0:
            raise SchemaError(f"column {schema.name!r}: score {value!r} outside [0, 1]")
        return value
    if kind == "numeric":
        if isinstance(cell, bool) or not isinstance(cell, (int, float)):
            raise SchemaError(f"column {schema.name!r}: numeric cell must be int/float, got {cell!r}")
        return cell
    # categorical / text
    if not isinstance(cell, str):
        raise SchemaError(f"column {schema.name!r}: {kind} cell must be text, got {cell!r}")
    return cell


class Dataset:
    """Immutable table: schema + rows keyed by ScanKey.

    Construction validates every cell against its column's value kind.
    All deriving operations return a new Dataset; nothing mutates an
    existing one, so instances are safe to share across threads.
    """

    __slots__ = ("_schema", "_keys", "_cells", "_key_index", "_col_index", "_level", "_fp")

    def __init__(self, schema: Sequence[ColumnSchema], rows: Iterable[tuple[ScanKey, Sequence[Cell]]], level: str = "ct"):
        if level not in ("slice", "ct"):
            raise SchemaError(f"level must be 'slice' or 'ct', got {level!r}")
        schema = tuple(schema)
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {dupes}")
        keys: list[ScanKey] = []
        cells: list[tuple] = []
        key_index: dict[ScanKey, int] = {}
        for key, row in rows:
            if not isinstance(key, ScanKey):
                raise SchemaError(f"row key must be a ScanKey, got {key!r}")
            if key in key_index:
                raise SchemaError(f"duplicate row key {key.label()!r}")
            row = tuple(row)
            if len(row) != len(schema):
                raise SchemaError(
                    f"row {key.label()!r} has {len(row)} cells, schema has {len(schema)} columns"
                )
            row = tuple(_check_cell(cell, col) for cell, col in zip(row, schema))
            key_index[key] = len(keys)
            keys.append(key)
            cells.append(row)
        object.__setattr__(self, "_schema", schema)
        object.__setattr__(self, "_keys", tuple(keys))
        object.__setattr__(self, "_cells", tuple(cells))
        object.__setattr__(self, "_key_index", key_index)
        object.__setattr__(self, "_col_index", {c.name: i for i, c in enumerate(schema)})
        object.__setattr__(self, "_level", level)
        object.__setattr__(self, "_fp", None)

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    @property
    def schema(self) -> tuple[ColumnSchema, ...]:
        return self._schema

    @property
    def keys(self) -> tuple[ScanKey, ...]:
        return self._keys

    @property
    def level(self) -> str:
        return self._level

    @property
    def n_rows(self) -> int:
        return len(self._keys)

    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self._schema)

    def has_column(self, name: str) -> bool:
        return name in self._col_index

    def schema_for(self, name: str) -> ColumnSchema:
        try:
            return self._schema[self._col_index[name]]
        except KeyError:
            raise UnknownColumnError(name, self.column_names()) from None

    def column(self, name: str) -> tuple[tuple[Cell, ...], ColumnSchema]:
        """Column values in row order plus its schema entry."""
        if name not in self._col_index:
            raise UnknownColumnError(name, self.column_names())
        i = self._col_index[name]
        return tuple(row[i] for row in self._cells), self._schema[i]

    def row(self, key: ScanKey) -> tuple[Cell, ...]:
        if key not in self._key_index:
            raise SchemaError(f"unknown row key {key.label()!r}")
        return self._cells[self._key_index[key]]

    def row_at(self, index: int) -> tuple[Cell, ...]:
        return self._cells[index]

    def index_of(self, key: ScanKey) -> int:
        if key not in self._key_index:
            raise SchemaError(f"unknown row key {key.label()!r}")
        return self._key_index[key]

    def contains_key(self, key: ScanKey) -> bool:
        return key in self._key_index

    def annotation_schemas(self, subtype: str | None = None) -> tuple[ColumnSchema, ...]:
        """Annotation columns in schema order, optionally for one subtype."""
        return tuple(
            c for c in self._schema
            if c.role == "annotation" and (subtype is None or c.subtype == subtype)
        )

    def subtypes(self) -> tuple[str, ...]:
        """Distinct subtypes of annotation columns, in schema order."""
        seen: list[str] = []
        for c in self._schema:
            if c.role == "annotation" and c.subtype not in seen:
                seen.append(c.subtype)
        return tuple(seen)

    def with_derived(self, columns: Sequence[tuple[ColumnSchema, Sequence[Cell]]]) -> "Dataset":
        """New Dataset with extra derived columns appended."""
        for col, values in columns:
            if col.role != "derived":
                raise SchemaError(f"with_derived only accepts role='derived', got {col.role!r} for {col.name!r}")
            if len(values) != self.n_rows:
                raise SchemaError(f"derived column {col.name!r} has {len(values)} values for {self.n_rows} rows")
        schema = self._schema + tuple(col for col, _ in columns)
        extras = [tuple(values) for _, values in columns]
        rows = (
            (key, self._cells[i] + tuple(extra[i] for extra in extras))
            for i, key in enumerate(self._keys)
        )
        return Dataset(schema, rows, self._level)

    def restrict(self, keys: Sequence[ScanKey]) -> "Dataset":
        """New Dataset containing only the given rows, in the given order."""
        return Dataset(self._schema, ((k, self.row(k)) for k in keys), self._level)

    @property
    def fingerprint(self) -> str:
        """Content hash over level, schema and all cells (cached)."""
        if self._fp is None:
            h = hashlib.sha256()
            h.update(self._level.encode())
            for c in self._schema:
                h.update(repr((c.name, c.role, c.value_kind, c.annotator, c.subtype)).encode())
            for key, row in zip(self._keys, self._cells):
                h.update(repr((key.scan_id, key.slice_index)).encode())
                for cell in row:
                    h.update(b"\x00" if cell is MISSING else repr(cell).encode())
                h.update(b"\x01")
            object.__setattr__(self, "_fp", h.hexdigest())
        return self._fp


@dataclass(frozen=True)
class SelectionSet:
    """Ordered, duplicate-free set of row keys plus where it came from."""

    keys: tuple[ScanKey, ...]
    provenance: str
    dataset_fingerprint: str

    def __post_init__(self):
        object.__setattr__(self, "keys", tuple(self.keys))
        if len(set(self.keys)) != len(self.keys):
            raise SchemaError("SelectionSet keys must be unique")

    def __len__(self) -> int:
        return len(self.keys)

    def key_set(self) -> frozenset[ScanKey]:
        return frozenset(self.keys)

    @classmethod
    def from_dataset(cls, dataset: Dataset, provenance: str = "all") -> "SelectionSet":
        return cls(dataset.keys, provenance, dataset.fingerprint)


def column(dataset: Dataset, name: str) -> tuple[tuple[Cell, ...], ColumnSchema]:
    """Extract one column in row order; missing cells stay MISSING."""
    return dataset.column(name)


def intersect(a: SelectionSet, b: SelectionSet) -> SelectionSet:
    """Set intersection of two selections from the same dataset.

    Key order follows ``a``; provenance records both sources.
    """
    if a.dataset_fingerprint != b.dataset_fingerprint:
        raise MismatchedDatasetError(
            "cannot intersect selections from different datasets "
            f"({a.dataset_fingerprint[:12]}... vs {b.dataset_fingerprint[:12]}...)"
        )
    b_keys = b.key_set()
    keys = tuple(k for k in a.keys if k in b_keys)
    return SelectionSet(keys, f"({a.provenance}) & ({b.provenance})", a.dataset_fingerprint)
