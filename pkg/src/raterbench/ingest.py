"""Loading delimited label/prediction files and deriving panel columns.

A JSON manifest names the data file, the key column(s) and the semantic
role of each labeled column; everything else loads as metadata with an
inferred value kind. Slice-level tables aggregate to CT level with the
max rule; agreement and consensus columns are derived per subtype.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import DataFormatError, SchemaError, ToolError
from .model import MISSING, ColumnSchema, Dataset, ScanKey

TIE_POLICIES = ("positive", "negative", "missing")

MANIFEST_KEYS = ("data_path", "delimiter", "key_column", "slice_column", "column_roles", "image_root")


@dataclass(frozen=True)
class ColumnRole:
    role: str
    annotator: str | None = None
    subtype: str | None = None


@dataclass(frozen=True)
class IngestManifest:
    data_path: str
    key_column: str
    delimiter: str = ","
    slice_column: str | None = None
    column_roles: Mapping[str, ColumnRole] = field(default_factory=dict)
    image_root: str | None = None

    def __post_init__(self):
        if len(self.delimiter) != 1:
            raise DataFormatError(f"delimiter must be a single character, got {self.delimiter!r}")

    def as_dict(self) -> dict:
        return {
            "data_path": self.data_path,
            "delimiter": self.delimiter,
            "key_column": self.key_column,
            "slice_column": self.slice_column,
            "column_roles": {
                name: {"role": cr.role, "annotator": cr.annotator, "subtype": cr.subtype}
                for name, cr in self.column_roles.items()
            },
            "image_root": self.image_root,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "IngestManifest":
        if not isinstance(doc, dict):
            raise DataFormatError("manifest must be a JSON object")
        unknown = set(doc) - set(MANIFEST_KEYS)
        if unknown:
            raise DataFormatError(f"manifest has unknown keys: {sorted(unknown)}")
        for required in ("data_path", "key_column"):
            if required not in doc:
                raise DataFormatError(f"manifest is missing required key {required!r}")
        roles = {}
        for name, spec in (doc.get("column_roles") or {}).items():
            if not isinstance(spec, dict) or "role" not in spec:
                raise DataFormatError(f"column_roles[{name!r}] must be an object with a 'role'")
            roles[name] = ColumnRole(spec["role"], spec.get("annotator"), spec.get("subtype"))
        return cls(
            data_path=doc["data_path"],
            key_column=doc["key_column"],
            delimiter=doc.get("delimiter", ","),
            slice_column=doc.get("slice_column"),
            column_roles=roles,
            image_root=doc.get("image_root"),
        )


def manifest_from_file(path: str | Path) -> IngestManifest:
    """Read a manifest JSON file, resolving relative paths against it."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFormatError(f"manifest file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"manifest {path} is not valid JSON: {exc}") from None
    manifest = IngestManifest.from_dict(doc)
    base = path.parent
    resolved = dict(
        data_path=str((base / manifest.data_path)) if not Path(manifest.data_path).is_absolute() else manifest.data_path,
        key_column=manifest.key_column,
        delimiter=manifest.delimiter,
        slice_column=manifest.slice_column,
        column_roles=manifest.column_roles,
        image_root=(
            str(base / manifest.image_root)
            if manifest.image_root and not Path(manifest.image_root).is_absolute()
            else manifest.image_root
        ),
    )
    return IngestManifest(**resolved)


def _parse_binary(raw: str, column: str, line: int):
    if raw == "":
        return MISSING
    if raw == "0":
        return 0
    if raw == "1":
        return 1
    raise DataFormatError(
        f"line {line}, column {column!r}: annotation value must be 0, 1 or empty, got {raw!r}"
    )


def _parse_score(raw: str, column: str, line: int):
    if raw == "":
        return MISSING
    try:
        value = float(raw)
    except ValueError:
        raise DataFormatError(
            f"line {line}, column {column!r}: prediction score must be numeric, got {raw!r}"
        ) from None
    if not 0.0 <= value <= 1.0:
        raise DataFormatError(
            f"line {line}, column {column!r}: prediction score {value!r} outside [0, 1]"
        )
    return value


def _infer_kind(raws: Sequence[str]) -> str:
    """Metadata kind from raw strings: binary if all 0/1, numeric if all
    parse as numbers, text otherwise. Empty cells are ignored."""
    seen = [r for r in raws if r != ""]
    if not seen:
        return "text"
    if all(r in ("0", "1") for r in seen):
        return "binary"
    try:
        for r in seen:
            float(r)
    except ValueError:
        return "text"
    return "numeric"


def _parse_plain(raw: str, kind: str):
    if raw == "":
        return MISSING
    if kind == "binary":
        return int(raw)
    if kind == "numeric":
        try:
            return int(raw)
        except ValueError:
            return float(raw)
    return raw


def load(manifest: IngestManifest) -> Dataset:
    """Load the manifest's data file into an immutable Dataset.

    Header must contain the key column, the optional slice column and
    every column named in column_roles; unlisted columns become metadata
    with an inferred value kind. Empty fields are MISSING.
    """
    path = Path(manifest.data_path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle, delimiter=manifest.delimiter)
            try:
                header = next(reader)
            except StopIteration:
                raise DataFormatError(f"{path}: file is empty (no header row)") from None
            raw_rows = [(index + 2, row) for index, row in enumerate(reader)]
    except FileNotFoundError:
        raise DataFormatError(f"data file not found: {path}") from None

    if len(set(header)) != len(header):
        raise DataFormatError(f"{path}: duplicate column names in header")
    missing_in_header = [manifest.key_column] if manifest.key_column not in header else []
    if manifest.slice_column and manifest.slice_column not in header:
        missing_in_header.append(manifest.slice_column)
    missing_in_header += [name for name in manifest.column_roles if name not in header]
    if missing_in_header:
        raise DataFormatError(f"{path}: header is missing columns {missing_in_header}")

    key_pos = header.index(manifest.key_column)
    slice_pos = header.index(manifest.slice_column) if manifest.slice_column else None

    for line, row in raw_rows:
        if len(row) != len(header):
            raise DataFormatError(
                f"{path}: line {line} has {len(row)} cells, header has {len(header)} columns"
            )

    data_positions = [
        i for i in range(len(header)) if i != key_pos and i != slice_pos
    ]
    schema: list[ColumnSchema] = []
    parsers = []
    for i in data_positions:
        name = header[i]
        role_spec = manifest.column_roles.get(name)
        if role_spec is None or role_spec.role == "metadata":
            kind = _infer_kind([row[i] for _, row in raw_rows])
            subtype = role_spec.subtype if role_spec else None
            schema.append(ColumnSchema(name, "metadata", kind, subtype=subtype))
            parsers.append(lambda raw, line, kind=kind: _parse_plain(raw, kind))
        elif role_spec.role == "annotation":
            schema.append(ColumnSchema(name, "annotation", "binary", role_spec.annotator, role_spec.subtype))
            parsers.append(lambda raw, line, name=name: _parse_binary(raw, name, line))
        elif role_spec.role == "prediction":
            schema.append(ColumnSchema(name, "prediction", "score", subtype=role_spec.subtype))
            parsers.append(lambda raw, line, name=name: _parse_score(raw, name, line))
        else:
            raise DataFormatError(
                f"column_roles[{name!r}]: role must be annotation, prediction or metadata, "
                f"got {role_spec.role!r}"
            )

    rows = []
    for line, row in raw_rows:
        scan_id = row[key_pos]
        if scan_id == "":
            raise DataFormatError(f"{path}: line {line}: empty key cell")
        slice_index = None
        if slice_pos is not None:
            raw_slice = row[slice_pos]
            try:
                slice_index = int(raw_slice)
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {line}: slice index must be an integer, got {raw_slice!r}"
                ) from None
            if slice_index < 0:
                raise DataFormatError(f"{path}: line {line}: negative slice index {slice_index}")
        key = ScanKey(scan_id, slice_index)
        cells = tuple(parse(row[i], line) for i, parse in zip(data_positions, parsers))
        rows.append((key, cells))

    level = "slice" if manifest.slice_column else "ct"
    try:
        return Dataset(schema, rows, level)
    except SchemaError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def aggregate_to_ct(dataset: Dataset) -> Dataset:
    """Collapse slice rows to one CT row per scan_id.

    Annotation and prediction cells take the maximum over the scan's
    slices, ignoring missing cells (missing only if all are missing);
    other columns take the first slice's value. CT-level input is
    returned unchanged, making the operation idempotent.
    """
    if dataset.level == "ct":
        return dataset
    ordered_scans: list[str] = []
    groups: dict[str, list[int]] = {}
    for i, key in enumerate(dataset.keys):
        if key.scan_id not in groups:
            groups[key.scan_id] = []
            ordered_scans.append(key.scan_id)
        groups[key.scan_id].append(i)

    aggregate_max = {c.name for c in dataset.schema if c.role in ("annotation", "prediction")}
    rows = []
    for scan_id in ordered_scans:
        indices = groups[scan_id]
        cells = []
        for pos, col in enumerate(dataset.schema):
            values = [dataset.row_at(i)[pos] for i in indices]
            if col.name in aggregate_max:
                present = [v for v in values if v is not MISSING]
                cells.append(max(present) if present else MISSING)
            else:
                cells.append(values[0])
        rows.append((ScanKey(scan_id), tuple(cells)))
    return Dataset(dataset.schema, rows, "ct")


def derive_agreement(dataset: Dataset, subtype: str) -> Dataset:
    """Add agree_count_<subtype> and agree_prop_<subtype> derived columns.

    Count is the number of annotators labeling positive; the proportion
    divides by the row's non-missing labels and is missing when no
    annotator covered the row. Returns the dataset unchanged if both
    columns already exist.
    """
    count_name, prop_name = f"agree_count_{subtype}", f"agree_prop_{subtype}"
    if dataset.has_column(count_name) and dataset.has_column(prop_name):
        return dataset
    schemas = dataset.annotation_schemas(subtype)
    if not schemas:
        raise ToolError(f"no annotation columns for subtype {subtype!r}")
    columns = [dataset.column(c.name)[0] for c in schemas]
    counts, props = [], []
    for i in range(dataset.n_rows):
        cells = [col[i] for col in columns]
        count = sum(1 for c in cells if c is not MISSING and c == 1)
        denom = sum(1 for c in cells if c is not MISSING)
        counts.append(count)
        props.append(count / denom if denom else MISSING)
    return dataset.with_derived([
        (ColumnSchema(count_name, "derived", "numeric", subtype=subtype), counts),
        (ColumnSchema(prop_name, "derived", "numeric", subtype=subtype), props),
    ])


def derive_consensus(dataset: Dataset, subtype: str, tie_policy: str = "positive") -> Dataset:
    """Add consensus_<subtype>: strict majority of the non-missing labels.

    Exact ties resolve per tie_policy (positive surfaces disputed
    findings); rows no annotator covered stay missing.
    """
    if tie_policy not in TIE_POLICIES:
        raise ToolError(f"tie_policy must be one of {TIE_POLICIES}, got {tie_policy!r}")
    name = f"consensus_{subtype}"
    if dataset.has_column(name):
        return dataset
    schemas = dataset.annotation_schemas(subtype)
    if not schemas:
        raise ToolError(f"no annotation columns for subtype {subtype!r}")
    columns = [dataset.column(c.name)[0] for c in schemas]
    tie_cell = {"positive": 1, "negative": 0, "missing": MISSING}[tie_policy]
    values = []
    for i in range(dataset.n_rows):
        cells = [col[i] for col in columns]
        count = sum(1 for c in cells if c is not MISSING and c == 1)
        denom = sum(1 for c in cells if c is not MISSING)
        if denom == 0:
            values.append(MISSING)
        elif 2 * count > denom:
            values.append(1)
        elif 2 * count < denom:
            values.append(0)
        else:
            values.append(tie_cell)
    return dataset.with_derived([
        (ColumnSchema(name, "derived", "binary", subtype=subtype), values)
    ])


def derive_all(dataset: Dataset, tie_policy: str = "positive") -> Dataset:
    """Agreement + consensus columns for every subtype with annotations."""
    for subtype in dataset.subtypes():
        dataset = derive_agreement(dataset, subtype)
        dataset = derive_consensus(dataset, subtype, tie_policy)
    return dataset
