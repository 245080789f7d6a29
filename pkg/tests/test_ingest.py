import json
import random

import pytest

from raterbench import ingest
from raterbench.errors import DataFormatError, ToolError
from raterbench.model import MISSING, ColumnSchema, Dataset, ScanKey

from helpers import keyed, panel_dataset


def write_manifest(tmp_path, header, rows, column_roles, slice_column=None, delimiter=","):
    data = tmp_path / "data.csv"
    lines = [delimiter.join(header)] + [delimiter.join(str(c) for c in row) for row in rows]
    data.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(
        json.dumps(
            {
                "data_path": "data.csv",
                "delimiter": delimiter,
                "key_column": header[0],
                "slice_column": slice_column,
                "column_roles": column_roles,
                "image_root": None,
            }
        ),
        encoding="utf-8",
    )
    return manifest


ROLES = {
    "r1_any": {"role": "annotation", "annotator": "r1", "subtype": "any"},
    "pred_any": {"role": "prediction", "subtype": "any"},
}


class TestLoad:
    def test_basic_load(self, tmp_path):
        manifest = write_manifest(
            tmp_path,
            ["scan_id", "r1_any", "pred_any", "site"],
            [["a", 1, 0.9, "north"], ["b", 0, 0.1, "south"], ["c", "", "", ""]],
            ROLES,
        )
        ds = ingest.load(ingest.manifest_from_file(manifest))
        assert ds.n_rows == 3 and ds.level == "ct"
        assert ds.column("r1_any")[0] == (1, 0, MISSING)
        assert ds.column("pred_any")[0] == (0.9, 0.1, MISSING)
        assert ds.schema_for("site").role == "metadata"
        assert ds.schema_for("site").value_kind == "text"

    def test_metadata_kind_inference(self, tmp_path):
        manifest = write_manifest(
            tmp_path,
            ["scan_id", "r1_any", "pred_any", "flag", "age"],
            [["a", 1, 0.9, 1, 63], ["b", 0, 0.1, 0, 70.5]],
            ROLES,
        )
        ds = ingest.load(ingest.manifest_from_file(manifest))
        assert ds.schema_for("flag").value_kind == "binary"
        assert ds.schema_for("age").value_kind == "numeric"
        assert ds.column("age")[0] == (63, 70.5)

    def test_empty_file_with_header(self, tmp_path):
        manifest = write_manifest(tmp_path, ["scan_id", "r1_any", "pred_any"], [], ROLES)
        ds = ingest.load(ingest.manifest_from_file(manifest))
        assert ds.n_rows == 0

    def test_non_binary_annotation_errors_with_location(self, tmp_path):
        manifest = write_manifest(
            tmp_path,
            ["scan_id", "r1_any", "pred_any"],
            [["a", 1, 0.9], ["b", 2, 0.1]],
            ROLES,
        )
        with pytest.raises(DataFormatError) as err:
            ingest.load(ingest.manifest_from_file(manifest))
        message = str(err.value)
        assert "line 3" in message and "r1_any" in message and "'2'" in message

    def test_wrong_cell_count_names_line(self, tmp_path):
        manifest = write_manifest(
            tmp_path,
            ["scan_id", "r1_any", "pred_any"],
            [["a", 1, 0.9], ["b", 0]],
            ROLES,
        )
        with pytest.raises(DataFormatError) as err:
            ingest.load(ingest.manifest_from_file(manifest))
        assert "line 3" in str(err.value)

    def test_score_out_of_range(self, tmp_path):
        manifest = write_manifest(
            tmp_path, ["scan_id", "r1_any", "pred_any"], [["a", 1, 1.7]], ROLES
        )
        with pytest.raises(DataFormatError):
            ingest.load(ingest.manifest_from_file(manifest))

    def test_missing_role_column_in_header(self, tmp_path):
        manifest = write_manifest(tmp_path, ["scan_id", "r1_any"], [["a", 1]], ROLES)
        with pytest.raises(DataFormatError) as err:
            ingest.load(ingest.manifest_from_file(manifest))
        assert "pred_any" in str(err.value)

    def test_duplicate_key_rejected(self, tmp_path):
        manifest = write_manifest(
            tmp_path,
            ["scan_id", "r1_any", "pred_any"],
            [["a", 1, 0.9], ["a", 0, 0.1]],
            ROLES,
        )
        with pytest.raises(DataFormatError):
            ingest.load(ingest.manifest_from_file(manifest))

    def test_missing_data_file(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps({"data_path": "nope.csv", "key_column": "scan_id"}), encoding="utf-8"
        )
        with pytest.raises(DataFormatError):
            ingest.load(ingest.manifest_from_file(manifest))

    def test_slice_level(self, tmp_path):
        manifest = write_manifest(
            tmp_path,
            ["scan_id", "slice", "r1_any", "pred_any"],
            [["a", 0, 1, 0.9], ["a", 1, 0, 0.4], ["b", 0, 0, 0.2]],
            ROLES,
            slice_column="slice",
        )
        ds = ingest.load(ingest.manifest_from_file(manifest))
        assert ds.level == "slice"
        assert ds.keys[0] == ScanKey("a", 0)

    def test_manifest_unknown_keys_rejected(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps({"data_path": "x.csv", "key_column": "k", "typo": 1}), encoding="utf-8"
        )
        with pytest.raises(DataFormatError):
            ingest.manifest_from_file(manifest)


def slice_dataset(rows, metadata=None):
    """rows: list of (scan_id, slice_index, label, score)."""
    schema = [
        ColumnSchema("r1_any", "annotation", "binary", annotator="r1", subtype="any"),
        ColumnSchema("pred_any", "prediction", "score", subtype="any"),
        ColumnSchema("note", "metadata", "text"),
    ]
    return Dataset(
        schema,
        [
            (ScanKey(scan, idx), (label, score, note))
            for scan, idx, label, score, note in rows
        ],
        level="slice",
    )


class TestAggregateToCt:
    def test_max_rule_scores(self):
        ds = slice_dataset(
            [("a", 0, 0, 0.2, "x"), ("a", 1, 0, 0.9, "y"), ("a", 2, 0, 0.4, "z")]
        )
        out = ingest.aggregate_to_ct(ds)
        assert out.n_rows == 1 and out.level == "ct"
        assert out.column("pred_any")[0] == (0.9,)

    def test_max_rule_binary(self):
        ds = slice_dataset([("a", 0, 0, 0.1, "x"), ("a", 1, 1, 0.1, "x"), ("a", 2, 0, 0.1, "x")])
        out = ingest.aggregate_to_ct(ds)
        assert out.column("r1_any")[0] == (1,)

    def test_missing_rules(self):
        ds = slice_dataset(
            [("a", 0, MISSING, MISSING, "x"), ("a", 1, MISSING, 0.3, "y"),
             ("b", 0, MISSING, MISSING, "z"), ("b", 1, MISSING, MISSING, "w")]
        )
        out = ingest.aggregate_to_ct(ds)
        assert out.column("pred_any")[0] == (0.3, MISSING)

    def test_metadata_takes_first_slice(self):
        ds = slice_dataset([("a", 0, 1, 0.5, "first"), ("a", 1, 1, 0.6, "second")])
        out = ingest.aggregate_to_ct(ds)
        assert out.column("note")[0] == ("first",)

    def test_idempotent_on_ct_level(self):
        ds = panel_dataset([(1, 0), (0, 1)], pred=[0.5, 0.6])
        assert ingest.aggregate_to_ct(ds) is ds

    def test_empty_input(self):
        ds = slice_dataset([])
        assert ingest.aggregate_to_ct(ds).n_rows == 0

    def test_max_rule_against_brute_force(self):
        rng = random.Random(2024)
        for _ in range(50):
            rows = []
            scans = [f"s{i}" for i in range(rng.randint(1, 8))]
            for scan in scans:
                for idx in range(rng.randint(1, 6)):
                    label = rng.choice([0, 1, MISSING])
                    score = rng.choice([MISSING, round(rng.random(), 3)])
                    rows.append((scan, idx, label, score, "m"))
            ds = slice_dataset(rows)
            out = ingest.aggregate_to_ct(ds)
            for scan in scans:
                values = [r[3] for r in rows if r[0] == scan and r[3] is not MISSING]
                expected = max(values) if values else MISSING
                assert out.row(ScanKey(scan))[1] == expected


class TestDeriveAgreement:
    def test_basic_counts(self):
        ds = panel_dataset([(1, 1, 0, 1)])
        out = ingest.derive_agreement(ds, "any")
        assert out.column("agree_count_any")[0] == (3,)
        assert out.column("agree_prop_any")[0] == (0.75,)

    def test_all_negative(self):
        ds = panel_dataset([(0, 0, 0, 0)])
        out = ingest.derive_agreement(ds, "any")
        assert out.column("agree_count_any")[0] == (0,)
        assert out.column("agree_prop_any")[0] == (0.0,)

    def test_missing_shrinks_denominator(self):
        ds = panel_dataset([(1, MISSING, 0, 1)])
        out = ingest.derive_agreement(ds, "any")
        assert out.column("agree_count_any")[0] == (2,)
        assert out.column("agree_prop_any")[0] == (2 / 3,)

    def test_all_missing_proportion_missing(self):
        ds = panel_dataset([(MISSING, MISSING)])
        out = ingest.derive_agreement(ds, "any")
        assert out.column("agree_prop_any")[0] == (MISSING,)

    def test_no_annotation_columns_errors(self):
        ds = panel_dataset([(1,)])
        with pytest.raises(ToolError):
            ingest.derive_agreement(ds, "other")

    def test_schema_closure_and_skip_if_present(self):
        ds = panel_dataset([(1, 0)])
        once = ingest.derive_agreement(ds, "any")
        assert once.schema_for("agree_count_any").role == "derived"
        assert ingest.derive_agreement(once, "any") is once

    def test_count_bounded_by_denominator_property(self):
        rng = random.Random(911)
        for _ in range(100):
            width = rng.randint(1, 5)
            rows = [
                tuple(rng.choice([0, 1, MISSING]) for _ in range(width))
                for _ in range(rng.randint(1, 30))
            ]
            ds = panel_dataset(rows)
            out = ingest.derive_agreement(ds, "any")
            counts = out.column("agree_count_any")[0]
            for count, row in zip(counts, rows):
                denom = sum(1 for c in row if c is not MISSING)
                assert count <= denom <= width


class TestDeriveConsensus:
    def test_majority_positive(self):
        ds = panel_dataset([(1, 1, 0)])
        out = ingest.derive_consensus(ds, "any")
        assert out.column("consensus_any")[0] == (1,)

    def test_majority_negative(self):
        ds = panel_dataset([(0, 0, 1)])
        out = ingest.derive_consensus(ds, "any")
        assert out.column("consensus_any")[0] == (0,)

    def test_tie_policies(self):
        rows = [(1, 1, 0, 0)]
        assert ingest.derive_consensus(panel_dataset(rows), "any", "positive").column("consensus_any")[0] == (1,)
        assert ingest.derive_consensus(panel_dataset(rows), "any", "negative").column("consensus_any")[0] == (0,)
        assert ingest.derive_consensus(panel_dataset(rows), "any", "missing").column("consensus_any")[0] == (MISSING,)

    def test_all_missing_row(self):
        ds = panel_dataset([(MISSING, MISSING)])
        out = ingest.derive_consensus(ds, "any")
        assert out.column("consensus_any")[0] == (MISSING,)

    def test_invalid_tie_policy(self):
        with pytest.raises(ToolError):
            ingest.derive_consensus(panel_dataset([(1,)]), "any", "coin_flip")

    def test_odd_full_panel_never_ties(self):
        rng = random.Random(55)
        for _ in range(100):
            width = rng.choice([1, 3, 5])
            rows = [
                tuple(rng.randint(0, 1) for _ in range(width))
                for _ in range(rng.randint(1, 20))
            ]
            positive = ingest.derive_consensus(panel_dataset(rows), "any", "positive")
            negative = ingest.derive_consensus(panel_dataset(rows), "any", "negative")
            assert positive.column("consensus_any")[0] == negative.column("consensus_any")[0]


def test_derive_all_covers_every_subtype():
    schema_rows = [(1, 0), (0, 1)]
    ds = panel_dataset(schema_rows, subtype="epidural")
    out = ingest.derive_all(ds)
    for name in ("agree_count_epidural", "agree_prop_epidural", "consensus_epidural"):
        assert out.has_column(name)
