import math
import random

import pytest

from raterbench import analytics
from raterbench.errors import DegenerateInputError, SchemaError, ToolError
from raterbench.model import MISSING, ScanKey, SelectionSet

from helpers import (
    binary_dataset,
    brute_force_confusion,
    panel_dataset,
    random_panel_dataset,
)


class TestBinarize:
    def test_boundary_inclusive(self):
        assert analytics.binarize([0.9, 0.5, 0.49], 0.5) == [1, 1, 0]

    def test_missing_stays_missing(self):
        assert analytics.binarize([MISSING, MISSING], 0.5) == [MISSING, MISSING]

    def test_zero_threshold_all_positive(self):
        assert analytics.binarize([0.0, 0.3, 1.0], 0.0) == [1, 1, 1]

    def test_threshold_out_of_range(self):
        with pytest.raises(ToolError):
            analytics.binarize([0.5], 1.5)


class TestMetrics:
    def test_perfect_predictor(self):
        ds = binary_dataset([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1])
        report = analytics.metrics(ds, "gt", "pred", 0.5)
        assert (report.tp, report.tn, report.fp, report.fn) == (2, 2, 0, 0)
        assert report.accuracy == 1.0 and report.f1 == 1.0

    def test_fully_wrong(self):
        ds = binary_dataset([1, 0], [0.1, 0.9])
        report = analytics.metrics(ds, "gt", "pred", 0.5)
        assert report.accuracy == 0.0
        assert report.precision == 0.0 and report.recall == 0.0 and report.f1 == 0.0

    def test_missing_rows_excluded(self):
        ds = binary_dataset([1, MISSING, 0], [0.9, 0.9, MISSING])
        report = analytics.metrics(ds, "gt", "pred", 0.5)
        assert report.n_evaluated == 1 and report.tp == 1

    def test_invariants(self):
        ds = binary_dataset([1, 1, 0, 0, 1], [0.9, 0.2, 0.8, 0.1, 0.6])
        r = analytics.metrics(ds, "gt", "pred", 0.5)
        assert r.tp + r.tn + r.fp + r.fn == r.n_evaluated
        assert r.support_positive == r.tp + r.fn

    def test_non_binary_gt_rejected(self):
        ds = panel_dataset([(1,), (0,)], pred=[0.9, 0.8])
        with pytest.raises(SchemaError):
            analytics.metrics(ds, "pred_any", "a1_any", 0.5)  # score column as gt

    def test_binary_pred_column_used_directly(self):
        ds = panel_dataset([(1, 1), (0, 1), (0, 0)], annotators=["g", "p"])
        report = analytics.metrics(ds, "g_any", "p_any", 0.5)
        assert (report.tp, report.fp, report.tn, report.fn) == (1, 1, 1, 0)

    def test_percent_rendering_round_half_up(self):
        assert analytics.format_percent(11 / 13) == "84.6%"
        assert analytics.format_percent(0.92449) == "92.4%"
        assert analytics.format_percent(0.125) == "12.5%"
        assert analytics.format_percent(0.0305) == "3.1%"


class TestPerAnnotator:
    def test_one_report_per_annotator(self):
        ds = panel_dataset([(1, 0), (1, 1), (0, 0)], pred=[0.9, 0.9, 0.1])
        rows = analytics.per_annotator_metrics(ds, "any", "pred_any")
        assert [annotator for annotator, _ in rows] == ["a1", "a2"]
        assert rows[0][1].gt_column == "a1_any"

    def test_identical_annotator_perfect(self):
        ds = panel_dataset([(1,), (0,)], pred=[0.9, 0.1])
        [(_, report)] = analytics.per_annotator_metrics(ds, "any", "pred_any")
        assert report.accuracy == 1.0

    def test_all_missing_annotator_zeroed(self):
        ds = panel_dataset([(MISSING,), (MISSING,)], pred=[0.6, 0.2])
        [(_, report)] = analytics.per_annotator_metrics(ds, "any", "pred_any")
        assert report.n_evaluated == 0
        assert report.accuracy == 0.0 and report.f1 == 0.0

    def test_unknown_subtype(self):
        ds = panel_dataset([(1,)], pred=[0.5])
        with pytest.raises(ToolError):
            analytics.per_annotator_metrics(ds, "nope", "pred_any")


class TestOverlapTable:
    def test_single_case_bucket_full_overlap(self):
        ds = panel_dataset([(1, 1)], pred=[0.9])
        rows = analytics.overlap_table(ds, "any", "pred_any")
        assert rows[0].k == 2 and rows[0].cases == 1 and rows[0].overlap == 1.0

    def test_empty_bucket_emitted_with_zero(self):
        ds = panel_dataset([(1, 1), (0, 0)], pred=[0.9, 0.1])
        rows = analytics.overlap_table(ds, "any", "pred_any")
        by_k = {r.k: r for r in rows}
        assert by_k[1].cases == 0 and by_k[1].overlap == 0.0

    def test_count_zero_rows_excluded(self):
        ds = panel_dataset([(0, 0), (0, 0)], pred=[0.9, 0.9])
        rows = analytics.overlap_table(ds, "any", "pred_any")
        assert all(r.cases == 0 for r in rows)

    def test_descending_k_and_accounting(self):
        ds = panel_dataset(
            [(1, 1, 1), (1, 1, 0), (1, 0, 0), (0, 0, 0), (1, 1, 1)],
            pred=[0.9, 0.9, 0.1, 0.9, 0.2],
        )
        rows = analytics.overlap_table(ds, "any", "pred_any")
        assert [r.k for r in rows] == [3, 2, 1]
        positives = sum(r.cases for r in rows)
        assert positives == 4  # rows with >= 1 positive annotator
        for r in rows:
            assert r.model_true + r.model_false == r.cases

    def test_missing_pred_counts_as_false(self):
        ds = panel_dataset([(1, 1)], pred=[MISSING])
        rows = analytics.overlap_table(ds, "any", "pred_any")
        assert rows[0].model_true == 0 and rows[0].model_false == 1


class TestConcordance:
    def test_all_positive_unanimous(self):
        ds = panel_dataset([(1, 1, 1, 1)])
        part = analytics.concordance_partition(ds, "any")
        assert len(part.unanimous) == 1 and len(part.disputed_plus_negative) == 0

    def test_minority_disputed_only(self):
        ds = panel_dataset([(1, 0, 0, 0)])
        part = analytics.concordance_partition(ds, "any")
        assert len(part.unanimous) == 0 and len(part.disputed_plus_negative) == 1

    def test_all_negative_in_both(self):
        ds = panel_dataset([(0, 0, 0, 0)])
        part = analytics.concordance_partition(ds, "any")
        assert len(part.unanimous) == 1 and len(part.disputed_plus_negative) == 1

    def test_row_local_denominator(self):
        ds = panel_dataset([(1, 1, MISSING)])
        part = analytics.concordance_partition(ds, "any")
        assert len(part.unanimous) == 1  # 2 of 2 non-missing agree


class TestPearson:
    def test_perfect_positive(self):
        assert analytics.pearson([1, 2, 3], [2, 4, 6]) == 1.0

    def test_perfect_negative(self):
        assert analytics.pearson([1, 2, 3], [3, 2, 1]) == -1.0

    def test_zero_variance_error(self):
        with pytest.raises(DegenerateInputError):
            analytics.pearson([0, 0, 0], [1, 2, 3])

    def test_too_few_pairs_error(self):
        with pytest.raises(DegenerateInputError):
            analytics.pearson([1, MISSING], [1, 2])

    def test_pairwise_complete(self):
        r = analytics.pearson([1, 2, MISSING, 3], [2, 4, 9, 6])
        assert r == 1.0

    def test_affine_invariance(self):
        rng = random.Random(5)
        for _ in range(50):
            n = rng.randint(3, 30)
            x = [rng.random() for _ in range(n)]
            y = [rng.random() for _ in range(n)]
            try:
                base = analytics.pearson(x, y)
            except DegenerateInputError:
                continue
            a = rng.choice([-3.5, -1, 0.25, 2.0])
            b = rng.uniform(-5, 5)
            scaled = analytics.pearson([a * v + b for v in x], y)
            assert abs(scaled - math.copysign(1, a) * base) < 1e-12


class TestSubsetMetrics:
    def test_full_selection_is_identity(self):
        ds = binary_dataset([1, 0, 1], [0.9, 0.8, 0.1])
        full = SelectionSet(ds.keys, "all", ds.fingerprint)
        assert analytics.subset_metrics(ds, full, "gt", "pred") == analytics.metrics(ds, "gt", "pred")

    def test_empty_selection_zeroed(self):
        ds = binary_dataset([1, 0], [0.9, 0.8])
        empty = SelectionSet((), "none", ds.fingerprint)
        report = analytics.subset_metrics(ds, empty, "gt", "pred")
        assert report.n_evaluated == 0 and report.accuracy == 0.0

    def test_selection_restricts_rows(self):
        ds = binary_dataset([1, 0, 1], [0.9, 0.8, 0.1])
        sel = SelectionSet((ScanKey("s000"),), "one", ds.fingerprint)
        report = analytics.subset_metrics(ds, sel, "gt", "pred")
        assert report.n_evaluated == 1 and report.tp == 1

    def test_unknown_key_rejected(self):
        ds = binary_dataset([1], [0.9])
        sel = SelectionSet((ScanKey("zz"),), "bad", ds.fingerprint)
        with pytest.raises(SchemaError):
            analytics.subset_metrics(ds, sel, "gt", "pred")


class TestMinorityProfile:
    def test_all_negative_empty(self):
        ds = panel_dataset([(0, 0), (0, 0)])
        assert analytics.minority_label_profile(ds, "any") == {}

    def test_single_minority_vote(self):
        ds = panel_dataset([(1, 0, 0, 0)])
        assert analytics.minority_label_profile(ds, "any") == {1: 1}

    def test_counts_by_agreement(self):
        ds = panel_dataset([(1, 1), (1, 0), (0, 1), (0, 0)])
        assert analytics.minority_label_profile(ds, "any") == {2: 1, 1: 2}


class TestScatterSeries:
    def test_values_in_selection_order(self):
        ds = panel_dataset([(1,), (0,), (1,)], pred=[0.1, 0.2, 0.3])
        sel = SelectionSet((ScanKey("s002"), ScanKey("s000")), "pick", ds.fingerprint)
        series = analytics.scatter_series(ds, sel, ["a1_any"])
        assert series["a1_any"] == [(2, 1), (0, 1)]

    def test_missing_emitted_as_gap(self):
        ds = panel_dataset([(MISSING,)], pred=[0.5])
        sel = SelectionSet(ds.keys, "all", ds.fingerprint)
        assert analytics.scatter_series(ds, sel, ["a1_any"])["a1_any"] == [(0, None)]

    def test_empty_selection(self):
        ds = panel_dataset([(1,)], pred=[0.5])
        sel = SelectionSet((), "none", ds.fingerprint)
        assert analytics.scatter_series(ds, sel, ["a1_any"])["a1_any"] == []


def test_metrics_against_brute_force_oracle():
    rng = random.Random(4242)
    for _ in range(300):
        ds = random_panel_dataset(rng)
        if ds.n_rows == 0:
            continue
        threshold = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0])
        gt_name = ds.annotation_schemas("any")[0].name
        report = analytics.metrics(ds, gt_name, "pred_any", threshold)
        gt, _ = ds.column(gt_name)
        pred, _ = ds.column("pred_any")
        assert (report.tp, report.tn, report.fp, report.fn) == brute_force_confusion(
            gt, pred, threshold
        )


def test_threshold_monotonicity():
    rng = random.Random(77)
    for _ in range(100):
        ds = random_panel_dataset(rng, max_rows=30)
        if ds.n_rows == 0:
            continue
        gt_name = ds.annotation_schemas("any")[0].name
        t1, t2 = sorted([rng.random(), rng.random()])
        low = analytics.metrics(ds, gt_name, "pred_any", t1)
        high = analytics.metrics(ds, gt_name, "pred_any", t2)
        assert high.tp <= low.tp
        assert high.tn >= low.tn


def test_label_symmetry_transposes_confusion():
    rng = random.Random(13)
    for _ in range(100):
        n = rng.randint(1, 40)
        a = [rng.choice([0, 1, MISSING]) for _ in range(n)]
        b = [rng.choice([0, 1, MISSING]) for _ in range(n)]
        ds = panel_dataset(list(zip(a, b)), annotators=["u", "v"])
        fwd = analytics.metrics(ds, "u_any", "v_any")
        rev = analytics.metrics(ds, "v_any", "u_any")
        assert fwd.tp == rev.tp and fwd.tn == rev.tn
        assert fwd.fp == rev.fn and fwd.fn == rev.fp


def test_partition_accounting():
    rng = random.Random(31)
    for _ in range(100):
        ds = random_panel_dataset(rng, max_rows=40)
        if ds.n_rows == 0:
            continue
        rows = analytics.overlap_table(ds, "any", "pred_any")
        total = sum(r.cases for r in rows)
        counts, _ = analytics._agreement_counts(ds, "any")
        assert total == sum(1 for c in counts if c >= 1)
