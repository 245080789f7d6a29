"""Shared test utilities: tiny dataset builders, random generators, and
independent reference implementations used as oracles.

The reference implementations here are deliberately written row-by-row
and kept separate from the library's column-oriented code paths.
"""

from __future__ import annotations

import random

from raterbench.model import MISSING, ColumnSchema, Dataset, ScanKey
from raterbench import query as q


def keyed(rows):
    return [(ScanKey(f"s{i:03d}"), row) for i, row in enumerate(rows)]


def binary_dataset(gt_cells, pred_cells, pred_kind="score"):
    """Two-column dataset: one binary gt 'gt', one prediction 'pred'."""
    schema = [
        ColumnSchema("gt", "annotation", "binary", annotator="a1", subtype="any"),
        ColumnSchema("pred", "prediction", "score", subtype="any")
        if pred_kind == "score"
        else ColumnSchema("pred", "metadata", pred_kind),
    ]
    return Dataset(schema, keyed(list(zip(gt_cells, pred_cells))))


def panel_dataset(label_rows, annotators=None, subtype="any", pred=None):
    """Dataset with one annotation column per panel member, plus an
    optional prediction column. label_rows: list of per-row label tuples."""
    width = len(label_rows[0]) if label_rows else (len(annotators) if annotators else 0)
    annotators = annotators or [f"a{i+1}" for i in range(width)]
    schema = [
        ColumnSchema(f"{a}_{subtype}", "annotation", "binary", annotator=a, subtype=subtype)
        for a in annotators
    ]
    rows = [list(r) for r in label_rows]
    if pred is not None:
        schema.append(ColumnSchema(f"pred_{subtype}", "prediction", "score", subtype=subtype))
        rows = [r + [p] for r, p in zip(rows, pred)]
    return Dataset(schema, keyed(rows))


# -- independent oracles -------------------------------------------------------


def brute_force_confusion(gt_values, pred_values, threshold):
    """Row-by-row confusion counter, the oracle for analytics.metrics."""
    tp = tn = fp = fn = 0
    for g, p in zip(gt_values, pred_values):
        if g is MISSING or p is MISSING:
            continue
        if not isinstance(p, int):
            p = 1 if p >= threshold else 0
        if g == 1 and p == 1:
            tp += 1
        elif g == 1 and p == 0:
            fn += 1
        elif g == 0 and p == 1:
            fp += 1
        else:
            tn += 1
    return tp, tn, fp, fn


def naive_query_eval(node, dataset):
    """Reference interpreter: evaluates the AST independently per row."""

    def cell_of(row_cells, name):
        index = dataset.column_names().index(name)
        return row_cells[index]

    def eval_row(n, cells):
        if isinstance(n, q.Compare):
            cell = cell_of(cells, n.column)
            if cell is MISSING:
                return False
            lit = n.value
            if n.op == "==":
                return cell == lit
            if n.op == "!=":
                return cell != lit
            comparable = (
                isinstance(cell, (int, float)) and isinstance(lit, (int, float))
            ) or (isinstance(cell, str) and isinstance(lit, str))
            if not comparable:
                return False
            return {
                "<": cell < lit,
                "<=": cell <= lit,
                ">": cell > lit,
                ">=": cell >= lit,
            }[n.op]
        if isinstance(n, q.In):
            cell = cell_of(cells, n.column)
            return cell is not MISSING and any(cell == v for v in n.values)
        if isinstance(n, q.Not):
            return not eval_row(n.child, cells)
        if isinstance(n, q.And):
            return all(eval_row(c, cells) for c in n.children)
        if isinstance(n, q.Or):
            return any(eval_row(c, cells) for c in n.children)
        raise TypeError(n)

    return [key for i, key in enumerate(dataset.keys) if eval_row(node, dataset.row_at(i))]


# -- random generators ---------------------------------------------------------


def random_panel_dataset(rng: random.Random, max_rows=50, max_annotators=5):
    """Random annotation panel + prediction scores with missing cells."""
    n = rng.randint(0, max_rows)
    width = rng.randint(1, max_annotators)
    label_rows, scores = [], []
    for _ in range(n):
        label_rows.append(
            [MISSING if rng.random() < 0.15 else rng.randint(0, 1) for _ in range(width)]
        )
        scores.append(MISSING if rng.random() < 0.1 else round(rng.random(), 6))
    return panel_dataset(label_rows, annotators=[f"a{i+1}" for i in range(width)], pred=scores)


def random_mixed_dataset(rng: random.Random, max_rows=200):
    """Dataset with binary/score/numeric/text columns for query testing."""
    n = rng.randint(0, max_rows)
    schema = [
        ColumnSchema("flag_a", "annotation", "binary", annotator="r1", subtype="any"),
        ColumnSchema("flag_b", "annotation", "binary", annotator="r2", subtype="any"),
        ColumnSchema("score_x", "prediction", "score", subtype="any"),
        ColumnSchema("count_y", "metadata", "numeric"),
        ColumnSchema("tag", "metadata", "text"),
    ]
    tags = ["alpha", "beta", "gamma", ""]
    rows = []
    for _ in range(n):
        rows.append(
            [
                MISSING if rng.random() < 0.2 else rng.randint(0, 1),
                MISSING if rng.random() < 0.2 else rng.randint(0, 1),
                MISSING if rng.random() < 0.2 else round(rng.random(), 4),
                MISSING if rng.random() < 0.2 else rng.randint(-5, 5),
                MISSING if rng.random() < 0.2 else rng.choice(tags),
            ]
        )
    return Dataset(schema, keyed(rows))


QUERY_COLUMNS = {
    "flag_a": "binary",
    "flag_b": "binary",
    "score_x": "score",
    "count_y": "numeric",
    "tag": "text",
}


def random_query_ast(rng: random.Random, depth=0, max_depth=5):
    """Random AST referencing the random_mixed_dataset columns."""
    if depth >= max_depth or rng.random() < 0.45:
        column = rng.choice(list(QUERY_COLUMNS))
        kind = QUERY_COLUMNS[column]
        if kind == "binary":
            literals = [0, 1, 2]
        elif kind == "score":
            literals = [0.0, 0.25, 0.5, 0.9]
        elif kind == "numeric":
            literals = [-3, 0, 2, 4.5]
        else:
            literals = ["alpha", "beta", 'quo"te', ""]
        if rng.random() < 0.25:
            values = tuple(rng.choice(literals) for _ in range(rng.randint(1, 3)))
            return q.In(column, values)
        op = rng.choice(["==", "!=", "<", "<=", ">", ">="])
        return q.Compare(column, op, rng.choice(literals))
    kind = rng.random()
    if kind < 0.25:
        return q.Not(random_query_ast(rng, depth + 1, max_depth))
    node_type = q.And if kind < 0.65 else q.Or
    children = tuple(
        random_query_ast(rng, depth + 1, max_depth) for _ in range(rng.randint(2, 3))
    )
    return node_type(children)


# -- random fixture specs (feasible by construction) ----------------------------


def random_fixture_spec(rng: random.Random):
    """Random FixtureSpec whose count targets are feasible by construction.

    Patterns kept within what the generator supports: bucket targets per
    subtype, at most one confusion target per ground-truth subtype, one
    optional overlap pair whose confusion prediction subtypes differ, and
    per-annotator metric targets on a bucket-free subtype.
    """
    from raterbench.fixture import (
        AnnotatorMetricTarget,
        BucketTarget,
        ConfusionTarget,
        FixtureSpec,
        GtOverlapTarget,
    )

    n = rng.randint(40, 160)
    annotators = [f"r{i+1}" for i in range(rng.randint(2, 5))]
    subtypes = rng.sample(["alpha", "beta", "gamma"], rng.randint(1, 3))

    per_annotator = []
    metric_subtype = None
    if rng.random() < 0.4:
        metric_subtype = subtypes[0]
        p_total = rng.randint(5, n - 5)
        for annotator in rng.sample(annotators, rng.randint(1, min(2, len(annotators)))):
            miss_pos = rng.randint(0, p_total // 3)
            miss_neg = rng.randint(0, (n - p_total) // 3)
            covered_pos = p_total - miss_pos
            covered_neg = n - p_total - miss_neg
            tp = rng.randint(1, max(1, covered_pos)) if covered_pos else 0
            fp = covered_pos - tp
            fn = rng.randint(0, covered_neg)
            tn = covered_neg - fn
            support = tp + fn
            cov = covered_pos + covered_neg
            if support == 0 or cov == 0:
                continue
            accuracy = round((tp + tn) / cov, 6)
            f1 = round(2 * tp / (2 * tp + fp + fn), 6) if (2 * tp + fp + fn) else 0.0
            per_annotator.append(
                AnnotatorMetricTarget(annotator, accuracy, f1, support, 0.001, metric_subtype)
            )

    buckets = {}
    confusions = []
    overlaps = []
    gt_candidates = []
    for subtype in subtypes:
        if subtype == metric_subtype:
            continue
        if rng.random() < 0.8:
            ks = rng.sample(range(1, len(annotators) + 1), rng.randint(1, len(annotators)))
            remaining = n // 2
            entries = []
            for k in sorted(ks, reverse=True):
                cases = rng.randint(0, max(0, remaining // len(ks)))
                entries.append(BucketTarget(k, cases, rng.randint(0, cases)))
                remaining -= cases
            buckets[subtype] = tuple(entries)
        gt_candidates.append(subtype)

    used_preds = set()
    for subtype in gt_candidates:
        if rng.random() < 0.5:
            choices = [s for s in subtypes if s != metric_subtype and s not in used_preds]
            if not choices:
                continue
            pred = rng.choice(choices)
            used_preds.add(pred)
            positives = rng.randint(1, max(1, n // 8))
            confusions.append(
                ConfusionTarget(subtype, pred, rng.randint(0, positives), positives)
            )

    gt_with_conf = [c.gt_subtype for c in confusions]
    if len(gt_with_conf) >= 2 and rng.random() < 0.6:
        a, b = gt_with_conf[0], gt_with_conf[1]
        cap = min(c.positives for c in confusions if c.gt_subtype in (a, b))
        overlaps.append(GtOverlapTarget(a, b, rng.randint(0, cap)))

    return FixtureSpec(
        n_scans=n,
        annotators=tuple(annotators),
        subtypes=tuple(subtypes),
        bucket_targets=buckets,
        confusion_targets=tuple(confusions),
        gt_overlap_targets=tuple(overlaps),
        correlation_target=None,
        per_annotator_metric_targets=tuple(per_annotator),
        seed=rng.randint(0, 10**6),
    )


def assert_fixture_targets_recovered(spec, manifest_path):
    """Independently re-check every spec target on the reloaded fixture."""
    from raterbench import analytics
    from raterbench import query as rq
    from raterbench.ingest import derive_agreement, load, manifest_from_file

    ds = load(manifest_from_file(manifest_path))
    assert ds.n_rows == spec.n_scans

    for subtype, buckets in spec.bucket_targets.items():
        table = {row.k: row for row in analytics.overlap_table(ds, subtype, f"pred_{subtype}")}
        for b in buckets:
            assert table[b.k].cases == b.cases, (subtype, b)
            assert table[b.k].model_true == b.model_positives, (subtype, b)
        profile = analytics.minority_label_profile(ds, subtype)
        for b in buckets:
            assert profile.get(b.k, 0) == b.cases

    for t in spec.confusion_targets:
        report = analytics.metrics(ds, t.gt_subtype, f"pred_{t.pred_subtype}", 0.5)
        assert report.support_positive == t.positives, t
        assert report.tp == t.true_positives, t

    for t in spec.gt_overlap_targets:
        both = len(rq.select(f"{t.subtype_a} == 1 and {t.subtype_b} == 1", ds))
        assert both == t.both, t

    corr = spec.resolved_correlation()
    if corr is not None:
        enriched = derive_agreement(ds, corr.subtype)
        realized = analytics.pearson_columns(
            enriched, f"agree_count_{corr.subtype}", f"pred_{corr.subtype}"
        )
        assert abs(realized - corr.value) <= corr.tolerance

    for t in spec.resolved_annotator_targets():
        report = analytics.metrics(ds, f"{t.annotator}_{t.subtype}", f"pred_{t.subtype}", 0.5)
        assert report.support_positive == t.positive_count, t
        assert abs(report.accuracy - t.accuracy) <= t.tolerance, t
        assert abs(report.f1 - t.f1) <= t.tolerance, t
    return ds
