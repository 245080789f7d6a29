"""Numeric procedures behind the four analysis cycles.

Confusion metrics against a switchable ground-truth column, per-annotator
metric sweeps, agreement-bucket overlap tables, the concordance partition,
Pearson correlation and cross-class confusion. Every function is pure:
inputs are immutable Datasets/SelectionSets, outputs are value objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .errors import DegenerateInputError, SchemaError, ToolError
from .model import MISSING, Dataset, SelectionSet


def format_percent(value: float) -> str:
    """One-decimal percentage, round-half-up (0.84615 -> '84.6%')."""
    quantized = (Decimal(repr(value)) * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return f"{quantized}%"


def _ratio(num, den) -> float:
    """Defined-zero convention: anything over 0 is 0.0, keeping reports total."""
    return num / den if den else 0.0


@dataclass(frozen=True)
class MetricReport:
    """Confusion counts and derived ratios for one (gt, pred, threshold)."""

    gt_column: str
    pred_column: str
    threshold: float
    tp: int
    tn: int
    fp: int
    fn: int
    n_evaluated: int

    @property
    def support_positive(self) -> int:
        return self.tp + self.fn

    @property
    def accuracy(self) -> float:
        return _ratio(self.tp + self.tn, self.n_evaluated)

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return _ratio(2 * p * r, p + r)

    def as_dict(self) -> dict:
        return {
            "gt_column": self.gt_column,
            "pred_column": self.pred_column,
            "threshold": self.threshold,
            "tp": self.tp,
            "tn": self.tn,
            "fp": self.fp,
            "fn": self.fn,
            "support_positive": self.support_positive,
            "n_evaluated": self.n_evaluated,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy_pct": format_percent(self.accuracy),
            "precision_pct": format_percent(self.precision),
            "recall_pct": format_percent(self.recall),
            "f1_pct": format_percent(self.f1),
        }


@dataclass(frozen=True)
class OverlapRow:
    """One agreement bucket: how often the model also fired."""

    k: int
    cases: int
    model_true: int

    @property
    def model_false(self) -> int:
        return self.cases - self.model_true

    @property
    def overlap(self) -> float:
        return _ratio(self.model_true, self.cases)

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "cases": self.cases,
            "model_true": self.model_true,
            "model_false": self.model_false,
            "overlap": self.overlap,
            "overlap_pct": format_percent(self.overlap),
        }


@dataclass(frozen=True)
class ConcordancePartition:
    """Rows where the panel fully agrees vs the negative-or-disputed rest.

    Unanimous-negative rows belong to both subsets by construction.
    """

    unanimous: SelectionSet
    disputed_plus_negative: SelectionSet


def binarize(scores: Sequence, threshold: float) -> list:
    """Map scores to 0/1 at the threshold (inclusive); MISSING passes through."""
    _check_threshold(threshold)
    return [MISSING if s is MISSING else (1 if s >= threshold else 0) for s in scores]


def _check_threshold(threshold: float):
    if not isinstance(threshold, (int, float)) or not 0.0 <= threshold <= 1.0:
        raise ToolError(f"threshold must lie in [0, 1], got {threshold!r}")


def _binary_gt_values(dataset: Dataset, gt_column: str) -> tuple:
    values, schema = dataset.column(gt_column)
    for v in values:
        if v is MISSING:
            continue
        if isinstance(v, bool) or v not in (0, 1):
            raise SchemaError(
                f"ground-truth column {gt_column!r} has non-binary value {v!r}"
            )
    return values


def _binarized_pred_values(dataset: Dataset, pred_column: str, threshold: float) -> list:
    values, schema = dataset.column(pred_column)
    if schema.value_kind == "binary":
        return list(values)
    if schema.value_kind not in ("score", "numeric"):
        raise SchemaError(
            f"prediction column {pred_column!r} must be binary or score, "
            f"got value_kind {schema.value_kind!r}"
        )
    return binarize(values, threshold)


def _count_confusion(pairs) -> tuple[int, int, int, int, int]:
    tp = tn = fp = fn = n = 0
    for gt, pred in pairs:
        if gt is MISSING or pred is MISSING:
            continue
        n += 1
        if gt == 1:
            if pred == 1:
                tp += 1
            else:
                fn += 1
        else:
            if pred == 1:
                fp += 1
            else:
                tn += 1
    return tp, tn, fp, fn, n


def metrics(dataset: Dataset, gt_column: str, pred_column: str, threshold: float = 0.5) -> MetricReport:
    """Confusion metrics of a prediction column against a binary ground
    truth; rows with a missing cell in either column are excluded."""
    _check_threshold(threshold)
    gt = _binary_gt_values(dataset, gt_column)
    pred = _binarized_pred_values(dataset, pred_column, threshold)
    tp, tn, fp, fn, n = _count_confusion(zip(gt, pred))
    return MetricReport(gt_column, pred_column, threshold, tp, tn, fp, fn, n)


def subset_metrics(
    dataset: Dataset,
    selection: SelectionSet,
    gt_column: str,
    pred_column: str,
    threshold: float = 0.5,
) -> MetricReport:
    """Same as metrics() restricted to the selection's rows."""
    _check_threshold(threshold)
    gt = _binary_gt_values(dataset, gt_column)
    pred = _binarized_pred_values(dataset, pred_column, threshold)
    indices = [dataset.index_of(k) for k in selection.keys]
    tp, tn, fp, fn, n = _count_confusion((gt[i], pred[i]) for i in indices)
    return MetricReport(gt_column, pred_column, threshold, tp, tn, fp, fn, n)


def per_annotator_metrics(
    dataset: Dataset, subtype: str, pred_column: str, threshold: float = 0.5
) -> list[tuple[str, MetricReport]]:
    """One MetricReport per annotator, using that annotator's column as
    ground truth — the switchable-GT sweep of cycle I."""
    schemas = dataset.annotation_schemas(subtype)
    if not schemas:
        raise ToolError(f"no annotation columns for subtype {subtype!r}")
    return [(c.annotator, metrics(dataset, c.name, pred_column, threshold)) for c in schemas]


def _agreement_counts(dataset: Dataset, subtype: str) -> tuple[list[int], list[int]]:
    """Per row: number of positive labels and number of non-missing labels."""
    schemas = dataset.annotation_schemas(subtype)
    if not schemas:
        raise ToolError(f"no annotation columns for subtype {subtype!r}")
    columns = [dataset.column(c.name)[0] for c in schemas]
    counts, denoms = [], []
    for i in range(dataset.n_rows):
        cells = [col[i] for col in columns]
        counts.append(sum(1 for c in cells if c is not MISSING and c == 1))
        denoms.append(sum(1 for c in cells if c is not MISSING))
    return counts, denoms


def _agree_count_values(dataset: Dataset, subtype: str) -> list[int]:
    name = f"agree_count_{subtype}"
    if dataset.has_column(name):
        values, _ = dataset.column(name)
        return [v if v is not MISSING else 0 for v in values]
    counts, _ = _agreement_counts(dataset, subtype)
    return counts


def overlap_table(
    dataset: Dataset, subtype: str, pred_column: str, threshold: float = 0.5
) -> list[OverlapRow]:
    """Bucket rows by how many annotators marked the subtype positive
    (k = K..1; count-0 rows are no potential case) and count how many of
    each bucket the model also marks positive. Empty buckets are emitted
    with cases = 0."""
    panel = dataset.annotation_schemas(subtype)
    if not panel:
        raise ToolError(f"no annotation columns for subtype {subtype!r}")
    counts = _agree_count_values(dataset, subtype)
    pred = _binarized_pred_values(dataset, pred_column, threshold)
    rows = []
    for k in range(len(panel), 0, -1):
        cases = model_true = 0
        for count, p in zip(counts, pred):
            if count == k:
                cases += 1
                if p is not MISSING and p == 1:
                    model_true += 1
        rows.append(OverlapRow(k, cases, model_true))
    return rows


def concordance_partition(dataset: Dataset, subtype: str) -> ConcordancePartition:
    """Split rows into full-panel agreement (all positive or all negative)
    vs unanimous-negative-plus-partially-detected; denominators are
    row-local so partially covered panels partition fairly."""
    counts, denoms = _agreement_counts(dataset, subtype)
    unanimous, disputed = [], []
    for key, count, denom in zip(dataset.keys, counts, denoms):
        if count == 0 or count == denom:
            unanimous.append(key)
        if count == 0 or 0 < count < denom:
            disputed.append(key)
    fp = dataset.fingerprint
    return ConcordancePartition(
        SelectionSet(tuple(unanimous), f"unanimous[{subtype}]", fp),
        SelectionSet(tuple(disputed), f"disputed_plus_negative[{subtype}]", fp),
    )


def pearson(x: Sequence, y: Sequence) -> float:
    """Product-moment correlation over pairwise-complete rows.

    Raises DegenerateInputError for fewer than two complete pairs or zero
    variance rather than returning a silent 0.
    """
    pairs = [
        (float(a), float(b))
        for a, b in zip(x, y)
        if a is not MISSING and b is not MISSING
    ]
    if len(pairs) < 2:
        raise DegenerateInputError(f"need at least 2 complete pairs, got {len(pairs)}")
    n = len(pairs)
    mean_x = math.fsum(a for a, _ in pairs) / n
    mean_y = math.fsum(b for _, b in pairs) / n
    sxx = math.fsum((a - mean_x) ** 2 for a, _ in pairs)
    syy = math.fsum((b - mean_y) ** 2 for _, b in pairs)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInputError("zero variance in at least one column")
    sxy = math.fsum((a - mean_x) * (b - mean_y) for a, b in pairs)
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson_columns(dataset: Dataset, x_column: str, y_column: str) -> float:
    x, _ = dataset.column(x_column)
    y, _ = dataset.column(y_column)
    return pearson(x, y)


def minority_label_profile(dataset: Dataset, subtype: str) -> dict[int, int]:
    """How many scans have exactly k positive annotators, for k >= 1."""
    counts = _agree_count_values(dataset, subtype)
    profile: dict[int, int] = {}
    for count in counts:
        if count >= 1:
            profile[count] = profile.get(count, 0) + 1
    return dict(sorted(profile.items(), reverse=True))


def scatter_series(
    dataset: Dataset, selection: SelectionSet, columns: Sequence[str]
) -> dict[str, list[tuple[int, object]]]:
    """Per column, (dataset row index, value) points in selection order;
    missing cells become explicit None gaps."""
    series: dict[str, list[tuple[int, object]]] = {}
    for name in columns:
        values, _ = dataset.column(name)
        points = []
        for key in selection.keys:
            i = dataset.index_of(key)
            cell = values[i]
            points.append((i, None if cell is MISSING else cell))
        series[name] = points
    return series
