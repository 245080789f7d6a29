"""Deterministic fixture generator: engineered datasets realizing
declarative analytic targets.

A FixtureSpec states what the analytics must recover from the emitted
file: agreement-bucket sizes with model-positive counts, cross-class
confusion counts against explicit ground-truth columns, ground-truth
overlap counts, a Pearson correlation between agreement count and
prediction score, and per-annotator accuracy/F1/support triples. The
generator constructs rows so every count target is met exactly and the
correlation within its tolerance, then reloads its own output and
re-runs the analytics as a closed-loop check before declaring success.
Count targets are never approximated: an unsatisfiable spec raises
InfeasibleSpecError naming the violated constraint.

Emitted columns per subtype ``s``: one binary annotation column per
annotator (``<annotator>_<s>``), one prediction score column
(``pred_<s>``), and one binary ground-truth column named ``<s>``. The
ground-truth column defaults to the majority vote of the annotation
columns (ties positive) unless confusion/overlap targets pin it
explicitly.
"""

from __future__ import annotations

import csv
import json
import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from . import analytics
from .errors import DegenerateInputError, InfeasibleSpecError
from .ingest import derive_agreement, load
from .model import MISSING, Dataset

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

DEFAULT_METRIC_TOLERANCE = 0.0005


@dataclass(frozen=True)
class BucketTarget:
    """k annotators agree on `cases` rows; the model fires on
    `model_positives` of them."""

    k: int
    cases: int
    model_positives: int


@dataclass(frozen=True)
class ConfusionTarget:
    """Of `positives` rows positive in gt_subtype's ground-truth column,
    the pred_subtype prediction fires on exactly `true_positives`."""

    gt_subtype: str
    pred_subtype: str
    true_positives: int
    positives: int


@dataclass(frozen=True)
class GtOverlapTarget:
    """Exactly `both` rows are positive in both ground-truth columns."""

    subtype_a: str
    subtype_b: str
    both: int


@dataclass(frozen=True)
class CorrelationTarget:
    value: float
    tolerance: float
    subtype: str | None = None  # defaults to the first subtype


@dataclass(frozen=True)
class AnnotatorMetricTarget:
    annotator: str
    accuracy: float
    f1: float
    positive_count: int
    tolerance: float = DEFAULT_METRIC_TOLERANCE
    subtype: str | None = None  # defaults to the first subtype


@dataclass(frozen=True)
class FixtureSpec:
    n_scans: int
    annotators: tuple[str, ...] = ()
    subtypes: tuple[str, ...] = ()
    bucket_targets: Mapping[str, tuple[BucketTarget, ...]] = field(default_factory=dict)
    confusion_targets: tuple[ConfusionTarget, ...] = ()
    gt_overlap_targets: tuple[GtOverlapTarget, ...] = ()
    correlation_target: CorrelationTarget | None = None
    per_annotator_metric_targets: tuple[AnnotatorMetricTarget, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "annotators", tuple(self.annotators))
        object.__setattr__(self, "subtypes", tuple(self.subtypes))
        object.__setattr__(
            self,
            "bucket_targets",
            {s: tuple(bts) for s, bts in dict(self.bucket_targets).items()},
        )
        object.__setattr__(self, "confusion_targets", tuple(self.confusion_targets))
        object.__setattr__(self, "gt_overlap_targets", tuple(self.gt_overlap_targets))
        object.__setattr__(
            self, "per_annotator_metric_targets", tuple(self.per_annotator_metric_targets)
        )

    # -- JSON round trip ---------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "FixtureSpec":
        if not isinstance(doc, dict):
            raise InfeasibleSpecError("fixture spec must be a JSON object")
        buckets = {}
        for subtype, table in (doc.get("bucket_targets") or {}).items():
            entries = []
            for k, pair in table.items():
                cases, model_positives = pair
                entries.append(BucketTarget(int(k), int(cases), int(model_positives)))
            entries.sort(key=lambda b: -b.k)
            buckets[subtype] = tuple(entries)
        confusion = tuple(
            ConfusionTarget(
                t["gt_subtype"], t["pred_subtype"], int(t["true_positives"]), int(t["positives"])
            )
            for t in doc.get("confusion_targets") or ()
        )
        overlaps = tuple(
            GtOverlapTarget(t["subtype_a"], t["subtype_b"], int(t["both"]))
            for t in doc.get("gt_overlap_targets") or ()
        )
        corr = None
        if doc.get("correlation_target") is not None:
            c = doc["correlation_target"]
            corr = CorrelationTarget(float(c["value"]), float(c["tolerance"]), c.get("subtype"))
        per_annotator = tuple(
            AnnotatorMetricTarget(
                t["annotator"],
                float(t["accuracy"]),
                float(t["f1"]),
                int(t["positive_count"]),
                float(t.get("tolerance", DEFAULT_METRIC_TOLERANCE)),
                t.get("subtype"),
            )
            for t in doc.get("per_annotator_metric_targets") or ()
        )
        return cls(
            n_scans=int(doc.get("n_scans", 0)),
            annotators=tuple(doc.get("annotators") or ()),
            subtypes=tuple(doc.get("subtypes") or ()),
            bucket_targets=buckets,
            confusion_targets=confusion,
            gt_overlap_targets=overlaps,
            correlation_target=corr,
            per_annotator_metric_targets=per_annotator,
            seed=int(doc.get("seed", 0)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureSpec":
        from .errors import DataFormatError

        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataFormatError(f"fixture spec file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"fixture spec {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def as_dict(self) -> dict:
        return {
            "n_scans": self.n_scans,
            "annotators": list(self.annotators),
            "subtypes": list(self.subtypes),
            "bucket_targets": {
                s: {str(b.k): [b.cases, b.model_positives] for b in bts}
                for s, bts in self.bucket_targets.items()
            },
            "confusion_targets": [
                {
                    "gt_subtype": t.gt_subtype,
                    "pred_subtype": t.pred_subtype,
                    "true_positives": t.true_positives,
                    "positives": t.positives,
                }
                for t in self.confusion_targets
            ],
            "gt_overlap_targets": [
                {"subtype_a": t.subtype_a, "subtype_b": t.subtype_b, "both": t.both}
                for t in self.gt_overlap_targets
            ],
            "correlation_target": (
                None
                if self.correlation_target is None
                else {
                    "value": self.correlation_target.value,
                    "tolerance": self.correlation_target.tolerance,
                    "subtype": self.correlation_target.subtype,
                }
            ),
            "per_annotator_metric_targets": [
                {
                    "annotator": t.annotator,
                    "accuracy": t.accuracy,
                    "f1": t.f1,
                    "positive_count": t.positive_count,
                    "tolerance": t.tolerance,
                    "subtype": t.subtype,
                }
                for t in self.per_annotator_metric_targets
            ],
            "seed": self.seed,
        }

    # -- resolution helpers --------------------------------------------------

    def _default_subtype(self, what: str) -> str:
        if not self.subtypes:
            raise InfeasibleSpecError(f"{what} requires at least one subtype")
        return self.subtypes[0]

    def resolved_correlation(self) -> CorrelationTarget | None:
        c = self.correlation_target
        if c is None:
            return None
        if c.subtype is None:
            c = CorrelationTarget(c.value, c.tolerance, self._default_subtype("correlation_target"))
        return c

    def resolved_annotator_targets(self) -> tuple[AnnotatorMetricTarget, ...]:
        out = []
        for t in self.per_annotator_metric_targets:
            if t.subtype is None:
                t = AnnotatorMetricTarget(
                    t.annotator, t.accuracy, t.f1, t.positive_count, t.tolerance,
                    self._default_subtype("per_annotator_metric_targets"),
                )
            out.append(t)
        return tuple(out)

    def explicit_gt_counts(self) -> dict[str, int]:
        """Subtypes whose ground-truth column is pinned, with positive counts."""
        counts: dict[str, int] = {}
        for t in self.confusion_targets:
            if t.gt_subtype in counts and counts[t.gt_subtype] != t.positives:
                raise InfeasibleSpecError(
                    f"conflicting positive counts for ground truth {t.gt_subtype!r}: "
                    f"{counts[t.gt_subtype]} vs {t.positives}"
                )
            counts[t.gt_subtype] = t.positives
        for t in self.gt_overlap_targets:
            for side in (t.subtype_a, t.subtype_b):
                counts.setdefault(side, 0)
        # A subtype constrained only by overlaps gets exactly the overlap rows.
        for t in self.gt_overlap_targets:
            for side in (t.subtype_a, t.subtype_b):
                if all(c.gt_subtype != side for c in self.confusion_targets):
                    counts[side] = max(counts[side], t.both)
        return counts

    def validate(self):
        """Static consistency; raises InfeasibleSpecError naming the issue."""
        if self.n_scans < 0:
            raise InfeasibleSpecError(f"n_scans must be non-negative, got {self.n_scans}")
        for name in self.annotators + self.subtypes:
            if not _IDENT.match(name):
                raise InfeasibleSpecError(
                    f"identifier {name!r} must match [A-Za-z_][A-Za-z0-9_]* so that "
                    "generated column names are queryable"
                )
        if len(set(self.annotators)) != len(self.annotators):
            raise InfeasibleSpecError("annotator ids must be unique")
        if len(set(self.subtypes)) != len(self.subtypes):
            raise InfeasibleSpecError("subtype labels must be unique")

        for subtype, buckets in self.bucket_targets.items():
            if subtype not in self.subtypes:
                raise InfeasibleSpecError(f"bucket_targets for unknown subtype {subtype!r}")
            ks = [b.k for b in buckets]
            if len(set(ks)) != len(ks):
                raise InfeasibleSpecError(f"duplicate bucket k for subtype {subtype!r}")
            for b in buckets:
                if not 1 <= b.k <= len(self.annotators):
                    raise InfeasibleSpecError(
                        f"bucket k={b.k} for {subtype!r} outside 1..{len(self.annotators)} annotators"
                    )
                if b.cases < 0:
                    raise InfeasibleSpecError(f"bucket k={b.k} for {subtype!r}: negative cases")
                if not 0 <= b.model_positives <= b.cases:
                    raise InfeasibleSpecError(
                        f"bucket k={b.k} for {subtype!r}: model_positives {b.model_positives} "
                        f"exceeds cases {b.cases}"
                    )
            if sum(b.cases for b in buckets) > self.n_scans:
                raise InfeasibleSpecError(
                    f"bucket cases for {subtype!r} sum to {sum(b.cases for b in buckets)} "
                    f"> n_scans {self.n_scans}"
                )

        for t in self.confusion_targets:
            for s in (t.gt_subtype, t.pred_subtype):
                if s not in self.subtypes:
                    raise InfeasibleSpecError(f"confusion target names unknown subtype {s!r}")
            if not 0 <= t.true_positives <= t.positives:
                raise InfeasibleSpecError(
                    f"confusion target ({t.gt_subtype!r}, {t.pred_subtype!r}): "
                    f"true_positives {t.true_positives} exceeds positives {t.positives}"
                )
            if t.positives > self.n_scans:
                raise InfeasibleSpecError(
                    f"confusion target ({t.gt_subtype!r}, {t.pred_subtype!r}): "
                    f"positives {t.positives} > n_scans {self.n_scans}"
                )
        gt_counts = self.explicit_gt_counts()

        seen_pairs = set()
        for t in self.gt_overlap_targets:
            for s in (t.subtype_a, t.subtype_b):
                if s not in self.subtypes:
                    raise InfeasibleSpecError(f"gt_overlap target names unknown subtype {s!r}")
            if t.subtype_a == t.subtype_b:
                raise InfeasibleSpecError("gt_overlap target subtypes must differ")
            pair = frozenset((t.subtype_a, t.subtype_b))
            if pair in seen_pairs:
                raise InfeasibleSpecError(
                    f"multiple gt_overlap targets for pair {sorted(pair)}"
                )
            seen_pairs.add(pair)
            if t.both < 0:
                raise InfeasibleSpecError("gt_overlap 'both' must be non-negative")
            for side in (t.subtype_a, t.subtype_b):
                if t.both > gt_counts[side]:
                    raise InfeasibleSpecError(
                        f"gt_overlap {t.both} exceeds ground-truth positives "
                        f"{gt_counts[side]} of {side!r}"
                    )
            if t.both > 0:
                preds_a = {c.pred_subtype for c in self.confusion_targets if c.gt_subtype == t.subtype_a}
                preds_b = {c.pred_subtype for c in self.confusion_targets if c.gt_subtype == t.subtype_b}
                common = preds_a & preds_b
                if common:
                    raise InfeasibleSpecError(
                        f"overlapping ground truths {t.subtype_a!r}/{t.subtype_b!r} both carry "
                        f"confusion targets against {sorted(common)}; the generator cannot "
                        "control both true-positive counts on shared rows"
                    )

        corr = self.resolved_correlation()
        if corr is not None:
            if not -1.0 <= corr.value <= 1.0:
                raise InfeasibleSpecError(f"correlation value {corr.value} outside [-1, 1]")
            if corr.tolerance <= 0:
                raise InfeasibleSpecError("correlation tolerance must be positive")
            if corr.subtype not in self.subtypes:
                raise InfeasibleSpecError(f"correlation_target names unknown subtype {corr.subtype!r}")

        per_annotator = self.resolved_annotator_targets()
        seen = set()
        for t in per_annotator:
            if t.annotator not in self.annotators:
                raise InfeasibleSpecError(f"metric target names unknown annotator {t.annotator!r}")
            if (t.annotator, t.subtype) in seen:
                raise InfeasibleSpecError(f"duplicate metric target for annotator {t.annotator!r}")
            seen.add((t.annotator, t.subtype))
            if not 0 <= t.accuracy <= 1 or not 0 <= t.f1 <= 1:
                raise InfeasibleSpecError("metric targets must lie in [0, 1]")
            if t.tolerance <= 0:
                raise InfeasibleSpecError("metric target tolerance must be positive")
            if not 0 <= t.positive_count <= self.n_scans:
                raise InfeasibleSpecError(
                    f"metric target positive_count {t.positive_count} outside 0..{self.n_scans}"
                )
            if t.subtype in self.bucket_targets:
                raise InfeasibleSpecError(
                    f"subtype {t.subtype!r} has both bucket and per-annotator metric targets; "
                    "the generator does not support that combination"
                )
            for c in self.confusion_targets:
                if c.pred_subtype == t.subtype:
                    raise InfeasibleSpecError(
                        f"subtype {t.subtype!r} is both a confusion prediction target and a "
                        "per-annotator metric subtype; the generator does not support that "
                        "combination"
                    )
        subtypes_with_targets = set(self.bucket_targets) | {t.subtype for t in per_annotator}
        if subtypes_with_targets and not self.annotators:
            raise InfeasibleSpecError("label targets require at least one annotator")


@dataclass(frozen=True)
class FixtureResult:
    data_path: Path
    manifest_path: Path
    config_path: Path
    summary: dict


# -- internal construction ----------------------------------------------------


class _Plan:
    """Mutable row plan while the generator builds the table."""

    def __init__(self, spec: FixtureSpec):
        n = spec.n_scans
        self.spec = spec
        self.n = n
        self.claims: list[set[str]] = [set() for _ in range(n)]
        self.labels = {
            s: {a: [0] * n for a in spec.annotators} for s in spec.subtypes
        }
        self.predbin = {s: [0] * n for s in spec.subtypes}
        self.gt: dict[str, list | None] = {s: None for s in spec.subtypes}
        self.scores: dict[str, list[float]] = {}
        self.bucket_rows: dict[str, dict[int, list[int]]] = {}
        self.gt_rows: dict[str, list[int]] = {}

    def allocate(self, count: int, tags: set[str], why: str, avoid: set[str] = frozenset()) -> list[int]:
        """First-fit rows where neither the claim tags nor the avoid tags
        are present; only the claim tags are recorded."""
        blocked = set(tags) | set(avoid)
        picked = []
        for i in range(self.n):
            if len(picked) == count:
                break
            if self.claims[i].isdisjoint(blocked):
                picked.append(i)
        if len(picked) < count:
            raise InfeasibleSpecError(
                f"not enough unconstrained rows for {why}: needed {count}, "
                f"found {len(picked)} of {self.n}"
            )
        for i in picked:
            self.claims[i] |= tags
        return picked


def _lay_out_buckets(plan: _Plan, rng: random.Random):
    spec = plan.spec
    annotators = spec.annotators
    for subtype in spec.subtypes:
        buckets = spec.bucket_targets.get(subtype)
        if not buckets:
            continue
        tags = {f"labels:{subtype}", f"pred:{subtype}"}
        plan.bucket_rows[subtype] = {}
        for bucket in sorted(buckets, key=lambda b: -b.k):
            rows = plan.allocate(bucket.cases, tags, f"bucket k={bucket.k} of {subtype!r}")
            plan.bucket_rows[subtype][bucket.k] = rows
            for row in rows:
                for a in rng.sample(annotators, bucket.k):
                    plan.labels[subtype][a][row] = 1
            for row in rng.sample(rows, bucket.model_positives):
                plan.predbin[subtype][row] = 1


def _confusions_by_gt(spec: FixtureSpec) -> dict[str, list[ConfusionTarget]]:
    by_gt: dict[str, list[ConfusionTarget]] = {}
    for t in spec.confusion_targets:
        by_gt.setdefault(t.gt_subtype, []).append(t)
    return by_gt


def _lay_out_ground_truth(plan: _Plan, rng: random.Random):
    """Place explicit ground-truth positive rows, honoring overlap targets.

    Rows shared by an overlap pair are allocated first with both sides'
    claim tags, so they satisfy both sides' prediction constraints; each
    side's exclusive remainder then avoids every partner's rows so the
    realized overlap is exact.
    """
    spec = plan.spec
    counts = spec.explicit_gt_counts()
    by_gt = _confusions_by_gt(spec)

    def tags_for(subtype: str) -> set[str]:
        return {f"gt:{subtype}"} | {
            f"pred:{t.pred_subtype}" for t in by_gt.get(subtype, ())
        }

    shared: dict[str, list[int]] = {s: [] for s in counts}
    for t in spec.gt_overlap_targets:
        rows = plan.allocate(
            t.both,
            tags_for(t.subtype_a) | tags_for(t.subtype_b),
            f"ground-truth overlap of {t.subtype_a!r} with {t.subtype_b!r}",
        )
        shared[t.subtype_a] += rows
        shared[t.subtype_b] += rows

    for subtype in spec.subtypes:
        if subtype not in counts:
            continue
        rows = list(shared[subtype])
        remaining = counts[subtype] - len(rows)
        if remaining < 0:
            raise InfeasibleSpecError(
                f"overlap targets demand more rows than ground-truth positives of {subtype!r}"
            )
        avoid = {
            f"gt:{t.subtype_a if t.subtype_b == subtype else t.subtype_b}"
            for t in spec.gt_overlap_targets
            if subtype in (t.subtype_a, t.subtype_b)
        }
        rows += plan.allocate(
            remaining, tags_for(subtype), f"ground-truth positives of {subtype!r}", avoid=avoid
        )
        plan.gt_rows[subtype] = rows
        column = [0] * plan.n
        for row in rows:
            column[row] = 1
        plan.gt[subtype] = column

    for gt_subtype, targets in by_gt.items():
        base = plan.gt_rows[gt_subtype]
        for t in targets:
            for row in rng.sample(base, t.true_positives):
                plan.predbin[t.pred_subtype][row] = 1


def _annotator_candidates(n: int, target: AnnotatorMetricTarget) -> list[tuple]:
    """All integer confusion tables hitting the accuracy/F1/support targets.

    Entries are (coverage, errors, tp, fp, fn, tn, predicted_positive),
    ordered by coverage descending so fuller panels are preferred.
    """
    support = target.positive_count
    acc = Fraction(str(target.accuracy))
    f1 = Fraction(str(target.f1))
    tol = Fraction(str(target.tolerance))
    acc_lo, acc_hi = max(acc - tol, 0), min(acc + tol, 1)
    f1_lo, f1_hi = max(f1 - tol, 0), min(f1 + tol, 1)
    out = []
    for cov in range(n, max(support, 1) - 1, -1):
        if cov < support or cov == 0:
            break
        e_lo = max(0, math.ceil(cov * (1 - acc_hi)))
        e_hi = min(cov, math.floor(cov * (1 - acc_lo)))
        for e in range(e_lo, e_hi + 1):
            # f1 = 2tp / (2tp + e), monotone increasing in tp
            if f1_lo >= 1:
                tp_lo_f1 = 0 if e == 0 else support + 1  # unreachable unless e == 0
            else:
                tp_lo_f1 = math.ceil(f1_lo * e / (2 * (1 - f1_lo)))
            tp_hi_f1 = support if f1_hi >= 1 else math.floor(f1_hi * e / (2 * (1 - f1_hi)))
            tp_lo = max(0, support - e, tp_lo_f1)
            tp_hi = min(support, cov - e, tp_hi_f1)
            for tp in range(tp_lo, tp_hi + 1):
                if e == 0 and tp == 0 and support > 0:
                    continue  # fn would be positive, contradiction with e == 0
                fn = support - tp
                fp = e - fn
                tn = cov - e - tp
                if fp < 0 or tn < 0:
                    continue
                if tp == 0 and fp == 0 and fn == 0:
                    realized_f1 = Fraction(0)
                else:
                    realized_f1 = Fraction(2 * tp, 2 * tp + fp + fn)
                if abs(realized_f1 - f1) > tol:
                    continue
                if abs(Fraction(tp + tn, cov) - acc) > tol:
                    continue
                out.append((cov, e, tp, fp, fn, tn, tp + fp))
    return out


def _solve_annotator_targets(
    n: int, targets: Sequence[AnnotatorMetricTarget]
) -> tuple[int, dict[str, tuple]]:
    """Pick one confusion table per annotator plus a shared count of
    predicted-positive rows consistent with all of them.

    For each annotator, predicted positives among its covered rows must
    equal tp+fp, and the remainder must fit inside its missing rows; the
    scan below finds the shared total maximizing summed coverage.
    """
    per_annotator: dict[str, list[tuple]] = {}
    for t in targets:
        cands = _annotator_candidates(n, t)
        if not cands:
            raise InfeasibleSpecError(
                f"no integer confusion table matches annotator {t.annotator!r} targets "
                f"(accuracy {t.accuracy}, f1 {t.f1}, support {t.positive_count}, "
                f"tolerance {t.tolerance}) within {n} scans"
            )
        per_annotator[t.annotator] = cands

    # For every possible shared positive total, the best (max coverage)
    # candidate per annotator, via first-fit interval stamping.
    best: dict[str, list] = {}
    for annotator, cands in per_annotator.items():
        assign: list = [None] * (n + 1)
        nxt = list(range(n + 2))

        def find(i: int) -> int:
            while nxt[i] != i:
                nxt[i] = nxt[nxt[i]]
                i = nxt[i]
            return i

        for cand in cands:  # coverage-descending order
            cov, p_i = cand[0], cand[6]
            lo, hi = p_i, min(n, p_i + n - cov)
            j = find(lo)
            while j <= hi:
                assign[j] = cand
                nxt[j] = j + 1
                j = find(j + 1)
        best[annotator] = assign

    best_total, best_p = -1, None
    for p in range(n + 1):
        if any(best[a][p] is None for a in per_annotator):
            continue
        total = sum(best[a][p][0] for a in per_annotator)
        if total > best_total:
            best_total, best_p = total, p
    if best_p is None:
        raise InfeasibleSpecError(
            "per-annotator metric targets are mutually inconsistent: no shared "
            "prediction column satisfies all of them"
        )
    return best_p, {a: best[a][best_p] for a in per_annotator}


def _lay_out_annotator_metrics(plan: _Plan, rng: random.Random):
    spec = plan.spec
    targets = spec.resolved_annotator_targets()
    if not targets:
        return
    by_subtype: dict[str, list[AnnotatorMetricTarget]] = {}
    for t in targets:
        by_subtype.setdefault(t.subtype, []).append(t)

    for subtype, subtype_targets in by_subtype.items():
        p_total, solution = _solve_annotator_targets(plan.n, subtype_targets)
        predbin = plan.predbin[subtype]
        for row in range(p_total):
            predbin[row] = 1
        pos_rows = list(range(p_total))
        neg_rows = list(range(p_total, plan.n))
        def assign(labels, rows, n_ones, n_zeros):
            ones = set(rng.sample(rows, n_ones))
            zeros = set(rng.sample([r for r in rows if r not in ones], n_zeros))
            for row in rows:
                labels[row] = 1 if row in ones else (0 if row in zeros else MISSING)

        for t in subtype_targets:
            cov, e, tp, fp, fn, tn, p_i = solution[t.annotator]
            labels = plan.labels[subtype][t.annotator]
            assign(labels, pos_rows, tp, fp)
            assign(labels, neg_rows, fn, tn)
        # Untargeted annotators follow the prediction with seeded label noise.
        targeted = {t.annotator for t in subtype_targets}
        for index, annotator in enumerate(spec.annotators):
            if annotator in targeted:
                continue
            flip = 0.05 + 0.03 * (index % 4)
            labels = plan.labels[subtype][annotator]
            for row in range(plan.n):
                value = predbin[row]
                labels[row] = 1 - value if rng.random() < flip else value


def _finalize_ground_truth(plan: _Plan):
    """Majority vote (ties positive) for subtypes without explicit targets."""
    for subtype in plan.spec.subtypes:
        if plan.gt[subtype] is not None:
            continue
        column = []
        for row in range(plan.n):
            cells = [plan.labels[subtype][a][row] for a in plan.spec.annotators]
            present = [c for c in cells if c is not MISSING]
            if not present:
                column.append(MISSING)
            else:
                count = sum(1 for c in present if c == 1)
                column.append(1 if 2 * count >= len(present) and count > 0 else 0)
        plan.gt[subtype] = column


def _agreement_count_rows(plan: _Plan, subtype: str) -> list[int]:
    counts = []
    for row in range(plan.n):
        cells = [plan.labels[subtype][a][row] for a in plan.spec.annotators]
        counts.append(sum(1 for c in cells if c is not MISSING and c == 1))
    return counts


def _realize_scores(plan: _Plan, rng: random.Random):
    """Prediction scores inside the binarization-preserving ranges.

    Scores sit in [0.5, 0.995] for predicted-positive rows and
    [0.005, 0.495] otherwise. A mixing weight blends seeded noise with
    the row's agreement count; when a correlation target is set the
    weight is searched so pearson(agreement, score) lands within
    tolerance.
    """
    spec = plan.spec
    corr = spec.resolved_correlation()
    n_annotators = len(spec.annotators)
    for subtype in spec.subtypes:
        u = [rng.random() for _ in range(plan.n)]
        kcounts = _agreement_count_rows(plan, subtype)
        predbin = plan.predbin[subtype]

        def scores_at(lam: float) -> list[float]:
            out = []
            for b, k, noise in zip(predbin, kcounts, u):
                relative = k / n_annotators if n_annotators else 0.0
                mix = lam * relative + (1.0 - lam) * noise
                if b == 1:
                    out.append(0.5 + 0.495 * mix)
                else:
                    out.append(0.005 + 0.49 * mix)
            return out

        if corr is None or corr.subtype != subtype:
            plan.scores[subtype] = scores_at(0.0)
            continue

        def correlation(lam: float) -> float:
            return analytics.pearson(kcounts, scores_at(lam))

        try:
            coarse = [(abs(correlation(i / 40) - corr.value), i / 40) for i in range(41)]
        except DegenerateInputError as exc:
            raise InfeasibleSpecError(
                f"correlation target for {subtype!r} is undefined on this fixture: {exc}"
            ) from None
        _, best_lam = min(coarse)
        lo = max(0.0, best_lam - 0.025)
        hi = min(1.0, best_lam + 0.025)
        fine = [
            (abs(correlation(lo + (hi - lo) * i / 50) - corr.value), lo + (hi - lo) * i / 50)
            for i in range(51)
        ]
        err, lam = min(fine)
        if err > corr.tolerance:
            raise InfeasibleSpecError(
                f"correlation target {corr.value} ± {corr.tolerance} for {subtype!r} is "
                f"unattainable; closest achievable was {correlation(lam):.4f}"
            )
        plan.scores[subtype] = scores_at(lam)


def _column_layout(spec: FixtureSpec) -> list[tuple[str, str, str | None, str]]:
    """(name, role, annotator, subtype) per data column, in emit order."""
    layout = []
    for subtype in spec.subtypes:
        for annotator in spec.annotators:
            layout.append((f"{annotator}_{subtype}", "annotation", annotator, subtype))
        layout.append((f"pred_{subtype}", "prediction", None, subtype))
        layout.append((subtype, "metadata", None, subtype))
    return layout


def _write_fixture(plan: _Plan, out_dir: Path, basename: str) -> tuple[Path, Path]:
    spec = plan.spec
    layout = _column_layout(spec)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = out_dir / f"{basename}.csv"
    manifest_path = out_dir / f"{basename}.manifest.json"

    order = list(range(plan.n))
    rng = random.Random(spec.seed ^ 0x5EED)
    rng.shuffle(order)
    width = max(4, len(str(max(plan.n, 1))))

    def cell_text(value) -> str:
        if value is MISSING:
            return ""
        if isinstance(value, float):
            return repr(value)
        return str(value)

    with data_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["scan_id"] + [name for name, *_ in layout])
        for serial, row in enumerate(order, start=1):
            cells = [f"scan{serial:0{width}d}"]
            for name, role, annotator, subtype in layout:
                if role == "annotation":
                    cells.append(cell_text(plan.labels[subtype][annotator][row]))
                elif role == "prediction":
                    cells.append(cell_text(plan.scores[subtype][row]))
                else:
                    cells.append(cell_text(plan.gt[subtype][row]))
            writer.writerow(cells)

    manifest = {
        "data_path": data_path.name,
        "delimiter": ",",
        "key_column": "scan_id",
        "slice_column": None,
        "column_roles": {
            name: {"role": role, "annotator": annotator, "subtype": subtype}
            for name, role, annotator, subtype in layout
        },
        "image_root": None,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return data_path, manifest_path


def _default_report_config(spec: FixtureSpec) -> dict:
    corr = spec.resolved_correlation()
    first = spec.subtypes[0] if spec.subtypes else None
    corr_subtype = corr.subtype if corr else first
    by_gt = _confusions_by_gt(spec)
    if by_gt:
        cycle_iv_gt = next(iter(by_gt))
        pred_columns = [f"pred_{t.pred_subtype}" for t in by_gt[cycle_iv_gt]]
    else:
        cycle_iv_gt = first
        pred_columns = [f"pred_{first}"] if first else []
    exclusive_query = None
    if spec.gt_overlap_targets:
        t = spec.gt_overlap_targets[0]
        exclusive_query = f"{t.subtype_a} == 1 and {t.subtype_b} == 0"
    return {
        "threshold": 0.5,
        "tie_policy": "positive",
        "cycle_I": None if first is None else {"subtype": first, "pred_column": f"pred_{first}"},
        "cycle_II": None if corr_subtype is None else {
            "x_column": f"agree_count_{corr_subtype}",
            "y_column": f"pred_{corr_subtype}",
        },
        "cycle_III": {
            "blocks": [
                {"subtype": s, "pred_column": f"pred_{s}", "gt_column": s}
                for s in spec.subtypes
            ]
        },
        "cycle_IV": None if cycle_iv_gt is None else {
            "gt_column": cycle_iv_gt,
            "subtype": cycle_iv_gt,
            "pred_columns": pred_columns,
            "exclusive_query": exclusive_query,
        },
    }


def _verify(spec: FixtureSpec, dataset: Dataset) -> dict:
    """Re-run the analytics on the reloaded fixture and check every target.

    Returns the realized-target summary; raises InfeasibleSpecError on any
    mismatch (which would indicate a construction bug, not a user error).
    """
    summary: dict = {"n_scans": dataset.n_rows, "targets": []}

    def check(ok: bool, description: str):
        summary["targets"].append({"target": description, "ok": ok})
        if not ok:
            raise InfeasibleSpecError(f"generated fixture failed verification: {description}")

    check(dataset.n_rows == spec.n_scans, f"row count {spec.n_scans}")

    for subtype, buckets in spec.bucket_targets.items():
        table = analytics.overlap_table(dataset, subtype, f"pred_{subtype}")
        by_k = {row.k: row for row in table}
        for b in buckets:
            row = by_k[b.k]
            check(
                row.cases == b.cases and row.model_true == b.model_positives,
                f"bucket {subtype!r} k={b.k}: cases {b.cases}, model positives {b.model_positives}",
            )

    for t in spec.confusion_targets:
        report = analytics.metrics(dataset, t.gt_subtype, f"pred_{t.pred_subtype}", 0.5)
        check(
            report.support_positive == t.positives and report.tp == t.true_positives,
            f"confusion ({t.gt_subtype!r} -> {t.pred_subtype!r}): "
            f"{t.true_positives} of {t.positives}",
        )

    for t in spec.gt_overlap_targets:
        a, _ = dataset.column(t.subtype_a)
        b, _ = dataset.column(t.subtype_b)
        realized = sum(1 for x, y in zip(a, b) if x == 1 and y == 1)
        check(
            realized == t.both,
            f"ground-truth overlap {t.subtype_a!r} & {t.subtype_b!r} == {t.both}",
        )

    corr = spec.resolved_correlation()
    if corr is not None:
        enriched = derive_agreement(dataset, corr.subtype)
        realized = analytics.pearson_columns(
            enriched, f"agree_count_{corr.subtype}", f"pred_{corr.subtype}"
        )
        summary["correlation"] = realized
        check(
            abs(realized - corr.value) <= corr.tolerance,
            f"correlation {corr.value} ± {corr.tolerance} (realized {realized:.4f})",
        )

    for t in spec.resolved_annotator_targets():
        report = analytics.metrics(dataset, f"{t.annotator}_{t.subtype}", f"pred_{t.subtype}", 0.5)
        check(
            report.support_positive == t.positive_count
            and abs(report.accuracy - t.accuracy) <= t.tolerance
            and abs(report.f1 - t.f1) <= t.tolerance,
            f"annotator {t.annotator!r}: accuracy {t.accuracy} ± {t.tolerance}, "
            f"f1 {t.f1} ± {t.tolerance}, support {t.positive_count} "
            f"(realized {report.accuracy:.4f}/{report.f1:.4f}/{report.support_positive})",
        )
    return summary


def generate_fixture(spec: FixtureSpec, out_dir: str | Path, basename: str = "fixture") -> FixtureResult:
    """Emit <basename>.csv, its ingest manifest and a matching report
    config into out_dir; deterministic in (spec, seed)."""
    spec.validate()
    rng = random.Random(spec.seed)
    plan = _Plan(spec)
    _lay_out_buckets(plan, rng)
    _lay_out_ground_truth(plan, rng)
    _lay_out_annotator_metrics(plan, rng)
    _finalize_ground_truth(plan)
    _realize_scores(plan, rng)

    out_dir = Path(out_dir)
    data_path, manifest_path = _write_fixture(plan, out_dir, basename)
    config_path = out_dir / f"{basename}.report.json"
    config_path.write_text(
        json.dumps(_default_report_config(spec), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    from .ingest import manifest_from_file

    try:
        dataset = load(manifest_from_file(manifest_path))
        summary = _verify(spec, dataset)
    except InfeasibleSpecError:
        data_path.unlink(missing_ok=True)
        manifest_path.unlink(missing_ok=True)
        config_path.unlink(missing_ok=True)
        raise
    summary["fingerprint"] = dataset.fingerprint
    return FixtureResult(data_path, manifest_path, config_path, summary)


def bundled_spec_path(name: str) -> Path:
    """Path of a packaged fixture spec (e.g. 'table1' or 'table1.spec.json')."""
    from .errors import DataFormatError

    filename = name if name.endswith(".json") else f"{name}.spec.json"
    path = Path(__file__).parent / "data" / filename
    if not path.exists():
        available = sorted(p.stem.replace(".spec", "") for p in (Path(__file__).parent / "data").glob("*.spec.json"))
        raise DataFormatError(f"no bundled spec {name!r}; available: {available}")
    return path
