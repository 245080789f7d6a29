"""Assembles the four-cycle analysis report for the CLI.

The report is a plain dict (JSON-ready): dataset fingerprint, timestamp,
and one section per analysis cycle, each carrying the exact query texts
and column choices it used so a report can be replayed verbatim.
Re-running on identical inputs yields identical output except the
timestamp field.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

from . import analytics, ingest, query
from .errors import DataFormatError, DegenerateInputError
from .model import MISSING, Dataset

CONFIG_KEYS = ("threshold", "tie_policy", "cycle_I", "cycle_II", "cycle_III", "cycle_IV")


def load_config(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFormatError(f"report config not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"report config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise DataFormatError("report config must be a JSON object")
    unknown = set(doc) - set(CONFIG_KEYS)
    if unknown:
        raise DataFormatError(f"report config has unknown keys: {sorted(unknown)}")
    return doc


def _prediction_column_for(dataset: Dataset, subtype: str) -> str | None:
    for c in dataset.schema:
        if c.role == "prediction" and c.subtype == subtype:
            return c.name
    return None


def default_config(dataset: Dataset) -> dict:
    """Best-effort config from the dataset's own schema: first subtype
    drives cycles I/II/IV, every subtype gets a cycle-III block."""
    subtypes = dataset.subtypes()
    first = subtypes[0] if subtypes else None
    pred_first = _prediction_column_for(dataset, first) if first else None

    def gt_for(subtype: str) -> str:
        if dataset.has_column(subtype):
            return subtype
        return f"consensus_{subtype}"

    return {
        "threshold": 0.5,
        "tie_policy": "positive",
        "cycle_I": (
            {"subtype": first, "pred_column": pred_first} if first and pred_first else None
        ),
        "cycle_II": (
            {"x_column": f"agree_count_{first}", "y_column": pred_first}
            if first and pred_first
            else None
        ),
        "cycle_III": {
            "blocks": [
                {"subtype": s, "pred_column": _prediction_column_for(dataset, s), "gt_column": gt_for(s)}
                for s in subtypes
                if _prediction_column_for(dataset, s)
            ]
        },
        "cycle_IV": (
            {
                "gt_column": gt_for(first),
                "subtype": first,
                "pred_columns": [pred_first],
                "exclusive_query": None,
            }
            if first and pred_first
            else None
        ),
    }


def _cycle_one(dataset: Dataset, section_config: dict, threshold: float) -> dict:
    subtype = section_config["subtype"]
    pred_column = section_config["pred_column"]
    rows = [
        dict(annotator=annotator, **report.as_dict())
        for annotator, report in analytics.per_annotator_metrics(dataset, subtype, pred_column, threshold)
    ]
    return {
        "subtype": subtype,
        "pred_column": pred_column,
        "threshold": threshold,
        "per_annotator": rows,
    }


def _cycle_two(dataset: Dataset, section_config: dict) -> dict:
    x_column, y_column = section_config["x_column"], section_config["y_column"]
    x, _ = dataset.column(x_column)
    y, _ = dataset.column(y_column)
    n_pairs = sum(1 for a, b in zip(x, y) if a is not MISSING and b is not MISSING)
    section = {"x_column": x_column, "y_column": y_column, "n_pairs": n_pairs}
    try:
        section["pearson"] = analytics.pearson(x, y)
    except DegenerateInputError as exc:
        section["pearson"] = None
        section["degenerate"] = str(exc)
    return section


def _cycle_three_block(dataset: Dataset, block: dict, threshold: float) -> dict:
    subtype = block["subtype"]
    pred_column = block["pred_column"]
    gt_column = block["gt_column"]
    table = analytics.overlap_table(dataset, subtype, pred_column, threshold)
    partition = analytics.concordance_partition(dataset, subtype)
    panel = len(dataset.annotation_schemas(subtype))
    unanimous_query = f"agree_count_{subtype} == 0 or agree_prop_{subtype} == 1"
    disputed_query = f"agree_count_{subtype} == 0 or agree_prop_{subtype} < 1"

    def side(selection, text):
        return {
            "query": text,
            "count": len(selection),
            "metrics": analytics.subset_metrics(
                dataset, selection, gt_column, pred_column, threshold
            ).as_dict(),
        }

    return {
        "subtype": subtype,
        "pred_column": pred_column,
        "gt_column": gt_column,
        "panel_size": panel,
        "overlap_table": [row.as_dict() for row in table],
        "partition": {
            "unanimous": side(partition.unanimous, unanimous_query),
            "disputed_plus_negative": side(partition.disputed_plus_negative, disputed_query),
        },
    }


def _cycle_four(dataset: Dataset, section_config: dict, threshold: float) -> dict:
    gt_column = section_config["gt_column"]
    subtype = section_config.get("subtype") or gt_column
    section = {
        "gt_column": gt_column,
        "subtype": subtype,
        "threshold": threshold,
        "confusions": [
            analytics.metrics(dataset, gt_column, pred_column, threshold).as_dict()
            for pred_column in section_config.get("pred_columns") or ()
        ],
        "minority_profile": {
            str(k): count
            for k, count in analytics.minority_label_profile(dataset, subtype).items()
        },
    }
    text = section_config.get("exclusive_query")
    if text:
        section["exclusive_query"] = {"query": text, "count": len(query.select(text, dataset))}
    return section


def build_report(dataset: Dataset, config: dict | None = None) -> dict:
    """Run all configured cycles and assemble the report document."""
    prepared = ingest.derive_all(dataset, (config or {}).get("tie_policy", "positive"))
    if config is None:
        config = default_config(prepared)
    threshold = config.get("threshold", 0.5)
    sections: dict = {}
    current = "config"
    try:
        if config.get("cycle_I"):
            current = "cycle_I"
            sections["cycle_I"] = _cycle_one(prepared, config["cycle_I"], threshold)
        if config.get("cycle_II"):
            current = "cycle_II"
            sections["cycle_II"] = _cycle_two(prepared, config["cycle_II"])
        if config.get("cycle_III") and config["cycle_III"].get("blocks"):
            current = "cycle_III"
            sections["cycle_III"] = {
                "blocks": [
                    _cycle_three_block(prepared, block, threshold)
                    for block in config["cycle_III"]["blocks"]
                ]
            }
        if config.get("cycle_IV"):
            current = "cycle_IV"
            sections["cycle_IV"] = _cycle_four(prepared, config["cycle_IV"], threshold)
    except Exception as exc:
        if hasattr(exc, "code"):
            exc.args = (f"[section {current}] {exc.args[0]}",) + exc.args[1:]
        raise
    return {
        "fingerprint": dataset.fingerprint,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "level": dataset.level,
        "n_rows": dataset.n_rows,
        "threshold": threshold,
        "sections": sections,
    }


def render_text(report: dict) -> str:
    """Human-readable rendering of the report document."""
    lines = [
        f"dataset {report['fingerprint'][:16]}  rows={report['n_rows']}  "
        f"level={report['level']}  threshold={report['threshold']}",
    ]
    sections = report["sections"]
    if "cycle_I" in sections:
        s = sections["cycle_I"]
        lines.append("")
        lines.append(f"cycle I: per-annotator metrics [{s['subtype']} vs {s['pred_column']}]")
        lines.append("  annotator      acc     f1      support  n")
        for row in s["per_annotator"]:
            lines.append(
                f"  {row['annotator']:<12} {row['accuracy_pct']:>6}  {row['f1_pct']:>6}  "
                f"{row['support_positive']:>7}  {row['n_evaluated']}"
            )
    if "cycle_II" in sections:
        s = sections["cycle_II"]
        lines.append("")
        shown = "undefined" if s["pearson"] is None else f"{s['pearson']:.4f}"
        lines.append(
            f"cycle II: pearson({s['x_column']}, {s['y_column']}) = {shown}  "
            f"(n={s['n_pairs']})"
        )
    if "cycle_III" in sections:
        for block in sections["cycle_III"]["blocks"]:
            lines.append("")
            lines.append(f"cycle III [{block['subtype']}]: agreement vs model")
            lines.append("  k  cases  model_true  model_false  overlap")
            for row in block["overlap_table"]:
                lines.append(
                    f"  {row['k']}  {row['cases']:>5}  {row['model_true']:>10}  "
                    f"{row['model_false']:>11}  {row['overlap_pct']:>7}"
                )
            for name in ("unanimous", "disputed_plus_negative"):
                side = block["partition"][name]
                m = side["metrics"]
                lines.append(
                    f"  {name}: n={side['count']}  acc={m['accuracy_pct']}  f1={m['f1_pct']}"
                )
    if "cycle_IV" in sections:
        s = sections["cycle_IV"]
        lines.append("")
        lines.append(f"cycle IV: ground truth {s['gt_column']!r}")
        for m in s["confusions"]:
            lines.append(
                f"  vs {m['pred_column']}: tp={m['tp']} fn={m['fn']} fp={m['fp']} "
                f"recall={m['recall_pct']}"
            )
        profile = ", ".join(f"{k}:{v}" for k, v in s["minority_profile"].items())
        lines.append(f"  minority profile: {profile or '(none)'}")
        if "exclusive_query" in s:
            q = s["exclusive_query"]
            lines.append(f"  query {q['query']!r} -> {q['count']} rows")
    return "\n".join(lines) + "\n"
