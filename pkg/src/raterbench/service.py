"""HTTP JSON facade over ingest/query/analytics with in-memory sessions.

Each session wraps one immutable dataset snapshot plus mutable analysis
state (active ground-truth column, threshold, named queries, current
selection). Mutations are serialized per session and bump a revision
counter by exactly one; reads grab an immutable state snapshot, so
concurrent readers always observe a consistent pre- or post-mutation
view, stamped with its revision.

Routes:
    POST /load
    POST /session/{id}/gt
    POST /session/{id}/query
    GET  /session/{id}/metrics
    GET  /session/{id}/widget/{name}
    GET  /session/{id}/image/{scan}        (layer descriptor + box geometry)
    GET  /session/{id}/image/{scan}/raw    (PNG bytes)
    GET  /session/{id}/image/{scan}/heatmap
    GET  /session/{id}/state               (save)
    POST /session/{id}/state               (restore -> new session id)

Error bodies are {"code", "message", "detail"}.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import analytics, ingest, query
from .errors import DataFormatError, MismatchedDatasetError, ToolError
from .model import MISSING, Dataset, ScanKey, SelectionSet, intersect

WIDGETS = ("overlap_table", "pearson", "scatter", "minority_profile", "concordance_metrics")


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: Any = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class BoundingBox:
    subtype: str
    x: float
    y: float
    width: float
    height: float

    def as_dict(self) -> dict:
        return {"subtype": self.subtype, "x": self.x, "y": self.y, "width": self.width, "height": self.height}


@dataclass(frozen=True)
class OverlayEntry:
    image_path: str
    bounding_boxes: tuple[BoundingBox, ...]
    heatmap_path: str | None


def load_overlay_manifest(path: Path) -> dict[str, OverlayEntry]:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"overlay manifest {path} is not valid JSON: {exc}") from None
    entries: dict[str, OverlayEntry] = {}
    for scan_id, spec in (doc.get("scans") or {}).items():
        boxes = []
        for b in spec.get("bounding_boxes") or ():
            box = BoundingBox(b["subtype"], float(b["x"]), float(b["y"]), float(b["width"]), float(b["height"]))
            if box.x < 0 or box.y < 0 or box.width < 0 or box.height < 0:
                raise DataFormatError(f"overlay manifest {path}: negative box geometry for {scan_id!r}")
            boxes.append(box)
        if "image_path" not in spec:
            raise DataFormatError(f"overlay manifest {path}: entry {scan_id!r} missing image_path")
        entries[scan_id] = OverlayEntry(spec["image_path"], tuple(boxes), spec.get("heatmap_path"))
    return entries


@dataclass(frozen=True)
class SessionState:
    """Immutable snapshot of everything a session mutation can change."""

    active_gt_column: str | None
    threshold: float
    tie_policy: str
    named_queries: tuple[tuple[str, str], ...]
    current_selection: SelectionSet
    revision: int


class Session:
    """Single-writer/multi-reader: mutations serialize on a lock and swap
    the state snapshot; readers take the reference without locking."""

    def __init__(self, dataset: Dataset, state: SessionState,
                 image_root: Path | None, overlay: dict[str, OverlayEntry]):
        self.dataset = dataset
        self.image_root = image_root
        self.overlay = overlay
        self._state = state
        self._lock = threading.Lock()

    @property
    def state(self) -> SessionState:
        return self._state

    def mutate(self, fn) -> SessionState:
        with self._lock:
            new_state = fn(self._state)
            new_state = replace(new_state, revision=self._state.revision + 1)
            self._state = new_state
            return new_state


class LoadRequest(BaseModel):
    manifest_path: str | None = None
    manifest: dict | None = None
    overlay_manifest: str | None = None
    threshold: float = 0.5
    tie_policy: str = "positive"


class GtRequest(BaseModel):
    column: str


class QueryRequest(BaseModel):
    query: str | None = None
    keys: list[str] | None = None
    gesture: str | None = None
    combine: str = "replace"
    name: str | None = None


def _is_binary_valued(dataset: Dataset, name: str) -> bool:
    values, _ = dataset.column(name)
    return all(v is MISSING or v in (0, 1) for v in values)


def _default_gt_column(dataset: Dataset) -> str | None:
    for c in dataset.schema:
        if c.role == "derived" and c.name.startswith("consensus_"):
            return c.name
    for c in dataset.schema:
        if c.value_kind == "binary" and c.role != "annotation":
            return c.name
    return None


def create_app() -> FastAPI:
    app = FastAPI(title="raterbench service")
    # The browser workbench is served from its own origin.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise ServiceError(404, "unknown_session", f"no session {session_id!r}")
        return session

    def register(session: Session) -> str:
        session_id = uuid.uuid4().hex
        with registry_lock:
            sessions[session_id] = session
        return session_id

    @app.exception_handler(ServiceError)
    async def service_error_handler(_request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": str(exc), "detail": exc.detail},
        )

    @app.exception_handler(ToolError)
    async def tool_error_handler(_request: Request, exc: ToolError):
        status = 409 if isinstance(exc, MismatchedDatasetError) else 400
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": str(exc), "detail": exc.detail},
        )

    @app.post("/load")
    def ep_load(body: LoadRequest):
        if body.manifest_path:
            manifest = ingest.manifest_from_file(body.manifest_path)
        elif body.manifest is not None:
            manifest = ingest.IngestManifest.from_dict(body.manifest)
        else:
            raise ServiceError(400, "bad_request", "provide manifest_path or manifest")
        dataset = ingest.load(manifest)
        if dataset.level == "slice":
            dataset = ingest.aggregate_to_ct(dataset)
        dataset = ingest.derive_all(dataset, body.tie_policy)

        overlay: dict[str, OverlayEntry] = {}
        overlay_path = None
        if body.overlay_manifest:
            overlay_path = Path(body.overlay_manifest)
        elif body.manifest_path:
            candidate = Path(body.manifest_path).parent / "overlays.json"
            if candidate.exists():
                overlay_path = candidate
        if overlay_path is not None:
            if not overlay_path.exists():
                raise ServiceError(400, "data_format", f"overlay manifest not found: {overlay_path}")
            overlay = load_overlay_manifest(overlay_path)

        state = SessionState(
            active_gt_column=_default_gt_column(dataset),
            threshold=body.threshold,
            tie_policy=body.tie_policy,
            named_queries=(),
            current_selection=SelectionSet.from_dataset(dataset),
            revision=0,
        )
        image_root = Path(manifest.image_root) if manifest.image_root else None
        session_id = register(Session(dataset, state, image_root, overlay))
        return {
            "session_id": session_id,
            "revision": 0,
            "fingerprint": dataset.fingerprint,
            "n_rows": dataset.n_rows,
            "level": dataset.level,
            "active_gt_column": state.active_gt_column,
            "threshold": state.threshold,
            "subtypes": list(dataset.subtypes()),
            "columns": [
                {
                    "name": c.name,
                    "role": c.role,
                    "value_kind": c.value_kind,
                    "annotator": c.annotator,
                    "subtype": c.subtype,
                }
                for c in dataset.schema
            ],
        }

    @app.post("/session/{session_id}/gt")
    def ep_set_ground_truth(session_id: str, body: GtRequest):
        session = get_session(session_id)
        dataset = session.dataset
        dataset.schema_for(body.column)  # raises UnknownColumnError -> 400
        if not _is_binary_valued(dataset, body.column):
            raise ServiceError(
                400, "non_binary_column",
                f"column {body.column!r} is not binary-valued and cannot be a ground truth",
            )
        new_state = session.mutate(lambda s: replace(s, active_gt_column=body.column))
        return {"revision": new_state.revision, "active_gt_column": body.column}

    def _parse_key_label(dataset: Dataset, label: str) -> ScanKey:
        scan_id, _, index = str(label).partition(":")
        key = ScanKey(scan_id, int(index) if index else None)
        if not dataset.contains_key(key):
            raise ServiceError(400, "unknown_key", f"selection key {label!r} not in dataset")
        return key

    @app.post("/session/{session_id}/query")
    def ep_query(session_id: str, body: QueryRequest):
        """Update the current selection, either by query text or by an
        explicit key list from a widget gesture (linked brushing)."""
        session = get_session(session_id)
        dataset = session.dataset
        if body.combine not in ("replace", "intersect"):
            raise ServiceError(400, "bad_request", f"combine must be replace|intersect, got {body.combine!r}")
        if (body.query is None) == (body.keys is None):
            raise ServiceError(400, "bad_request", "provide exactly one of 'query' or 'keys'")
        if body.keys is not None:
            keys = tuple(_parse_key_label(dataset, label) for label in body.keys)
            selection = SelectionSet(keys, body.gesture or "gesture", dataset.fingerprint)
            canonical = ""
        elif body.query.strip() == "":
            selection = SelectionSet.from_dataset(dataset)
            canonical = ""
        else:
            ast = query.parse(body.query)  # syntax errors -> 400, state untouched
            selection = query.evaluate(ast, dataset, source=body.query)
            canonical = query.unparse(ast)

        def apply(state: SessionState) -> SessionState:
            combined = selection
            if body.combine == "intersect":
                combined = intersect(state.current_selection, selection)
            named = state.named_queries
            if body.name and canonical:
                named = tuple((n, t) for n, t in named if n != body.name) + ((body.name, canonical),)
            return replace(state, current_selection=combined, named_queries=named)

        new_state = session.mutate(apply)
        return {
            "revision": new_state.revision,
            "count": len(new_state.current_selection),
            "provenance": new_state.current_selection.provenance,
            "canonical": canonical,
        }

    def _scoped_dataset(session: Session, state: SessionState, scope: str) -> Dataset:
        if scope == "all":
            return session.dataset
        if scope == "selection":
            return session.dataset.restrict(state.current_selection.keys)
        raise ServiceError(400, "bad_request", f"scope must be all|selection, got {scope!r}")

    @app.get("/session/{session_id}/metrics")
    def ep_metrics(session_id: str, pred_column: str, scope: str = "all"):
        session = get_session(session_id)
        state = session.state
        if state.active_gt_column is None:
            raise ServiceError(400, "no_ground_truth", "session has no ground-truth column set")
        if scope == "selection":
            report = analytics.subset_metrics(
                session.dataset, state.current_selection,
                state.active_gt_column, pred_column, state.threshold,
            )
        elif scope == "all":
            report = analytics.metrics(
                session.dataset, state.active_gt_column, pred_column, state.threshold
            )
        else:
            raise ServiceError(400, "bad_request", f"scope must be all|selection, got {scope!r}")
        return {"revision": state.revision, "scope": scope, **report.as_dict()}

    @app.get("/session/{session_id}/widget/{widget}")
    def ep_widget(
        session_id: str,
        widget: str,
        scope: str = "all",
        subtype: str | None = None,
        pred_column: str | None = None,
        gt_column: str | None = None,
        x_column: str | None = None,
        y_column: str | None = None,
        columns: str | None = None,
    ):
        session = get_session(session_id)
        state = session.state
        payload: dict[str, Any] = {"revision": state.revision, "widget": widget, "scope": scope}

        def require(value, name):
            if value is None:
                raise ServiceError(400, "bad_request", f"widget {widget!r} requires parameter {name!r}")
            return value

        if widget == "overlap_table":
            ds = _scoped_dataset(session, state, scope)
            rows = analytics.overlap_table(
                ds, require(subtype, "subtype"), require(pred_column, "pred_column"), state.threshold
            )
            payload["rows"] = [r.as_dict() for r in rows]
        elif widget == "pearson":
            ds = _scoped_dataset(session, state, scope)
            x, _ = ds.column(require(x_column, "x_column"))
            y, _ = ds.column(require(y_column, "y_column"))
            payload["pearson"] = analytics.pearson(x, y)
            payload["n_pairs"] = sum(
                1 for a, b in zip(x, y) if a is not MISSING and b is not MISSING
            )
        elif widget == "scatter":
            names = [c for c in (require(columns, "columns")).split(",") if c]
            selection = (
                state.current_selection
                if scope == "selection"
                else SelectionSet.from_dataset(session.dataset)
            )
            series = analytics.scatter_series(session.dataset, selection, names)
            payload["series"] = {
                name: [
                    {"index": i, "key": session.dataset.keys[i].label(), "value": v}
                    for i, v in points
                ]
                for name, points in series.items()
            }
        elif widget == "minority_profile":
            ds = _scoped_dataset(session, state, scope)
            profile = analytics.minority_label_profile(ds, require(subtype, "subtype"))
            payload["profile"] = {str(k): v for k, v in profile.items()}
        elif widget == "concordance_metrics":
            ds = _scoped_dataset(session, state, scope)
            gt = gt_column or state.active_gt_column
            if gt is None:
                raise ServiceError(400, "no_ground_truth", "no ground-truth column set or given")
            partition = analytics.concordance_partition(ds, require(subtype, "subtype"))
            payload["partition"] = {
                name: {
                    "count": len(selection),
                    "metrics": analytics.subset_metrics(
                        ds, selection, gt, require(pred_column, "pred_column"), state.threshold
                    ).as_dict(),
                }
                for name, selection in (
                    ("unanimous", partition.unanimous),
                    ("disputed_plus_negative", partition.disputed_plus_negative),
                )
            }
        else:
            raise ServiceError(400, "bad_request", f"unknown widget {widget!r}; one of {WIDGETS}")
        return payload

    def _overlay_entry(session: Session, scan_id: str) -> OverlayEntry:
        entry = session.overlay.get(scan_id)
        if entry is None:
            raise ServiceError(404, "unknown_scan", f"no overlay entry for scan {scan_id!r}")
        return entry

    def _layer_file(session: Session, relative: str) -> Path:
        root = session.image_root or Path(".")
        path = root / relative
        if not path.exists():
            raise ServiceError(404, "missing_file", f"image file not found: {path}")
        return path

    @app.get("/session/{session_id}/image/{scan_id}")
    def ep_image(session_id: str, scan_id: str, layers: str = "raw,boxes"):
        session = get_session(session_id)
        entry = _overlay_entry(session, scan_id)
        requested = [layer for layer in layers.split(",") if layer]
        unknown = [layer for layer in requested if layer not in ("raw", "boxes", "heatmap")]
        if unknown:
            raise ServiceError(400, "bad_request", f"unknown layers {unknown}")
        if "heatmap" in requested and entry.heatmap_path is None:
            raise ServiceError(
                409, "layer_missing", f"scan {scan_id!r} has no heatmap layer", detail={"layer": "heatmap"}
            )
        payload: dict[str, Any] = {
            "scan_id": scan_id,
            "revision": session.state.revision,
            "layers": {},
        }
        if "raw" in requested:
            payload["layers"]["raw"] = f"/session/{session_id}/image/{scan_id}/raw"
        if "boxes" in requested:
            payload["layers"]["boxes"] = [b.as_dict() for b in entry.bounding_boxes]
        if "heatmap" in requested:
            payload["layers"]["heatmap"] = f"/session/{session_id}/image/{scan_id}/heatmap"
        return payload

    @app.get("/session/{session_id}/image/{scan_id}/raw")
    def ep_image_raw(session_id: str, scan_id: str):
        session = get_session(session_id)
        entry = _overlay_entry(session, scan_id)
        path = _layer_file(session, entry.image_path)
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/session/{session_id}/image/{scan_id}/heatmap")
    def ep_image_heatmap(session_id: str, scan_id: str):
        session = get_session(session_id)
        entry = _overlay_entry(session, scan_id)
        if entry.heatmap_path is None:
            raise ServiceError(409, "layer_missing", f"scan {scan_id!r} has no heatmap layer")
        path = _layer_file(session, entry.heatmap_path)
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/session/{session_id}/state")
    def ep_session_save(session_id: str):
        session = get_session(session_id)
        state = session.state
        return {
            "version": 1,
            "fingerprint": session.dataset.fingerprint,
            "active_gt_column": state.active_gt_column,
            "threshold": state.threshold,
            "tie_policy": state.tie_policy,
            "named_queries": {name: text for name, text in state.named_queries},
            "selection": {
                "keys": [k.label() for k in state.current_selection.keys],
                "provenance": state.current_selection.provenance,
            },
            "revision": state.revision,
        }

    @app.post("/session/{session_id}/state")
    def ep_session_restore(session_id: str, document: dict):
        session = get_session(session_id)
        dataset = session.dataset
        required = ("version", "fingerprint", "active_gt_column", "threshold", "selection")
        missing_keys = [k for k in required if k not in document]
        if missing_keys:
            raise ServiceError(
                400, "invalid_document", f"session document is missing keys {missing_keys}"
            )
        if document["fingerprint"] != dataset.fingerprint:
            raise ServiceError(
                409, "fingerprint_mismatch",
                "session document was saved against a different dataset",
                detail={"expected": dataset.fingerprint, "got": document["fingerprint"]},
            )
        gt = document["active_gt_column"]
        if gt is not None:
            dataset.schema_for(gt)
            if not _is_binary_valued(dataset, gt):
                raise ServiceError(400, "non_binary_column", f"column {gt!r} is not binary-valued")
        selection_doc = document["selection"]
        if not isinstance(selection_doc, dict) or "keys" not in selection_doc:
            raise ServiceError(400, "invalid_document", "selection must be an object with keys")
        keys = []
        for label in selection_doc["keys"]:
            scan_id, _, index = str(label).partition(":")
            key = ScanKey(scan_id, int(index) if index else None)
            if not dataset.contains_key(key):
                raise ServiceError(400, "invalid_document", f"selection key {label!r} not in dataset")
            keys.append(key)
        named = tuple(
            (str(name), str(text))
            for name, text in (document.get("named_queries") or {}).items()
        )
        state = SessionState(
            active_gt_column=gt,
            threshold=float(document["threshold"]),
            tie_policy=document.get("tie_policy", "positive"),
            named_queries=named,
            current_selection=SelectionSet(
                tuple(keys), selection_doc.get("provenance", "restored"), dataset.fingerprint
            ),
            revision=0,
        )
        new_id = register(Session(dataset, state, session.image_root, session.overlay))
        return {"session_id": new_id, "revision": 0}

    return app


app = create_app()
