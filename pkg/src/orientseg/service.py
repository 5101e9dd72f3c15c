"""HTTP review service for correcting ground-truth annotations.

Wraps a dataset directory (annotations.jsonl + images/) behind a JSON API:

    GET  /api/health            -> {"status": "ok"}
    GET  /api/slaps             -> [{slap_id, hand, age_group, revision}]
    GET  /api/slaps/{id}        -> full annotation record + revision
    GET  /api/slaps/{id}/image  -> PNG bytes
    PUT  /api/slaps/{id}/boxes  {revision, boxes: [...]} -> {revision}

Writes are optimistic: the client echoes the revision it loaded, a stale
revision gets a 409 conflict and no mutation.  Every accepted edit rewrites
the annotation file atomically (temp file + rename) and appends to an edit
journal, from which revisions are rebuilt on restart.  This API is the only
mutation path for annotations during review; batch tools treat annotation
files as immutable inputs.
"""

from __future__ import annotations

import datetime
import json
import threading
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, ConfigDict, Field

from .dataset_io import (
    ANNOTATIONS_FILENAME,
    AnnotatedSlap,
    LabeledBox,
    atomic_write_text,
    dumps_record,
    load_annotations,
    save_annotations,
    slap_to_obj,
    validate_slap,
)
from .geometry import RotatedBox, wrap_degrees

JOURNAL_FILENAME = "edits.log"


class BoxPayload(BaseModel):
    model_config = ConfigDict(extra="allow")

    xc: float
    yc: float
    w: float = Field(gt=0)
    h: float = Field(gt=0)
    theta_deg: float
    label: str


class PutBoxesRequest(BaseModel):
    revision: int
    boxes: list[BoxPayload]


class PutBoxesResponse(BaseModel):
    revision: int


class SlapSummary(BaseModel):
    slap_id: str
    hand: str
    age_group: str
    revision: int


class HealthResponse(BaseModel):
    status: str


class AnnotationStore:
    """In-memory view of a dataset directory with journaled writes."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        path = self.root / ANNOTATIONS_FILENAME
        if not path.exists():
            raise FileNotFoundError(f"no {ANNOTATIONS_FILENAME} under {self.root}")
        self._slaps: dict[str, AnnotatedSlap] = {
            s.slap_id: s for s in load_annotations(path)
        }
        self._order = list(self._slaps)
        self._revisions = {slap_id: 1 for slap_id in self._slaps}
        self._replay_journal()

    def _replay_journal(self) -> None:
        journal = self.root / JOURNAL_FILENAME
        if not journal.exists():
            return
        with open(journal, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                slap_id = entry.get("slap_id")
                if slap_id in self._revisions:
                    self._revisions[slap_id] += 1

    def list_slaps(self) -> list[dict[str, Any]]:
        return [
            {
                "slap_id": s.slap_id,
                "hand": s.hand,
                "age_group": s.age_group,
                "revision": self._revisions[s.slap_id],
            }
            for s in (self._slaps[i] for i in self._order)
        ]

    def get(self, slap_id: str) -> Optional[tuple[AnnotatedSlap, int]]:
        slap = self._slaps.get(slap_id)
        if slap is None:
            return None
        return slap, self._revisions[slap_id]

    def image_path(self, slap_id: str) -> Optional[Path]:
        slap = self._slaps.get(slap_id)
        if slap is None:
            return None
        return self.root / slap.image_path

    def put_boxes(
        self, slap_id: str, revision: int, boxes: list[LabeledBox]
    ) -> tuple[bool, int, list[str]]:
        """Apply an edit; returns (applied, current_revision, violations)."""
        with self._lock:
            slap = self._slaps.get(slap_id)
            if slap is None:
                raise KeyError(slap_id)
            current = self._revisions[slap_id]
            if revision != current:
                return False, current, []
            updated = AnnotatedSlap(
                slap_id=slap.slap_id,
                image_path=slap.image_path,
                hand=slap.hand,
                age_group=slap.age_group,
                ppi=slap.ppi,
                provenance=slap.provenance,
                boxes=tuple(boxes),
                extras=slap.extras,
            )
            violations = validate_slap(updated)
            if violations:
                return False, current, violations
            self._slaps[slap_id] = updated
            self._revisions[slap_id] = current + 1
            save_annotations(
                self.root / ANNOTATIONS_FILENAME,
                [self._slaps[i] for i in self._order],
            )
            self._append_journal(updated, current + 1)
            return True, current + 1, []

    def _append_journal(self, slap: AnnotatedSlap, revision: int) -> None:
        entry = {
            "ts": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "slap_id": slap.slap_id,
            "revision": revision,
            "boxes": slap_to_obj(slap)["boxes"],
        }
        with open(self.root / JOURNAL_FILENAME, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_record(entry) + "\n")


def _payload_to_box(payload: BoxPayload) -> LabeledBox:
    extras = dict(payload.model_extra or {})
    box = RotatedBox(payload.xc, payload.yc, payload.w, payload.h, wrap_degrees(payload.theta_deg))
    return LabeledBox(box, payload.label, extras)


def create_app(data_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    store = AnnotationStore(data_dir)
    app = FastAPI(title="orientseg review service")
    app.state.store = store

    @app.get("/api/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok")

    @app.get("/api/slaps", response_model=list[SlapSummary])
    def list_slaps() -> list[SlapSummary]:
        return [SlapSummary(**row) for row in store.list_slaps()]

    @app.get("/api/slaps/{slap_id}")
    def get_slap(slap_id: str) -> dict[str, Any]:
        found = store.get(slap_id)
        if found is None:
            raise HTTPException(status_code=404, detail=f"unknown slap {slap_id}")
        slap, revision = found
        obj = slap_to_obj(slap)
        obj["revision"] = revision
        return obj

    @app.get("/api/slaps/{slap_id}/image")
    def get_image(slap_id: str) -> Response:
        path = store.image_path(slap_id)
        if path is None or not path.exists():
            raise HTTPException(status_code=404, detail=f"no image for slap {slap_id}")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.put("/api/slaps/{slap_id}/boxes")
    def put_boxes(slap_id: str, request: PutBoxesRequest) -> Any:
        try:
            boxes = [_payload_to_box(b) for b in request.boxes]
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        try:
            applied, revision, violations = store.put_boxes(slap_id, request.revision, boxes)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown slap {slap_id}")
        if violations:
            raise HTTPException(status_code=400, detail="; ".join(violations))
        if not applied:
            return JSONResponse(
                status_code=409,
                content={"error": "stale revision", "revision": revision},
            )
        return PutBoxesResponse(revision=revision)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def serve(data_dir: str | Path, host: str = "127.0.0.1", port: int = 8321,
          ui_dir: str | Path | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(data_dir, ui_dir=ui_dir), host=host, port=port)
