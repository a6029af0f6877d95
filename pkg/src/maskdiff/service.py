"""HTTP edit-job service.

POST /v1/edits enqueues a job (202 with its id), a bounded worker pool
executes jobs FIFO, and results are served as PPM bytes once done. All
model and schedule state is shared read-only; the job store is a lock-
protected map and statuses only ever move forward:
queued -> running -> done | failed.
"""

from __future__ import annotations

import base64
import binascii
import queue
import tempfile
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from .errors import FormatError
from .imageio import decode_pgm_mask, decode_ppm, encode_ppm
from .pipeline import EditConfig, EditRequest, ValidationFailure, ValidationIssue, edit, validate_request
from .unet import UNet

QUEUE_LIMIT = 32
WORKERS = 2

_ORDER = {"queued": 0, "running": 1, "done": 2, "failed": 2}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class JobStore:
    """In-memory job records with forward-only status transitions."""

    def __init__(self):
        self._lock = threading.Lock()
        self._jobs: dict[str, dict] = {}

    def create(self, request_echo: dict) -> dict:
        record = {
            "id": str(uuid.uuid4()),
            "status": "queued",
            "request": request_echo,
            "result_path": None,
            "error": None,
            "created_at": _now(),
            "started_at": None,
            "finished_at": None,
        }
        with self._lock:
            self._jobs[record["id"]] = record
        return dict(record)

    def get(self, job_id: str) -> dict | None:
        with self._lock:
            record = self._jobs.get(job_id)
            return dict(record) if record else None

    def advance(self, job_id: str, status: str, **fields) -> None:
        with self._lock:
            record = self._jobs[job_id]
            if _ORDER[status] < _ORDER[record["status"]]:
                raise RuntimeError(f"illegal transition {record['status']} -> {status}")
            record["status"] = status
            record.update(fields)


def _decode_body(body: dict) -> tuple[EditRequest, dict]:
    issues: list[ValidationIssue] = []
    image = mask = None
    for fld, decoder in (("image", decode_ppm), ("mask", decode_pgm_mask)):
        raw = body.get(fld)
        if not isinstance(raw, str):
            issues.append(ValidationIssue(fld, "missing", f"{fld} must be base64 text"))
            continue
        try:
            decoded = decoder(base64.b64decode(raw, validate=True))
        except (binascii.Error, ValueError, FormatError) as exc:
            issues.append(ValidationIssue(fld, "format", f"{fld}: {exc}"))
            continue
        if fld == "image":
            image = decoded
        else:
            mask = decoded
    for fld in ("source_prompt", "target_prompt"):
        if not isinstance(body.get(fld), str):
            issues.append(ValidationIssue(fld, "missing", f"{fld} must be a string"))
    cfg_data = body.get("config", {})
    if not isinstance(cfg_data, dict):
        issues.append(ValidationIssue("config", "format", "config must be an object"))
        cfg_data = {}
    try:
        cfg = EditConfig.from_dict(cfg_data)
    except (TypeError, ValueError) as exc:
        issues.append(ValidationIssue("config", "format", str(exc)))
        cfg = EditConfig.defaults()
    if issues:
        raise ValidationFailure(issues)

    req = EditRequest(image=image, mask=mask,
                      source_prompt=body["source_prompt"],
                      target_prompt=body["target_prompt"], config=cfg)
    issues = validate_request(req)
    if issues:
        raise ValidationFailure(issues)
    echo = {
        "source_prompt": req.source_prompt,
        "target_prompt": req.target_prompt,
        "config": cfg.to_dict(),
        "image_shape": list(image.shape),
        "mask_shape": list(mask.shape),
    }
    return req, echo


def create_app(model: UNet, workers: int = WORKERS, queue_limit: int = QUEUE_LIMIT,
               result_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="maskdiff edit service")
    # the browser console may be served from another origin (e.g. file://)
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    store = JobStore()
    jobs: "queue.Queue[tuple[str, EditRequest]]" = queue.Queue(maxsize=queue_limit)
    out_dir = Path(result_dir) if result_dir else Path(tempfile.mkdtemp(prefix="maskdiff-results-"))
    out_dir.mkdir(parents=True, exist_ok=True)

    def worker():
        while True:
            job_id, req = jobs.get()
            store.advance(job_id, "running", started_at=_now())
            try:
                result = edit(req, model)
                path = out_dir / f"{job_id}.ppm"
                path.write_bytes(encode_ppm(result))
                store.advance(job_id, "done", result_path=str(path), finished_at=_now())
            except Exception as exc:  # noqa: BLE001 - job must fail, not the worker
                store.advance(job_id, "failed", error=str(exc), finished_at=_now())
            finally:
                jobs.task_done()

    for _ in range(workers):
        threading.Thread(target=worker, daemon=True).start()

    @app.post("/v1/edits", status_code=202)
    async def submit(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={
                "error": "validation",
                "issues": [{"field": "body", "code": "format", "message": "body is not JSON"}]})
        try:
            req, echo = _decode_body(body)
        except ValidationFailure as exc:
            return JSONResponse(status_code=400, content=exc.report())
        record = store.create(echo)
        try:
            jobs.put_nowait((record["id"], req))
        except queue.Full:
            store.advance(record["id"], "failed", error="queue full", finished_at=_now())
            return JSONResponse(status_code=503, content={"error": "queue_full",
                                                          "limit": queue_limit})
        return {"id": record["id"], "status": "queued"}

    @app.get("/v1/edits/{job_id}")
    def job_status(job_id: str):
        record = store.get(job_id)
        if record is None:
            return JSONResponse(status_code=404, content={"error": "unknown_job", "id": job_id})
        return record

    @app.get("/v1/edits/{job_id}/result")
    def job_result(job_id: str):
        record = store.get(job_id)
        if record is None:
            return JSONResponse(status_code=404, content={"error": "unknown_job", "id": job_id})
        if record["status"] != "done":
            return JSONResponse(status_code=409, content={
                "error": "not_done", "status": record["status"], "id": job_id})
        data = Path(record["result_path"]).read_bytes()
        return Response(content=data, media_type="image/x-portable-pixmap")

    @app.get("/v1/health")
    def health():
        return PlainTextResponse("ok")

    @app.get("/v1/config/defaults")
    def config_defaults():
        return {"object": EditConfig.defaults("object").to_dict(),
                "background": EditConfig.defaults("background").to_dict()}

    return app
