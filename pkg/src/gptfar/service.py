"""HTTP service: catalog queries and asynchronous report-generation jobs.

Jobs are queued in-process (configurable parallelism, default 1) and move
strictly queued -> running -> done | failed. The default backend is replay,
so the service never makes a live model call unless explicitly configured.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .catalog import Catalog, ScopeError
from .domain import DomainConfig, DomainError, ReportScope
from .gateway import Backend, FixtureStore, LiveBackend, ReplayBackend
from .pipeline import Workspace
from .report import export_report, generate_report

JOB_STATES = ("queued", "running", "done", "failed")


class BackendUnavailable(Exception):
    """The configured model backend cannot serve requests."""


@dataclass
class ReportJob:
    job_id: str
    scope: ReportScope
    state: str = "queued"
    result_dir: str | None = None
    error: str | None = None
    created_at: str = ""
    finished_at: str | None = None

    def to_json_dict(self) -> dict:
        data = {
            "job_id": self.job_id,
            "state": self.state,
            "scope": {
                "years": list(self.scope.years),
                "season": self.scope.season,
                "brands": list(self.scope.brands),
                "group": self.scope.group,
            },
            "created_at": self.created_at,
            "finished_at": self.finished_at,
        }
        if self.state == "done":
            data["report_url"] = f"/api/reports/{self.job_id}/artifact/index.html"
            data["manifest_url"] = f"/api/reports/{self.job_id}/artifact/manifest.json"
        if self.state == "failed":
            data["error"] = self.error
        return data


class JobRegistry:
    """In-process job table plus a worker pool executing report runs."""

    def __init__(self, workers: int = 1) -> None:
        self._jobs: dict[str, ReportJob] = {}
        self._lock = threading.Lock()
        self._executor = ThreadPoolExecutor(max_workers=workers)
        self._active = 0

    def submit(self, scope: ReportScope, runner) -> ReportJob:
        job = ReportJob(
            job_id=uuid.uuid4().hex,
            scope=scope,
            created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        with self._lock:
            self._jobs[job.job_id] = job

        def execute() -> None:
            with self._lock:
                self._active += 1
            job.state = "running"
            try:
                job.result_dir = str(runner(scope))
                job.state = "done"
            except Exception as exc:  # job errors surface via the API, not logs
                job.error = f"{type(exc).__name__}: {exc}"
                job.state = "failed"
            finally:
                job.finished_at = datetime.now(timezone.utc).isoformat(
                    timespec="seconds"
                )
                with self._lock:
                    self._active -= 1

        self._executor.submit(execute)
        return job

    def get(self, job_id: str) -> ReportJob | None:
        with self._lock:
            return self._jobs.get(job_id)

    @property
    def active(self) -> int:
        with self._lock:
            return self._active


class ScopePayload(BaseModel):
    years: list[int]
    season: str
    brands: list[str]
    group: str


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


def build_backend(
    kind: str,
    *,
    fixtures_dir: str | Path | None = None,
    model_url: str | None = None,
    model_name: str = "gpt-4-vision",
    api_key_env: str = "FAR_API_KEY",
    record: bool = False,
) -> Backend:
    """Construct the gateway backend for a service or CLI run."""
    import os

    if kind == "replay":
        if fixtures_dir is None or not Path(fixtures_dir).exists():
            raise BackendUnavailable(
                f"replay backend needs an existing fixtures directory (got {fixtures_dir})"
            )
        return ReplayBackend(FixtureStore(fixtures_dir))
    if kind == "live":
        if not model_url:
            raise BackendUnavailable("live backend needs a model URL (FAR_MODEL_URL)")
        if not os.environ.get(api_key_env):
            raise BackendUnavailable(f"live backend needs the {api_key_env} env var")
        store = FixtureStore(fixtures_dir) if (record and fixtures_dir) else None
        return LiveBackend(model_url, model_name, api_key_env, store=store)
    raise BackendUnavailable(f"unknown backend kind {kind!r}")


def create_app(
    workspace: Workspace,
    *,
    backend_factory=None,
    catalog_root: str | Path | None = None,
    config: DomainConfig | None = None,
    fixtures_dir: str | Path | None = None,
    job_workers: int = 1,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    """Build the FastAPI app. ``backend_factory`` defaults to strict replay
    from ``fixtures_dir`` (safe-by-default: no live traffic)."""
    config = config or DomainConfig.default()
    if backend_factory is None:
        backend_factory = lambda: build_backend("replay", fixtures_dir=fixtures_dir)

    app = FastAPI(title="GPT-FAR service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    registry = JobRegistry(workers=job_workers)
    app.state.registry = registry
    app.state.workspace = workspace

    if catalog_root is not None and not workspace.catalog_path.exists():
        from .pipeline import stage_ingest

        stage_ingest(workspace, catalog_root, config)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request, exc):
        return _error(400, "invalid_scope", str(exc.errors()[:3]))

    def load_catalog() -> Catalog | None:
        if not workspace.catalog_path.exists():
            return None
        return Catalog.load(workspace.catalog_path)

    @app.get("/api/collections")
    def collections():
        catalog = load_catalog()
        if catalog is None:
            return {"years": [], "seasons": [], "brands": [], "groups": config.group_names()}
        return {
            "years": catalog.years,
            "seasons": catalog.seasons,
            "brands": catalog.brands,
            "groups": config.group_names(),
        }

    def _externally_locked() -> bool:
        # Only report 409 when a writer outside this process holds the lock;
        # our own running jobs queue normally.
        if registry.active > 0:
            return False
        from filelock import FileLock, Timeout

        probe = FileLock(str(workspace.root / ".lock"))
        try:
            probe.acquire(timeout=0)
        except Timeout:
            return True
        else:
            probe.release()
            return False

    @app.post("/api/reports", status_code=202)
    def submit_report(payload: ScopePayload):
        if not payload.years or not payload.brands:
            return _error(400, "invalid_scope", "years and brands must be non-empty")
        try:
            scope = ReportScope(
                years=tuple(payload.years),
                season=payload.season,
                brands=tuple(payload.brands),
                group=payload.group,
            )
        except DomainError as exc:
            return _error(400, "invalid_scope", str(exc))
        catalog = load_catalog()
        if catalog is None:
            return _error(400, "invalid_scope", "no catalog ingested yet")
        try:
            catalog.validate_scope(scope, config)
        except (ScopeError, DomainError) as exc:
            return _error(400, "invalid_scope", str(exc))
        try:
            backend = backend_factory()
        except BackendUnavailable as exc:
            return _error(503, "backend_unavailable", str(exc))
        if workspace.root.exists() and _externally_locked():
            return _error(409, "workspace_locked", "another writer holds the workspace")

        def runner(job_scope: ReportScope) -> Path:
            document = generate_report(job_scope, backend, workspace, config)
            out_dir = workspace.report_dir(job_scope)
            export_report(document, out_dir)
            return out_dir

        job = registry.submit(scope, runner)
        return {"job_id": job.job_id}

    @app.get("/api/reports/{job_id}")
    def job_status(job_id: str):
        job = registry.get(job_id)
        if job is None:
            return _error(404, "unknown_job", f"no job {job_id}")
        return job.to_json_dict()

    @app.get("/api/reports/{job_id}/artifact/{artifact_path:path}")
    def job_artifact(job_id: str, artifact_path: str):
        job = registry.get(job_id)
        if job is None:
            return _error(404, "unknown_job", f"no job {job_id}")
        if job.state != "done" or job.result_dir is None:
            return _error(404, "not_ready", f"job {job_id} is {job.state}")
        base = Path(job.result_dir).resolve()
        target = (base / artifact_path).resolve()
        if not str(target).startswith(str(base)) or not target.is_file():
            return _error(404, "missing_artifact", artifact_path)
        return FileResponse(target)

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
