"""
Mock archive HTTP application.

Serves a tree written by `generate_site` with the collection's URL shape:
robots.txt, an index, record pages at /bf_record.cfm?id=N and images under
/images/full and /images/thumbs. Every request is recorded, and scripted
failure statuses are consumed per request target before normal serving.
"""
import logging
import socket
import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Dict, List, Optional

from fastapi import APIRouter, FastAPI, HTTPException, Request, Response
from fastapi.responses import FileResponse, HTMLResponse, PlainTextResponse
from pydantic import BaseModel

from app.services.mock_site import (
    FULL_IMAGES_DIR,
    RECORD_PATH,
    RECORDS_DIR,
    THUMB_IMAGES_DIR,
    PortInUse,
    load_spec,
)
from app.utils.helpers import utc_now_iso

logger = logging.getLogger(__name__)

IMAGE_DIRS = {"full": FULL_IMAGES_DIR, "thumbs": THUMB_IMAGES_DIR}

router = APIRouter()


class RequestLogEntry(BaseModel):
    """
    One served request.

    Attributes:
        method: HTTP method
        target: Path plus query string
        status: Status code returned
        monotonic_s: time.monotonic() at arrival
        timestamp: ISO-8601 UTC arrival time
        user_agent: User-Agent header, if sent
    """

    method: str
    target: str
    status: int
    monotonic_s: float
    timestamp: str
    user_agent: Optional[str] = None


class RequestLog:
    """Thread-safe, inspectable list of served requests."""

    def __init__(self) -> None:
        self._entries: List[RequestLogEntry] = []
        self._lock = threading.Lock()

    def add(self, entry: RequestLogEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    @property
    def entries(self) -> List[RequestLogEntry]:
        with self._lock:
            return list(self._entries)

    def targets(self, prefix: str = "") -> List[str]:
        return [entry.target for entry in self.entries if entry.target.startswith(prefix)]

    def count(self, target: str) -> int:
        return sum(1 for entry in self.entries if entry.target == target)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


class FailureScript:
    """Scripted statuses per request target, consumed in order."""

    def __init__(self, script: Optional[Dict[str, List[int]]] = None) -> None:
        self._remaining = {target: list(statuses) for target, statuses in (script or {}).items()}
        self._lock = threading.Lock()

    def next_status(self, target: str) -> Optional[int]:
        with self._lock:
            queue = self._remaining.get(target)
            if not queue:
                return None
            return queue.pop(0)


def _site_dir(request: Request) -> Path:
    return request.app.state.site_dir


def _safe_file(base: Path, relative: str) -> Path:
    path = (base / relative).resolve()
    if base.resolve() not in path.parents or not path.is_file():
        raise HTTPException(status_code=404, detail="Not found")
    return path


@router.get("/robots.txt", response_class=PlainTextResponse)
async def robots(request: Request) -> PlainTextResponse:
    path = _safe_file(_site_dir(request), "robots.txt")
    return PlainTextResponse(path.read_text(encoding="utf-8"))


@router.get("/", response_class=HTMLResponse)
async def index(request: Request) -> HTMLResponse:
    path = _safe_file(_site_dir(request), "index.html")
    return HTMLResponse(path.read_text(encoding="utf-8"))


@router.get(RECORD_PATH, response_class=HTMLResponse)
async def record_page(request: Request, id: str = "") -> HTMLResponse:
    """Record page for ?id=N."""
    if not id.isdigit():
        raise HTTPException(status_code=404, detail="Unknown record")
    path = _safe_file(_site_dir(request), f"{RECORDS_DIR}/{int(id)}.html")
    return HTMLResponse(path.read_text(encoding="utf-8"))


@router.get("/images/{kind}/{name}")
async def image(request: Request, kind: str, name: str) -> FileResponse:
    if kind not in IMAGE_DIRS:
        raise HTTPException(status_code=404, detail="Not found")
    path = _safe_file(_site_dir(request), f"{IMAGE_DIRS[kind]}/{name}")
    return FileResponse(path, media_type="image/jpeg")


def create_mock_app(site_dir: Path, failure_script: Optional[Dict[str, List[int]]] = None) -> FastAPI:
    """
    Build the mock archive application.

    Args:
        site_dir: Tree written by generate_site
        failure_script: Target -> statuses; defaults to the script recorded
            with the site

    Returns:
        FastAPI: App whose `state.request_log` records every request
    """
    site_dir = Path(site_dir)
    if failure_script is None:
        spec = load_spec(site_dir)
        failure_script = spec.failure_script if spec else {}

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        logger.info(f"Mock archive serving {site_dir}")
        yield
        logger.info(f"Mock archive stopped after {len(app.state.request_log.entries)} requests")

    app = FastAPI(title="Mock biface archive", version="1.0.0", lifespan=lifespan)
    app.state.site_dir = site_dir
    app.state.request_log = RequestLog()
    app.state.failure_script = FailureScript(failure_script)

    @app.middleware("http")
    async def record_requests(request: Request, call_next):
        arrived = time.monotonic()
        timestamp = utc_now_iso()
        target = request.url.path + (f"?{request.url.query}" if request.url.query else "")

        scripted = app.state.failure_script.next_status(target)
        if scripted is not None and scripted >= 400:
            response: Response = PlainTextResponse(f"scripted status {scripted}", status_code=scripted)
        else:
            response = await call_next(request)

        app.state.request_log.add(
            RequestLogEntry(
                method=request.method,
                target=target,
                status=response.status_code,
                monotonic_s=arrived,
                timestamp=timestamp,
                user_agent=request.headers.get("user-agent"),
            )
        )
        logger.debug(f"{request.method} {target} -> {response.status_code}")
        return response

    app.include_router(router)
    return app


def ensure_port_free(host: str, port: int) -> None:
    """
    Raises:
        PortInUse: If `host:port` cannot be bound
    """
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError as e:
            raise PortInUse(f"Port {port} on {host} is in use") from e


def serve(site_dir: Path, port: int, host: str = "127.0.0.1", log_level: str = "info") -> None:
    """
    Serve a generated site until interrupted.

    Raises:
        PortInUse: If the port is already bound
    """
    import uvicorn

    ensure_port_free(host, port)
    logger.info(f"Serving mock archive on http://{host}:{port}/")
    uvicorn.run(create_mock_app(site_dir), host=host, port=port, log_level=log_level.lower())
