"""Read-only HTTP service over the registry: datasets, rows, cards, search.

Every response is JSON with permissive CORS so a browser frontend served
from anywhere (including this process, see ``static_dir``) can call it.
All registered datasets are built once at startup; request handling then
only reads memory-mapped tables, so a request sweep never mutates the
cache or registry.  Row values are rendered to plain JSON by feature type:
class labels as ``{"code", "label"}``, tensors as nested lists, binary as
base64, and non-finite floats as null.
"""

from __future__ import annotations

import base64
import errno
import json
import math
import mimetypes
import os
import re
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlsplit

import numpy as np

from .builder import load_dataset, resolve_cache_dir, resolve_registry_dir
from .errors import (
    DataforgeError,
    PortInUse,
    UnknownDataset,
    UnknownVocabularyValue,
)
from .registry import Registry, validate_card_text
from .schema import (
    Binary,
    ClassLabel,
    Float64,
    Record,
    Schema,
    Sequence,
    Tensor,
    Translation,
    schema_to_json,
)
from .store import DatasetDict

DEFAULT_LIMIT = 50
MAX_LIMIT = 1_000  # rows per page; larger requests are rejected, not clamped

# /api/search query parameter -> tag key
SEARCH_PARAMS = {
    "lang": "languages",
    "task": "task_categories",
    "task_id": "task_ids",
    "license": "licenses",
    "size": "size_category",
    "multilinguality": "multilinguality",
}


class _HttpError(Exception):
    """Carries a status code and JSON body through the handler."""

    def __init__(self, status: int, obj: dict):
        self.status = status
        self.obj = obj
        super().__init__(obj.get("error", "http error"))


def _bad_request(detail: str) -> _HttpError:
    return _HttpError(400, {"error": "bad_request", "detail": detail})


# ---------------------------------------------------------------------------
# JSON rendering of typed values

def render_value(t, v):
    """One stored value as plain JSON, by feature type tag."""
    if v is None:
        return None
    if isinstance(t, ClassLabel):
        return {"code": v, "label": t.names[v]}
    if isinstance(t, Tensor):
        # stored rows carry flat element lists; expose the declared shape
        return np.asarray(v).reshape(t.shape).tolist()
    if isinstance(t, Binary):
        return base64.b64encode(v).decode("ascii")
    if isinstance(t, Sequence):
        return [render_value(t.inner, x) for x in v]
    if isinstance(t, Record):
        return {name: render_value(ft, v[name]) for name, ft in t.fields}
    if isinstance(t, Translation):
        return {lang: v[lang] for lang in t.languages}
    if isinstance(t, Float64):
        return v if math.isfinite(v) else None
    return v


def render_row(schema: Schema, row: dict) -> dict:
    return {c.name: render_value(c.type, row[c.name]) for c in schema.columns}


# ---------------------------------------------------------------------------
# service state

class DatasetService:
    """Open datasets plus registry access shared by all request threads."""

    def __init__(self, registry_dir: str, cache_dir: str, static_dir: str | None = None):
        self.registry = Registry(registry_dir)
        self.cache_dir = cache_dir
        self.static_dir = os.path.realpath(static_dir) if static_dir else None
        self._datasets: dict[str, DatasetDict] = {}
        self._lock = threading.Lock()

    def warm(self, warn=None) -> None:
        """Build or open every registered dataset before serving.

        A card that fails validation is reported through ``warn`` but never
        blocks the dataset; documentation should encourage, not gate.
        """
        warn = warn or (lambda msg: print(msg, file=sys.stderr))
        for id in self.registry.ids():
            findings = validate_card_text(self.registry.card_text(id))
            errors = [f for f in findings if f.severity == "error"]
            if errors:
                warn(f"warning: card for {id!r} has {len(errors)} validation error(s)")
            self.dataset(id)

    def dataset(self, id: str) -> DatasetDict:
        with self._lock:
            if id not in self._datasets:
                self._datasets[id] = load_dataset(
                    id, cache_dir=self.cache_dir, registry_dir=self.registry.root
                )
            return self._datasets[id]

    # response payloads ----------------------------------------------------

    def list_datasets(self) -> list[dict]:
        out = []
        for id in self.registry.ids():
            ds = self.dataset(id)
            out.append(
                {
                    "id": id,
                    "tags": self.registry.card(id).tags.to_json_obj(),
                    "splits": dict(ds.info.split_rows),
                    "num_rows": sum(ds.info.split_rows.values()),
                }
            )
        return out

    def dataset_detail(self, id: str) -> dict:
        ds = self.dataset(id)
        entry = self.registry.get(id)
        schema = ds[next(iter(ds))].schema
        return {
            "id": id,
            "description": ds.info.description,
            "version": ds.info.version,
            "license": ds.info.license,
            "citation": ds.info.citation,
            "recommended_metrics": list(ds.info.recommended_metrics),
            "splits": dict(ds.info.split_rows),
            "num_rows": sum(ds.info.split_rows.values()),
            "schema": json.loads(schema_to_json(schema)),
            "tags": self.registry.card(id).tags.to_json_obj(),
            "revision": entry.revision,
            "models": list(entry.models),
        }

    def rows_page(self, id: str, split: str, offset: int, limit: int) -> dict:
        ds = self.dataset(id)
        try:
            table = ds[split]
        except KeyError:
            raise _HttpError(404, {"error": "unknown_split"}) from None
        total = table.num_rows
        start = min(offset, total)
        end = min(offset + limit, total)
        rows = [render_row(table.schema, r) for r in table.slice(start, end)]
        return {
            "id": id,
            "split": split,
            "offset": offset,
            "limit": limit,
            "total": total,
            "rows": rows,
        }

    def card_payload(self, id: str) -> dict:
        entry = self.registry.get(id)
        text = self.registry.card_text(id)
        return {
            "id": id,
            "revision": entry.revision,
            "markdown": text,
            "tags": self.registry.card(id).tags.to_json_obj(),
        }

    def search_ids(self, query: dict[str, list[str]]) -> dict:
        filters: dict[str, list[str]] = {}
        for param, values in query.items():
            if param not in SEARCH_PARAMS:
                raise _bad_request(f"unknown search parameter {param!r}")
            filters[SEARCH_PARAMS[param]] = [v for v in values if v]
        filters = {k: v for k, v in filters.items() if v}
        return {"ids": self.registry.search(filters)}


# ---------------------------------------------------------------------------
# http plumbing

_ROUTES = (
    (re.compile(r"^/api/datasets$"), "list"),
    (re.compile(r"^/api/datasets/(.+)/rows$"), "rows"),
    (re.compile(r"^/api/datasets/(.+)/card$"), "card"),
    (re.compile(r"^/api/datasets/(.+)$"), "detail"),
    (re.compile(r"^/api/search$"), "search"),
)


def _int_param(query: dict, name: str, default: int, lo: int, hi: int | None = None) -> int:
    raw = query.get(name, [None])[-1]
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise _bad_request(f"{name} must be an integer, got {raw!r}") from None
    if value < lo or (hi is not None and value > hi):
        bound = f">= {lo}" if hi is None else f"in [{lo}, {hi}]"
        raise _bad_request(f"{name} must be {bound}, got {value}")
    return value


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "dataforge"

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        try:
            self._route()
        except _HttpError as e:
            self._send_json(e.status, e.obj)
        except UnknownDataset:
            self._send_json(404, {"error": "unknown_dataset"})
        except UnknownVocabularyValue as e:
            self._send_json(400, {"error": "unknown_vocabulary_value", "detail": str(e)})
        except BrokenPipeError:
            pass
        except DataforgeError as e:
            self._send_json(500, {"error": "internal_error", "detail": str(e)})
        except Exception as e:  # pragma: no cover - last resort
            self._send_json(500, {"error": "internal_error", "detail": str(e)})

    def _route(self):
        svc: DatasetService = self.server.service
        parts = urlsplit(self.path)
        path = unquote(parts.path)
        query = parse_qs(parts.query, keep_blank_values=True)

        for pattern, kind in _ROUTES:
            m = pattern.match(path)
            if not m:
                continue
            if kind == "list":
                return self._send_json(200, svc.list_datasets())
            if kind == "rows":
                split = query.get("split", [None])[-1]
                if not split:
                    raise _bad_request("missing required parameter 'split'")
                offset = _int_param(query, "offset", 0, 0)
                limit = _int_param(query, "limit", DEFAULT_LIMIT, 1, MAX_LIMIT)
                return self._send_json(200, svc.rows_page(m.group(1), split, offset, limit))
            if kind == "card":
                return self._send_json(200, svc.card_payload(m.group(1)))
            if kind == "detail":
                return self._send_json(200, svc.dataset_detail(m.group(1)))
            if kind == "search":
                return self._send_json(200, svc.search_ids(query))
        self._static(path)

    def _static(self, path: str):
        svc: DatasetService = self.server.service
        if svc.static_dir is None:
            if path == "/":
                return self._send_json(
                    200,
                    {
                        "service": "dataforge",
                        "endpoints": [
                            "/api/datasets",
                            "/api/datasets/{id}",
                            "/api/datasets/{id}/rows?split=S&offset=O&limit=L",
                            "/api/datasets/{id}/card",
                            "/api/search",
                        ],
                    },
                )
            raise _HttpError(404, {"error": "not_found"})

        rel = path.lstrip("/") or "index.html"
        full = os.path.realpath(os.path.join(svc.static_dir, rel))
        if full != svc.static_dir and not full.startswith(svc.static_dir + os.sep):
            raise _HttpError(404, {"error": "not_found"})
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            raise _HttpError(404, {"error": "not_found"})
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as f:
            body = f.read()
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _send_json(self, status: int, obj) -> None:
        body = json.dumps(obj, allow_nan=False).encode("utf-8")
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True


def make_server(
    registry_dir: str | None = None,
    cache_dir: str | None = None,
    port: int = 8080,
    host: str = "127.0.0.1",
    static_dir: str | None = None,
    warm: bool = True,
) -> _Server:
    """Bound, warmed server; callers drive serve_forever themselves."""
    cache_dir = resolve_cache_dir(cache_dir)
    registry_dir = resolve_registry_dir(registry_dir, cache_dir)
    service = DatasetService(registry_dir, cache_dir, static_dir)
    if warm:
        service.warm()
    try:
        httpd = _Server((host, port), _Handler)
    except OSError as e:
        if e.errno == errno.EADDRINUSE:
            raise PortInUse(f"port {port} on {host} is already bound") from None
        raise
    httpd.service = service
    return httpd


def serve(
    registry_dir: str | None = None,
    cache_dir: str | None = None,
    port: int = 8080,
    host: str = "127.0.0.1",
    static_dir: str | None = None,
) -> None:
    """Run until interrupted. Builds all registered datasets first."""
    httpd = make_server(registry_dir, cache_dir, port, host, static_dir)
    addr = httpd.server_address
    print(f"serving on http://{addr[0]}:{addr[1]}/ (Ctrl-C to stop)", file=sys.stderr)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
