"""Declarative dataset builders: download, verify, parse, and cache.

A builder is a JSON manifest (not code) naming the raw sources per split,
the text format (csv, jsonl, or plain text), the target schema, and a field
map from columns to source accessors. Building converts sources into DSET1
split tables under a cache directory keyed by (id, version, builder
fingerprint), so a manifest change can never silently reuse stale tables.
"""

from __future__ import annotations

import base64
import gzip
import hashlib
import io
import json
import os
import re
import shutil
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Iterator

from . import __version__, instrumentation
from .errors import (
    ChecksumMismatch,
    DownloadError,
    ParseError,
    UnknownDataset,
    ValueTypeError,
)
from .fingerprint import canonical_json, sha256_hex
from .schema import (
    Binary,
    Bool,
    ClassLabel,
    FeatureType,
    Float64,
    Int64,
    Schema,
    Sequence,
    Tensor,
    Translation,
    Utf8String,
    schema_from_json,
    schema_to_json,
    type_from_json_obj,
    validate_value,
)
from .store import DatasetDict, DatasetInfo, Table, open_table, write_table

_ID_RE = re.compile(r"[a-z0-9_/-]+\Z")
FORMATS = ("csv", "jsonl", "text")
USER_AGENT = f"dataforge/{__version__}"
RETRIES = 3
_BACKOFF = (1.0, 2.0, 4.0)
_sleep = time.sleep  # patched in tests

DEFAULT_CACHE_DIR = os.path.join(os.path.expanduser("~"), ".cache", "dataforge")


def resolve_cache_dir(cache_dir: str | None = None) -> str:
    return cache_dir or os.environ.get("DATAFORGE_CACHE_DIR") or DEFAULT_CACHE_DIR


def resolve_registry_dir(registry_dir: str | None = None, cache_dir: str | None = None) -> str:
    return (
        registry_dir
        or os.environ.get("DATAFORGE_REGISTRY_DIR")
        or os.path.join(resolve_cache_dir(cache_dir), "registry")
    )


# ---------------------------------------------------------------------------
# manifest

@dataclass(frozen=True)
class SourceRef:
    """One raw source file: http(s)/file URL or local path, optionally pinned."""

    url: str
    sha256: str | None = None

    def to_json_obj(self) -> dict:
        obj: dict = {"url": self.url}
        if self.sha256:
            obj["sha256"] = self.sha256
        return obj


@dataclass
class BuilderDef:
    """Declarative recipe turning raw sources into typed split tables."""

    id: str
    version: str
    schema: Schema
    sources: dict[str, list[SourceRef]]
    field_map: dict[str, Any]
    format: str = "jsonl"
    format_options: dict = field(default_factory=dict)
    description: str = ""
    citation: str = ""
    license: str = ""
    recommended_metrics: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not _ID_RE.match(self.id):
            raise ValueError(f"invalid dataset id {self.id!r}")
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}")
        for split in self.sources:
            if not split:
                raise ValueError("split names must be non-empty")
        missing = [c.name for c in self.schema.columns if c.name not in self.field_map]
        if missing:
            raise ValueError(f"field_map is missing schema columns: {missing}")

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "version": self.version,
            "description": self.description,
            "citation": self.citation,
            "license": self.license,
            "format": self.format,
            "format_options": dict(self.format_options),
            "schema": json.loads(schema_to_json(self.schema)),
            "field_map": dict(self.field_map),
            "sources": {s: [r.to_json_obj() for r in refs] for s, refs in self.sources.items()},
            "recommended_metrics": list(self.recommended_metrics),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BuilderDef":
        schema = Schema(
            [
                (c["name"], type_from_json_obj(c["type"]), bool(c.get("nullable", False)))
                for c in obj["schema"]["columns"]
            ]
        )
        return cls(
            id=obj["id"],
            version=obj["version"],
            schema=schema,
            sources={
                s: [SourceRef(r["url"], r.get("sha256")) for r in refs]
                for s, refs in obj["sources"].items()
            },
            field_map=dict(obj["field_map"]),
            format=obj.get("format", "jsonl"),
            format_options=dict(obj.get("format_options", {})),
            description=obj.get("description", ""),
            citation=obj.get("citation", ""),
            license=obj.get("license", ""),
            recommended_metrics=list(obj.get("recommended_metrics", [])),
        )


def builder_fingerprint(b: BuilderDef) -> str:
    """Content address of the manifest; any field change changes it."""
    return sha256_hex(canonical_json(b.to_json_obj()).encode("utf-8"))


# ---------------------------------------------------------------------------
# download

@dataclass
class DownloadRecord:
    url: str
    path: str
    sha256: str
    size: int
    fetched_at: float


def _url_to_local(url: str) -> str | None:
    """Local filesystem path for file:// URLs and bare paths, else None."""
    parsed = urllib.parse.urlparse(url)
    if parsed.scheme == "file":
        return urllib.request.url2pathname(parsed.path)
    if parsed.scheme in ("http", "https"):
        return None
    return url  # bare path


def _hash_file(path: str) -> tuple[str, int]:
    h = hashlib.sha256()
    size = 0
    with open(path, "rb") as f:
        while chunk := f.read(1 << 20):
            h.update(chunk)
            size += len(chunk)
    return h.hexdigest(), size


def download_and_verify(src: SourceRef, cache_dir: str) -> DownloadRecord:
    """Fetch one source into the download cache, enforcing its checksum.

    Idempotent: a cached file whose hash matches is reused without touching
    the source. A fetched file that contradicts the declared sha256 is
    deleted before ChecksumMismatch is raised, so a corrupt download can
    never linger in the cache.
    """
    downloads = os.path.join(cache_dir, "downloads")
    os.makedirs(downloads, exist_ok=True)
    dest = os.path.join(downloads, sha256_hex(src.url.encode("utf-8")))

    if os.path.exists(dest):
        digest, size = _hash_file(dest)
        if src.sha256 is None or digest == src.sha256:
            return DownloadRecord(src.url, dest, digest, size, os.path.getmtime(dest))
        os.unlink(dest)  # stale or damaged; refetch below

    tmp = f"{dest}.tmp.{os.getpid()}"
    local = _url_to_local(src.url)
    try:
        if local is not None:
            instrumentation.bump("source_reads")
            try:
                shutil.copyfile(local, tmp)
            except OSError as e:
                raise DownloadError(f"cannot read {src.url}: {e}") from None
        else:
            _fetch_http(src.url, tmp)
        digest, size = _hash_file(tmp)
        if src.sha256 is not None and digest != src.sha256:
            raise ChecksumMismatch(
                f"{src.url}: expected sha256 {src.sha256}, fetched {digest}"
            )
        os.replace(tmp, dest)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return DownloadRecord(src.url, dest, digest, size, time.time())


def _fetch_http(url: str, dest: str) -> None:
    last_error = None
    for attempt in range(RETRIES + 1):
        if attempt:
            _sleep(_BACKOFF[attempt - 1])
        try:
            instrumentation.bump("network_fetches")
            instrumentation.bump("source_reads")
            req = urllib.request.Request(url, headers={"User-Agent": USER_AGENT})
            with urllib.request.urlopen(req, timeout=60) as resp, open(dest, "wb") as out:
                shutil.copyfileobj(resp, out)
            return
        except (urllib.error.URLError, OSError) as e:
            last_error = e
    raise DownloadError(f"failed to fetch {url} after {RETRIES} retries: {last_error}")


# ---------------------------------------------------------------------------
# parsing

def _open_text(path: str, newline=None) -> io.TextIOBase:
    if path.endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline=newline)
    return open(path, encoding="utf-8", newline=newline)


def _get_path(obj: Any, accessor: str) -> Any:
    """Resolve a jsonl accessor: RFC 6901 pointer (leading /) or dotted path."""
    if accessor.startswith("/"):
        parts = [p.replace("~1", "/").replace("~0", "~") for p in accessor.split("/")[1:]]
    else:
        parts = accessor.split(".")
    cur = obj
    for p in parts:
        if isinstance(cur, list):
            try:
                cur = cur[int(p)]
            except (ValueError, IndexError):
                return None
        elif isinstance(cur, dict):
            if p not in cur:
                return None
            cur = cur[p]
        else:
            return None
    return cur


_CSV_BOOLS = {"true": True, "1": True, "false": False, "0": False}


def _coerce(t: FeatureType, raw: Any, from_text: bool):
    """Bring a raw source value into the Python shape the type expects."""
    if raw is None:
        return None
    if isinstance(t, ClassLabel) and isinstance(raw, str):
        if raw in t.names:
            return t.str2int(raw)
        return int(raw)
    if isinstance(t, Binary) and isinstance(raw, str):
        return base64.b64decode(raw, validate=True)
    if isinstance(t, Tensor) and isinstance(raw, str) and from_text:
        raw = json.loads(raw)
    if isinstance(t, Tensor) and isinstance(raw, list):
        flat: list = []
        _flatten(raw, flat)
        return flat
    if from_text and isinstance(raw, str):
        if isinstance(t, Int64):
            return int(raw)
        if isinstance(t, Float64):
            return float(raw)
        if isinstance(t, Bool):
            key = raw.strip().lower()
            if key not in _CSV_BOOLS:
                raise ValueError(f"not a boolean: {raw!r}")
            return _CSV_BOOLS[key]
        if not isinstance(t, (Utf8String, Binary)):
            # nested types travel as JSON text inside csv cells
            return _coerce(t, json.loads(raw), from_text=False)
    if isinstance(t, Sequence) and isinstance(raw, list):
        return [_coerce(t.inner, v, from_text=False) for v in raw]
    return raw


def _flatten(nested, out: list) -> None:
    for v in nested:
        if isinstance(v, list):
            _flatten(v, out)
        else:
            out.append(v)


def parse_source(
    format: str,
    options: dict,
    field_map: dict[str, Any],
    schema: Schema,
    path: str,
) -> Iterator[dict]:
    """Yield validated rows from one raw source file.

    csv follows RFC 4180 (quoted fields, doubled quotes, CRLF or LF); jsonl
    reads one object per non-empty line; text yields one row per line with
    the trailing newline stripped. Errors carry 1-based line numbers.
    """
    newline = "" if format in ("csv", "text") else None
    with _open_text(path, newline=newline) as f:
        yield from parse_stream(format, options, field_map, schema, f)


def parse_stream(
    format: str,
    options: dict,
    field_map: dict[str, Any],
    schema: Schema,
    f: io.TextIOBase,
) -> Iterator[dict]:
    """Like :func:`parse_source` over an already-open text stream.

    csv and text need the stream opened with ``newline=""`` so quoted CRLF
    survives intact.
    """
    if format == "csv":
        yield from _parse_csv(options, field_map, schema, f)
    elif format == "jsonl":
        yield from _parse_jsonl(field_map, schema, f)
    elif format == "text":
        yield from _parse_text(field_map, schema, f)
    else:
        raise ValueError(f"unknown format {format!r}")


def _finish_row(schema: Schema, raw_row: dict, line: int, from_text: bool) -> dict:
    row = {}
    for c in schema.columns:
        raw = raw_row.get(c.name)
        if raw is None or (from_text and raw == "" and c.nullable):
            if c.nullable:
                row[c.name] = None
                continue
            if raw is None:
                e = ValueTypeError(c.name, f"missing value for non-nullable column (line {line})")
                e.line = line
                raise e
        try:
            value = _coerce(c.type, raw, from_text)
            validate_value(c.type, value, path=c.name)
        except ValueTypeError as e:
            wrapped = ValueTypeError(e.path, f"{e.args[0].split(': ', 1)[-1]} (line {line})")
            wrapped.line = line
            raise wrapped from None
        except (ValueError, json.JSONDecodeError) as e:
            wrapped = ValueTypeError(c.name, f"{e} (line {line})")
            wrapped.line = line
            raise wrapped from None
        row[c.name] = value
    return row


def _parse_csv(options: dict, field_map, schema, f) -> Iterator[dict]:
    import csv as _csv

    delimiter = options.get("delimiter", ",")
    has_header = bool(options.get("has_header", False))
    reader = _csv.reader(f, delimiter=delimiter)
    header: dict[str, int] = {}
    try:
        if has_header:
            try:
                first = next(reader)
            except StopIteration:
                return
            header = {name: i for i, name in enumerate(first)}
        for record in reader:
            line = reader.line_num
            raw_row = {}
            for col, accessor in field_map.items():
                if isinstance(accessor, str) and not accessor.lstrip("-").isdigit():
                    if accessor not in header:
                        raise ParseError(
                            f"csv column {accessor!r} not in header", line=line
                        )
                    idx = header[accessor]
                else:
                    idx = int(accessor)
                if idx >= len(record):
                    raise ParseError(
                        f"csv record has {len(record)} fields, accessor needs {idx + 1}",
                        line=line,
                    )
                raw_row[col] = record[idx]
            yield _finish_row(schema, raw_row, line, from_text=True)
    except _csv.Error as e:
        raise ParseError(f"csv error: {e}", line=reader.line_num) from None
    except UnicodeDecodeError as e:
        raise ParseError(f"invalid utf-8: {e}") from None


def _parse_jsonl(field_map, schema, f) -> Iterator[dict]:
    try:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(e.msg, line=line_no, column=e.colno) from None
            raw_row = {col: _get_path(obj, acc) for col, acc in field_map.items()}
            yield _finish_row(schema, raw_row, line_no, from_text=False)
    except UnicodeDecodeError as e:
        raise ParseError(f"invalid utf-8: {e}") from None


def _parse_text(field_map, schema, f) -> Iterator[dict]:
    try:
        for line_no, line in enumerate(f, start=1):
            text = line.rstrip("\r\n") if line.endswith("\n") else line
            raw_row = {col: text for col, acc in field_map.items() if acc == "line"}
            yield _finish_row(schema, raw_row, line_no, from_text=False)
    except UnicodeDecodeError as e:
        raise ParseError(f"invalid utf-8: {e}") from None


# ---------------------------------------------------------------------------
# building and loading

def _build_dir(cache_dir: str, b: BuilderDef) -> str:
    return os.path.join(cache_dir, "datasets", b.id, b.version, builder_fingerprint(b))


def load_builder_def(id: str, registry_dir: str) -> BuilderDef:
    manifest = os.path.join(registry_dir, id, "builder.json")
    if not os.path.exists(manifest):
        raise UnknownDataset(f"no builder registered for {id!r}")
    with open(manifest, encoding="utf-8") as f:
        return BuilderDef.from_json_obj(json.load(f))


def build_dataset(b: BuilderDef, cache_dir: str) -> DatasetDict:
    """Download, verify, and convert every split, then cache the tables."""
    out_dir = _build_dir(cache_dir, b)
    os.makedirs(out_dir, exist_ok=True)
    info = DatasetInfo(
        description=b.description,
        citation=b.citation,
        version=b.version,
        license=b.license,
        recommended_metrics=list(b.recommended_metrics),
    )
    splits: dict[str, Table] = {}
    for split, refs in b.sources.items():
        records = [download_and_verify(r, cache_dir) for r in refs]
        for rec in records:
            info.download_checksums[rec.url] = rec.sha256

        def rows() -> Iterator[dict]:
            for rec in records:
                yield from parse_source(
                    b.format, b.format_options, b.field_map, b.schema, rec.path
                )

        table = write_table(
            b.schema, rows(), os.path.join(out_dir, f"{split}.dset"), validate=False
        )
        splits[split] = table
        info.split_rows[split] = table.num_rows

    info_tmp = os.path.join(out_dir, f"info.json.tmp.{os.getpid()}")
    with open(info_tmp, "w", encoding="utf-8") as f:
        json.dump(info.to_json_obj(), f, indent=2, sort_keys=True)
    os.replace(info_tmp, os.path.join(out_dir, "info.json"))
    return DatasetDict(splits, info)


def load_dataset(
    id: str,
    cache_dir: str | None = None,
    registry_dir: str | None = None,
) -> DatasetDict:
    """Open the cached tables for a registered dataset, building on first use.

    A cache hit performs no downloads and no source reads; it memory-maps
    the existing split files and reads the stored info.
    """
    cache_dir = resolve_cache_dir(cache_dir)
    registry_dir = resolve_registry_dir(registry_dir, cache_dir)
    b = load_builder_def(id, registry_dir)

    out_dir = _build_dir(cache_dir, b)
    info_path = os.path.join(out_dir, "info.json")
    split_paths = {s: os.path.join(out_dir, f"{s}.dset") for s in b.sources}
    if os.path.exists(info_path) and all(os.path.exists(p) for p in split_paths.values()):
        with open(info_path, encoding="utf-8") as f:
            info = DatasetInfo.from_json_obj(json.load(f))
        return DatasetDict({s: open_table(p) for s, p in split_paths.items()}, info)
    return build_dataset(b, cache_dir)
