"""Lazy row pipelines over shard files that never fit in memory at once.

Shards are read sequentially through a fixed-size buffer and parsed
incrementally, so peak memory tracks the buffer sizes rather than the data.
Pipelines chain the same operations the eager transform module offers; for
any shuffle-free pipeline the streamed rows equal the eager result row by
row, which :func:`stream_eager_equivalence` checks directly.

Streaming shuffle is approximate by construction: it draws uniformly from a
bounded buffer, so it yields a permutation but not the Fisher-Yates order
the eager shuffle produces.
"""

from __future__ import annotations

import io
import os
import tempfile
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field, replace
from itertools import islice
from typing import Any, Iterator

from . import instrumentation
from .builder import (
    FORMATS,
    SourceRef,
    USER_AGENT,
    download_and_verify,
    parse_source,
    parse_stream,
)
from .errors import DownloadError, ParseError, TransformError
from .rng import SplitMix64
from .schema import Schema, schema_from_json, schema_to_json
from .store import write_table
from .transform import (
    TransformSpec,
    map_table,
    filter_table,
    resolve_transform,
    select,
)

DEFAULT_BUFFER_BYTES = 8 * 1024 * 1024

_GZIP_SUFFIX = ".gz"


@dataclass(frozen=True)
class StreamSource:
    """An ordered list of shards sharing one schema and field map."""

    shards: tuple[str, ...]
    schema: Schema
    field_map: dict[str, Any]
    format: str
    format_options: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "shards", tuple(self.shards))
        if not self.shards:
            raise ValueError("a stream source needs at least one shard")
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}")

    def to_json_obj(self) -> dict:
        import json

        return {
            "shards": list(self.shards),
            "schema": json.loads(schema_to_json(self.schema)),
            "field_map": self.field_map,
            "format": self.format,
            "format_options": self.format_options,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "StreamSource":
        import json

        return cls(
            shards=tuple(obj["shards"]),
            schema=schema_from_json(json.dumps(obj["schema"])),
            field_map=obj["field_map"],
            format=obj["format"],
            format_options=obj.get("format_options", {}),
        )


@dataclass(frozen=True)
class _Op:
    kind: str  # map | filter | shuffle | take | skip
    spec: TransformSpec | None = None
    n: int = 0
    buffer_size: int = 0
    seed: int = 0


@dataclass(frozen=True)
class StreamPipeline:
    """A source plus lazy operations, applied in declaration order."""

    source: StreamSource
    ops: tuple[_Op, ...] = ()

    def _with(self, op: _Op) -> "StreamPipeline":
        return replace(self, ops=self.ops + (op,))

    def map(self, spec: TransformSpec) -> "StreamPipeline":
        resolve_transform(spec)
        return self._with(_Op("map", spec=spec))

    def filter(self, spec: TransformSpec) -> "StreamPipeline":
        resolve_transform(spec)
        return self._with(_Op("filter", spec=spec))

    def shuffle(self, buffer_size: int, seed: int) -> "StreamPipeline":
        if buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        return self._with(_Op("shuffle", buffer_size=buffer_size, seed=seed))

    def take(self, n: int) -> "StreamPipeline":
        if n < 0:
            raise ValueError("take needs n >= 0")
        return self._with(_Op("take", n=n))

    def skip(self, n: int) -> "StreamPipeline":
        if n < 0:
            raise ValueError("skip needs n >= 0")
        return self._with(_Op("skip", n=n))


# ---------------------------------------------------------------------------
# shard reading

def _open_shard(url: str, buffer_bytes: int):
    """Open one shard as a buffered binary stream."""
    scheme = urllib.parse.urlsplit(url).scheme
    if scheme in ("http", "https"):
        req = urllib.request.Request(url, headers={"User-Agent": USER_AGENT})
        instrumentation.bump("network_fetches")
        instrumentation.bump("source_reads")
        raw = urllib.request.urlopen(req, timeout=60.0)
    else:
        path = urllib.request.url2pathname(urllib.parse.urlsplit(url).path) \
            if scheme == "file" else url
        instrumentation.bump("source_reads")
        raw = open(path, "rb", buffering=0)
    buffered = io.BufferedReader(raw, buffer_size=buffer_bytes)
    if url.endswith(_GZIP_SUFFIX):
        import gzip

        return gzip.GzipFile(fileobj=buffered)
    return buffered


def _shard_rows(source: StreamSource, url: str, buffer_bytes: int) -> Iterator[dict]:
    newline = "" if source.format in ("csv", "text") else None
    try:
        binary = _open_shard(url, buffer_bytes)
    except (urllib.error.URLError, OSError) as e:
        raise DownloadError(f"cannot open shard {url}: {e}") from e
    text = io.TextIOWrapper(binary, encoding="utf-8", newline=newline)
    try:
        yield from parse_stream(
            source.format, source.format_options, source.field_map, source.schema, text
        )
    except ParseError as e:
        err = ParseError(f"shard {url}: {e.args[0]}", line=e.line, column=e.column)
        err.shard = url
        raise err from None
    except (urllib.error.URLError, EOFError, OSError) as e:
        raise DownloadError(f"while streaming shard {url}: {e}") from e
    finally:
        text.close()


def _source_rows(source: StreamSource, buffer_bytes: int) -> Iterator[dict]:
    for url in source.shards:
        yield from _shard_rows(source, url, buffer_bytes)


# ---------------------------------------------------------------------------
# lazy operators

def _lazy_map(it: Iterator[dict], spec: TransformSpec) -> Iterator[dict]:
    fn = resolve_transform(spec).fn
    if not spec.batched:
        for at, row in enumerate(it):
            try:
                yield fn(row, spec.params)
            except Exception as e:
                raise TransformError(f"map function failed: {e}", (at, at + 1)) from e
        return
    at = 0
    while True:
        batch = list(islice(it, spec.batch_size))
        if not batch:
            return
        try:
            out = fn(batch, spec.params)
        except Exception as e:
            raise TransformError(
                f"map function failed: {e}", (at, at + len(batch))
            ) from e
        at += len(batch)
        yield from out


def _lazy_filter(it: Iterator[dict], spec: TransformSpec) -> Iterator[dict]:
    fn = resolve_transform(spec).fn
    for at, row in enumerate(it):
        try:
            keep = fn(row, spec.params)
        except Exception as e:
            raise TransformError(f"predicate failed: {e}", (at, at + 1)) from e
        if keep:
            yield row


def buffered_shuffle(it, buffer_size: int, seed: int) -> Iterator:
    """Emit a seeded permutation of *it* using a bounded reservoir.

    Fills a buffer of *buffer_size* items, then repeatedly yields a
    uniformly chosen slot and refills that slot from upstream; once the
    upstream is dry the vacated slot is filled by swap-removing the last
    element. buffer_size=1 degenerates to the identity order.
    """
    if buffer_size < 1:
        raise ValueError("buffer_size must be >= 1")
    rng = SplitMix64(seed)
    it = iter(it)
    buf = []
    for item in it:
        buf.append(item)
        if len(buf) >= buffer_size:
            break
    _dry = object()
    while buf:
        i = rng.randbelow(len(buf))
        yield buf[i]
        nxt = next(it, _dry)
        if nxt is _dry:
            buf[i] = buf[-1]
            buf.pop()
        else:
            buf[i] = nxt


def stream_rows(p: StreamPipeline, buffer_bytes: int = DEFAULT_BUFFER_BYTES) -> Iterator[dict]:
    """Single-pass iterator over the pipeline's rows.

    Shards are visited in order; a failure mid-shard raises DownloadError or
    ParseError from the iterator, which then terminates.
    """
    it = _source_rows(p.source, buffer_bytes)
    for op in p.ops:
        if op.kind == "map":
            it = _lazy_map(it, op.spec)
        elif op.kind == "filter":
            it = _lazy_filter(it, op.spec)
        elif op.kind == "shuffle":
            it = buffered_shuffle(it, op.buffer_size, op.seed)
        elif op.kind == "take":
            it = islice(it, op.n)
        elif op.kind == "skip":
            it = islice(it, op.n, None)
        else:
            raise ValueError(f"unknown stream op {op.kind!r}")
    return it


# ---------------------------------------------------------------------------
# equivalence oracle

def stream_eager_equivalence(p: StreamPipeline) -> bool:
    """True iff streaming *p* equals materializing it and transforming eagerly.

    Only defined for shuffle-free pipelines: eager shuffle reorders by a
    full Fisher-Yates pass that a bounded buffer cannot reproduce.
    """
    if any(op.kind == "shuffle" for op in p.ops):
        raise ValueError("equivalence is undefined for pipelines containing shuffle")
    streamed = list(stream_rows(p))

    with tempfile.TemporaryDirectory(prefix="stream-eq-") as work:
        def rows():
            for url in p.source.shards:
                rec = download_and_verify(SourceRef(url), work)
                yield from parse_source(
                    p.source.format, p.source.format_options,
                    p.source.field_map, p.source.schema, rec.path,
                )

        t = write_table(p.source.schema, rows(), os.path.join(work, "eager.dset"),
                        validate=False)
        schema = p.source.schema
        for op in p.ops:
            if op.kind == "map":
                entry = resolve_transform(op.spec)
                if entry.infer_schema is not None:
                    schema = entry.infer_schema(schema, op.spec.params)
                t = map_table(t, op.spec, schema, cache_dir=work)
            elif op.kind == "filter":
                t = filter_table(t, op.spec, cache_dir=work)
            elif op.kind == "take":
                t = select(t, range(min(op.n, t.num_rows)), cache_dir=work)
            elif op.kind == "skip":
                t = select(t, range(min(op.n, t.num_rows), t.num_rows), cache_dir=work)
        eager = t.read_all()
        t.close()
    return streamed == eager
