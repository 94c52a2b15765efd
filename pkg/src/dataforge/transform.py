"""Dataset manipulation: map, filter, sort, shuffle, select, split.

Every operation derives a fingerprint from the input table's content address
and the operation's own parameters, then materializes its result as a full
table file under ``<cache>/transforms/<fingerprint>.dset``. Re-running the
same chain finds the file, validates its footer checksum, and returns it
without invoking any user function.

Parallel map and filter shard the input into contiguous row ranges, one
worker per range group, and merge the per-worker outputs back in range
order through a single rewrite. The merged file depends only on the logical
row sequence, so worker count never changes the output bytes.

Transform identity is an explicit (id, version) registration rather than a
hash of the function's code: bump the version when behavior changes.
"""

from __future__ import annotations

import multiprocessing
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator

import numpy as np

from .builder import resolve_cache_dir
from .errors import (
    BadMagic,
    ChecksumMismatch,
    OutOfBounds,
    SchemaMismatch,
    TooFewRows,
    TransformError,
    TruncatedFile,
    UnknownTransform,
    UnsupportedVersion,
    UnorderableType,
    ValueTypeError,
)
from .fingerprint import canonical_json, hash_parts, sha256_hex
from .instrumentation import bump
from .rng import permutation
from .schema import (
    Bool,
    ClassLabel,
    Column,
    Int64,
    Float64,
    Schema,
    Sequence,
    Utf8String,
)
from .store import Table, open_table, write_table

OP_KINDS = ("map", "filter", "sort", "shuffle", "select", "train_test_split")

DEFAULT_BATCH_SIZE = 1_000

_GATHER_CHUNK = 8_192


@dataclass(frozen=True)
class TransformSpec:
    """What to run and how; the cache key is derived from every field."""

    op_kind: str
    transform_id: str = ""
    transform_version: str = ""
    params: dict = field(default_factory=dict)
    batched: bool = False
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self):
        if self.op_kind not in OP_KINDS:
            raise ValueError(f"unknown op_kind {self.op_kind!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def chain_fingerprint(parent: str, spec: TransformSpec) -> str:
    """Fingerprint of applying *spec* to a table fingerprinted *parent*.

    Each field is framed with its length before hashing, so adjacent fields
    can never blur together and chains are order-sensitive.
    """
    return hash_parts(
        parent,
        spec.op_kind,
        spec.transform_id,
        spec.transform_version,
        canonical_json(spec.params),
        "true" if spec.batched else "false",
        str(spec.batch_size),
    )


# ---------------------------------------------------------------------------
# registry

@dataclass(frozen=True)
class _Entry:
    fn: Callable
    version: str
    infer_schema: Callable[[Schema, dict], Schema] | None


_REGISTRY: dict[str, _Entry] = {}


def register_transform(
    transform_id: str,
    fn: Callable,
    version: str = "1",
    infer_schema: Callable[[Schema, dict], Schema] | None = None,
) -> None:
    """Register *fn* under a stable name.

    For map with batched=False the function is called as ``fn(row, params)``
    and returns a row; with batched=True as ``fn(rows, params)`` returning a
    list of any length. Filter predicates are always ``fn(row, params) ->
    bool``. *infer_schema* lets the command line derive the output schema.
    """
    _REGISTRY[transform_id] = _Entry(fn, version, infer_schema)


def get_transform(transform_id: str) -> _Entry:
    try:
        return _REGISTRY[transform_id]
    except KeyError:
        raise UnknownTransform(f"no transform registered as {transform_id!r}") from None


def spec_for(transform_id: str, op_kind: str = "map", params: dict | None = None,
             batched: bool = False, batch_size: int = DEFAULT_BATCH_SIZE) -> TransformSpec:
    """Build a TransformSpec whose version comes from the registry."""
    entry = get_transform(transform_id)
    return TransformSpec(op_kind, transform_id, entry.version,
                         dict(params or {}), batched, batch_size)


# ---------------------------------------------------------------------------
# cache plumbing

def _cache_path(cache_dir: str, fingerprint: str) -> str:
    return os.path.join(cache_dir, "transforms", f"{fingerprint}.dset")


def _open_cached(path: str) -> Table | None:
    """Open a cache artifact if present and intact; drop it if corrupt."""
    if not os.path.exists(path):
        return None
    try:
        return open_table(path, verify=True)
    except (BadMagic, ChecksumMismatch, TruncatedFile, UnsupportedVersion, ValueError, OSError):
        os.unlink(path)
        return None


def _materialize(
    out_schema: Schema,
    rows: Iterable[dict],
    path: str,
) -> Table:
    return write_table(out_schema, rows, path, validate=False)


# ---------------------------------------------------------------------------
# map / filter execution

def _batch_grid(n_rows: int, batch_size: int) -> list[tuple[int, int]]:
    return [(s, min(s + batch_size, n_rows)) for s in range(0, n_rows, batch_size)]


def _apply_ranges(
    t: Table,
    ranges: list[tuple[int, int]],
    spec: TransformSpec,
    fn: Callable,
    out_schema: Schema,
) -> Iterator[dict]:
    """Yield validated output rows for the given ranges, in range order."""
    for start, end in ranges:
        rows = t.slice(start, end)
        if spec.op_kind == "map":
            if spec.batched:
                _COUNTS["invocations"] += 1
                try:
                    out = fn(rows, spec.params)
                except Exception as e:
                    raise TransformError(f"map function failed: {e}", (start, end)) from e
            else:
                out = []
                for r in rows:
                    _COUNTS["invocations"] += 1
                    try:
                        out.append(fn(r, spec.params))
                    except Exception as e:
                        raise TransformError(f"map function failed: {e}", (start, end)) from e
        else:
            out = []
            for r in rows:
                _COUNTS["invocations"] += 1
                try:
                    keep = fn(r, spec.params)
                except Exception as e:
                    raise TransformError(f"predicate failed: {e}", (start, end)) from e
                if keep:
                    out.append(r)
        for r in out:
            try:
                out_schema.validate_row(r)
            except (ValueTypeError, ValueError) as e:
                raise SchemaMismatch(f"output row rejected in rows [{start}, {end}): {e}") from e
            yield r


# Per-process invocation tally; workers report theirs back over the pipe.
_COUNTS = {"invocations": 0}


def _worker(t, ranges, spec, fn, out_schema, shard_path, conn):
    try:
        _COUNTS["invocations"] = 0
        rows = _apply_ranges(t, ranges, spec, fn, out_schema)
        write_table(out_schema, rows, shard_path, validate=False).close()
        conn.send(("ok", _COUNTS["invocations"]))
    except TransformError as e:
        conn.send(("transform_error", str(e), e.batch_range))
    except SchemaMismatch as e:
        conn.send(("schema_mismatch", str(e), None))
    except BaseException as e:
        conn.send(("error", f"{type(e).__name__}: {e}", None))
    finally:
        conn.close()


def _split_groups(n_items: int, workers: int) -> list[tuple[int, int]]:
    """Split n_items into `workers` contiguous groups, sizes as even as possible."""
    base, extra = divmod(n_items, workers)
    groups, at = [], 0
    for w in range(workers):
        size = base + (1 if w < extra else 0)
        groups.append((at, at + size))
        at += size
    return groups


def resolve_transform(spec: TransformSpec) -> _Entry:
    """Registry lookup that also insists the registered version matches."""
    entry = get_transform(spec.transform_id)
    if entry.version != spec.transform_version:
        raise UnknownTransform(
            f"{spec.transform_id!r} registered at version {entry.version!r}, "
            f"spec asks for {spec.transform_version!r}"
        )
    return entry


def _run_map_like(
    t: Table,
    spec: TransformSpec,
    out_schema: Schema,
    workers: int,
    cache_dir: str,
) -> Table:
    entry = resolve_transform(spec)
    fp = chain_fingerprint(t.fingerprint, spec)
    path = _cache_path(cache_dir, fp)
    cached = _open_cached(path)
    if cached is not None:
        return cached

    grid = _batch_grid(t.num_rows, spec.batch_size)
    workers = max(1, min(workers, len(grid) or 1))
    if workers == 1:
        _COUNTS["invocations"] = 0
        try:
            result = _materialize(out_schema, _apply_ranges(t, grid, spec, entry.fn, out_schema), path)
        finally:
            bump("transform_invocations", _COUNTS["invocations"])
        return result

    groups = _split_groups(len(grid), workers)
    ctx = multiprocessing.get_context("fork")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    shard_dir = tempfile.mkdtemp(prefix=f"shards-{fp[:12]}-", dir=os.path.dirname(path))
    procs, conns, shards = [], [], []
    try:
        for w, (lo, hi) in enumerate(groups):
            shard = os.path.join(shard_dir, f"{w}.dset")
            shards.append(shard)
            parent_conn, child_conn = ctx.Pipe(duplex=False)
            p = ctx.Process(
                target=_worker,
                args=(t, grid[lo:hi], spec, entry.fn, out_schema, shard, child_conn),
            )
            p.start()
            child_conn.close()
            procs.append(p)
            conns.append(parent_conn)
        failure = None
        for p, conn in zip(procs, conns):
            try:
                msg = conn.recv()
            except EOFError:
                msg = ("error", "worker exited without reporting", None)
            p.join()
            if msg[0] == "ok":
                bump("transform_invocations", msg[1])
            elif failure is None:
                failure = msg
        if failure is not None:
            kind, text, extra = failure
            if kind == "transform_error":
                raise TransformError(text, extra)
            if kind == "schema_mismatch":
                raise SchemaMismatch(text)
            raise TransformError(text, None)

        parts = [open_table(s) for s in shards]
        try:
            def merged():
                for part in parts:
                    yield from part.iter_rows()

            return _materialize(out_schema, merged(), path)
        finally:
            for part in parts:
                part.close()
    finally:
        for p in procs:
            if p.is_alive():
                p.terminate()
                p.join()
        shutil.rmtree(shard_dir, ignore_errors=True)


def map_table(
    t: Table,
    spec: TransformSpec,
    out_schema: Schema,
    workers: int = 1,
    cache_dir: str | None = None,
) -> Table:
    """Apply a registered function to every row (or batch) of *t*.

    Output row order follows input range order regardless of *workers*; the
    result is cached by chain fingerprint, so a second identical call never
    invokes the function.
    """
    if spec.op_kind != "map":
        raise ValueError(f"spec.op_kind is {spec.op_kind!r}, expected 'map'")
    return _run_map_like(t, spec, out_schema, workers, resolve_cache_dir(cache_dir))


def filter_table(
    t: Table,
    spec: TransformSpec,
    workers: int = 1,
    cache_dir: str | None = None,
) -> Table:
    """Keep rows where the registered predicate returns true, order preserved."""
    if spec.op_kind != "filter":
        raise ValueError(f"spec.op_kind is {spec.op_kind!r}, expected 'filter'")
    return _run_map_like(t, spec, t.schema, workers, resolve_cache_dir(cache_dir))


# ---------------------------------------------------------------------------
# gather-backed operations

def _gathered(t: Table, indices) -> Iterator[dict]:
    for at in range(0, len(indices), _GATHER_CHUNK):
        yield from t.rows_at(indices[at:at + _GATHER_CHUNK])


def _cached_gather(t: Table, op_kind: str, params: dict, indices, cache_dir: str | None) -> Table:
    spec = TransformSpec(op_kind, params=params)
    path = _cache_path(resolve_cache_dir(cache_dir), chain_fingerprint(t.fingerprint, spec))
    cached = _open_cached(path)
    if cached is not None:
        return cached
    return _materialize(t.schema, _gathered(t, indices), path)


ORDERABLE = (Int64, Float64, Bool, Utf8String, ClassLabel)


def sort(t: Table, column: str, descending: bool = False,
         cache_dir: str | None = None) -> Table:
    """Stable sort by one column.

    Ascending puts nulls first; descending puts them last. NaN sorts after
    every number in both directions.
    """
    col = t.schema.column(column)
    if not isinstance(col.type, ORDERABLE):
        raise UnorderableType(f"column {column!r} of type {type(col.type).__name__} is not orderable")
    zero: Any = "" if isinstance(col.type, Utf8String) else 0
    vals = list(t.get_column(column))

    if descending:
        # ranks chosen so that reversing [nulls][NaN][values asc] gives
        # [values desc][NaN][nulls]
        def key(i):
            v = vals[i]
            if v is None:
                return (0, zero)
            if v != v:
                return (1, zero)
            return (2, v)

        order = sorted(range(len(vals)), key=key, reverse=True)
    else:
        def key(i):
            v = vals[i]
            if v is None:
                return (0, zero)
            if v != v:
                return (2, zero)
            return (1, v)

        order = sorted(range(len(vals)), key=key)
    return _cached_gather(t, "sort", {"column": column, "descending": descending}, order, cache_dir)


def shuffle(t: Table, seed: int, cache_dir: str | None = None) -> Table:
    """Reorder rows by a seeded Fisher-Yates permutation; same seed, same order."""
    perm = permutation(t.num_rows, seed)
    return _cached_gather(t, "shuffle", {"seed": seed}, perm, cache_dir)


def select(t: Table, indices: Iterable[int], cache_dir: str | None = None) -> Table:
    """Output row k = input row indices[k]; duplicates allowed."""
    idx = [int(i) for i in indices]
    for i in idx:
        if not 0 <= i < t.num_rows:
            raise OutOfBounds(f"index {i} outside table of {t.num_rows} rows")
    digest = sha256_hex(np.asarray(idx, dtype="<i8").tobytes())
    return _cached_gather(t, "select", {"indices_sha256": digest}, idx, cache_dir)


def train_test_split(t: Table, test_fraction: float, seed: int,
                     cache_dir: str | None = None) -> dict[str, Table]:
    """Disjoint seeded split; test gets round(fraction * rows) rows, never 0 or all."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be strictly between 0 and 1")
    n = t.num_rows
    if n < 2:
        raise TooFewRows(f"need at least 2 rows to split, have {n}")
    # half-up rounding, then clamp so both sides stay non-empty
    test_n = min(max(int(test_fraction * n + 0.5), 1), n - 1)
    perm = permutation(n, seed)
    base = {"seed": seed, "test_fraction": test_fraction}
    return {
        "train": _cached_gather(t, "train_test_split", {**base, "part": "train"},
                                perm[test_n:], cache_dir),
        "test": _cached_gather(t, "train_test_split", {**base, "part": "test"},
                               perm[:test_n], cache_dir),
    }


# ---------------------------------------------------------------------------
# built-in transforms, addressable by name from the command line

def _identity(row, params):
    return row


def _lowercase(row, params):
    col = params["column"]
    out = dict(row)
    if out.get(col) is not None:
        out[col] = out[col].lower()
    return out


def _concat_fields(row, params):
    cols = params["columns"]
    sep = params.get("separator", " ")
    out = dict(row)
    out[params["into"]] = sep.join("" if row.get(c) is None else str(row[c]) for c in cols)
    return out


def _whitespace_tokenize(row, params):
    col = params["column"]
    out = dict(row)
    text = row.get(col)
    out[params.get("into", col + "_tokens")] = [] if text is None else text.split()
    return out


def _length(row, params):
    col = params["column"]
    v = row.get(col)
    out = dict(row)
    out[params.get("into", col + "_length")] = 0 if v is None else len(v)
    return out


def _same_schema(schema: Schema, params: dict) -> Schema:
    return schema


def _added_column(default_suffix: str, make_type) -> Callable:
    def infer(schema: Schema, params: dict) -> Schema:
        into = params.get("into", params["column"] + default_suffix)
        cols = [c for c in schema.columns if c.name != into]
        cols.append(Column(into, make_type(), nullable=False))
        return Schema(cols)

    return infer


register_transform("identity", _identity, version="1", infer_schema=_same_schema)
register_transform("lowercase", _lowercase, version="1", infer_schema=_same_schema)
register_transform(
    "concat_fields", _concat_fields, version="1",
    infer_schema=lambda schema, params: Schema(
        [c for c in schema.columns if c.name != params["into"]]
        + [Column(params["into"], Utf8String(), nullable=False)]
    ),
)
register_transform(
    "whitespace_tokenize", _whitespace_tokenize, version="1",
    infer_schema=_added_column("_tokens", lambda: Sequence(Utf8String())),
)
register_transform(
    "length", _length, version="1",
    infer_schema=_added_column("_length", Int64),
)
