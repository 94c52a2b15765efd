"""DSET1 on-disk columnar tables with memory-mapped random access.

File layout (all integers little-endian, every buffer 8-byte aligned):

    magic "DSET1\\0" | u16 version=1 | u32 schema_len | canonical schema JSON
    | zero padding to 8
    per batch:
        u64 row_count | u32 buffer_count | u64 x buffer_count buffer lengths
        | zero padding to 8 | buffer bytes, each zero-padded to 8
    footer:
        u64 batch_count | (u64 batch_offset, u64 cumulative_rows) x batch_count
        | 32-byte SHA-256 fingerprint | u32 footer_len | magic repeated

The fingerprint hashes the canonical schema JSON followed by every raw
(unpadded) buffer byte in file order, so identical schema+rows written twice
produce identical footers.

Per-column buffer layout inside a batch, in schema order (recursive for
nested types; a validity bitmap is always present, ceil(rows/8) bytes,
bit i of byte i//8 set when row i is non-null):

    int64/float64/class_label : validity, data (8 bytes per row)
    bool                      : validity, data (1 byte per row, 0 or 1)
    tensor                    : validity, data (row-major elements)
    string/binary             : validity, offsets ((rows+1) x u64), data
    sequence                  : validity, offsets, then inner-type buffers
                                over the flattened elements
    translation               : validity, then one string column per
                                language in sorted order
    record                    : validity, then each field's buffers

Null rows store type defaults (zeros, empty strings, empty lists) so the
layout stays uniform; the validity bitmap is authoritative.
"""

from __future__ import annotations

import hashlib
import json
import mmap
import os
import struct
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

import numpy as np

from . import instrumentation
from .errors import (
    BadMagic,
    ChecksumMismatch,
    OutOfBounds,
    SchemaMismatch,
    TruncatedFile,
    UnknownColumn,
    UnsupportedVersion,
)
from .schema import (
    Binary,
    Bool,
    ClassLabel,
    FeatureType,
    Float64,
    Int64,
    Record,
    Schema,
    Sequence,
    Tensor,
    Translation,
    Utf8String,
    schema_from_json,
    schema_to_json,
)

MAGIC = b"DSET1\x00"
FORMAT_VERSION = 1
DEFAULT_BATCH_ROWS = 10_000

_TENSOR_NP = {"int64": "<i8", "float32": "<f4", "float64": "<f8"}
_TENSOR_ITEM = {"int64": 8, "float32": 4, "float64": 8}


def _align8(n: int) -> int:
    return (n + 7) & ~7


def _pad8(out, n: int) -> None:
    if n % 8:
        out.write(b"\x00" * (8 - n % 8))


# ---------------------------------------------------------------------------
# column codec

def buffer_count(t: FeatureType) -> int:
    """Number of buffers one column of type *t* occupies in a batch."""
    if isinstance(t, (Int64, Float64, Bool, ClassLabel, Tensor)):
        return 2
    if isinstance(t, (Utf8String, Binary)):
        return 3
    if isinstance(t, Sequence):
        return 2 + buffer_count(t.inner)
    if isinstance(t, Translation):
        return 1 + 3 * len(t.languages)
    if isinstance(t, Record):
        return 1 + sum(buffer_count(ft) for _, ft in t.fields)
    raise TypeError(f"unhandled feature type {t!r}")


def _default(t: FeatureType) -> Any:
    if isinstance(t, (Int64, ClassLabel)):
        return 0
    if isinstance(t, Float64):
        return 0.0
    if isinstance(t, Bool):
        return False
    if isinstance(t, Utf8String):
        return ""
    if isinstance(t, Binary):
        return b""
    if isinstance(t, Sequence):
        return [_default(t.inner)] * t.fixed_length if t.fixed_length else []
    if isinstance(t, Translation):
        return {lang: "" for lang in t.languages}
    if isinstance(t, Tensor):
        return [0] * t.size
    if isinstance(t, Record):
        return {n: _default(ft) for n, ft in t.fields}
    raise TypeError(f"unhandled feature type {t!r}")


def _validity(values: list) -> bytes:
    bits = bytearray((len(values) + 7) // 8)
    for i, v in enumerate(values):
        if v is not None:
            bits[i >> 3] |= 1 << (i & 7)
    return bytes(bits)


def _offsets(lengths: list[int]) -> bytes:
    acc = np.zeros(len(lengths) + 1, dtype="<u8")
    np.cumsum(lengths, out=acc[1:])
    return acc.tobytes()


def encode_column(t: FeatureType, values: list, out: list[bytes]) -> None:
    """Append the buffers for one column of *values* (None = null) to *out*."""
    out.append(_validity(values))
    if isinstance(t, (Int64, ClassLabel)):
        out.append(np.asarray([0 if v is None else v for v in values], "<i8").tobytes())
    elif isinstance(t, Float64):
        out.append(np.asarray([0.0 if v is None else v for v in values], "<f8").tobytes())
    elif isinstance(t, Bool):
        out.append(np.asarray([bool(v) for v in values], "u1").tobytes())
    elif isinstance(t, (Utf8String, Binary)):
        if isinstance(t, Utf8String):
            parts = [b"" if v is None else v.encode("utf-8") for v in values]
        else:
            parts = [b"" if v is None else bytes(v) for v in values]
        out.append(_offsets([len(p) for p in parts]))
        out.append(b"".join(parts))
    elif isinstance(t, Sequence):
        elems: list = []
        lengths = []
        for v in values:
            if v is None:
                lengths.append(0)
            else:
                lengths.append(len(v))
                elems.extend(v)
        out.append(_offsets(lengths))
        encode_column(t.inner, elems, out)
    elif isinstance(t, Translation):
        for lang in t.languages:
            encode_column(Utf8String(), ["" if v is None else v[lang] for v in values], out)
    elif isinstance(t, Tensor):
        flat = np.asarray(
            [_default(t) if v is None else v for v in values], _TENSOR_NP[t.dtype]
        )
        out.append(flat.tobytes())
    elif isinstance(t, Record):
        for name, ftype in t.fields:
            encode_column(
                ftype, [_default(ftype) if v is None else v[name] for v in values], out
            )
    else:
        raise TypeError(f"unhandled feature type {t!r}")


def _valid_mask(vbuf, idx: np.ndarray) -> np.ndarray:
    vbytes = np.frombuffer(vbuf, dtype="u1")
    return (vbytes[idx >> 3] >> (idx & 7).astype("u1")) & 1


def decode_column(t: FeatureType, bufs: list, n_rows: int, idx: np.ndarray) -> list:
    """Decode the rows at local indices *idx* from one column's buffers.

    *bufs* holds exactly this column's buffers as memoryviews over the map;
    only the touched ranges are materialized.
    """
    cursor = [0]

    def take():
        b = bufs[cursor[0]]
        cursor[0] += 1
        return b

    return _decode(t, take, n_rows, idx)


def _decode(t: FeatureType, take, n_rows: int, idx: np.ndarray) -> list:
    vbuf = take()
    valid = _valid_mask(vbuf, idx)
    if isinstance(t, (Int64, ClassLabel)):
        arr = np.frombuffer(take(), dtype="<i8", count=n_rows)
        vals = arr[idx].tolist()
    elif isinstance(t, Float64):
        arr = np.frombuffer(take(), dtype="<f8", count=n_rows)
        vals = arr[idx].tolist()
    elif isinstance(t, Bool):
        arr = np.frombuffer(take(), dtype="u1", count=n_rows)
        vals = [bool(x) for x in arr[idx]]
    elif isinstance(t, (Utf8String, Binary)):
        instrumentation.bump("offsets_buffer_reads")
        offs = np.frombuffer(take(), dtype="<u8", count=n_rows + 1)
        starts, ends = offs[idx], offs[idx + 1]
        data = take()
        if isinstance(t, Utf8String):
            vals = [bytes(data[s:e]).decode("utf-8") for s, e in zip(starts, ends)]
        else:
            vals = [bytes(data[s:e]) for s, e in zip(starts, ends)]
    elif isinstance(t, Sequence):
        instrumentation.bump("offsets_buffer_reads")
        offs = np.frombuffer(take(), dtype="<u8", count=n_rows + 1)
        n_elems = int(offs[n_rows])
        child_bufs = [take() for _ in range(buffer_count(t.inner))]
        vals = []
        for i in idx:
            s, e = int(offs[i]), int(offs[i + 1])
            vals.append(
                decode_column(t.inner, child_bufs, n_elems, np.arange(s, e, dtype="<i8"))
            )
    elif isinstance(t, Translation):
        per_lang = [_decode(Utf8String(), take, n_rows, idx) for _ in t.languages]
        vals = [
            dict(zip(t.languages, texts)) for texts in zip(*per_lang)
        ] if per_lang else []
    elif isinstance(t, Tensor):
        arr = np.frombuffer(take(), dtype=_TENSOR_NP[t.dtype], count=n_rows * t.size)
        arr = arr.reshape(n_rows, t.size) if n_rows else arr.reshape(0, t.size)
        vals = arr[idx].tolist()
    elif isinstance(t, Record):
        per_field = [(name, _decode(ft, take, n_rows, idx)) for name, ft in t.fields]
        vals = [
            {name: col[i] for name, col in per_field} for i in range(len(idx))
        ]
    else:
        raise TypeError(f"unhandled feature type {t!r}")
    return [v if ok else None for v, ok in zip(vals, valid)]


# ---------------------------------------------------------------------------
# table

@dataclass
class _Batch:
    """One record batch: where it lives and, once parsed, its buffers."""

    mv: memoryview  # map of the backing file
    header_offset: int
    rows: int
    _buffers: list | None = None  # lazy: memoryview per buffer

    def buffers(self) -> list:
        if self._buffers is None:
            mv, off = self.mv, self.header_offset
            rows, nbuf = struct.unpack_from("<QI", mv, off)
            if rows != self.rows:
                raise TruncatedFile("batch header row count disagrees with footer")
            lengths = struct.unpack_from(f"<{nbuf}Q", mv, off + 12)
            pos = off + _align8(12 + 8 * nbuf)
            bufs = []
            for ln in lengths:
                bufs.append(mv[pos : pos + ln])
                pos += _align8(ln)
            self._buffers = bufs
        return self._buffers


class Table:
    """Immutable columnar table backed by one or more memory-mapped files.

    File-backed tables carry the footer fingerprint; virtual tables built by
    :func:`concat_tables` compute theirs on demand.
    """

    def __init__(
        self,
        schema: Schema,
        batches: list[_Batch],
        fingerprint: str | None,
        path: str | None = None,
        _own: tuple | None = None,
        _parents: list | None = None,
    ):
        self.schema = schema
        self._batches = batches
        self.cumulative_rows = []
        total = 0
        for b in batches:
            total += b.rows
            self.cumulative_rows.append(total)
        self._fingerprint = fingerprint
        self.path = path
        self._own = _own  # (mmap, file) pair to keep the map alive
        self._parents = _parents or []
        self._col_bufslice = {}
        pos = 0
        for c in schema.columns:
            n = buffer_count(c.type)
            self._col_bufslice[c.name] = (pos, pos + n)
            pos += n

    # -- basics ------------------------------------------------------------

    @property
    def num_rows(self) -> int:
        return self.cumulative_rows[-1] if self.cumulative_rows else 0

    @property
    def fingerprint(self) -> str:
        """Content address: SHA-256 of schema JSON plus all buffer bytes."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            schema_json = schema_to_json(self.schema).encode("utf-8")
            h.update(schema_json)
            for b in self._batches:
                for buf in b.buffers():
                    h.update(buf)
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    def close(self) -> None:
        """Release the map. Raises if numpy views handed out are still alive."""
        for b in self._batches:
            if b._buffers is not None:
                for buf in b._buffers:
                    buf.release()
                b._buffers = None
        if self._own is not None:
            mm, f, mv = self._own
            mv.release()
            mm.close()
            f.close()
            self._own = None

    def __len__(self) -> int:
        return self.num_rows

    # -- row access --------------------------------------------------------

    def _locate(self, row: int) -> tuple[int, int]:
        """Batch index and local row for a global row index."""
        b = bisect_right(self.cumulative_rows, row)
        start = self.cumulative_rows[b - 1] if b else 0
        return b, row - start

    def slice(self, start: int, end: int) -> list[dict]:
        """Rows [start, end) as dicts; decodes only the overlapping batches."""
        if not 0 <= start <= end <= self.num_rows:
            raise OutOfBounds(f"slice [{start}, {end}) outside table of {self.num_rows} rows")
        if start == end:
            return []
        out: list[dict] = []
        b, local = self._locate(start)
        remaining = end - start
        while remaining > 0:
            batch = self._batches[b]
            take = min(remaining, batch.rows - local)
            out.extend(self._decode_batch(batch, np.arange(local, local + take, dtype="<i8")))
            remaining -= take
            local = 0
            b += 1
        return out

    def row(self, i: int) -> dict:
        if not 0 <= i < self.num_rows:
            raise OutOfBounds(f"row {i} outside table of {self.num_rows} rows")
        return self.slice(i, i + 1)[0]

    def read_all(self) -> list[dict]:
        return self.slice(0, self.num_rows)

    def iter_rows(self) -> Iterator[dict]:
        """Stream every row batch by batch; memory stays one batch deep."""
        for batch in self._batches:
            yield from self._decode_batch(batch, np.arange(batch.rows, dtype="<i8"))

    def rows_at(self, indices: Iterable[int]) -> list[dict]:
        """Gather rows by global index (duplicates allowed), batch-grouped."""
        idx = np.asarray(list(indices), dtype="<i8")
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_rows):
            raise OutOfBounds("gather index outside table")
        out: list[dict | None] = [None] * len(idx)
        if not len(idx):
            return []
        starts = np.array([0] + self.cumulative_rows[:-1], dtype="<i8")
        batch_of = np.searchsorted(np.asarray(self.cumulative_rows, dtype="<i8"), idx, "right")
        for b in np.unique(batch_of):
            mask = batch_of == b
            local = idx[mask] - starts[b]
            rows = self._decode_batch(self._batches[b], local)
            for pos, r in zip(np.nonzero(mask)[0], rows):
                out[pos] = r
        return out  # type: ignore[return-value]

    def _decode_batch(self, batch: _Batch, idx: np.ndarray) -> list[dict]:
        bufs = batch.buffers()
        cols = {}
        for c in self.schema.columns:
            lo, hi = self._col_bufslice[c.name]
            cols[c.name] = decode_column(c.type, bufs[lo:hi], batch.rows, idx)
        names = self.schema.names()
        return [dict(zip(names, vals)) for vals in zip(*(cols[n] for n in names))]

    # -- column access -----------------------------------------------------

    def get_column(self, name: str) -> Iterator[Any]:
        """Iterate one column's values; fixed-width columns read the mapped
        data buffer directly and never touch offsets."""
        col = self.schema.column(name)
        for batch in self._batches:
            bufs = batch.buffers()
            lo, hi = self._col_bufslice[name]
            yield from decode_column(
                col.type, bufs[lo:hi], batch.rows, np.arange(batch.rows, dtype="<i8")
            )

    def column_views(self, name: str) -> Iterator[np.ndarray]:
        """Zero-copy numpy views of a fixed-width column, one per batch.

        Valid for int64/float64/bool/class_label/tensor columns while the
        table stays open.
        """
        col = self.schema.column(name)
        t = col.type
        if isinstance(t, (Int64, ClassLabel)):
            dtype, per_row = "<i8", 1
        elif isinstance(t, Float64):
            dtype, per_row = "<f8", 1
        elif isinstance(t, Bool):
            dtype, per_row = "u1", 1
        elif isinstance(t, Tensor):
            dtype, per_row = _TENSOR_NP[t.dtype], t.size
        else:
            raise UnknownColumn(f"column {name!r} is not fixed-width")
        lo, _ = self._col_bufslice[name]
        for batch in self._batches:
            data = batch.buffers()[lo + 1]
            arr = np.frombuffer(data, dtype=dtype, count=batch.rows * per_row)
            yield arr.reshape(batch.rows, t.size) if isinstance(t, Tensor) else arr


# ---------------------------------------------------------------------------
# writing

def write_table(
    schema: Schema,
    rows: Iterable[dict],
    path: str,
    batch_rows: int = DEFAULT_BATCH_ROWS,
    validate: bool = True,
) -> Table:
    """Write *rows* to a DSET1 file at *path* and return it opened.

    Rows are buffered into batches of at most *batch_rows*; the write goes to
    a temp file renamed into place, so concurrent writers of the same path
    leave one intact winner.
    """
    if batch_rows < 1:
        raise ValueError("batch_rows must be >= 1")
    schema_json = schema_to_json(schema).encode("utf-8")
    hasher = hashlib.sha256(schema_json)
    tmp = f"{path}.tmp.{os.getpid()}"
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    batch_meta: list[tuple[int, int]] = []  # (file offset, cumulative rows)
    total = 0
    try:
        with open(tmp, "wb") as out:
            out.write(MAGIC)
            out.write(struct.pack("<HI", FORMAT_VERSION, len(schema_json)))
            out.write(schema_json)
            _pad8(out, out.tell())

            pending: list[dict] = []

            def flush():
                nonlocal total
                if not pending:
                    return
                bufs: list[bytes] = []
                cols = {c.name: [] for c in schema.columns}
                for r in pending:
                    for c in schema.columns:
                        cols[c.name].append(r.get(c.name))
                for c in schema.columns:
                    encode_column(c.type, cols[c.name], bufs)
                offset = out.tell()
                out.write(struct.pack("<QI", len(pending), len(bufs)))
                out.write(struct.pack(f"<{len(bufs)}Q", *(len(b) for b in bufs)))
                _pad8(out, out.tell())
                for b in bufs:
                    out.write(b)
                    hasher.update(b)
                    _pad8(out, len(b))
                total += len(pending)
                batch_meta.append((offset, total))
                pending.clear()

            for r in rows:
                if validate:
                    schema.validate_row(r)
                pending.append(r)
                if len(pending) >= batch_rows:
                    flush()
            flush()

            footer = struct.pack("<Q", len(batch_meta))
            for offset, cum in batch_meta:
                footer += struct.pack("<QQ", offset, cum)
            footer += hasher.digest()
            out.write(footer)
            out.write(struct.pack("<I", len(footer)))
            out.write(MAGIC)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return open_table(path)


def open_table(path: str, verify: bool = False) -> Table:
    """Memory-map a DSET1 file, reading only the header and footer.

    With *verify*, the content fingerprint is recomputed and checked against
    the footer.
    """
    f = open(path, "rb")
    try:
        size = os.fstat(f.fileno()).st_size
        if size < len(MAGIC) + 6 + 4 + len(MAGIC):
            raise TruncatedFile(f"{path}: {size} bytes is too small for a DSET1 file")
        mm = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
    except BaseException:
        f.close()
        raise
    mv = memoryview(mm)
    batches: list[_Batch] = []
    try:
        if bytes(mv[: len(MAGIC)]) != MAGIC:
            raise BadMagic(f"{path} is not a DSET1 file")
        version, schema_len = struct.unpack_from("<HI", mv, len(MAGIC))
        if version != FORMAT_VERSION:
            raise UnsupportedVersion(f"format version {version}, supported: {FORMAT_VERSION}")
        header_end = _align8(len(MAGIC) + 6 + schema_len)
        if header_end > size:
            raise TruncatedFile(f"{path}: schema extends past end of file")
        schema = schema_from_json(
            bytes(mv[len(MAGIC) + 6 : len(MAGIC) + 6 + schema_len]).decode("utf-8")
        )

        if bytes(mv[size - len(MAGIC) :]) != MAGIC:
            raise TruncatedFile(f"{path}: footer magic missing or damaged")
        (footer_len,) = struct.unpack_from("<I", mv, size - len(MAGIC) - 4)
        footer_start = size - len(MAGIC) - 4 - footer_len
        if footer_len < 40 or footer_start < header_end:
            raise TruncatedFile(f"{path}: footer length {footer_len} is inconsistent")
        (batch_count,) = struct.unpack_from("<Q", mv, footer_start)
        if footer_len != 40 + 16 * batch_count:
            raise TruncatedFile(f"{path}: footer length does not match batch count")

        prev_cum = 0
        for i in range(batch_count):
            offset, cum = struct.unpack_from("<QQ", mv, footer_start + 8 + 16 * i)
            if offset >= footer_start or cum <= prev_cum:
                raise TruncatedFile(f"{path}: batch directory entry {i} is invalid")
            batches.append(_Batch(mv, offset, cum - prev_cum))
            prev_cum = cum
        digest = bytes(mv[footer_start + 8 + 16 * batch_count : footer_start + footer_len])
        fingerprint = digest.hex()

        table = Table(schema, batches, fingerprint, path=path, _own=(mm, f, mv))
        if verify:
            h = hashlib.sha256(schema_to_json(schema).encode("utf-8"))
            for b in batches:
                for buf in b.buffers():
                    h.update(buf)
            if h.hexdigest() != fingerprint:
                raise ChecksumMismatch(f"{path}: content hash does not match footer fingerprint")
        return table
    except BaseException:
        for b in batches:
            if b._buffers is not None:
                for buf in b._buffers:
                    buf.release()
                b._buffers = None
        mv.release()
        mm.close()
        f.close()
        raise


def concat_tables(tables: list[Table]) -> Table:
    """Concatenate by batch reference; no rows are re-encoded."""
    if not tables:
        raise ValueError("need at least one table")
    schema = tables[0].schema
    for t in tables[1:]:
        if t.schema != schema:
            raise SchemaMismatch("cannot concatenate tables with different schemas")
    batches = [b for t in tables for b in t._batches]
    return Table(schema, batches, None, _parents=list(tables))


# ---------------------------------------------------------------------------
# dataset metadata

@dataclass
class DatasetInfo:
    """Descriptive metadata persisted next to a dataset's split tables."""

    description: str = ""
    citation: str = ""
    version: str = ""
    license: str = ""
    split_rows: dict[str, int] = field(default_factory=dict)
    download_checksums: dict[str, str] = field(default_factory=dict)
    recommended_metrics: list[str] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "description": self.description,
            "citation": self.citation,
            "version": self.version,
            "license": self.license,
            "split_rows": dict(self.split_rows),
            "download_checksums": dict(self.download_checksums),
            "recommended_metrics": list(self.recommended_metrics),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DatasetInfo":
        return cls(
            description=obj.get("description", ""),
            citation=obj.get("citation", ""),
            version=obj.get("version", ""),
            license=obj.get("license", ""),
            split_rows=dict(obj.get("split_rows", {})),
            download_checksums=dict(obj.get("download_checksums", {})),
            recommended_metrics=list(obj.get("recommended_metrics", [])),
        )


class DatasetDict:
    """Named split tables plus their shared DatasetInfo."""

    def __init__(self, splits: dict[str, Table], info: DatasetInfo):
        for name, table in splits.items():
            declared = info.split_rows.get(name)
            if declared is not None and declared != table.num_rows:
                raise SchemaMismatch(
                    f"info says split {name!r} has {declared} rows, table has {table.num_rows}"
                )
        self.splits = dict(splits)
        self.info = info

    def __getitem__(self, split: str) -> Table:
        return self.splits[split]

    def __iter__(self):
        return iter(self.splits)

    def __len__(self) -> int:
        return len(self.splits)

    def items(self):
        return self.splits.items()
