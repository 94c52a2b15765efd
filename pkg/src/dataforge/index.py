"""Text and vector indexes over table columns, with exact top-k queries.

The text side is a classic inverted index scored by BM25 (k1=1.5, b=0.75,
the +1 IDF variant, natural log). The vector side is an exhaustive scan:
exactness is the point, since it doubles as its own oracle. Both index
kinds serialize to small self-describing files so a query session can reuse
the build across processes.

Tokenization is fixed and versioned inside the file: unicode lowercase,
keep maximal runs of letters and digits, drop everything else.
"""

from __future__ import annotations

import json
import os
import re
import struct
from dataclasses import dataclass, field
from math import log
from typing import Iterable

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    TruncatedFile,
    UnsupportedVersion,
    WrongType,
    ZeroVector,
)
from .schema import Tensor, Utf8String
from .store import Table

K1 = 1.5
B = 0.75

TOKENIZER_VERSION = 1
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

TEXT_MAGIC = b"TIX1"
VECTOR_MAGIC = b"VIX1"
INDEX_FORMAT_VERSION = 1

METRICS = ("cosine", "inner_product", "l2")


def tokenize(text: str) -> list[str]:
    """Lowercase and keep runs of letters/digits; underscores split too."""
    return _TOKEN_RE.findall(text.lower())


# ---------------------------------------------------------------------------
# text index

@dataclass
class InvertedIndex:
    column: str
    postings: dict[str, list[tuple[int, int]]]  # term -> [(row id, tf)], row-sorted
    doc_lengths: list[int]
    tokenizer_version: int = TOKENIZER_VERSION

    @property
    def n_docs(self) -> int:
        return len(self.doc_lengths)

    @property
    def avgdl(self) -> float:
        return sum(self.doc_lengths) / self.n_docs if self.doc_lengths else 0.0


def build_text_index(t: Table, column: str) -> InvertedIndex:
    """Index one string column; null rows become empty documents."""
    col = t.schema.column(column)
    if not isinstance(col.type, Utf8String):
        raise WrongType(f"column {column!r} is {type(col.type).__name__}, need Utf8String")
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    for row_id, text in enumerate(t.get_column(column)):
        tokens = tokenize(text) if text is not None else []
        doc_lengths.append(len(tokens))
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((row_id, tf))
    return InvertedIndex(column, postings, doc_lengths)


def idf(n_docs: int, n_with_term: int) -> float:
    return log((n_docs - n_with_term + 0.5) / (n_with_term + 0.5) + 1.0)


def bm25_query(ix: InvertedIndex, query: str, k: int) -> list[tuple[int, float]]:
    """Top-k rows by BM25, ties broken by ascending row id.

    Query tokens count with multiplicity: a term repeated in the query
    contributes its summand once per occurrence. Unknown terms contribute
    nothing; rows scoring zero are omitted.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if ix.n_docs == 0:
        return []
    avgdl = ix.avgdl
    scores: dict[int, float] = {}
    for term in tokenize(query):
        plist = ix.postings.get(term)
        if not plist:
            continue
        w = idf(ix.n_docs, len(plist))
        for row_id, tf in plist:
            norm = 1.0 - B + B * (ix.doc_lengths[row_id] / avgdl) if avgdl else 1.0
            scores[row_id] = scores.get(row_id, 0.0) + w * tf * (K1 + 1.0) / (tf + K1 * norm)
    ranked = sorted(
        ((row, s) for row, s in scores.items() if s > 0.0),
        key=lambda kv: (-kv[1], kv[0]),
    )
    return ranked[:k]


# ---------------------------------------------------------------------------
# vector index

@dataclass
class VectorIndex:
    column: str
    metric: str
    vectors: np.ndarray = field(repr=False)  # (n, d) float32, normalized for cosine

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def n_vectors(self) -> int:
        return int(self.vectors.shape[0])


def build_vector_index(t: Table, column: str, metric: str) -> VectorIndex:
    """Copy a rank-1 float tensor column into a dense float32 matrix."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    col = t.schema.column(column)
    tpe = col.type
    if not isinstance(tpe, Tensor) or len(tpe.shape) != 1 or tpe.dtype == "int64":
        raise WrongType(
            f"column {column!r} must be a rank-1 float tensor, got {type(tpe).__name__}"
        )
    d = tpe.shape[0]
    parts = [np.asarray(v, dtype="<f4") for v in t.column_views(column)]
    mat = np.concatenate(parts, axis=0) if parts else np.zeros((0, d), dtype="<f4")
    mat = np.ascontiguousarray(mat, dtype="<f4").copy()
    if col.nullable:
        for row_id, v in enumerate(t.get_column(column)):
            if v is None:
                raise WrongType(f"row {row_id} of {column!r} is null; cannot index")
    if metric == "cosine":
        norms = np.linalg.norm(mat, axis=1)
        zero = np.nonzero(norms == 0.0)[0]
        if zero.size:
            raise ZeroVector(f"row {int(zero[0])} has zero norm under cosine")
        mat = mat / norms[:, None]
    return VectorIndex(column, metric, mat)


def knn_query(ix: VectorIndex, q: Iterable[float], k: int) -> list[tuple[int, float]]:
    """Exact top-k by exhaustive scan; returns min(k, n) results.

    Cosine and inner product rank by descending score, l2 by ascending
    distance; equal keys fall back to ascending row id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    qv = np.asarray(list(q), dtype="<f4")
    if qv.ndim != 1 or qv.shape[0] != ix.dim:
        raise DimensionMismatch(f"query has {qv.size} dims, index has {ix.dim}")
    if ix.n_vectors == 0:
        return []
    if ix.metric == "cosine":
        qn = float(np.linalg.norm(qv))
        if qn == 0.0:
            raise ZeroVector("zero query vector under cosine")
        keys = ix.vectors @ (qv / qn)
        order = np.argsort(-keys, kind="stable")
    elif ix.metric == "inner_product":
        keys = ix.vectors @ qv
        order = np.argsort(-keys, kind="stable")
    else:
        keys = np.linalg.norm(ix.vectors - qv, axis=1)
        order = np.argsort(keys, kind="stable")
    top = order[:k]
    return [(int(i), float(keys[i])) for i in top]


# ---------------------------------------------------------------------------
# on-disk form

def index_path(cache_dir: str, table_fingerprint: str, column: str, kind: str) -> str:
    suffix = {"text": "tix", "vector": "vix"}[kind]
    return os.path.join(cache_dir, "indexes", table_fingerprint, f"{column}.{suffix}")


def _write_header(f, magic: bytes, meta: dict) -> None:
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    f.write(magic)
    f.write(struct.pack("<HI", INDEX_FORMAT_VERSION, len(blob)))
    f.write(blob)


def _read_header(f, magic: bytes) -> dict:
    head = f.read(len(magic))
    if head != magic:
        raise BadMagic(f"expected {magic!r}, found {head!r}")
    fixed = f.read(6)
    if len(fixed) != 6:
        raise TruncatedFile("index header cut short")
    version, meta_len = struct.unpack("<HI", fixed)
    if version != INDEX_FORMAT_VERSION:
        raise UnsupportedVersion(f"index format version {version}")
    blob = f.read(meta_len)
    if len(blob) != meta_len:
        raise TruncatedFile("index metadata cut short")
    return json.loads(blob)


def save_text_index(ix: InvertedIndex, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as f:
        _write_header(f, TEXT_MAGIC, {
            "column": ix.column,
            "k1": K1,
            "b": B,
            "tokenizer_version": ix.tokenizer_version,
            "n_docs": ix.n_docs,
        })
        f.write(struct.pack(f"<{ix.n_docs}I", *ix.doc_lengths))
        for term in sorted(ix.postings):
            tb = term.encode("utf-8")
            plist = ix.postings[term]
            f.write(struct.pack("<I", len(tb)))
            f.write(tb)
            f.write(struct.pack("<Q", len(plist)))
            for row_id, tf in plist:
                f.write(struct.pack("<QI", row_id, tf))
    os.replace(tmp, path)


def load_text_index(path: str) -> InvertedIndex:
    with open(path, "rb") as f:
        meta = _read_header(f, TEXT_MAGIC)
        n = meta["n_docs"]
        raw = f.read(4 * n)
        if len(raw) != 4 * n:
            raise TruncatedFile("document lengths cut short")
        doc_lengths = list(struct.unpack(f"<{n}I", raw))
        postings: dict[str, list[tuple[int, int]]] = {}
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise TruncatedFile("term header cut short")
            (term_len,) = struct.unpack("<I", head)
            term = f.read(term_len).decode("utf-8")
            (count,) = struct.unpack("<Q", f.read(8))
            body = f.read(12 * count)
            if len(body) != 12 * count:
                raise TruncatedFile(f"postings for {term!r} cut short")
            plist = [
                struct.unpack_from("<QI", body, 12 * i) for i in range(count)
            ]
            postings[term] = [(int(r), int(tf)) for r, tf in plist]
    return InvertedIndex(meta["column"], postings, doc_lengths, meta["tokenizer_version"])


def save_vector_index(ix: VectorIndex, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as f:
        _write_header(f, VECTOR_MAGIC, {
            "column": ix.column,
            "metric": ix.metric,
            "dim": ix.dim,
            "count": ix.n_vectors,
        })
        f.write(np.ascontiguousarray(ix.vectors, dtype="<f4").tobytes())
    os.replace(tmp, path)


def load_vector_index(path: str) -> VectorIndex:
    with open(path, "rb") as f:
        meta = _read_header(f, VECTOR_MAGIC)
        want = 4 * meta["count"] * meta["dim"]
        raw = f.read(want)
        if len(raw) != want:
            raise TruncatedFile("vector payload cut short")
        mat = np.frombuffer(raw, dtype="<f4").reshape(meta["count"], meta["dim"]).copy()
    return VectorIndex(meta["column"], meta["metric"], mat)
