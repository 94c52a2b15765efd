"""Inverted-index BM25 and exhaustive kNN against independent oracles."""

import math
import random
import re

import numpy as np
import pytest

from dataforge.errors import (
    DimensionMismatch,
    UnknownColumn,
    WrongType,
    ZeroVector,
)
from dataforge.index import (
    B,
    K1,
    InvertedIndex,
    VectorIndex,
    bm25_query,
    build_text_index,
    build_vector_index,
    index_path,
    knn_query,
    load_text_index,
    load_vector_index,
    save_text_index,
    save_vector_index,
    tokenize,
)
from dataforge.schema import Column, Float64, Int64, Schema, Tensor, Utf8String
from dataforge.store import write_table

TEXT_SCHEMA = Schema([Column("doc", Utf8String(), nullable=True)])


def text_table(tmp_path, docs, name="t.dset"):
    rows = [{"doc": d} for d in docs]
    return write_table(TEXT_SCHEMA, rows, str(tmp_path / name))


def vec_table(tmp_path, vectors, d, dtype="float32", name="v.dset"):
    schema = Schema([Column("v", Tensor(dtype, [d]))])
    cast = int if dtype == "int64" else float
    return write_table(schema, [{"v": [cast(x) for x in v]} for v in vectors],
                       str(tmp_path / name))


# -- independent oracles -----------------------------------------------------

def oracle_tokenize(s):
    return re.findall(r"[^\W_]+", s.lower())


def oracle_bm25(docs, query):
    """Score every document by a direct per-document scan of the formula."""
    token_docs = [oracle_tokenize(d) if d is not None else [] for d in docs]
    n = len(docs)
    avgdl = sum(len(d) for d in token_docs) / n if n else 0.0
    df = {}
    for toks in token_docs:
        for t in set(toks):
            df[t] = df.get(t, 0) + 1
    out = []
    for row_id, toks in enumerate(token_docs):
        s = 0.0
        for q in oracle_tokenize(query):
            tf = toks.count(q)
            if tf == 0 or q not in df:
                continue
            w = math.log((n - df[q] + 0.5) / (df[q] + 0.5) + 1.0)
            s += w * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * len(toks) / avgdl))
        if s > 0.0:
            out.append((row_id, s))
    out.sort(key=lambda kv: (-kv[1], kv[0]))
    return out


def tie_groups(ranking, tol):
    """Split a ranked list into runs of approximately equal scores."""
    groups, i = [], 0
    while i < len(ranking):
        j = i + 1
        while j < len(ranking) and abs(ranking[j][1] - ranking[j - 1][1]) <= tol:
            j += 1
        groups.append(ranking[i:j])
        i = j
    return groups


def assert_equivalent_ranking(got, want, tol):
    """Rankings must agree up to reordering inside near-tied score runs."""
    assert len(got) == len(want)
    got_iter = iter(got)
    for group in tie_groups(want, tol):
        chunk = [next(got_iter) for _ in group]
        assert {r for r, _ in chunk} == {r for r, _ in group}
        want_scores = dict(group)
        for r, s in chunk:
            assert s == pytest.approx(want_scores[r], abs=tol)


# -- tokenizer ---------------------------------------------------------------

class TestTokenize:
    def test_punctuation_and_case(self):
        assert tokenize("Hello, WORLD!") == ["hello", "world"]

    def test_unicode_and_underscore(self):
        assert tokenize("Café_über 42") == ["café", "über", "42"]

    def test_empty_and_symbols(self):
        assert tokenize("") == []
        assert tokenize("!!! --- ???") == []


# -- text index --------------------------------------------------------------

class TestBuildTextIndex:
    def test_postings_by_construction(self, tmp_path):
        ix = build_text_index(text_table(tmp_path, ["a b", "b c"]), "doc")
        assert ix.postings == {
            "a": [(0, 1)],
            "b": [(0, 1), (1, 1)],
            "c": [(1, 1)],
        }
        assert ix.doc_lengths == [2, 2]
        assert ix.n_docs == 2
        assert ix.avgdl == 2.0

    def test_empty_table(self, tmp_path):
        ix = build_text_index(text_table(tmp_path, []), "doc")
        assert ix.n_docs == 0
        assert bm25_query(ix, "anything", 5) == []

    def test_null_rows_are_empty_docs(self, tmp_path):
        ix = build_text_index(text_table(tmp_path, ["a", None, "a b"]), "doc")
        assert ix.doc_lengths == [1, 0, 2]
        assert ix.n_docs == 3

    def test_wrong_type(self, tmp_path):
        schema = Schema([Column("n", Int64())])
        t = write_table(schema, [{"n": 1}], str(tmp_path / "n.dset"))
        with pytest.raises(WrongType):
            build_text_index(t, "n")

    def test_unknown_column(self, tmp_path):
        with pytest.raises(UnknownColumn):
            build_text_index(text_table(tmp_path, ["x"]), "nope")


class TestBm25:
    def test_absent_term(self, tmp_path):
        ix = build_text_index(text_table(tmp_path, ["alpha beta", "gamma"]), "doc")
        assert bm25_query(ix, "delta", 3) == []

    def test_single_doc_hand_value(self, tmp_path):
        # N=1, n=1: idf = ln((1-1+0.5)/(1+0.5) + 1) = ln(4/3); the tf term
        # is 1*(k1+1)/(1 + k1*1) = 1, so the score is exactly the idf
        ix = build_text_index(text_table(tmp_path, ["x"]), "doc")
        [(row, score)] = bm25_query(ix, "x", 1)
        assert row == 0
        assert score == pytest.approx(math.log(4.0 / 3.0), abs=1e-12)

    def test_repeated_query_term_counts_twice(self, tmp_path):
        ix = build_text_index(text_table(tmp_path, ["x y"]), "doc")
        [(_, once)] = bm25_query(ix, "x", 1)
        [(_, twice)] = bm25_query(ix, "x x", 1)
        assert twice == pytest.approx(2 * once, abs=1e-12)

    def test_ties_break_by_row_id(self, tmp_path):
        ix = build_text_index(text_table(tmp_path, ["same text", "same text", "same text"]), "doc")
        assert [r for r, _ in bm25_query(ix, "same", 3)] == [0, 1, 2]

    def test_k_truncates(self, tmp_path):
        ix = build_text_index(text_table(tmp_path, ["q a", "q b", "q c"]), "doc")
        assert len(bm25_query(ix, "q", 2)) == 2

    def test_k_must_be_positive(self, tmp_path):
        ix = build_text_index(text_table(tmp_path, ["x"]), "doc")
        with pytest.raises(ValueError):
            bm25_query(ix, "x", 0)

    def test_matches_brute_force_on_random_corpora(self, tmp_path):
        rng = random.Random(2024)
        vocab = ["ant", "bee", "cat", "dog", "elk", "fox", "gnu", "hen"]
        for trial in range(25):
            docs = [
                " ".join(rng.choices(vocab, k=rng.randint(1, 12)))
                for _ in range(rng.randint(1, 40))
            ]
            if rng.random() < 0.3:
                docs[rng.randrange(len(docs))] = None
            t = text_table(tmp_path, docs, name=f"c{trial}.dset")
            ix = build_text_index(t, "doc")
            query = " ".join(rng.choices(vocab + ["zebra"], k=rng.randint(1, 4)))
            want = oracle_bm25(docs, query)
            got = bm25_query(ix, query, k=len(docs) + 5)
            # scores may differ in the last ulp from association order
            assert_equivalent_ranking(got, want, tol=1e-9)
            t.close()

    def test_monotone_in_term_frequency(self, tmp_path):
        # equal-length docs; more copies of the query term never rank lower
        rng = random.Random(7)
        for trial in range(10):
            length = rng.randint(3, 6)
            docs = []
            for tf in range(1, length + 1):
                fillers = [f"f{trial}x{i}" for i in range(length - tf)]
                docs.append(" ".join(["q"] * tf + fillers))
            rng.shuffle(docs)
            t = text_table(tmp_path, docs, name=f"m{trial}.dset")
            ix = build_text_index(t, "doc")
            ranked = bm25_query(ix, "q", len(docs))
            tfs = [docs[row].split().count("q") for row, _ in ranked]
            assert tfs == sorted(tfs, reverse=True)
            t.close()


# -- vector index ------------------------------------------------------------

class TestBuildVectorIndex:
    def test_cosine_normalizes_basis(self, tmp_path):
        t = vec_table(tmp_path, [[2, 0, 0], [0, 3, 0], [0, 0, 4]], d=3)
        ix = build_vector_index(t, "v", "cosine")
        assert np.allclose(ix.vectors, np.eye(3), atol=1e-7)

    def test_zero_vector_rejected_under_cosine(self, tmp_path):
        t = vec_table(tmp_path, [[1, 0], [0, 0]], d=2)
        with pytest.raises(ZeroVector):
            build_vector_index(t, "v", "cosine")

    def test_l2_stores_raw(self, tmp_path):
        vecs = [[1.5, -2.25], [0.0, 0.0], [3.0, 4.0]]
        t = vec_table(tmp_path, vecs, d=2)
        ix = build_vector_index(t, "v", "l2")
        assert np.array_equal(ix.vectors, np.asarray(vecs, dtype="<f4"))

    def test_wrong_types(self, tmp_path):
        t1 = vec_table(tmp_path, [[1, 2]], d=2, dtype="int64", name="i.dset")
        with pytest.raises(WrongType):
            build_vector_index(t1, "v", "l2")
        schema = Schema([Column("v", Tensor("float32", [2, 2]))])
        t2 = write_table(schema, [{"v": [1.0, 0.0, 0.0, 1.0]}], str(tmp_path / "m.dset"))
        with pytest.raises(WrongType):
            build_vector_index(t2, "v", "l2")
        schema3 = Schema([Column("v", Float64())])
        t3 = write_table(schema3, [{"v": 1.0}], str(tmp_path / "f.dset"))
        with pytest.raises(WrongType):
            build_vector_index(t3, "v", "l2")

    def test_unknown_metric(self, tmp_path):
        t = vec_table(tmp_path, [[1.0]], d=1)
        with pytest.raises(ValueError):
            build_vector_index(t, "v", "manhattan")

    def test_float64_column_accepted(self, tmp_path):
        t = vec_table(tmp_path, [[1.0, 2.0]], d=2, dtype="float64")
        ix = build_vector_index(t, "v", "inner_product")
        assert ix.vectors.dtype == np.float32


class TestKnn:
    def test_stored_vector_scores_one_under_cosine(self, tmp_path):
        t = vec_table(tmp_path, [[1, 2, 2], [5, 0, 1], [-1, 3, 0]], d=3)
        ix = build_vector_index(t, "v", "cosine")
        got = knn_query(ix, [5, 0, 1], k=1)
        assert got[0][0] == 1
        assert got[0][1] == pytest.approx(1.0, abs=1e-6)

    def test_k_larger_than_n(self, tmp_path):
        t = vec_table(tmp_path, [[1, 0], [0, 1]], d=2)
        ix = build_vector_index(t, "v", "l2")
        assert len(knn_query(ix, [0, 0], k=10)) == 2

    def test_dimension_mismatch(self, tmp_path):
        ix = build_vector_index(vec_table(tmp_path, [[1, 0]], d=2), "v", "l2")
        with pytest.raises(DimensionMismatch):
            knn_query(ix, [1, 0, 0], k=1)

    def test_zero_query_under_cosine(self, tmp_path):
        ix = build_vector_index(vec_table(tmp_path, [[1, 0]], d=2), "v", "cosine")
        with pytest.raises(ZeroVector):
            knn_query(ix, [0, 0], k=1)

    def test_exact_metrics_match_integer_oracle(self, tmp_path):
        # integer-valued components make float32 arithmetic exact, so the
        # index must agree with an integer-dot oracle to the last tiebreak
        rng = random.Random(11)
        for trial in range(10):
            n, d = rng.randint(1, 60), rng.randint(1, 16)
            vecs = [[rng.randint(-8, 8) for _ in range(d)] for _ in range(n)]
            q = [rng.randint(-8, 8) for _ in range(d)]
            t = vec_table(tmp_path, vecs, d=d, name=f"e{trial}.dset")

            ix = build_vector_index(t, "v", "inner_product")
            want = sorted(
                ((i, float(sum(a * b for a, b in zip(v, q)))) for i, v in enumerate(vecs)),
                key=lambda kv: (-kv[1], kv[0]),
            )
            assert knn_query(ix, q, k=n) == want

            ix2 = build_vector_index(t, "v", "l2")
            want2 = sorted(
                ((i, math.sqrt(sum((a - b) ** 2 for a, b in zip(v, q))))
                 for i, v in enumerate(vecs)),
                key=lambda kv: (kv[1], kv[0]),
            )
            got2 = knn_query(ix2, q, k=n)
            assert [r for r, _ in got2] == [r for r, _ in want2]
            for (_, s), (_, w) in zip(got2, want2):
                assert s == pytest.approx(w, rel=1e-6)
            t.close()

    def test_cosine_matches_float64_oracle(self, tmp_path):
        rng = random.Random(5)
        for trial in range(8):
            n, d = rng.randint(2, 50), rng.randint(2, 12)
            vecs = [[rng.uniform(-1, 1) for _ in range(d)] for _ in range(n)]
            q = [rng.uniform(-1, 1) for _ in range(d)]
            t = vec_table(tmp_path, vecs, d=d, name=f"c{trial}.dset")
            ix = build_vector_index(t, "v", "cosine")
            got = knn_query(ix, q, k=n)

            f32 = [np.asarray(np.asarray(v, dtype="<f4"), dtype=float) for v in vecs]
            qn = np.asarray(np.asarray(q, dtype="<f4"), dtype=float)
            qn = qn / np.linalg.norm(qn)
            want = sorted(
                ((i, float(v @ qn / np.linalg.norm(v))) for i, v in enumerate(f32)),
                key=lambda kv: (-kv[1], kv[0]),
            )
            assert_equivalent_ranking(got, want, tol=1e-5)
            t.close()

    def test_duplicate_vectors_rank_by_row_id(self, tmp_path):
        t = vec_table(tmp_path, [[1, 1], [1, 1], [1, 1]], d=2)
        ix = build_vector_index(t, "v", "inner_product")
        assert [r for r, _ in knn_query(ix, [2, 3], k=3)] == [0, 1, 2]


# -- save / load -------------------------------------------------------------

class TestRoundTrip:
    def test_text_index_round_trip(self, tmp_path):
        docs = ["the quick brown fox", "jumps over", "the lazy dog", None]
        ix = build_text_index(text_table(tmp_path, docs), "doc")
        path = index_path(str(tmp_path / "cache"), "ab" * 32, "doc", "text")
        save_text_index(ix, path)
        back = load_text_index(path)
        assert back.postings == ix.postings
        assert back.doc_lengths == ix.doc_lengths
        for q in ("the", "fox dog", "missing"):
            assert bm25_query(back, q, 10) == bm25_query(ix, q, 10)

    def test_vector_index_round_trip(self, tmp_path):
        rng = random.Random(3)
        vecs = [[rng.uniform(-2, 2) for _ in range(5)] for _ in range(20)]
        t = vec_table(tmp_path, vecs, d=5)
        for metric in ("cosine", "inner_product", "l2"):
            ix = build_vector_index(t, "v", metric)
            path = index_path(str(tmp_path / "cache"), "cd" * 32, "v", "vector")
            save_vector_index(ix, path)
            back = load_vector_index(path)
            assert back.metric == metric
            assert np.array_equal(back.vectors, ix.vectors)
            q = [rng.uniform(-2, 2) for _ in range(5)]
            assert knn_query(back, q, 7) == knn_query(ix, q, 7)

    def test_path_shape(self):
        p = index_path("/c", "f" * 64, "body", "text")
        assert p == "/c/indexes/" + "f" * 64 + "/body.tix"
        assert index_path("/c", "f" * 64, "v", "vector").endswith(".vix")
