"""
Text and vector search over table columns
=========================================

Both index kinds are exact.  BM25 ranks by an inverted index over a
text column; nearest neighbor runs a brute-force scan over a float
vector column.  Indexes serialize next to the tables they cover.
"""

import os
import tempfile

from dataforge import (
    Column,
    Schema,
    Tensor,
    Utf8String,
    bm25_query,
    build_text_index,
    build_vector_index,
    knn_query,
    tokenize,
    write_table,
)
from dataforge.index import load_text_index, save_text_index

work = tempfile.mkdtemp(prefix="demo-index-")

docs = [
    "the cat sat on the mat",
    "a dog chased the cat",
    "mats are for sitting",
    "dogs and cats living together",
    "the stock market fell sharply",
]
t = write_table(
    Schema([Column("doc", Utf8String())]),
    [{"doc": d} for d in docs],
    os.path.join(work, "docs.dset"),
)

print("tokens of doc 0:", tokenize(docs[0]))

ix = build_text_index(t, "doc")
for query in ("cat", "dog market"):
    hits = bm25_query(ix, query, k=3)
    print(f"bm25 {query!r}:")
    for row, score in hits:
        print(f"  {score:6.3f}  {docs[row]}")

# Round-trip the index through its file form.
ix_path = os.path.join(work, "docs.tix")
save_text_index(ix, ix_path)
ix = load_text_index(ix_path)
print("reloaded index covers", ix.n_docs, "docs")

# Vector search over a rank-1 float tensor column.
vecs = [[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.5, 0.5]]
vt = write_table(
    Schema([Column("v", Tensor("float32", [2]))]),
    [{"v": v} for v in vecs],
    os.path.join(work, "vecs.dset"),
)
vix = build_vector_index(vt, "v", "cosine")
print("cosine neighbors of [1, 0]:", knn_query(vix, [1.0, 0.0], k=2))
vix = build_vector_index(vt, "v", "l2")
print("l2 neighbors of [1, 0]:   ", knn_query(vix, [1.0, 0.0], k=2))
