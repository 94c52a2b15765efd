"""
Streaming without materializing
===============================

A stream pipeline records its source shards and a list of lazy ops.
Nothing runs until you iterate, and memory stays bounded by the parse
buffer plus (if you shuffle) the shuffle buffer, never by dataset size.
"""

import json
import os
import tempfile

from dataforge import (
    Column,
    Int64,
    Schema,
    StreamPipeline,
    StreamSource,
    Utf8String,
    register_transform,
    spec_for,
    stream_rows,
)

work = tempfile.mkdtemp(prefix="demo-stream-")

# Three JSON-lines shards standing in for a sharded remote dataset.
paths = []
i = 0
for shard, count in enumerate([40, 35, 25]):
    p = os.path.join(work, f"shard{shard}.jsonl")
    with open(p, "w", encoding="utf-8") as f:
        for _ in range(count):
            f.write(json.dumps({"idx": i, "body": f"entry {i}"}) + "\n")
            i += 1
    paths.append(p)

schema = Schema([Column("id", Int64()), Column("text", Utf8String())])
source = StreamSource(tuple(paths), schema, {"id": "idx", "text": "body"}, "jsonl")

register_transform("shout", lambda r, p: {**r, "text": r["text"].upper()})
register_transform("even_only", lambda r, p: r["id"] % 2 == 0)

pipeline = (
    StreamPipeline(source)
    .map(spec_for("shout"))
    .filter(spec_for("even_only", op_kind="filter"))
    .skip(5)
    .take(4)
)
for row in stream_rows(pipeline):
    print(row)

# A buffered shuffle trades perfect uniformity for bounded memory: rows
# leave the buffer in a seeded pseudo-random order.  Same seed, same
# order, on any machine.
shuffled = StreamPipeline(source).shuffle(buffer_size=16, seed=7).take(8)
print("shuffled ids:", [r["id"] for r in stream_rows(shuffled)])
print("again:       ", [r["id"] for r in stream_rows(shuffled)])
