"""
Declarative dataset builders
============================

A builder definition names the raw files, how to parse them, and what
schema the result must satisfy.  Building is idempotent: the output
lands under a directory keyed by the builder's own fingerprint, so
rebuilding an unchanged definition is a no-op.
"""

import os
import tempfile

from dataforge import (
    BuilderDef,
    ClassLabel,
    Column,
    Int64,
    Schema,
    SourceRef,
    Utf8String,
    build_dataset,
    builder_fingerprint,
)

work = tempfile.mkdtemp(prefix="demo-builder-")

# Raw data as it might arrive: a headered CSV per split.
train_csv = os.path.join(work, "train.csv")
with open(train_csv, "w", encoding="utf-8") as f:
    f.write("row_id,review,sentiment\n")
    f.write("0,\"slow, but worth it\",pos\n")
    f.write("1,never lands,neg\n")
    f.write("2,a small marvel,pos\n")

test_csv = os.path.join(work, "test.csv")
with open(test_csv, "w", encoding="utf-8") as f:
    f.write("row_id,review,sentiment\n")
    f.write("3,forgettable,neg\n")

schema = Schema([
    Column("id", Int64()),
    Column("text", Utf8String()),
    Column("label", ClassLabel(["neg", "pos"])),
])

builder = BuilderDef(
    id="demo/reviews",
    version="1.0.0",
    schema=schema,
    sources={"train": [SourceRef(train_csv)], "test": [SourceRef(test_csv)]},
    # schema column -> source column; class labels accept the string names
    field_map={"id": "row_id", "text": "review", "label": "sentiment"},
    format="csv",
    format_options={"has_header": True},
    description="Three reviews and a held-out one.",
    license="mit",
    recommended_metrics=["accuracy"],
)
print("builder fingerprint:", builder_fingerprint(builder)[:16], "...")

cache = os.path.join(work, "cache")
ds = build_dataset(builder, cache)
for split in ds:
    print(f"{split}: {ds[split].num_rows} rows")
print("first train row:", ds["train"].row(0))

# Download checksums are recorded per source file, so a changed upstream
# file fails loudly instead of silently producing a different dataset.
for name, digest in sorted(ds.info.download_checksums.items()):
    print("source", os.path.basename(name), "sha256", digest[:12], "...")

# A second build finds the finished output and returns immediately.
again = build_dataset(builder, cache)
print("rebuild is cached:", again["train"].fingerprint == ds["train"].fingerprint)
