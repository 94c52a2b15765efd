"""
The read-only HTTP service
==========================

`dataforge serve` exposes the registry over JSON endpoints: list
datasets, page through rows, fetch cards, and search by tag.  The
service builds everything it needs at startup, after which request
handling never writes a byte.  This script drives one in-process.
"""

import json
import os
import tempfile
import threading
import urllib.request

from dataforge import (
    BuilderDef,
    ClassLabel,
    Column,
    Int64,
    Registry,
    Schema,
    SourceRef,
    Utf8String,
    make_server,
)

work = tempfile.mkdtemp(prefix="demo-serve-")

data = os.path.join(work, "train.csv")
with open(data, "w", encoding="utf-8") as f:
    f.write("id,text,label\n")
    for i, (text, label) in enumerate([
        ("crisp and confident", "pos"), ("a mess", "neg"),
        ("warm, funny, humane", "pos"), ("tedious", "neg"),
        ("never better", "pos"),
    ]):
        f.write(f'{i},"{text}",{label}\n')

builder = BuilderDef(
    id="demo/reviews",
    version="1.0.0",
    schema=Schema([
        Column("id", Int64()),
        Column("text", Utf8String()),
        Column("label", ClassLabel(["neg", "pos"])),
    ]),
    sources={"train": [SourceRef(data)]},
    field_map={"id": "id", "text": "text", "label": "label"},
    format="csv",
    format_options={"has_header": True},
)

# A bare-bones card: tags only, none of the required prose sections.
# Expect the server to print one warning at startup and serve anyway;
# incomplete documentation degrades visibility, not availability.
CARD = """\
---
languages: [en]
task_categories: [text-classification]
task_ids: [sentiment-classification]
licenses: [mit]
size_category: n<1K
multilinguality: monolingual
---
# Dataset Card for demo/reviews
"""

registry = Registry(os.path.join(work, "registry"))
registry.add(builder, CARD)

srv = make_server(registry.root, os.path.join(work, "cache"), port=0)
threading.Thread(target=srv.serve_forever, daemon=True).start()
base = f"http://127.0.0.1:{srv.server_address[1]}"
print("serving at", base)


def get(path):
    with urllib.request.urlopen(base + path) as resp:
        return json.loads(resp.read())


print("\nGET /api/datasets")
print(json.dumps(get("/api/datasets"), indent=2)[:400])

print("\nGET /api/datasets/demo/reviews/rows?split=train&offset=1&limit=2")
page = get("/api/datasets/demo/reviews/rows?split=train&offset=1&limit=2")
for row in page["rows"]:
    print(" ", row)
print("total rows:", page["total"])

print("\nGET /api/search?task=text-classification")
print(get("/api/search?task=text-classification"))

srv.shutdown()
print("\nserver stopped")
