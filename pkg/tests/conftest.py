"""Shared fixtures: tiny datasets on disk plus their registry entries."""

import hashlib
import json
import os

import pytest

from dataforge.builder import BuilderDef, SourceRef
from dataforge.registry import Registry
from dataforge.schema import (
    ClassLabel,
    Column,
    Float64,
    Int64,
    Schema,
    Tensor,
    Utf8String,
)


def sha256_of(path) -> str:
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def write_builder_manifest(registry_dir, bdef: BuilderDef) -> str:
    d = os.path.join(registry_dir, bdef.id)
    os.makedirs(d, exist_ok=True)
    path = os.path.join(d, "builder.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(bdef.to_json_obj(), f, indent=2)
    return path


def make_reviews_builder(data_dir, dataset_id="demo/reviews", splits=("train", "test")) -> BuilderDef:
    """CSV sentiment fixture: 8 train rows, 4 test rows, with header."""
    os.makedirs(data_dir, exist_ok=True)
    rows = {
        "train": [
            ("a fine film", "pos"),
            ("dull and slow", "neg"),
            ("loved it", "pos"),
            ("terrible acting", "neg"),
            ("a classic", "pos"),
            ("fell asleep", "neg"),
            ("\"quoted\", with comma", "pos"),
            ("meh", "neg"),
        ],
        "test": [
            ("great fun", "pos"),
            ("waste of time", "neg"),
            ("solid", "pos"),
            ("boring", "neg"),
        ],
    }
    sources = {}
    for split in splits:
        path = os.path.join(data_dir, f"{split}.csv")
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write("review,sentiment\r\n")
            for text, label in rows[split]:
                text_q = '"' + text.replace('"', '""') + '"'
                f.write(f"{text_q},{label}\r\n")
        sources[split] = [SourceRef("file://" + path, sha256_of(path))]
    return BuilderDef(
        id=dataset_id,
        version="1.0.0",
        schema=Schema(
            [Column("text", Utf8String()), Column("label", ClassLabel(["neg", "pos"]))]
        ),
        sources=sources,
        field_map={"text": "review", "label": "sentiment"},
        format="csv",
        format_options={"delimiter": ",", "has_header": True},
        description="Tiny sentiment fixture",
        citation="@misc{demo2026reviews}",
        license="mit",
        recommended_metrics=["accuracy", "f1"],
    )


@pytest.fixture
def reviews_env(tmp_path):
    """(cache_dir, registry_dir, builder) for the reviews fixture dataset."""
    cache_dir = str(tmp_path / "cache")
    registry_dir = str(tmp_path / "registry")
    bdef = make_reviews_builder(str(tmp_path / "data"))
    write_builder_manifest(registry_dir, bdef)
    return cache_dir, registry_dir, bdef


def make_card(
    languages=("en",),
    task_categories=("text-classification",),
    task_ids=("sentiment-classification",),
    licenses=("mit",),
    size_category="n<1K",
    multilinguality="monolingual",
    splits=None,
) -> str:
    """A structurally complete card with the given tags and split counts."""
    split_lines = "\n".join(f"- {name}: {rows}" for name, rows in (splits or {}).items())
    return f"""---
languages: [{', '.join(languages)}]
task_categories: [{', '.join(task_categories)}]
task_ids: [{', '.join(task_ids)}]
licenses: [{', '.join(licenses)}]
size_category: {size_category}
multilinguality: {multilinguality}
---
# Dataset Card

## Dataset Description

A fixture dataset.

## Languages

{', '.join(languages)}.

## Dataset Structure

### Data Fields

Described elsewhere.

### Data Splits

{split_lines or 'Counts not stated.'}

## Considerations for Using the Data

### Social Impact

None known.

### Known Limitations

Synthetic fixture.

## Licensing Information

See tags.

## Citation Information

None.
"""


def make_news_builder(data_dir, dataset_id="demo/news") -> BuilderDef:
    """JSONL fixture with int, string, nullable float, and tensor columns."""
    os.makedirs(data_dir, exist_ok=True)
    rows = [
        {
            "id": i,
            "headline": f"story number {i}",
            "score": None if i % 3 == 0 else i / 2,
            "vec": [[i, i + 1], [i + 2, i + 3]],
            "emb": [i, i + 1, i + 2, i + 3],
        }
        for i in range(6)
    ]
    path = os.path.join(data_dir, "news.jsonl")
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
    return BuilderDef(
        id=dataset_id,
        version="2.0.0",
        schema=Schema(
            [
                Column("id", Int64()),
                Column("headline", Utf8String()),
                Column("score", Float64(), nullable=True),
                Column("vec", Tensor("float32", (2, 2))),
                Column("emb", Tensor("float32", (4,))),
            ]
        ),
        sources={"train": [SourceRef("file://" + path, sha256_of(path))]},
        field_map={"id": "id", "headline": "headline", "score": "score", "vec": "vec",
                   "emb": "emb"},
        format="jsonl",
        description="Tiny news fixture",
        license="cc-by-4.0",
    )


@pytest.fixture
def hub_env(tmp_path):
    """(cache_dir, registry_dir) with two registered datasets and valid cards."""
    cache_dir = str(tmp_path / "cache")
    registry_dir = str(tmp_path / "registry")
    reg = Registry(registry_dir)
    reviews = make_reviews_builder(str(tmp_path / "data-reviews"))
    reg.add(
        reviews,
        make_card(
            languages=("en", "es"),
            task_categories=("text-classification",),
            splits={"train": 8, "test": 4},
        ),
        models=["team/tiny-classifier"],
    )
    news = make_news_builder(str(tmp_path / "data-news"))
    reg.add(
        news,
        make_card(
            languages=("en",),
            task_categories=("summarization",),
            task_ids=("news-summarization",),
            licenses=("cc-by-4.0",),
            splits={"train": 6},
        ),
    )
    return cache_dir, registry_dir
