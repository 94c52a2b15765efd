"""Local dataset hub: structured tags, data cards, and faceted search.

Each dataset owns a directory ``<root>/<id>/`` holding the builder manifest
(``builder.json``), entry metadata (``entry.json``), and the full card
history (``cards/<rev>.md``, revisions from 1).  Tags live in the card's
front matter, a ``---``-delimited block of ``key: values`` lines, and are
drawn from controlled vocabularies shipped as editable ``vocab/*.txt``
data files so the system works offline.

Card validation returns findings as data rather than raising: a card that
fails validation should be fixable by reading the complete list, and a
dataset with an imperfect card must stay loadable.  Only explicit revision
bumps refuse error-level findings.  Mutations are serialized by an
exclusive flock on ``<root>/.lock``; reads take no lock.
"""

from __future__ import annotations

import fcntl
import json
import os
import re
from contextlib import contextmanager
from dataclasses import dataclass
from functools import lru_cache

from .builder import BuilderDef, load_builder_def
from .errors import (
    CardInvalid,
    MalformedTag,
    MissingFrontMatter,
    UnknownDataset,
    UnknownVocabularyValue,
)
from .store import DatasetInfo

LIST_KEYS = ("languages", "task_categories", "task_ids", "licenses")
SCALAR_KEYS = ("size_category", "multilinguality")
TAG_KEYS = LIST_KEYS + SCALAR_KEYS

SIZE_BUCKETS = ("n<1K", "1K<n<10K", "10K<n<100K", "100K<n<1M", "1M<n<10M", "n>10M")

_VOCAB_FILES = {
    "languages": "languages.txt",
    "task_categories": "task_categories.txt",
    "task_ids": "task_ids.txt",
    "licenses": "licenses.txt",
    "size_category": "size_categories.txt",
    "multilinguality": "multilinguality.txt",
}


@lru_cache(maxsize=None)
def vocabulary(key: str) -> frozenset[str]:
    """Allowed values for one tag key, read from the shipped data file."""
    path = os.path.join(os.path.dirname(__file__), "vocab", _VOCAB_FILES[key])
    values = set()
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                values.add(line)
    return frozenset(values)


def size_bucket(num_rows: int) -> str:
    """Bucket a row count; each decade boundary belongs to the bucket above."""
    if num_rows < 1_000:
        return "n<1K"
    if num_rows < 10_000:
        return "1K<n<10K"
    if num_rows < 100_000:
        return "10K<n<100K"
    if num_rows < 1_000_000:
        return "100K<n<1M"
    if num_rows < 10_000_000:
        return "1M<n<10M"
    return "n>10M"


def _dedup(values) -> tuple[str, ...]:
    return tuple(dict.fromkeys(values))


@dataclass(frozen=True)
class TagSet:
    """Controlled-vocabulary labels describing one dataset."""

    languages: tuple[str, ...] = ()
    task_categories: tuple[str, ...] = ()
    task_ids: tuple[str, ...] = ()
    licenses: tuple[str, ...] = ()
    size_category: str | None = None
    multilinguality: str | None = None

    def __post_init__(self):
        for key in LIST_KEYS:
            object.__setattr__(self, key, _dedup(getattr(self, key)))

    def to_json_obj(self) -> dict:
        obj = {key: list(getattr(self, key)) for key in LIST_KEYS}
        for key in SCALAR_KEYS:
            obj[key] = getattr(self, key)
        return obj


@dataclass(frozen=True)
class Section:
    level: int  # 1..3; deeper headings stay in the body text
    title: str
    body: str


@dataclass(frozen=True)
class DataCard:
    """Parsed card: front-matter tags plus the ordered markdown sections."""

    tags: TagSet
    sections: tuple[Section, ...]


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" or "warning"
    code: str
    message: str


# Top-level sections every card must carry, with their required subsections.
REQUIRED_SECTIONS = (
    ("Dataset Description", ()),
    ("Languages", ()),
    ("Dataset Structure", ("Data Fields", "Data Splits")),
    ("Considerations for Using the Data", ("Social Impact", "Known Limitations")),
    ("Licensing Information", ()),
    ("Citation Information", ()),
)

_HEADING_RE = re.compile(r"^(#{1,3})\s+(.+?)\s*$")
_LIST_ITEM_RE = re.compile(r"^\s*-\s+(.*)$")
# "train: 8,530" style count lines inside the splits section, bullets allowed.
_SPLIT_COUNT_RE = re.compile(r"^[-*\s]*([A-Za-z0-9_.-]+)\s*:\s*([0-9][0-9,]*)\s*$")


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
        return value[1:-1]
    return value


def _parse_front_matter(lines: list[str], start: int, stop: int) -> TagSet:
    values: dict[str, list[str]] = {}
    key_line: dict[str, int] = {}
    current: str | None = None  # open block list collecting "- item" lines
    for i in range(start, stop):
        line = lines[i]
        lineno = i + 1
        if not line.strip():
            continue
        item = _LIST_ITEM_RE.match(line)
        if item and current is not None:
            values[current].append(_unquote(item.group(1).strip()))
            continue
        if item:
            raise MalformedTag("list item before any tag key", lineno)
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep or " " in key:
            raise MalformedTag(f"expected 'key: values', got {line.strip()!r}", lineno)
        if key not in TAG_KEYS:
            raise MalformedTag(f"unknown tag key {key!r}", lineno)
        if key in values:
            raise MalformedTag(f"duplicate tag key {key!r}", lineno)
        key_line[key] = lineno
        rest = rest.strip()
        if not rest:
            values[key] = []
            current = key
        elif rest.startswith("[") and rest.endswith("]"):
            inner = rest[1:-1].strip()
            parts = [p.strip() for p in inner.split(",")] if inner else []
            values[key] = [_unquote(p) for p in parts if p]
            current = None
        else:
            values[key] = [_unquote(rest)]
            current = None

    fields: dict = {}
    for key, vals in values.items():
        if key in SCALAR_KEYS:
            if len(vals) != 1:
                raise MalformedTag(
                    f"tag {key!r} takes exactly one value, got {len(vals)}",
                    key_line[key],
                )
            fields[key] = vals[0]
        else:
            fields[key] = tuple(vals)
    return TagSet(**fields)


def _parse_sections(lines: list[str], start: int) -> tuple[Section, ...]:
    sections: list[Section] = []
    level = title = None
    body: list[str] = []

    def flush():
        if title is not None:
            sections.append(Section(level, title, "\n".join(body).strip("\n")))

    for line in lines[start:]:
        m = _HEADING_RE.match(line)
        if m:
            flush()
            level, title = len(m.group(1)), m.group(2)
            body = []
        else:
            body.append(line)
    flush()
    return tuple(sections)


def parse_card(text: str) -> DataCard:
    """Split a card into front-matter tags and markdown sections.

    The first line must be ``---`` and a matching closing line must follow;
    anything else raises :class:`MissingFrontMatter`.  Tag lines accept
    ``key: scalar``, ``key: [a, b]``, or a bare ``key:`` followed by
    ``- item`` lines.  Headings are recognized at levels 1 to 3.
    """
    lines = text.lstrip("﻿").split("\n")
    if not lines or lines[0].strip() != "---":
        raise MissingFrontMatter("card must start with a '---' tag block")
    close = None
    for i in range(1, len(lines)):
        if lines[i].strip() == "---":
            close = i
            break
    if close is None:
        raise MissingFrontMatter("tag block is never closed by a second '---'")
    tags = _parse_front_matter(lines, 1, close)
    return DataCard(tags=tags, sections=_parse_sections(lines, close + 1))


def _title_matches(title: str, required: str) -> bool:
    # "Social Impact of Dataset" satisfies a required "Social Impact".
    return title == required or title.startswith(required + " ")


def _find_section(sections, required: str, start: int = 0, stop: int | None = None) -> int:
    stop = len(sections) if stop is None else stop
    for idx in range(start, stop):
        if _title_matches(sections[idx].title, required):
            return idx
    return -1


def _scope_end(sections, idx: int) -> int:
    """Index one past the last subsection nested under sections[idx]."""
    level = sections[idx].level
    j = idx + 1
    while j < len(sections) and sections[j].level > level:
        j += 1
    return j


def _region_text(sections, idx: int) -> str:
    return "\n".join(s.body for s in sections[idx:_scope_end(sections, idx)])


def validate_card(card: DataCard, info: DatasetInfo | None = None) -> list[Finding]:
    """Check structure, stated split counts, and tag vocabulary.

    Returns findings as data; an empty list means the card is fully valid.
    Split counts are only checked when ``info`` is given.
    """
    findings: list[Finding] = []
    sections = card.sections

    for title, children in REQUIRED_SECTIONS:
        idx = _find_section(sections, title)
        if idx < 0:
            findings.append(
                Finding("error", "missing_section", f"required section {title!r} not found")
            )
            continue  # children are unlocatable without their parent
        end = _scope_end(sections, idx)
        for child in children:
            if _find_section(sections, child, idx + 1, end) < 0:
                findings.append(
                    Finding(
                        "error",
                        "missing_section",
                        f"required subsection {child!r} not found under {title!r}",
                    )
                )

    for idx, section in enumerate(sections):
        if not _region_text(sections, idx).strip():
            findings.append(
                Finding("warning", "empty_section", f"section {section.title!r} has no content")
            )

    if info is not None:
        idx = _find_section(sections, "Data Splits")
        if idx >= 0:
            for line in _region_text(sections, idx).split("\n"):
                m = _SPLIT_COUNT_RE.match(line)
                if not m:
                    continue
                name, stated = m.group(1), int(m.group(2).replace(",", ""))
                actual = info.split_rows.get(name)
                if actual is None:
                    findings.append(
                        Finding(
                            "error",
                            "split_mismatch",
                            f"card states split {name!r} which the dataset does not have",
                        )
                    )
                elif actual != stated:
                    findings.append(
                        Finding(
                            "error",
                            "split_mismatch",
                            f"card states {name}={stated}, dataset has {actual} rows",
                        )
                    )

    tags = card.tags
    for key in LIST_KEYS:
        vocab = vocabulary(key)
        for value in getattr(tags, key):
            if value not in vocab:
                findings.append(
                    Finding("error", "bad_tag", f"{key} value {value!r} is not in the vocabulary")
                )
    for key in SCALAR_KEYS:
        value = getattr(tags, key)
        if value is not None and value not in vocabulary(key):
            findings.append(
                Finding("error", "bad_tag", f"{key} value {value!r} is not in the vocabulary")
            )
    return findings


def validate_card_text(text: str, info: DatasetInfo | None = None) -> list[Finding]:
    """Like validate_card but folds parse failures into the findings list."""
    try:
        card = parse_card(text)
    except MissingFrontMatter as e:
        return [Finding("error", "missing_front_matter", str(e))]
    except MalformedTag as e:
        return [Finding("error", "malformed_tag", str(e))]
    return validate_card(card, info)


# ---------------------------------------------------------------------------
# on-disk registry

@dataclass(frozen=True)
class RegistryEntry:
    id: str
    revision: int
    models: tuple[str, ...] = ()

    def to_json_obj(self) -> dict:
        return {"id": self.id, "revision": self.revision, "models": list(self.models)}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RegistryEntry":
        return cls(id=obj["id"], revision=int(obj["revision"]), models=tuple(obj.get("models", ())))


class Registry:
    """Datasets under one root directory, one subdirectory per id."""

    def __init__(self, root: str):
        self.root = root

    def _dir(self, id: str) -> str:
        return os.path.join(self.root, id)

    def _entry_path(self, id: str) -> str:
        return os.path.join(self._dir(id), "entry.json")

    def _card_path(self, id: str, revision: int) -> str:
        return os.path.join(self._dir(id), "cards", f"{revision}.md")

    @contextmanager
    def _lock(self):
        os.makedirs(self.root, exist_ok=True)
        fd = os.open(os.path.join(self.root, ".lock"), os.O_CREAT | os.O_RDWR, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX)
            yield
        finally:
            fcntl.flock(fd, fcntl.LOCK_UN)
            os.close(fd)

    def ids(self) -> list[str]:
        if not os.path.isdir(self.root):
            return []
        out = []
        for dirpath, dirnames, filenames in os.walk(self.root):
            if "entry.json" in filenames:
                out.append(os.path.relpath(dirpath, self.root).replace(os.sep, "/"))
                dirnames.clear()  # ids may contain "/" but entries never nest
        return sorted(out)

    def get(self, id: str) -> RegistryEntry:
        path = self._entry_path(id)
        if not os.path.exists(path):
            raise UnknownDataset(f"no registry entry for {id!r}")
        with open(path, encoding="utf-8") as f:
            return RegistryEntry.from_json_obj(json.load(f))

    def builder_def(self, id: str) -> BuilderDef:
        self.get(id)  # surface UnknownDataset before a manifest read
        return load_builder_def(id, self.root)

    def card_text(self, id: str, revision: int | None = None) -> str:
        if revision is None:
            revision = self.get(id).revision
        path = self._card_path(id, revision)
        if not os.path.exists(path):
            raise UnknownDataset(f"{id!r} has no card revision {revision}")
        with open(path, encoding="utf-8") as f:
            return f.read()

    def card(self, id: str, revision: int | None = None) -> DataCard:
        return parse_card(self.card_text(id, revision))

    def add(self, builder: BuilderDef, card_text: str, models=()) -> RegistryEntry:
        """Register a dataset: manifest, card revision 1, entry metadata.

        The card must parse (its tags drive search) but validation findings
        do not block registration; documentation should encourage, not gate.
        """
        parse_card(card_text)
        with self._lock():
            if os.path.exists(self._entry_path(builder.id)):
                raise ValueError(f"dataset {builder.id!r} is already registered")
            entry = RegistryEntry(id=builder.id, revision=1, models=tuple(models))
            os.makedirs(os.path.join(self._dir(builder.id), "cards"), exist_ok=True)
            self._write_json(
                os.path.join(self._dir(builder.id), "builder.json"), builder.to_json_obj()
            )
            self._write_text(self._card_path(builder.id, 1), card_text)
            self._write_json(self._entry_path(builder.id), entry.to_json_obj())
            return entry

    def bump_card_revision(
        self, id: str, new_text: str, info: DatasetInfo | None = None
    ) -> RegistryEntry:
        """Append a card revision; prior revisions are retained as files.

        The new text must parse and must produce no error-level findings,
        otherwise the entry is left unchanged.  Warnings pass.
        """
        card = parse_card(new_text)
        errors = [f for f in validate_card(card, info) if f.severity == "error"]
        if errors:
            raise CardInvalid(errors)
        with self._lock():
            entry = self.get(id)
            bumped = RegistryEntry(id=entry.id, revision=entry.revision + 1, models=entry.models)
            self._write_text(self._card_path(id, bumped.revision), new_text)
            self._write_json(self._entry_path(id), bumped.to_json_obj())
            return bumped

    def search(self, filters: dict | None = None) -> list[str]:
        """Ids whose tags match: AND across keys, OR within a key's values.

        Filter values must come from the vocabularies; scalars may be given
        bare or as a single-element list.  An empty filter matches all.
        """
        normalized: dict[str, tuple[str, ...]] = {}
        for key, wanted in (filters or {}).items():
            if key not in TAG_KEYS:
                raise ValueError(f"unknown filter key {key!r}; expected one of {TAG_KEYS}")
            values = (wanted,) if isinstance(wanted, str) else tuple(wanted)
            vocab = vocabulary(key)
            for v in values:
                if v not in vocab:
                    raise UnknownVocabularyValue(f"{key} value {v!r} is not in the vocabulary")
            normalized[key] = values

        out = []
        for id in self.ids():
            tags = self.card(id).tags
            if all(self._tag_hit(tags, key, values) for key, values in normalized.items()):
                out.append(id)
        return out

    @staticmethod
    def _tag_hit(tags: TagSet, key: str, values: tuple[str, ...]) -> bool:
        have = getattr(tags, key)
        if key in SCALAR_KEYS:
            have = () if have is None else (have,)
        return bool(set(values) & set(have))

    @staticmethod
    def _write_json(path: str, obj: dict) -> None:
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(obj, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)

    @staticmethod
    def _write_text(path: str, text: str) -> None:
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
