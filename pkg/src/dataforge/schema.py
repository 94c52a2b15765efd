"""Feature type system: typed columns, value validation, and schema JSON.

A dataset is a table whose columns carry one of the feature types below.
Values are plain Python objects (None, int, float, bool, str, bytes, list,
dict) checked against a type by :func:`validate_value`. Schemas serialize to
a canonical JSON text whose bytes are identical for equal schemas, which is
what on-disk fingerprints hash.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterator

from .errors import ParseError, UnknownColumn, UnknownLabel, UnknownTypeTag, ValueTypeError
from .fingerprint import canonical_json

MAX_NESTING_DEPTH = 32

_COLUMN_NAME_RE = re.compile(r"[A-Za-z0-9_.-]+\Z")
_INT64_MIN = -(1 << 63)
_INT64_MAX = (1 << 63) - 1

TENSOR_DTYPES = ("int64", "float32", "float64")


class FeatureType:
    """Base class for all feature types. Instances are immutable."""

    tag: str = ""

    def depth(self) -> int:
        return 1

    def to_json_obj(self) -> dict:
        return {"tag": self.tag}


@dataclass(frozen=True)
class Int64(FeatureType):
    tag: str = field(default="int64", init=False)


@dataclass(frozen=True)
class Float64(FeatureType):
    tag: str = field(default="float64", init=False)


@dataclass(frozen=True)
class Bool(FeatureType):
    tag: str = field(default="bool", init=False)


@dataclass(frozen=True)
class Utf8String(FeatureType):
    tag: str = field(default="string", init=False)


@dataclass(frozen=True)
class Binary(FeatureType):
    tag: str = field(default="binary", init=False)


@dataclass(frozen=True)
class ClassLabel(FeatureType):
    """Named categorical labels stored physically as int64 codes."""

    names: tuple[str, ...]
    tag: str = field(default="class_label", init=False)

    def __init__(self, names):
        names = tuple(names)
        if not names:
            raise ValueError("ClassLabel needs at least one name")
        if any(not n for n in names):
            raise ValueError("ClassLabel names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("ClassLabel names must be unique")
        object.__setattr__(self, "names", names)

    def str2int(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownLabel(f"label {name!r} not in {list(self.names)}") from None

    def int2str(self, code: int) -> str:
        if not 0 <= code < len(self.names):
            raise UnknownLabel(f"code {code} out of range [0, {len(self.names)})")
        return self.names[code]

    def to_json_obj(self) -> dict:
        return {"tag": self.tag, "names": list(self.names)}


@dataclass(frozen=True)
class Sequence(FeatureType):
    """Variable-length list of an inner type; optionally length-pinned."""

    inner: FeatureType
    fixed_length: int | None = None
    tag: str = field(default="sequence", init=False)

    def __post_init__(self):
        if self.fixed_length is not None and self.fixed_length < 0:
            raise ValueError("fixed_length must be non-negative")
        if self.inner.depth() >= MAX_NESTING_DEPTH:
            raise ValueError(f"nesting depth exceeds {MAX_NESTING_DEPTH}")

    def depth(self) -> int:
        return 1 + self.inner.depth()

    def to_json_obj(self) -> dict:
        obj = {"tag": self.tag, "inner": self.inner.to_json_obj()}
        if self.fixed_length is not None:
            obj["fixed_length"] = self.fixed_length
        return obj


@dataclass(frozen=True)
class Translation(FeatureType):
    """Parallel text keyed by language code; codes are kept sorted."""

    languages: tuple[str, ...]
    tag: str = field(default="translation", init=False)

    def __init__(self, languages):
        languages = tuple(sorted(languages))
        if not languages:
            raise ValueError("Translation needs at least one language")
        for code in languages:
            if not code or code != code.lower():
                raise ValueError(f"language code {code!r} must be non-empty lowercase")
        if len(set(languages)) != len(languages):
            raise ValueError("Translation languages must be unique")
        object.__setattr__(self, "languages", languages)

    def depth(self) -> int:
        return 2

    def to_json_obj(self) -> dict:
        return {"tag": self.tag, "languages": list(self.languages)}


@dataclass(frozen=True)
class Tensor(FeatureType):
    """Fixed-shape numeric array; values are flat row-major element lists."""

    dtype: str
    shape: tuple[int, ...]
    tag: str = field(default="tensor", init=False)

    def __init__(self, dtype: str, shape):
        if dtype not in TENSOR_DTYPES:
            raise ValueError(f"tensor dtype must be one of {TENSOR_DTYPES}, got {dtype!r}")
        shape = tuple(int(d) for d in shape)
        if not shape:
            raise ValueError("tensor shape needs at least one dimension")
        if any(d < 1 for d in shape):
            raise ValueError("tensor dimensions must be >= 1")
        object.__setattr__(self, "dtype", dtype)
        object.__setattr__(self, "shape", shape)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def to_json_obj(self) -> dict:
        return {"tag": self.tag, "dtype": self.dtype, "shape": list(self.shape)}


@dataclass(frozen=True)
class Record(FeatureType):
    """Nested struct with a fixed, ordered set of named fields."""

    fields: tuple[tuple[str, FeatureType], ...]
    tag: str = field(default="record", init=False)

    def __init__(self, fields):
        fields = tuple((str(n), t) for n, t in fields)
        names = [n for n, _ in fields]
        if any(not n for n in names):
            raise ValueError("record field names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("record field names must be unique")
        if fields and max(t.depth() for _, t in fields) >= MAX_NESTING_DEPTH:
            raise ValueError(f"nesting depth exceeds {MAX_NESTING_DEPTH}")
        object.__setattr__(self, "fields", fields)

    def depth(self) -> int:
        return 1 + max((t.depth() for _, t in self.fields), default=0)

    def to_json_obj(self) -> dict:
        return {
            "tag": self.tag,
            "fields": [{"name": n, "type": t.to_json_obj()} for n, t in self.fields],
        }


_ATOMIC_TYPES = {
    "int64": Int64,
    "float64": Float64,
    "bool": Bool,
    "string": Utf8String,
    "binary": Binary,
}


def type_from_json_obj(obj: Any) -> FeatureType:
    """Rebuild a FeatureType from its JSON object form."""
    if not isinstance(obj, dict) or "tag" not in obj:
        raise ParseError(f"feature type must be an object with a 'tag', got {obj!r}")
    tag = obj["tag"]
    if tag in _ATOMIC_TYPES:
        return _ATOMIC_TYPES[tag]()
    if tag == "class_label":
        return ClassLabel(obj["names"])
    if tag == "sequence":
        return Sequence(type_from_json_obj(obj["inner"]), obj.get("fixed_length"))
    if tag == "translation":
        return Translation(obj["languages"])
    if tag == "tensor":
        return Tensor(obj["dtype"], obj["shape"])
    if tag == "record":
        return Record([(f["name"], type_from_json_obj(f["type"])) for f in obj["fields"]])
    raise UnknownTypeTag(f"unknown feature type tag {tag!r}")


@dataclass(frozen=True)
class Column:
    name: str
    type: FeatureType
    nullable: bool = False

    def __post_init__(self):
        if not _COLUMN_NAME_RE.match(self.name):
            raise ValueError(f"invalid column name {self.name!r}")


@dataclass(frozen=True)
class Schema:
    """Ordered, uniquely named, typed columns of one table."""

    columns: tuple[Column, ...]

    def __init__(self, columns):
        cols = []
        for c in columns:
            if isinstance(c, Column):
                cols.append(c)
            else:
                name, ftype, *rest = c
                cols.append(Column(name, ftype, rest[0] if rest else False))
        if not cols:
            raise ValueError("schema needs at least one column")
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        for c in cols:
            if c.type.depth() > MAX_NESTING_DEPTH:
                raise ValueError(f"nesting depth exceeds {MAX_NESTING_DEPTH}")
        object.__setattr__(self, "columns", tuple(cols))

    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise UnknownColumn(f"no column named {name!r}")

    def index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise UnknownColumn(f"no column named {name!r}")

    def __iter__(self) -> Iterator[Column]:
        return iter(self.columns)

    def validate_row(self, row: dict) -> None:
        """Check one row dict against every column, honoring nullability."""
        if not isinstance(row, dict):
            raise ValueTypeError("", f"row must be a dict, got {type(row).__name__}")
        extra = set(row) - set(self.names())
        if extra:
            raise ValueTypeError(sorted(extra)[0], "unexpected column")
        for c in self.columns:
            v = row.get(c.name)
            if v is None:
                if not c.nullable:
                    raise ValueTypeError(c.name, "null in non-nullable column")
                continue
            validate_value(c.type, v, path=c.name)


def validate_value(t: FeatureType, v: Any, path: str = "") -> None:
    """Raise ValueTypeError (with a leaf path) unless *v* conforms to *t*."""
    if v is None:
        raise ValueTypeError(path, "unexpected null")
    if isinstance(t, Int64):
        _check_int(v, path)
    elif isinstance(t, Float64):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueTypeError(path, f"expected float, got {type(v).__name__}")
    elif isinstance(t, Bool):
        if not isinstance(v, bool):
            raise ValueTypeError(path, f"expected bool, got {type(v).__name__}")
    elif isinstance(t, Utf8String):
        if not isinstance(v, str):
            raise ValueTypeError(path, f"expected string, got {type(v).__name__}")
    elif isinstance(t, Binary):
        if not isinstance(v, (bytes, bytearray)):
            raise ValueTypeError(path, f"expected bytes, got {type(v).__name__}")
    elif isinstance(t, ClassLabel):
        _check_int(v, path)
        if not 0 <= v < len(t.names):
            raise ValueTypeError(path, f"class code {v} out of range [0, {len(t.names)})")
    elif isinstance(t, Sequence):
        if not isinstance(v, (list, tuple)):
            raise ValueTypeError(path, f"expected list, got {type(v).__name__}")
        if t.fixed_length is not None and len(v) != t.fixed_length:
            raise ValueTypeError(path, f"expected length {t.fixed_length}, got {len(v)}")
        for i, elem in enumerate(v):
            validate_value(t.inner, elem, path=f"{path}[{i}]")
    elif isinstance(t, Translation):
        if not isinstance(v, dict):
            raise ValueTypeError(path, f"expected mapping, got {type(v).__name__}")
        if set(v) != set(t.languages):
            raise ValueTypeError(
                path, f"languages {sorted(v)} != declared {list(t.languages)}"
            )
        for lang in t.languages:
            if not isinstance(v[lang], str):
                raise ValueTypeError(_join(path, lang), "translation text must be a string")
    elif isinstance(t, Tensor):
        if not isinstance(v, (list, tuple)):
            raise ValueTypeError(path, f"expected flat element list, got {type(v).__name__}")
        if len(v) != t.size:
            raise ValueTypeError(path, f"expected {t.size} elements, got {len(v)}")
        for i, elem in enumerate(v):
            if t.dtype == "int64":
                _check_int(elem, f"{path}[{i}]")
            elif isinstance(elem, bool) or not isinstance(elem, (int, float)):
                raise ValueTypeError(f"{path}[{i}]", "expected numeric element")
    elif isinstance(t, Record):
        if not isinstance(v, dict):
            raise ValueTypeError(path, f"expected mapping, got {type(v).__name__}")
        declared = [n for n, _ in t.fields]
        if set(v) != set(declared):
            missing = sorted(set(declared) - set(v))
            extra = sorted(set(v) - set(declared))
            what = f"missing fields {missing}" if missing else f"unexpected fields {extra}"
            raise ValueTypeError(path, what)
        for name, ftype in t.fields:
            validate_value(ftype, v[name], path=_join(path, name))
    else:
        raise ValueTypeError(path, f"unhandled feature type {t!r}")


def _check_int(v: Any, path: str) -> None:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueTypeError(path, f"expected integer, got {type(v).__name__}")
    if not _INT64_MIN <= v <= _INT64_MAX:
        raise ValueTypeError(path, f"{v} outside int64 range")


def _join(path: str, name: str) -> str:
    return f"{path}.{name}" if path else name


# ---------------------------------------------------------------------------
# canonical JSON round-trip

def schema_to_json(s: Schema) -> str:
    """Canonical text form: equal schemas produce byte-identical output."""
    obj = {
        "columns": [
            {"name": c.name, "nullable": c.nullable, "type": c.type.to_json_obj()}
            for c in s.columns
        ]
    }
    return canonical_json(obj)


def schema_from_json(text: str) -> Schema:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno) from None
    if not isinstance(obj, dict) or "columns" not in obj:
        raise ParseError("schema JSON must be an object with a 'columns' array")
    try:
        return Schema(
            [
                Column(c["name"], type_from_json_obj(c["type"]), bool(c.get("nullable", False)))
                for c in obj["columns"]
            ]
        )
    except (KeyError, TypeError) as e:
        raise ParseError(f"malformed schema JSON: {e}") from None
