"""dataforge: desk-scale dataset management with one uniform interface.

Typed columnar storage with memory-mapped access, declarative dataset
builders with download caching, fingerprint-cached transforms, streaming,
text/vector search indexes, mergeable metrics, and documented dataset
registries, all behind one API, one CLI, and one read-only HTTP service.
"""

__version__ = "0.1.0"  # must precede submodule imports; builder reads it back

from .builder import (
    BuilderDef,
    SourceRef,
    build_dataset,
    builder_fingerprint,
    load_builder_def,
    load_dataset,
    resolve_cache_dir,
    resolve_registry_dir,
)
from .errors import DataforgeError
from .index import (
    InvertedIndex,
    VectorIndex,
    bm25_query,
    build_text_index,
    build_vector_index,
    knn_query,
    tokenize,
)
from .metrics import Metric, get_metric
from .registry import (
    DataCard,
    Finding,
    Registry,
    TagSet,
    parse_card,
    size_bucket,
    validate_card,
    validate_card_text,
)
from .schema import (
    Binary,
    Bool,
    ClassLabel,
    Column,
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
    validate_value,
)
from .server import make_server, serve
from .store import (
    DatasetDict,
    DatasetInfo,
    Table,
    concat_tables,
    open_table,
    write_table,
)
from .stream import StreamPipeline, StreamSource, stream_rows
from .transform import (
    TransformSpec,
    chain_fingerprint,
    filter_table,
    map_table,
    register_transform,
    select,
    shuffle,
    sort,
    spec_for,
    train_test_split,
)

__all__ = [
    "Binary",
    "Bool",
    "BuilderDef",
    "ClassLabel",
    "Column",
    "DataCard",
    "DataforgeError",
    "DatasetDict",
    "DatasetInfo",
    "FeatureType",
    "Finding",
    "Float64",
    "Int64",
    "InvertedIndex",
    "Metric",
    "Record",
    "Registry",
    "Schema",
    "Sequence",
    "SourceRef",
    "StreamPipeline",
    "StreamSource",
    "Table",
    "TagSet",
    "Tensor",
    "TransformSpec",
    "Translation",
    "Utf8String",
    "VectorIndex",
    "bm25_query",
    "build_dataset",
    "build_text_index",
    "build_vector_index",
    "builder_fingerprint",
    "chain_fingerprint",
    "concat_tables",
    "filter_table",
    "get_metric",
    "knn_query",
    "load_builder_def",
    "load_dataset",
    "make_server",
    "map_table",
    "open_table",
    "parse_card",
    "register_transform",
    "resolve_cache_dir",
    "resolve_registry_dir",
    "schema_from_json",
    "schema_to_json",
    "select",
    "serve",
    "shuffle",
    "size_bucket",
    "sort",
    "spec_for",
    "stream_rows",
    "tokenize",
    "train_test_split",
    "validate_card",
    "validate_card_text",
    "validate_value",
    "write_table",
    "__version__",
]
