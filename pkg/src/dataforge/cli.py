"""Command line entry points.

Exit codes: 0 on success, 1 on a domain error (bad data, unknown dataset,
failed validation), 2 on usage errors.  Subcommands that support ``--json``
print exactly one JSON document on stdout so output can be piped.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .builder import load_dataset, resolve_cache_dir, resolve_registry_dir
from .errors import DataforgeError, UnknownDataset
from .index import (
    bm25_query,
    build_text_index,
    build_vector_index,
    index_path,
    knn_query,
    load_text_index,
    load_vector_index,
    save_text_index,
    save_vector_index,
)
from .metrics import METRIC_NAMES, get_metric
from .registry import Registry, validate_card_text
from .server import render_row, serve
from .stream import StreamPipeline, StreamSource, stream_rows
from .transform import get_transform, map_table, spec_for


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dataforge",
        description="Dataset management: build, inspect, transform, search, serve.",
    )
    parser.add_argument("--cache-dir", default=None, help="cache root (env DATAFORGE_CACHE_DIR)")
    parser.add_argument("--registry", default=None, help="registry dir (default <cache>/registry)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("build", help="download sources and build the split tables")
    p.add_argument("id")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_build)

    p = sub.add_parser("info", help="print description, version, splits, row counts")
    p.add_argument("id")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_info)

    p = sub.add_parser("rows", help="print a page of rows from one split")
    p.add_argument("id")
    p.add_argument("--split", required=True)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--limit", type=int, default=10)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_rows)

    p = sub.add_parser("map", help="apply a registered transform to one split")
    p.add_argument("id")
    p.add_argument("--split", required=True)
    p.add_argument("--transform", required=True, help="registered transform id")
    p.add_argument("--params", default="{}", help="JSON object of transform parameters")
    p.add_argument("--batched", action="store_true")
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_map)

    p = sub.add_parser("stream", help="stream rows from a source manifest as JSON lines")
    p.add_argument("manifest", help="JSON file describing shards, schema, format")
    p.add_argument(
        "--op",
        action="append",
        default=[],
        metavar="KIND:NAME[:PARAMS]",
        help='lazy op with optional JSON params, e.g. map:lowercase:{"column":"text"}; '
        "repeatable, applied in order",
    )
    p.add_argument("--shuffle-buffer", type=int, default=0, help="buffered shuffle size (0 = off)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip", type=int, default=0)
    p.add_argument("--take", type=int, default=-1, help="stop after N rows (-1 = all)")
    p.set_defaults(run=_cmd_stream)

    p = sub.add_parser("index", help="build or query a search index for one column")
    index_sub = p.add_subparsers(dest="index_command", required=True, metavar="action")
    for action in ("build", "query"):
        q = index_sub.add_parser(action)
        q.add_argument("id")
        q.add_argument("--split", required=True)
        q.add_argument("--column", required=True)
        q.add_argument("--kind", choices=("text", "vector"), required=True)
        q.add_argument("--metric", default="cosine", help="vector metric (vector kind only)")
        if action == "query":
            q.add_argument("--query", required=True, help="text, or comma-separated floats")
            q.add_argument("-k", type=int, default=10)
            q.add_argument("--json", action="store_true")
            q.set_defaults(run=_cmd_index_query)
        else:
            q.add_argument("--json", action="store_true")
            q.set_defaults(run=_cmd_index_build)

    p = sub.add_parser("metric", help="compute a metric over prediction/reference files")
    p.add_argument("--name", required=True, help=f"one of: {', '.join(METRIC_NAMES)}")
    p.add_argument("--predictions", required=True,
                   help="text file, one prediction per line")
    p.add_argument("--references", required=True,
                   help="text file, one reference per line; tab separates "
                        "alternative references for the same line")
    p.add_argument("--smooth", action="store_true",
                   help="add-1 smoothing for the higher BLEU orders")
    p.add_argument("--params", default="{}", help="JSON object of metric parameters")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_metric)

    p = sub.add_parser("card", help="data card operations")
    card_sub = p.add_subparsers(dest="card_command", required=True, metavar="action")
    q = card_sub.add_parser("validate", help="validate a data card against the dataset")
    q.add_argument("id")
    q.add_argument("--file", default=None, help="validate this file instead of the stored card")
    q.add_argument("--revision", type=int, default=None)
    q.add_argument("--json", action="store_true")
    q.set_defaults(run=_cmd_card_validate)

    p = sub.add_parser("search", help="find dataset ids by tag facets")
    p.add_argument("--lang", action="append", default=[], help="language code; repeatable")
    p.add_argument("--task", action="append", default=[], help="task category; repeatable")
    p.add_argument("--task-id", action="append", default=[], help="task id; repeatable")
    p.add_argument("--license", action="append", default=[], help="license id; repeatable")
    p.add_argument("--size", action="append", default=[], help="size bucket; repeatable")
    p.add_argument("--multilinguality", action="append", default=[])
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_search)

    p = sub.add_parser("serve", help="run the read-only HTTP service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", default=None, help="directory of frontend assets to serve at /")
    p.set_defaults(run=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse prints its own message
        return 0 if e.code in (0, None) else 2
    try:
        return args.run(args) or 0
    except DataforgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as e:
        print(f"error: invalid JSON argument: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _dirs(args) -> tuple[str, str]:
    cache_dir = resolve_cache_dir(args.cache_dir)
    return cache_dir, resolve_registry_dir(args.registry, cache_dir)


def _load(args):
    cache_dir, registry_dir = _dirs(args)
    return load_dataset(args.id, cache_dir=cache_dir, registry_dir=registry_dir)


def _warn_on_bad_card(args, info) -> None:
    # Invalid documentation warns but never blocks the data itself.
    _, registry_dir = _dirs(args)
    reg = Registry(registry_dir)
    try:
        text = reg.card_text(args.id)
    except UnknownDataset:
        return
    errors = [f for f in validate_card_text(text, info) if f.severity == "error"]
    if errors:
        print(f"warning: data card for {args.id!r} failed validation:", file=sys.stderr)
        for f in errors:
            print(f"  {f.code}: {f.message}", file=sys.stderr)


def _cmd_build(args) -> int:
    ds = _load(args)
    _warn_on_bad_card(args, ds.info)
    if args.json:
        _emit({"id": args.id, "splits": dict(ds.info.split_rows)})
        return 0
    print(f"built {args.id} v{ds.info.version}")
    for split in ds:
        table = ds[split]
        print(f"  {split}: {table.num_rows} rows at {table.path}")
    return 0


def _cmd_info(args) -> int:
    ds = _load(args)
    info = ds.info
    if args.json:
        _emit(
            {
                "id": args.id,
                "description": info.description,
                "version": info.version,
                "license": info.license,
                "citation": info.citation,
                "splits": dict(info.split_rows),
                "recommended_metrics": list(info.recommended_metrics),
            }
        )
        return 0
    print(f"{args.id}  v{info.version}" + (f"  license: {info.license}" if info.license else ""))
    if info.description:
        print(info.description)
    print("splits:")
    for split, rows in info.split_rows.items():
        print(f"  {split}: {rows} rows")
    if info.recommended_metrics:
        print("recommended metrics: " + ", ".join(info.recommended_metrics))
    return 0


def _cmd_rows(args) -> int:
    if args.offset < 0 or args.limit < 1:
        print("error: --offset must be >= 0 and --limit >= 1", file=sys.stderr)
        return 2
    ds = _load(args)
    try:
        table = ds[args.split]
    except KeyError:
        print(f"error: {args.id} has no split {args.split!r}", file=sys.stderr)
        return 1
    total = table.num_rows
    start = min(args.offset, total)
    end = min(args.offset + args.limit, total)
    rendered = [render_row(table.schema, r) for r in table.slice(start, end)]
    if args.json:
        _emit(
            {
                "id": args.id,
                "split": args.split,
                "offset": args.offset,
                "limit": args.limit,
                "total": total,
                "rows": rendered,
            }
        )
        return 0
    for i, row in enumerate(rendered):
        print(f"[{start + i}] {json.dumps(row, sort_keys=True)}")
    return 0


def _cmd_map(args) -> int:
    cache_dir, _ = _dirs(args)
    ds = _load(args)
    try:
        table = ds[args.split]
    except KeyError:
        print(f"error: {args.id} has no split {args.split!r}", file=sys.stderr)
        return 1
    params = json.loads(args.params)
    entry = get_transform(args.transform)
    spec = spec_for(args.transform, "map", params, args.batched, args.batch_size)
    out_schema = entry.infer_schema(table.schema, spec.params) if entry.infer_schema else table.schema
    out = map_table(table, spec, out_schema, workers=args.workers, cache_dir=cache_dir)
    payload = {"rows": out.num_rows, "fingerprint": out.fingerprint, "path": out.path}
    if args.json:
        _emit(payload)
    else:
        print(f"{out.num_rows} rows -> {out.path}")
        print(f"fingerprint {out.fingerprint}")
    return 0


def _cmd_stream(args) -> int:
    with open(args.manifest, encoding="utf-8") as f:
        source = StreamSource.from_json_obj(json.load(f))
    pipeline = StreamPipeline(source)
    for op in args.op:
        kind, _, rest = op.partition(":")
        name, _, raw_params = rest.partition(":")
        if kind not in ("map", "filter") or not name:
            print(f"error: --op expects map:NAME[:PARAMS] or filter:NAME[:PARAMS], got {op!r}",
                  file=sys.stderr)
            return 2
        params = json.loads(raw_params) if raw_params else {}
        spec = spec_for(name, kind, params)
        pipeline = pipeline.map(spec) if kind == "map" else pipeline.filter(spec)
    if args.shuffle_buffer > 0:
        pipeline = pipeline.shuffle(args.shuffle_buffer, args.seed)
    if args.skip > 0:
        pipeline = pipeline.skip(args.skip)
    if args.take >= 0:
        pipeline = pipeline.take(args.take)
    for row in stream_rows(pipeline):
        print(json.dumps(render_row(source.schema, row), sort_keys=True))
    return 0


def _index_file(args, table) -> str:
    cache_dir, _ = _dirs(args)
    return index_path(cache_dir, table.fingerprint, args.column, args.kind)


def _build_index(args, table, path: str):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    if args.kind == "text":
        ix = build_text_index(table, args.column)
        save_text_index(ix, path)
    else:
        ix = build_vector_index(table, args.column, args.metric)
        save_vector_index(ix, path)
    return ix


def _cmd_index_build(args) -> int:
    ds = _load(args)
    table = ds[args.split]
    path = _index_file(args, table)
    ix = _build_index(args, table, path)
    count = ix.n_docs if args.kind == "text" else ix.n_vectors
    if args.json:
        _emit({"path": path, "kind": args.kind, "column": args.column, "entries": count})
    else:
        print(f"indexed {count} entries -> {path}")
    return 0


def _cmd_index_query(args) -> int:
    ds = _load(args)
    table = ds[args.split]
    path = _index_file(args, table)
    if args.kind == "text":
        ix = load_text_index(path) if os.path.exists(path) else _build_index(args, table, path)
        hits = bm25_query(ix, args.query, args.k)
    else:
        ix = load_vector_index(path) if os.path.exists(path) else _build_index(args, table, path)
        vector = [float(x) for x in args.query.split(",")]
        hits = knn_query(ix, vector, args.k)
    if args.json:
        _emit([{"row": row, "score": score} for row, score in hits])
    else:
        for row, score in hits:
            print(f"{score:.6f}\t{row}")
    return 0


def _cmd_metric(args) -> int:
    with open(args.predictions, encoding="utf-8") as f:
        predictions = f.read().splitlines()
    with open(args.references, encoding="utf-8") as f:
        # a tab-separated line is a set of alternative references
        references = [
            line.split("\t") if "\t" in line else line
            for line in f.read().splitlines()
        ]
    params = json.loads(args.params)
    if args.smooth:
        params["smooth"] = True
    try:
        metric = get_metric(args.name, **params)
    except KeyError as e:
        print(f"error: {e.args[0]}", file=sys.stderr)
        return 1
    metric.add_batch(predictions, references)
    result = metric.compute()
    if args.json:
        _emit(result)
    elif isinstance(result, dict):
        for key in sorted(result):
            print(f"{key}: {result[key]}")
    else:
        print(result)
    return 0


def _cmd_card_validate(args) -> int:
    _, registry_dir = _dirs(args)
    reg = Registry(registry_dir)
    if args.file:
        with open(args.file, encoding="utf-8") as f:
            text = f.read()
    else:
        text = reg.card_text(args.id, args.revision)
    try:
        info = _load(args).info
    except DataforgeError as e:
        print(f"note: split counts not checked ({e})", file=sys.stderr)
        info = None
    findings = validate_card_text(text, info)
    if args.json:
        _emit([{"severity": f.severity, "code": f.code, "message": f.message} for f in findings])
    else:
        for f in findings:
            print(f"{f.severity}: {f.code}: {f.message}")
        if not findings:
            print("card is valid")
    return 1 if any(f.severity == "error" for f in findings) else 0


def _cmd_search(args) -> int:
    _, registry_dir = _dirs(args)
    filters = {
        "languages": args.lang,
        "task_categories": args.task,
        "task_ids": args.task_id,
        "licenses": args.license,
        "size_category": args.size,
        "multilinguality": args.multilinguality,
    }
    filters = {k: v for k, v in filters.items() if v}
    ids = Registry(registry_dir).search(filters)
    if args.json:
        _emit({"ids": ids})
    else:
        for id in ids:
            print(id)
    return 0


def _cmd_serve(args) -> int:
    cache_dir, registry_dir = _dirs(args)
    serve(
        registry_dir=registry_dir,
        cache_dir=cache_dir,
        port=args.port,
        host=args.host,
        static_dir=args.static,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
