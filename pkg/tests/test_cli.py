import json
import os

import pytest

from dataforge.builder import load_dataset
from dataforge.cli import main
from dataforge.registry import Registry
from dataforge.schema import Int64, Schema, Utf8String
from dataforge.server import render_row
from dataforge.stream import StreamSource

from .conftest import make_card, make_reviews_builder

REVIEWS = "demo/reviews"
NEWS = "demo/news"


@pytest.fixture
def env(hub_env):
    cache_dir, registry_dir = hub_env
    def run(*argv):
        return main(["--cache-dir", cache_dir, "--registry", registry_dir, *argv])
    return run, cache_dir, registry_dir


class TestInfoAndBuild:
    def test_info_prints_summary(self, env, capsys):
        run, _, _ = env
        assert run("info", REVIEWS) == 0
        out = capsys.readouterr().out
        assert "1.0.0" in out
        assert "train: 8 rows" in out
        assert "test: 4 rows" in out
        assert "accuracy" in out

    def test_info_json(self, env, capsys):
        run, _, _ = env
        assert run("info", REVIEWS, "--json") == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["splits"] == {"train": 8, "test": 4}
        assert obj["version"] == "1.0.0"
        assert obj["license"] == "mit"

    def test_build_creates_split_files(self, env, capsys):
        run, cache_dir, _ = env
        assert run("build", NEWS, "--json") == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj == {"id": NEWS, "splits": {"train": 6}}
        found = []
        for dirpath, _, files in os.walk(cache_dir):
            found.extend(f for f in files if f.endswith(".dset"))
        assert "train.dset" in found

    def test_build_warns_on_bad_card_but_succeeds(self, env, capsys, tmp_path):
        run, cache_dir, registry_dir = env
        bad = make_reviews_builder(str(tmp_path / "data-bad"), dataset_id="demo/badcard")
        Registry(registry_dir).add(
            bad, make_card(splits={"train": 99, "test": 4})  # train is actually 8
        )
        assert run("build", "demo/badcard") == 0
        err = capsys.readouterr().err
        assert "warning" in err and "badcard" in err and "split_mismatch" in err

    def test_unknown_dataset_is_domain_error(self, env, capsys):
        run, _, _ = env
        assert run("info", "no/such") == 1
        assert capsys.readouterr().err.startswith("error:")


class TestUsageErrors:
    def test_unknown_subcommand(self, env):
        run, _, _ = env
        assert run("frobnicate") == 2

    def test_missing_required_flag(self, env):
        run, _, _ = env
        assert run("rows", REVIEWS) == 2  # --split is required

    def test_no_command(self):
        assert main([]) == 2

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_negative_offset_usage_error(self, env):
        run, _, _ = env
        assert run("rows", REVIEWS, "--split", "train", "--offset", "-3") == 2


class TestRows:
    def test_sixth_row_matches_slice_oracle(self, env, capsys):
        run, cache_dir, registry_dir = env
        assert run("rows", REVIEWS, "--split", "train", "--offset", "5", "--limit", "1",
                   "--json") == 0
        page = json.loads(capsys.readouterr().out)
        ds = load_dataset(REVIEWS, cache_dir=cache_dir, registry_dir=registry_dir)
        table = ds["train"]
        assert page["rows"] == [render_row(table.schema, table.row(5))]
        assert page["total"] == 8

    def test_human_output_one_line_per_row(self, env, capsys):
        run, _, _ = env
        assert run("rows", REVIEWS, "--split", "train", "--offset", "2", "--limit", "3") == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 3
        assert lines[0].startswith("[2] ")

    def test_unknown_split(self, env, capsys):
        run, _, _ = env
        assert run("rows", REVIEWS, "--split", "dev") == 1
        assert "dev" in capsys.readouterr().err


class TestMap:
    def test_identity_preserves_content_fingerprint(self, env, capsys):
        run, cache_dir, registry_dir = env
        assert run("map", REVIEWS, "--split", "train", "--transform", "identity",
                   "--json") == 0
        obj = json.loads(capsys.readouterr().out)
        ds = load_dataset(REVIEWS, cache_dir=cache_dir, registry_dir=registry_dir)
        assert obj["rows"] == 8
        assert obj["fingerprint"] == ds["train"].fingerprint
        assert obj["path"] != ds["train"].path

    def test_lowercase_with_params(self, env, capsys):
        run, _, _ = env
        code = run("map", NEWS, "--split", "train", "--transform", "lowercase",
                   "--params", '{"column": "headline"}', "--json")
        assert code == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["rows"] == 6

    def test_unknown_transform(self, env, capsys):
        run, _, _ = env
        assert run("map", REVIEWS, "--split", "train", "--transform", "nope") == 1
        assert "nope" in capsys.readouterr().err

    def test_bad_params_json(self, env, capsys):
        run, _, _ = env
        assert run("map", REVIEWS, "--split", "train", "--transform", "identity",
                   "--params", "{oops") == 1


class TestStream:
    @pytest.fixture
    def manifest(self, tmp_path):
        shard_a = tmp_path / "a.jsonl"
        shard_b = tmp_path / "b.jsonl"
        shard_a.write_text("".join(json.dumps({"id": i, "text": f"Row {i}"}) + "\n"
                                   for i in range(4)))
        shard_b.write_text("".join(json.dumps({"id": i, "text": f"Row {i}"}) + "\n"
                                   for i in range(4, 7)))
        source = StreamSource(
            shards=(str(shard_a), str(shard_b)),
            schema=Schema([("id", Int64()), ("text", Utf8String())]),
            field_map={"id": "id", "text": "text"},
            format="jsonl",
        )
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(source.to_json_obj()))
        return str(path)

    def test_take_three(self, env, capsys, manifest):
        run, _, _ = env
        assert run("stream", manifest, "--take", "3") == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert [json.loads(l)["id"] for l in lines] == [0, 1, 2]

    def test_skip_and_ops(self, env, capsys, manifest):
        run, _, _ = env
        assert run("stream", manifest, "--op", 'map:lowercase:{"column": "text"}',
                   "--skip", "5") == 0
        lines = capsys.readouterr().out.strip().split("\n")
        rows = [json.loads(l) for l in lines]
        assert [r["id"] for r in rows] == [5, 6]
        assert rows[0]["text"] == "row 5"

    def test_bad_op_syntax_usage_error(self, env, capsys, manifest):
        run, _, _ = env
        assert run("stream", manifest, "--op", "explode") == 2

    def test_shuffle_is_permutation(self, env, capsys, manifest):
        run, _, _ = env
        assert run("stream", manifest, "--shuffle-buffer", "4", "--seed", "9") == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert sorted(json.loads(l)["id"] for l in lines) == list(range(7))


class TestIndex:
    def test_text_build_then_query(self, env, capsys):
        run, _, _ = env
        assert run("index", "build", REVIEWS, "--split", "train", "--column", "text",
                   "--kind", "text", "--json") == 0
        built = json.loads(capsys.readouterr().out)
        assert built["entries"] == 8
        assert os.path.exists(built["path"])

        assert run("index", "query", REVIEWS, "--split", "train", "--column", "text",
                   "--kind", "text", "--query", "fine film", "-k", "3", "--json") == 0
        hits = json.loads(capsys.readouterr().out)
        assert hits[0]["row"] == 0  # "a fine film" matches both query terms
        assert all(h["score"] > 0 for h in hits)

    def test_query_builds_missing_index(self, env, capsys):
        run, _, _ = env
        assert run("index", "query", REVIEWS, "--split", "test", "--column", "text",
                   "--kind", "text", "--query", "boring", "--json") == 0
        hits = json.loads(capsys.readouterr().out)
        assert len(hits) == 1

    def test_vector_query(self, env, capsys):
        run, _, _ = env
        code = run("index", "query", NEWS, "--split", "train", "--column", "emb",
                   "--kind", "vector", "--metric", "l2", "--query", "0,1,2,3",
                   "-k", "2", "--json")
        assert code == 0
        hits = json.loads(capsys.readouterr().out)
        assert hits[0]["row"] == 0  # exact match on the first stored tensor
        assert hits[0]["score"] == 0.0

    def test_wrong_column_type_domain_error(self, env, capsys):
        run, _, _ = env
        assert run("index", "build", REVIEWS, "--split", "train", "--column", "label",
                   "--kind", "text") == 1


class TestMetric:
    def write(self, tmp_path, pred_lines, ref_lines):
        p = tmp_path / "p.txt"
        r = tmp_path / "r.txt"
        p.write_text("\n".join(pred_lines) + "\n")
        r.write_text("\n".join(ref_lines) + "\n")
        return str(p), str(r)

    def test_accuracy(self, env, capsys, tmp_path):
        run, _, _ = env
        p, r = self.write(tmp_path, ["0", "1", "1", "0"], ["0", "1", "0", "0"])
        assert run("metric", "--name", "accuracy", "--predictions", p,
                   "--references", r, "--json") == 0
        assert json.loads(capsys.readouterr().out) == {"accuracy": 0.75, "total": 4}

    def test_bleu_tab_separated_references(self, env, capsys, tmp_path):
        run, _, _ = env
        # second alternative matches; best-match reference wins
        p, r = self.write(tmp_path, ["the cat sat down"],
                          ["a dog stood up\tthe cat sat down"])
        assert run("metric", "--name", "bleu", "--predictions", p,
                   "--references", r, "--json") == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["bleu"] == 1.0

    def test_bleu_smooth_flag(self, env, capsys, tmp_path):
        run, _, _ = env
        p, r = self.write(tmp_path, ["the cat"], ["the cat sat down"])
        assert run("metric", "--name", "bleu", "--predictions", p,
                   "--references", r, "--json") == 0
        assert json.loads(capsys.readouterr().out)["bleu"] == 0.0
        assert run("metric", "--name", "bleu", "--predictions", p,
                   "--references", r, "--smooth", "--json") == 0
        assert json.loads(capsys.readouterr().out)["bleu"] > 0.0

    def test_f1_with_params(self, env, capsys, tmp_path):
        run, _, _ = env
        p, r = self.write(tmp_path, ["pos", "pos", "neg"], ["pos", "neg", "neg"])
        assert run("metric", "--name", "f1", "--predictions", p, "--references", r,
                   "--params", '{"positive_label": "pos"}', "--json") == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["f1"] == pytest.approx(2 / 3)

    def test_unknown_metric(self, env, capsys, tmp_path):
        run, _, _ = env
        p, r = self.write(tmp_path, ["1"], ["1"])
        assert run("metric", "--name", "nope", "--predictions", p,
                   "--references", r) == 1
        assert "nope" in capsys.readouterr().err

    def test_length_mismatch_domain_error(self, env, capsys, tmp_path):
        run, _, _ = env
        p, r = self.write(tmp_path, ["1", "2"], ["1"])
        assert run("metric", "--name", "accuracy", "--predictions", p,
                   "--references", r) == 1


class TestCardValidate:
    def test_valid_card(self, env, capsys):
        run, _, _ = env
        assert run("card", "validate", REVIEWS) == 0
        assert "card is valid" in capsys.readouterr().out

    def test_error_findings_exit_one(self, env, capsys, tmp_path):
        run, _, registry_dir = env
        bad = make_reviews_builder(str(tmp_path / "data-bad"), dataset_id="demo/badcard")
        Registry(registry_dir).add(bad, make_card(splits={"train": 99, "test": 4}))
        assert run("card", "validate", "demo/badcard") == 1
        out = capsys.readouterr().out
        assert "error: split_mismatch" in out

    def test_file_flag_validates_other_text(self, env, capsys, tmp_path):
        run, _, _ = env
        card = tmp_path / "card.md"
        card.write_text(make_card(splits={"train": 8, "test": 4}))
        assert run("card", "validate", REVIEWS, "--file", str(card)) == 0

    def test_json_findings(self, env, capsys, tmp_path):
        run, _, _ = env
        card = tmp_path / "card.md"
        card.write_text("# not a card\n")
        assert run("card", "validate", REVIEWS, "--file", str(card), "--json") == 1
        findings = json.loads(capsys.readouterr().out)
        assert findings == [
            {
                "severity": "error",
                "code": "missing_front_matter",
                "message": findings[0]["message"],
            }
        ]


class TestSearch:
    def test_filters_match_registry(self, env, capsys):
        run, _, registry_dir = env
        assert run("search", "--lang", "es", "--task", "text-classification") == 0
        out = capsys.readouterr().out.strip().split("\n")
        assert out == Registry(registry_dir).search(
            {"languages": ["es"], "task_categories": ["text-classification"]}
        )

    def test_json_output(self, env, capsys):
        run, _, _ = env
        assert run("search", "--license", "cc-by-4.0", "--json") == 0
        assert json.loads(capsys.readouterr().out) == {"ids": [NEWS]}

    def test_no_filters_lists_all(self, env, capsys):
        run, _, _ = env
        assert run("search") == 0
        assert capsys.readouterr().out.strip().split("\n") == [NEWS, REVIEWS]

    def test_unknown_value_domain_error(self, env, capsys):
        run, _, _ = env
        assert run("search", "--lang", "klingon") == 1
        assert "klingon" in capsys.readouterr().err
