import json
import random
from dataclasses import replace

import pytest

from _oracles import tokens_balanced
from codegap.errors import SchemaError
from codegap.pipeline import (
    PairRecord,
    PipelineConfig,
    batch_by_language,
    content_hash,
    file_seed,
    ingest,
    make_pairs,
    read_jsonl,
    read_shard_dir,
    splice_truncation,
    truncate_file,
    write_jsonl,
    write_shards,
)
from codegap.texttok import count_text_tokens


def test_dedup_by_content(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    (tmp_path / "a" / "one.py").write_text("x = 1\n", encoding="utf-8")
    (tmp_path / "b" / "two.py").write_text("x = 1\n", encoding="utf-8")
    (tmp_path / "b" / "three.py").write_text("y = 2\n", encoding="utf-8")
    files = ingest([tmp_path], PipelineConfig())
    assert len(files) == 2
    assert len({f.content_hash for f in files}) == 2


def test_unknown_extensions_excluded(tmp_path):
    (tmp_path / "a.py").write_text("x = 1\n", encoding="utf-8")
    (tmp_path / "a.txt").write_text("not code\n", encoding="utf-8")
    files = ingest([tmp_path], PipelineConfig())
    assert [f.language for f in files] == ["python"]


def test_language_filter(tmp_path):
    (tmp_path / "a.py").write_text("x = 1\n", encoding="utf-8")
    (tmp_path / "a.js").write_text("let x = 1;\n", encoding="utf-8")
    files = ingest([tmp_path], PipelineConfig(languages=("javascript",)))
    assert [f.language for f in files] == ["javascript"]


def test_repo_level_split(tmp_path):
    for repo, name, body in (("r1", "a.py", "x = 1\n"), ("r2", "b.py", "y = 2\n"),
                             ("r2", "c.py", "z = 3\n")):
        (tmp_path / repo).mkdir(exist_ok=True)
        (tmp_path / repo / name).write_text(body, encoding="utf-8")
    files = ingest([tmp_path], PipelineConfig(valid_repos=frozenset({"r2"})))
    by_split = {f.path.name: f.split for f in files}
    assert by_split == {"a.py": "train", "b.py": "valid", "c.py": "valid"}


def test_validation_isolation(tmp_path):
    for repo in ("r1", "r2"):
        (tmp_path / repo).mkdir()
        for i in range(3):
            (tmp_path / repo / f"f{i}.py").write_text(f"v{repo} = {i}\n", encoding="utf-8")
    files = ingest([tmp_path], PipelineConfig(valid_repos=frozenset({"r2"})))
    train_hashes = {f.content_hash for f in files if f.split == "train"}
    valid_hashes = {f.content_hash for f in files if f.split == "valid"}
    assert not (train_hashes & valid_hashes)


def test_truncate_below_threshold_is_identity(parsed_corpus):
    _, tree = parsed_corpus[1]
    cfg = PipelineConfig(truncation_threshold=tree.leaf_count + 100)
    result = truncate_file(tree, random.Random(0), cfg)
    assert not result.was_truncated
    assert result.shortened is tree


def test_truncate_long_file_reconstructs(parsed_corpus):
    cfg = PipelineConfig()
    long_trees = [t for _, t in parsed_corpus if t.leaf_count > cfg.truncation_threshold]
    assert long_trees
    for tree in long_trees[:6]:
        result = truncate_file(tree, random.Random(5), cfg)
        assert result.was_truncated
        for span in result.spans:
            assert cfg.segment_min_len <= span.leaf_count <= cfg.segment_max_len
        spliced = splice_truncation(result, tree.language.fold_token)
        assert spliced == [t.text for t in tree.leaves]
        folds = [t for t in result.shortened.leaves if t.kind == "fold"]
        assert len(folds) == len(result.segments)
        for segment in result.segments:
            assert tokens_balanced(segment.leaves)


def test_make_pairs_deterministic_and_parallel_stable(tmp_path, mixed_corpus):
    root, _ = mixed_corpus
    cfg = PipelineConfig(seed=13)
    files = ingest([root], cfg)[:20]
    one = [json.dumps(r.to_record()) for r in make_pairs(files, cfg)]
    two = [json.dumps(r.to_record()) for r in make_pairs(files, cfg)]
    par = [json.dumps(r.to_record()) for r in make_pairs(files, replace(cfg, jobs=2))]
    assert one == two == par
    assert one


def test_pair_records_have_exact_schema(mixed_corpus):
    root, _ = mixed_corpus
    cfg = PipelineConfig(seed=1)
    files = ingest([root], cfg)[:4]
    rec = next(iter(make_pairs(files, cfg))).to_record()
    assert list(rec.keys()) == ["id", "language", "context", "target", "meta"]
    assert list(rec["meta"].keys()) == [
        "source", "span_start", "span_len", "dedent_cols",
        "skipped_masking", "aliases", "seed",
    ]
    assert isinstance(rec["meta"]["seed"], int)


def test_whitespace_only_file_yields_no_pairs(tmp_path):
    (tmp_path / "blank.py").write_text("\n\n   \n\n", encoding="utf-8")
    cfg = PipelineConfig(seed=0)
    files = ingest([tmp_path], cfg)
    assert list(make_pairs(files, cfg)) == []


def test_jsonl_roundtrip_thousand_pairs(tmp_path):
    records = [
        PairRecord(pair_id=f"p{i}", language="python",
                   context=f"<cls_python>ctx {i} <mask>", target=f"<cls_python>tgt {i}",
                   meta={"source": "s", "span_start": i, "span_len": 2,
                         "dedent_cols": 0, "skipped_masking": False,
                         "aliases": {}, "seed": 1})
        for i in range(1000)
    ]
    path = tmp_path / "shard.jsonl"
    assert write_jsonl(path, records) == 1000
    loaded = read_jsonl(path)
    assert [r.to_record() for r in loaded] == [r.to_record() for r in records]


def test_jsonl_schema_error_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = json.dumps({"id": "a", "language": "python", "context": "c",
                       "target": "t", "meta": {}})
    missing_target = json.dumps({"id": "b", "language": "python", "context": "c",
                                 "meta": {}})
    path.write_text(good + "\n" + missing_target + "\n", encoding="utf-8")
    with pytest.raises(SchemaError) as info:
        read_jsonl(path)
    assert info.value.line == 2
    assert "target" in str(info.value)

    broken = tmp_path / "broken.jsonl"
    broken.write_text(good + "\n{oops\n", encoding="utf-8")
    with pytest.raises(SchemaError) as info:
        read_jsonl(broken)
    assert info.value.line == 2


def test_empty_shard_roundtrip(tmp_path):
    path = tmp_path / "empty.jsonl"
    assert write_jsonl(path, []) == 0
    assert read_jsonl(path) == []


def test_write_shards_layout(tmp_path):
    records = [
        PairRecord(pair_id=f"p{i}", language="python" if i % 2 else "java",
                   context="c", target="t", meta={}, split="train" if i < 8 else "valid")
        for i in range(10)
    ]
    written = write_shards(records, tmp_path, shard_size=3)
    names = sorted(str(p.relative_to(tmp_path)) for p in written)
    assert names == [
        "train/java-00000.jsonl", "train/java-00001.jsonl",
        "train/python-00000.jsonl", "train/python-00001.jsonl",
        "valid/java-00000.jsonl", "valid/python-00000.jsonl",
    ]
    train, valid = read_shard_dir(tmp_path)
    assert len(train) == 8 and len(valid) == 2


def _record(lang, tokens_each_side, pid):
    body = " ".join(f"w{i}" for i in range(tokens_each_side - 1))
    text = f"<cls_{lang}>" + body
    assert count_text_tokens(text) == tokens_each_side
    return PairRecord(pair_id=pid, language=lang, context=text, target=text, meta={})


def test_batch_greedy_fill_by_hand():
    # java pairs of 3000 and 3500 tokens, one python pair of 2000; budget 7000
    records = [_record("java", 1500, "j1"), _record("java", 1750, "j2"),
               _record("python", 1000, "p1")]
    batches = list(batch_by_language(records, 7000))
    key = {(b.language, tuple(p.pair_id for p in b.pairs), b.token_count) for b in batches}
    assert key == {("java", ("j1", "j2"), 6500), ("python", ("p1",), 2000)}


def test_batch_flushes_at_budget():
    records = [_record("java", 2000, f"j{i}") for i in range(3)]
    batches = list(batch_by_language(records, 7000))
    assert [b.token_count for b in batches] == [4000, 4000, 4000]
    assert [len(b.pairs) for b in batches] == [1, 1, 1]


def test_batch_single_pair():
    batches = list(batch_by_language([_record("python", 10, "p")], 7000))
    assert len(batches) == 1
    assert batches[0].token_count == 20


def test_batches_never_mix_languages(mixed_corpus):
    root, _ = mixed_corpus
    cfg = PipelineConfig(seed=3)
    files = ingest([root], cfg)[:30]
    records = list(make_pairs(files, cfg))
    for batch in batch_by_language(records, 4000):
        assert {p.language for p in batch.pairs} == {batch.language}
        assert batch.token_count <= 4000


def test_oversized_pair_is_truncated_to_fit():
    record = _record("python", 5000, "big")
    batches = list(batch_by_language([record], 1000))
    assert len(batches) == 1
    assert batches[0].token_count <= 1000


def test_file_seed_depends_on_master_seed_and_hash():
    digest = content_hash(b"same bytes")
    assert file_seed(1, digest) != file_seed(2, digest)
    assert file_seed(1, digest) == file_seed(1, digest)
    assert file_seed(1, digest) != file_seed(1, content_hash(b"other"))
