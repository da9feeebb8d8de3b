import json
from pathlib import Path

import pytest

from codegap.cli import main
from codegap.languages import get_language
from codegap.pipeline import read_jsonl
from codegap.synth import write_mixed_corpus


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_corpus")
    write_mixed_corpus(root, seed=5, files_per_lang=4, long_every=0)
    return root


def shard_bytes(out_dir: Path) -> dict[str, bytes]:
    return {str(p.relative_to(out_dir)): p.read_bytes()
            for p in sorted(out_dir.rglob("*.jsonl"))}


def test_unknown_flag_exits_one(capsys):
    assert main(["pairs", "--definitely-not-a-flag"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_missing_subcommand_exits_one():
    assert main([]) == 1


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    assert "codegap" in out and "python" in out


def test_prepare_writes_manifest(small_corpus, tmp_path):
    manifest = tmp_path / "manifest.jsonl"
    assert main(["prepare", "--roots", str(small_corpus), "--out", str(manifest)]) == 0
    rows = [json.loads(ln) for ln in manifest.read_text().splitlines()]
    assert rows
    assert set(rows[0]) == {"path", "language", "hash", "split"}


def test_pairs_deterministic_across_runs_and_jobs(small_corpus, tmp_path):
    outs = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "4")):
        out = tmp_path / name
        code = main(["pairs", "--roots", str(small_corpus), "--out", str(out),
                     "--seed", "7", "--jobs", jobs])
        assert code == 0
        outs.append(shard_bytes(out))
    assert outs[0] == outs[1] == outs[2]
    assert outs[0]


def test_pairs_from_manifest_matches_roots(small_corpus, tmp_path):
    manifest = tmp_path / "m.jsonl"
    main(["prepare", "--roots", str(small_corpus), "--out", str(manifest)])
    out_a = tmp_path / "from_roots"
    out_b = tmp_path / "from_manifest"
    main(["pairs", "--roots", str(small_corpus), "--out", str(out_a), "--seed", "3"])
    main(["pairs", "--manifest", str(manifest), "--out", str(out_b), "--seed", "3"])
    assert shard_bytes(out_a) == shard_bytes(out_b)


def test_config_file_flag_precedence(small_corpus, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 1, "mask_prob": 0.5}), encoding="utf-8")
    out_file = tmp_path / "cfg_run"
    code = main(["--config", str(cfg), "pairs", "--roots", str(small_corpus),
                 "--out", str(out_file), "--seed", "9"])
    assert code == 0
    # flag seed beats file seed; file mask_prob beats default
    reference = tmp_path / "ref_run"
    main(["pairs", "--roots", str(small_corpus), "--out", str(reference),
          "--seed", "9", "--mask-prob", "0.5"])
    assert shard_bytes(out_file) == shard_bytes(reference)


def test_batch_manifest(small_corpus, tmp_path):
    shards = tmp_path / "shards"
    main(["pairs", "--roots", str(small_corpus), "--out", str(shards), "--seed", "2"])
    batches = tmp_path / "batches.jsonl"
    assert main(["batch", "--shards", str(shards), "--out", str(batches),
                 "--budget", "3000"]) == 0
    rows = [json.loads(ln) for ln in batches.read_text().splitlines()]
    assert rows
    for row in rows:
        assert set(row) == {"split", "language", "token_count", "pair_ids"}
        assert row["token_count"] <= 3000


def test_eval_with_embeddings(tmp_path, capsys):
    qp, cp, rp, ep = (tmp_path / n for n in
                      ("q.jsonl", "c.jsonl", "r.jsonl", "e.jsonl"))
    qp.write_text(json.dumps({"query_id": "q1", "language": "python",
                              "context": "ctx"}) + "\n", encoding="utf-8")
    cp.write_text("\n".join([
        json.dumps({"target_id": "t1", "language": "python", "text": "good"}),
        json.dumps({"target_id": "t2", "language": "python", "text": "bad"}),
    ]) + "\n", encoding="utf-8")
    rp.write_text(json.dumps({"query_id": "q1", "target_id": "t1",
                              "relevance": 1, "is_original": 0}) + "\n", encoding="utf-8")
    ep.write_text("\n".join([
        json.dumps({"id": "q1", "vector": [1.0, 0.0]}),
        json.dumps({"id": "t1", "vector": [0.99, 0.01]}),
        json.dumps({"id": "t2", "vector": [0.0, 1.0]}),
    ]) + "\n", encoding="utf-8")
    report = tmp_path / "report.json"
    code = main(["eval", "--queries", str(qp), "--candidates", str(cp),
                 "--qrels", str(rp), "--embeddings", str(ep), "--out", str(report)])
    assert code == 0
    out = capsys.readouterr().out
    assert "MAP" in out and "MRR" in out
    payload = json.loads(report.read_text())
    assert payload["map"] == 1.0 and payload["mrr"] == 1.0


def test_eval_usage_error_without_scorer(tmp_path):
    empty = tmp_path / "x.jsonl"
    empty.write_text("", encoding="utf-8")
    assert main(["eval", "--queries", str(empty), "--candidates", str(empty),
                 "--qrels", str(empty)]) == 1


def test_eval_missing_file_is_data_error(tmp_path):
    missing = tmp_path / "nope.jsonl"
    assert main(["eval", "--queries", str(missing), "--candidates", str(missing),
                 "--qrels", str(missing), "--lexical"]) == 2


def test_train_toy_and_eval_model(small_corpus, tmp_path, capsys):
    shards = tmp_path / "shards"
    main(["pairs", "--roots", str(small_corpus), "--out", str(shards), "--seed", "4"])
    ckpt = tmp_path / "toy.ckpt"
    code = main(["train-toy", "--shards", str(shards), "--out", str(ckpt),
                 "--steps", "12", "--lr", "0.5", "--seed", "1",
                 "--d", "16", "--buckets", "512", "--budget", "2000"])
    assert code == 0
    assert ckpt.exists() and Path(str(ckpt) + ".json").exists()
    capsys.readouterr()

    # deterministic re-run produces identical checkpoint bytes
    ckpt2 = tmp_path / "toy2.ckpt"
    main(["train-toy", "--shards", str(shards), "--out", str(ckpt2),
          "--steps", "12", "--lr", "0.5", "--seed", "1",
          "--d", "16", "--buckets", "512", "--budget", "2000"])
    assert ckpt.read_bytes() == ckpt2.read_bytes()

    # negatives-only variant trains too and differs
    ckpt3 = tmp_path / "toy3.ckpt"
    code = main(["train-toy", "--shards", str(shards), "--out", str(ckpt3),
                 "--steps", "12", "--lr", "0.5", "--seed", "1", "--d", "16",
                 "--buckets", "512", "--budget", "2000",
                 "--negatives-only-denominator"])
    assert code == 0
    assert ckpt.read_bytes() != ckpt3.read_bytes()


def test_inspect_shows_occlusion(small_corpus, tmp_path, capsys):
    shards = tmp_path / "shards"
    main(["pairs", "--roots", str(small_corpus), "--out", str(shards),
          "--seed", "6", "--mask-prob", "1.0", "--skip-prob", "0.0"])
    capsys.readouterr()
    train_dir = shards / "train"
    shard = sorted(train_dir.glob("*.jsonl"))[0]
    records = read_jsonl(shard)
    masked = next(r for r in records if r.meta["aliases"])
    code = main(["inspect", "--file", str(shard), "--id", masked.pair_id])
    assert code == 0
    out = capsys.readouterr().out
    assert f"pair {masked.pair_id}" in out
    assert ">>> <mask> <<<" in out
    for name, alias in masked.meta["aliases"].items():
        assert alias in out
        assert "masked in" in out

    # verify the printed pair respects occlusion at the token level
    from codegap.tokenizer import tokenize

    lang = get_language(masked.language)
    ctx_ids = {t.text for t in tokenize(masked.context, lang) if t.is_identifier}
    tgt_ids = {t.text for t in tokenize(masked.target, lang) if t.is_identifier}
    for name in masked.meta["aliases"]:
        assert (name in ctx_ids) != (name in tgt_ids)


def test_inspect_without_inputs_is_usage_error():
    assert main(["inspect"]) == 1


def test_config_echo_is_first_log_line(small_corpus, tmp_path, caplog):
    import logging

    with caplog.at_level(logging.INFO, logger="codegap"):
        main(["prepare", "--roots", str(small_corpus),
              "--out", str(tmp_path / "m.jsonl")])
    messages = [r.getMessage() for r in caplog.records if r.name == "codegap"]
    assert messages
    assert messages[0].startswith("config ")
    payload = json.loads(messages[0][len("config "):])
    assert payload["subcommand"] == "prepare"
