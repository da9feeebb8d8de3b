"""Single entry point: prepare / pairs / batch / eval / train-toy / inspect.

Exit codes: 0 success, 1 usage error, 2 data error. Flag values override the
optional JSON config file, which overrides built-in defaults; the fully
resolved configuration is echoed as the first log line so any run can be
replayed from its log.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .contrastive import DEFAULT_BUCKETS, DEFAULT_DIM, DEFAULT_TAU, ToyEncoder, TrainConfig, train_toy
from .errors import CodegapError, UsageError
from .languages import DEFAULT_EXTENSIONS, load_extension_map, supported_languages
from .pipeline import (
    CorpusFile,
    PipelineConfig,
    batch_by_language,
    dump_record,
    ingest,
    make_pairs,
    read_jsonl,
    read_shard_dir,
    write_shards,
)
from .retrieval import (
    evaluate,
    evaluate_rankings,
    load_candidates,
    load_embeddings,
    load_qrels,
    load_queries,
    rank_lexical,
)
from .texttok import text_tokens

log = logging.getLogger("codegap")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _add_pipeline_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--mean", type=float, default=None, help="mean sampled target length")
    sub.add_argument("--stddev", type=float, default=None, help="stddev of target length")
    sub.add_argument("--min-len", type=int, default=None)
    sub.add_argument("--max-len", type=int, default=None)
    sub.add_argument("--mask-prob", type=float, default=None)
    sub.add_argument("--skip-prob", type=float, default=None)
    sub.add_argument("--threshold", type=int, default=None, help="truncation threshold in tokens")
    sub.add_argument("--budget", type=int, default=None, help="batch token budget")
    sub.add_argument("--langs", nargs="+", default=None)
    sub.add_argument("--shard-size", type=int, default=None)
    sub.add_argument("--pairs-per-input", type=int, default=None)
    sub.add_argument("--jobs", type=int, default=None)
    sub.add_argument("--no-masking", action="store_true")
    sub.add_argument("--no-dedent", action="store_true")
    sub.add_argument("--valid-repos", type=Path, default=None,
                     help="file listing repository names reserved for validation")
    sub.add_argument("--ext-map", type=Path, default=None,
                     help="ext=grammar lines overriding the extension registry")


_FLAG_TO_FIELD = {
    "seed": "seed",
    "mean": "mean_target_len",
    "stddev": "stddev_target_len",
    "min_len": "min_target_len",
    "max_len": "max_target_len",
    "mask_prob": "mask_prob",
    "skip_prob": "skip_pair_prob",
    "threshold": "truncation_threshold",
    "budget": "token_budget",
    "shard_size": "shard_size",
    "pairs_per_input": "pairs_per_input",
    "jobs": "jobs",
}


def resolve_pipeline_config(args: argparse.Namespace, file_config: dict) -> PipelineConfig:
    values = {f.name: getattr(PipelineConfig, "__dataclass_fields__")[f.name].default
              for f in dataclasses.fields(PipelineConfig)}
    for key, val in file_config.items():
        if key in values:
            values[key] = val
    for flag, fieldname in _FLAG_TO_FIELD.items():
        flag_val = getattr(args, flag, None)
        if flag_val is not None:
            values[fieldname] = flag_val
    if getattr(args, "langs", None):
        values["languages"] = tuple(args.langs)
    elif isinstance(values.get("languages"), list):
        values["languages"] = tuple(values["languages"])
    if getattr(args, "no_masking", False):
        values["masking_enabled"] = False
    if getattr(args, "no_dedent", False):
        values["dedent_enabled"] = False
    if getattr(args, "valid_repos", None):
        names = [ln.strip() for ln in Path(args.valid_repos).read_text(encoding="utf-8").splitlines()]
        values["valid_repos"] = frozenset(n for n in names if n and not n.startswith("#"))
    elif isinstance(values.get("valid_repos"), list):
        values["valid_repos"] = frozenset(values["valid_repos"])
    return PipelineConfig(**values)


def _load_file_config(args: argparse.Namespace) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _echo_config(subcommand: str, payload: dict) -> None:
    log.info("config %s", json.dumps({"subcommand": subcommand, **payload},
                                     sort_keys=True, default=str))


def _ext_map(args: argparse.Namespace):
    return load_extension_map(args.ext_map) if getattr(args, "ext_map", None) else None


# --------------------------------------------------------------------------
# subcommands

def cmd_prepare(args: argparse.Namespace) -> int:
    config = resolve_pipeline_config(args, _load_file_config(args))
    _echo_config("prepare", config.to_dict())
    files = ingest(args.roots, config, ext_map=_ext_map(args))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for f in files:
            fh.write(dump_record({"path": str(f.path), "language": f.language,
                                  "hash": f.content_hash, "split": f.split}) + "\n")
    log.info("prepared %d files -> %s", len(files), out)
    print(f"{len(files)} files -> {out}")
    return 0


def _files_for(args: argparse.Namespace, config: PipelineConfig) -> list[CorpusFile]:
    if getattr(args, "manifest", None):
        files = []
        with Path(args.manifest).open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                files.append(CorpusFile(path=Path(obj["path"]), language=obj["language"],
                                        content_hash=obj["hash"], split=obj["split"]))
        return files
    if not args.roots:
        raise UsageError("pairs needs --roots or --manifest")
    return ingest(args.roots, config, ext_map=_ext_map(args))


def cmd_pairs(args: argparse.Namespace) -> int:
    config = resolve_pipeline_config(args, _load_file_config(args))
    _echo_config("pairs", config.to_dict())
    files = _files_for(args, config)
    records = make_pairs(files, config)
    written = write_shards(records, args.out, shard_size=config.shard_size)
    log.info("wrote %d shard files under %s", len(written), args.out)
    print(f"{len(written)} shards -> {args.out}")
    return 0


def cmd_batch(args: argparse.Namespace) -> int:
    config = resolve_pipeline_config(args, _load_file_config(args))
    _echo_config("batch", {"budget": config.token_budget, "shards": str(args.shards)})
    train, valid = read_shard_dir(args.shards)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with out.open("w", encoding="utf-8") as fh:
        for split_name, records in (("train", train), ("valid", valid)):
            for batch in batch_by_language(records, config.token_budget):
                fh.write(dump_record({
                    "split": split_name,
                    "language": batch.language,
                    "token_count": batch.token_count,
                    "pair_ids": [p.pair_id for p in batch.pairs],
                }) + "\n")
                count += 1
    print(f"{count} batches -> {out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    _echo_config("eval", {k: str(v) for k, v in vars(args).items() if k != "func"})
    queries = load_queries(args.queries)
    candidates = load_candidates(args.candidates)
    judgments = load_qrels(args.qrels)
    if args.lexical:
        texts = {tid: c["text"] for tid, c in candidates.items()}
        lists = [rank_lexical(q["context"], texts,
                              exclude=judgments.original.get(qid), query_id=qid)
                 for qid, q in sorted(queries.items())]
        report = evaluate_rankings(lists, judgments)
    elif args.model == "toy":
        if not args.checkpoint:
            raise UsageError("--model toy needs --checkpoint")
        encoder = ToyEncoder.load(args.checkpoint)
        qvecs = {qid: encoder.encode(q["context"]) for qid, q in queries.items()}
        cvecs = {tid: encoder.encode(c["text"]) for tid, c in candidates.items()}
        report = evaluate(qvecs, cvecs, judgments)
    elif args.embeddings:
        vectors = load_embeddings(args.embeddings)
        missing = [i for i in list(queries) + list(candidates) if i not in vectors]
        if missing:
            raise CodegapError(f"embeddings file lacks {len(missing)} ids, e.g. {missing[:3]}")
        qvecs = {qid: vectors[qid] for qid in queries}
        cvecs = {tid: vectors[tid] for tid in candidates}
        report = evaluate(qvecs, cvecs, judgments)
    else:
        raise UsageError("eval needs --embeddings, --model toy, or --lexical")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_table())
    return 0


def cmd_train_toy(args: argparse.Namespace) -> int:
    file_config = _load_file_config(args)
    values = {f.name: f.default for f in dataclasses.fields(TrainConfig)}
    for key, val in file_config.items():
        if key in values:
            values[key] = val
    for flag, fieldname in (("steps", "steps"), ("lr", "lr"), ("seed", "seed"),
                            ("d", "dim"), ("tau", "tau"), ("buckets", "buckets"),
                            ("budget", "token_budget"), ("eval_every", "eval_every"),
                            ("valid_cap", "valid_cap")):
        val = getattr(args, flag, None)
        if val is not None:
            values[fieldname] = val
    if args.negatives_only_denominator:
        values["include_positive"] = False
    config = TrainConfig(**values)
    _echo_config("train-toy", dataclasses.asdict(config))
    train, valid = read_shard_dir(args.shards)
    if not train:
        raise CodegapError(f"no training records under {args.shards}")
    encoder, report = train_toy(train, valid, config)
    encoder.save(args.out)
    if valid:
        log.info("best validation MRR %.4f at step %d", report.best_mrr, report.best_step)
        print(f"trained {report.steps} steps; best valid MRR "
              f"{report.best_mrr:.4f} @ step {report.best_step} -> {args.out}")
    else:
        log.info("no validation split; kept the final state")
        print(f"trained {report.steps} steps (no validation split; "
              f"kept final state) -> {args.out}")
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    _echo_config("inspect", {k: str(v) for k, v in vars(args).items() if k != "func"})
    if args.file:
        records = read_jsonl(args.file)
    elif args.shards:
        train, valid = read_shard_dir(args.shards)
        records = train + valid
    else:
        raise UsageError("inspect needs --shards or --file")
    if args.id:
        matches = [r for r in records if r.pair_id == args.id]
        if not matches:
            raise CodegapError(f"no pair with id {args.id!r}")
        record = matches[0]
    elif records:
        record = records[0]
    else:
        raise CodegapError("no pairs found")
    meta = record.meta
    print(f"pair {record.pair_id} ({record.language})")
    print(f"dedent: {meta.get('dedent_cols', 0)} columns; "
          f"masking skipped: {meta.get('skipped_masking', False)}")
    aliases = meta.get("aliases", {})
    if aliases:
        ctx_tokens = set(text_tokens(record.context))
        tgt_tokens = set(text_tokens(record.target))
        print("aliases:")
        for name, alias in sorted(aliases.items(), key=lambda kv: kv[1]):
            side = "context" if alias in ctx_tokens else "target"
            visible = "target" if side == "context" else "context"
            print(f"  {alias} <- {name} (masked in {side}; surface visible in {visible})")
    mask_marker = "<mask>"
    highlighted = record.context.replace(mask_marker, f">>> {mask_marker} <<<")
    print("context:")
    for line in highlighted.splitlines() or [highlighted]:
        print(f"  | {line}")
    print("target:")
    for line in record.target.splitlines() or [record.target]:
        print(f"  | {line}")
    return 0


# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="codegap", description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"codegap {__version__} "
                                f"(grammars: {', '.join(supported_languages())}; "
                                f"extensions: {', '.join(sorted(DEFAULT_EXTENSIONS))})")
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("prepare", help="ingest and deduplicate a corpus")
    p.add_argument("--roots", nargs="+", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("pairs", help="generate context/target pair shards")
    p.add_argument("--roots", nargs="+", type=Path, default=None)
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--out", required=True, type=Path)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("batch", help="emit language-pure batch manifests")
    p.add_argument("--shards", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("eval", help="rank candidates for every query and report metrics")
    p.add_argument("--queries", required=True, type=Path)
    p.add_argument("--candidates", required=True, type=Path)
    p.add_argument("--qrels", required=True, type=Path)
    p.add_argument("--embeddings", type=Path, default=None)
    p.add_argument("--model", choices=["toy"], default=None)
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--lexical", action="store_true", help="token-overlap baseline instead of embeddings")
    p.add_argument("--out", type=Path, default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-toy", help="train the hashed dual encoder on pair shards")
    p.add_argument("--shards", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--d", type=int, default=None, help=f"embedding dimension (default {DEFAULT_DIM})")
    p.add_argument("--tau", type=float, default=None, help=f"temperature (default {DEFAULT_TAU})")
    p.add_argument("--buckets", type=int, default=None, help=f"hash buckets (default {DEFAULT_BUCKETS})")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--valid-cap", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="accepted for symmetry; training is single-owner")
    p.add_argument("--negatives-only-denominator", action="store_true",
                   help="score against negatives only instead of the full softmax pool")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("inspect", help="pretty-print one pair for auditing")
    p.add_argument("--shards", type=Path, default=None)
    p.add_argument("--file", type=Path, default=None)
    p.add_argument("--id", default=None)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (CodegapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
