"""End-to-end corpus machinery.

Files are deduplicated by content hash and split train/valid at repository
granularity. Long files are shortened by cutting syntactically complete
segments (150..800 tokens) and marking the cut points with fold tokens; the
shortened file and every segment then feed pair generation independently.
Output shards are a pure function of (corpus bytes, config, seed): every file
gets its own random stream derived from the master seed and its content hash,
and shards are written in content-hash order, so worker count and filesystem
order never change the bytes on disk.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

from .deleak import (
    ContextTargetPair,
    PairMeta,
    apply_masking,
    dedent_target,
    mutual_identifiers,
    plan_masking,
)
from .errors import SchemaError
from .languages import Language, get_language, language_for_path
from .spans import SpanSelection, select_span, select_span_with_retry, split
from .texttok import count_text_tokens, truncate_text_tokens
from .tree import SyntaxTree, parse, tree_from_run, tree_with_runs_folded

log = logging.getLogger(__name__)

TRAIN = "train"
VALID = "valid"


@dataclass
class PipelineConfig:
    seed: int = 0
    mean_target_len: float = 150.0
    stddev_target_len: float = 90.0
    min_target_len: int = 16
    max_target_len: int = 512
    mask_prob: float = 0.9
    skip_pair_prob: float = 0.05
    masking_enabled: bool = True
    dedent_enabled: bool = True
    truncation_threshold: int = 1024
    segment_min_len: int = 150
    segment_max_len: int = 800
    max_extractions: int = 8
    max_span_attempts: int = 8
    pairs_per_input: int = 1
    token_budget: int = 7000
    shard_size: int = 10000
    languages: tuple[str, ...] | None = None
    valid_repos: frozenset[str] = frozenset()
    jobs: int = 1

    def to_dict(self) -> dict:
        out = {}
        for key, value in self.__dict__.items():
            if isinstance(value, frozenset):
                out[key] = sorted(value)
            elif isinstance(value, tuple):
                out[key] = list(value)
            else:
                out[key] = value
        return out


@dataclass(frozen=True)
class CorpusFile:
    path: Path
    language: str
    content_hash: str
    split: str


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_seed(master_seed: int, digest: str) -> int:
    keyed = hashlib.blake2b(digest.encode("ascii"),
                            key=str(master_seed).encode("ascii"), digest_size=8)
    return int.from_bytes(keyed.digest(), "little")


def repo_of(path: Path, root: Path) -> str:
    try:
        rel = path.resolve().relative_to(root.resolve())
    except ValueError:
        return root.name
    return rel.parts[0] if len(rel.parts) > 1 else root.name


def ingest(roots: Iterable[str | Path], config: PipelineConfig,
           ext_map: dict[str, str] | None = None) -> list[CorpusFile]:
    """Collect supported files, dedup by content, split by repository."""
    seen: set[str] = set()
    out: list[CorpusFile] = []
    wanted = set(config.languages) if config.languages else None
    for root in roots:
        root = Path(root)
        paths = sorted(p for p in root.rglob("*") if p.is_file())
        for path in paths:
            lang = language_for_path(path, ext_map)
            if lang is None:
                log.debug("skipping %s: unknown extension", path)
                continue
            if wanted is not None and lang.name not in wanted:
                continue
            try:
                data = path.read_bytes()
            except OSError as exc:
                log.warning("skipping %s: %s", path, exc)
                continue
            digest = content_hash(data)
            if digest in seen:
                continue
            seen.add(digest)
            split_name = VALID if repo_of(path, root) in config.valid_repos else TRAIN
            out.append(CorpusFile(path=path, language=lang.name,
                                  content_hash=digest, split=split_name))
    out.sort(key=lambda f: f.content_hash)
    return out


# --------------------------------------------------------------------------
# truncation

@dataclass
class TruncationResult:
    shortened: SyntaxTree
    segments: list[SyntaxTree]
    spans: list[SpanSelection]

    @property
    def was_truncated(self) -> bool:
        return bool(self.segments)


def truncate_file(tree: SyntaxTree, rng: random.Random, config: PipelineConfig) -> TruncationResult:
    """Cut 150..800-token segments out of an oversized file, marking folds."""
    total = tree.leaf_count
    if total <= config.truncation_threshold:
        return TruncationResult(shortened=tree, segments=[], spans=[])
    chosen: list[SpanSelection] = []
    remaining = total
    for _ in range(config.max_extractions):
        if remaining <= config.truncation_threshold:
            break
        placed = None
        for _attempt in range(24):
            want = rng.randint(config.segment_min_len, config.segment_max_len)
            span = select_span(tree, want, rng)
            if span.leaf_count < config.segment_min_len:
                continue
            if any(not (span.leaf_end <= s.leaf_start or s.leaf_end <= span.leaf_start)
                   for s in chosen):
                continue
            placed = span
            break
        if placed is None:
            break
        chosen.append(placed)
        remaining -= placed.leaf_count - 1  # the fold marker takes one slot
    if not chosen:
        return TruncationResult(shortened=tree, segments=[], spans=[])
    chosen.sort(key=lambda s: s.leaf_start)
    runs = [s.sibling_run for s in chosen]
    shortened = tree_with_runs_folded(tree, runs)
    segments = [tree_from_run(tree, run) for run in runs]
    return TruncationResult(shortened=shortened, segments=segments, spans=chosen)


def splice_truncation(result: TruncationResult, fold_token: str) -> list[str]:
    """Token texts with each fold marker replaced by its segment, in order."""
    out: list[str] = []
    seg_iter = iter(result.segments)
    for tok in result.shortened.leaves:
        if tok.synthetic and tok.kind == "fold" and tok.text == fold_token:
            out.extend(t.text for t in next(seg_iter).leaves)
        else:
            out.append(tok.text)
    return out


# --------------------------------------------------------------------------
# pair generation

@dataclass(frozen=True)
class PairRecord:
    """One persisted pair: strings plus metadata, as stored in shards."""

    pair_id: str
    language: str
    context: str
    target: str
    meta: dict
    split: str = TRAIN

    def to_record(self) -> dict:
        return {
            "id": self.pair_id,
            "language": self.language,
            "context": self.context,
            "target": self.target,
            "meta": self.meta,
        }


def _pair_to_record(pair: ContextTargetPair, split_name: str) -> PairRecord:
    return PairRecord(
        pair_id=pair.pair_id,
        language=pair.language.name,
        context=pair.context_text,
        target=pair.target_text,
        meta=pair.meta.to_dict(),
        split=split_name,
    )


def generate_pairs_for_source(source: str, language: Language, *, seed: int,
                              source_name: str, pair_id_prefix: str,
                              config: PipelineConfig) -> list[ContextTargetPair]:
    """All pairs for one file: truncate if oversized, then split each input."""
    rng = random.Random(seed)
    tree = parse(source, language)
    if tree.leaf_count == 0:
        return []
    trunc = truncate_file(tree, rng, config)
    inputs = [trunc.shortened, *trunc.segments]
    pairs: list[ContextTargetPair] = []
    for input_idx, input_tree in enumerate(inputs):
        for copy_idx in range(config.pairs_per_input):
            span = select_span_with_retry(
                input_tree, rng,
                mean=config.mean_target_len, stddev=config.stddev_target_len,
                min_len=config.min_target_len, max_len=config.max_target_len,
                max_attempts=config.max_span_attempts)
            if span is None:
                log.info("no content-bearing span for %s input %d", source_name, input_idx)
                continue
            result = split(input_tree, span, language)
            meta = PairMeta(source=source_name, span_start=span.leaf_start,
                            span_len=span.leaf_count, seed=seed)
            suffix = f":{copy_idx}" if config.pairs_per_input > 1 else ""
            pair = ContextTargetPair(
                pair_id=f"{pair_id_prefix}:{input_idx}{suffix}",
                language=language, context=result.context,
                target=result.target, meta=meta)
            if config.masking_enabled:
                plan = plan_masking(
                    mutual_identifiers(pair.context, pair.target), rng,
                    config.mask_prob, config.skip_pair_prob,
                    context=pair.context, target=pair.target)
                pair = apply_masking(pair, plan)
            else:
                pair.meta.skipped_masking = True
            if config.dedent_enabled:
                dedented, cols = dedent_target(pair.target)
                pair.target = dedented
                pair.meta.dedent_cols = cols
            pairs.append(pair)
    return pairs


def _worker_generate(args: tuple) -> tuple[str, list[dict], str, str]:
    path_str, lang_name, digest, split_name, config = args
    language = get_language(lang_name)
    try:
        source = Path(path_str).read_bytes().decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        log.warning("skipping %s: %s", path_str, exc)
        return digest, [], lang_name, split_name
    pairs = generate_pairs_for_source(
        source, language, seed=file_seed(config.seed, digest),
        source_name=path_str, pair_id_prefix=digest[:16], config=config)
    return digest, [_pair_to_record(p, split_name).to_record() for p in pairs], lang_name, split_name


def make_pairs(files: list[CorpusFile], config: PipelineConfig) -> Iterator[PairRecord]:
    """Deterministic pair stream over deduplicated files, hash order."""
    ordered = sorted(files, key=lambda f: f.content_hash)
    tasks = [(str(f.path), f.language, f.content_hash, f.split, config) for f in ordered]
    if config.jobs <= 1:
        results = map(_worker_generate, tasks)
    else:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_worker_generate, tasks, chunksize=4))
    for digest, records, lang_name, split_name in results:
        for rec in records:
            yield PairRecord(pair_id=rec["id"], language=rec["language"],
                             context=rec["context"], target=rec["target"],
                             meta=rec["meta"], split=split_name)


# --------------------------------------------------------------------------
# persistence

_REQUIRED_FIELDS = ("id", "language", "context", "target", "meta")


def dump_record(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path: str | Path, records: Iterable[PairRecord | dict]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            obj = rec.to_record() if isinstance(rec, PairRecord) else rec
            fh.write(dump_record(obj) + "\n")
            count += 1
    return count


def read_jsonl(path: str | Path, split: str | None = None) -> list[PairRecord]:
    out: list[PairRecord] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            for key in _REQUIRED_FIELDS:
                if key not in obj:
                    raise SchemaError(f"missing {key!r} field", line=lineno)
            if not isinstance(obj["meta"], dict):
                raise SchemaError("'meta' must be an object", line=lineno)
            out.append(PairRecord(
                pair_id=str(obj["id"]), language=str(obj["language"]),
                context=str(obj["context"]), target=str(obj["target"]),
                meta=obj["meta"],
                split=split or TRAIN))
    return out


def write_shards(records: Iterable[PairRecord], out_dir: str | Path,
                 shard_size: int = 10000) -> list[Path]:
    """One shard file per language per shard_size pairs, under split dirs."""
    out_dir = Path(out_dir)
    buffers: dict[tuple[str, str], list[PairRecord]] = {}
    indexes: dict[tuple[str, str], int] = {}
    written: list[Path] = []

    def flush(key: tuple[str, str]) -> None:
        batch = buffers.pop(key, [])
        if not batch:
            return
        split_name, lang = key
        idx = indexes.get(key, 0)
        indexes[key] = idx + 1
        path = out_dir / split_name / f"{lang}-{idx:05d}.jsonl"
        write_jsonl(path, batch)
        written.append(path)

    for rec in records:
        key = (rec.split, rec.language)
        buffers.setdefault(key, []).append(rec)
        if len(buffers[key]) >= shard_size:
            flush(key)
    for key in sorted(buffers):
        flush(key)
    return written


def read_shard_dir(root: str | Path) -> tuple[list[PairRecord], list[PairRecord]]:
    """Load (train, valid) records from a shard directory tree."""
    root = Path(root)
    train: list[PairRecord] = []
    valid: list[PairRecord] = []
    for split_name, sink in ((TRAIN, train), (VALID, valid)):
        base = root / split_name
        if not base.is_dir():
            continue
        for path in sorted(base.glob("*.jsonl")):
            sink.extend(read_jsonl(path, split=split_name))
    if not train and not valid:
        for path in sorted(root.glob("*.jsonl")):
            train.extend(read_jsonl(path, split=TRAIN))
    return train, valid


# --------------------------------------------------------------------------
# batching

@dataclass(frozen=True)
class Batch:
    pairs: tuple[PairRecord, ...]
    language: str
    token_count: int


def _pair_tokens(record: PairRecord) -> int:
    return count_text_tokens(record.context) + count_text_tokens(record.target)


def _shrink_oversized(record: PairRecord, budget: int) -> PairRecord:
    limit = max(1, budget // 2)
    return replace(record,
                   context=truncate_text_tokens(record.context, limit),
                   target=truncate_text_tokens(record.target, limit))


def batch_by_language(records: Iterable[PairRecord], token_budget: int = 7000) -> Iterator[Batch]:
    """Greedy language-pure batches filled up to the token budget."""
    buffers: dict[str, list[PairRecord]] = {}
    totals: dict[str, int] = {}
    order: list[str] = []
    for rec in records:
        size = _pair_tokens(rec)
        if size > token_budget:
            rec = _shrink_oversized(rec, token_budget)
            size = _pair_tokens(rec)
        lang = rec.language
        if lang not in buffers:
            buffers[lang] = []
            totals[lang] = 0
            order.append(lang)
        if buffers[lang] and totals[lang] + size > token_budget:
            yield Batch(tuple(buffers[lang]), lang, totals[lang])
            buffers[lang] = []
            totals[lang] = 0
        buffers[lang].append(rec)
        totals[lang] += size
    for lang in order:
        if buffers[lang]:
            yield Batch(tuple(buffers[lang]), lang, totals[lang])
