"""Ranking and evaluation for contextualized code retrieval.

Protocol: every context query is ranked against the full candidate pool with
its own original target removed, relevance labels are binary, and all metrics
are macro-averaged over queries. Ties order by ascending candidate id so runs
are reproducible.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .contrastive import cosine
from .errors import NoRelevant, SchemaError
from .texttok import text_tokens

log = logging.getLogger(__name__)

PRECISION_KS = (1, 3, 10)


@dataclass(frozen=True)
class RankedList:
    query_id: str
    ranking: tuple[tuple[str, float], ...]  # (target_id, score), best first

    @property
    def ids(self) -> list[str]:
        return [tid for tid, _ in self.ranking]


@dataclass
class Judgments:
    relevant: dict[str, set[str]]
    original: dict[str, str] = field(default_factory=dict)

    def relevant_for(self, query_id: str) -> set[str]:
        rel = self.relevant.get(query_id, set())
        orig = self.original.get(query_id)
        return rel - {orig} if orig is not None else set(rel)


def rank(query_embedding: np.ndarray, candidates: Mapping[str, np.ndarray],
         exclude: str | None = None, query_id: str = "") -> RankedList:
    """Candidates by cosine similarity, best first, ties by ascending id."""
    scored = [(tid, cosine(query_embedding, vec))
              for tid, vec in candidates.items() if tid != exclude]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return RankedList(query_id=query_id, ranking=tuple(scored))


def precision_at_k(ranked: RankedList, relevant: set[str], k: int) -> float:
    """Relevant fraction of the top k; pools smaller than k cap the denominator."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pool = len(ranked.ranking)
    if pool == 0:
        return 0.0
    denom = min(k, pool)
    hits = sum(1 for tid, _ in ranked.ranking[:k] if tid in relevant)
    return hits / denom


def average_precision(ranked: RankedList, relevant: set[str]) -> float:
    present = [tid for tid in ranked.ids if tid in relevant]
    if not present:
        raise NoRelevant(f"query {ranked.query_id!r} has no relevant candidate")
    hits = 0
    precisions = []
    for pos, tid in enumerate(ranked.ids, start=1):
        if tid in relevant:
            hits += 1
            precisions.append(hits / pos)
    return sum(precisions) / len(precisions)


def ndcg(ranked: RankedList, relevant: set[str]) -> float:
    """Binary-gain NDCG with a log2(rank + 1) discount."""
    in_pool = sum(1 for tid in ranked.ids if tid in relevant)
    if in_pool == 0:
        raise NoRelevant(f"query {ranked.query_id!r} has no relevant candidate")
    dcg = sum(1.0 / np.log2(pos + 1)
              for pos, tid in enumerate(ranked.ids, start=1) if tid in relevant)
    ideal = sum(1.0 / np.log2(pos + 1) for pos in range(1, in_pool + 1))
    return float(dcg / ideal)


def reciprocal_rank(ranked: RankedList, relevant: set[str]) -> float:
    for pos, tid in enumerate(ranked.ids, start=1):
        if tid in relevant:
            return 1.0 / pos
    raise NoRelevant(f"query {ranked.query_id!r} has no relevant candidate")


def mrr(lists: list[RankedList], judgments: Judgments) -> float:
    return sum(reciprocal_rank(r, judgments.relevant_for(r.query_id)) for r in lists) / len(lists)


def mean_average_precision(lists: list[RankedList], judgments: Judgments) -> float:
    return sum(average_precision(r, judgments.relevant_for(r.query_id)) for r in lists) / len(lists)


@dataclass
class EvalReport:
    map: float
    ndcg: float
    p_at: dict[int, float]
    mrr: float
    per_query: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "map": self.map,
            "ndcg": self.ndcg,
            "p_at": {str(k): v for k, v in self.p_at.items()},
            "mrr": self.mrr,
            "per_query": self.per_query,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        header = f"{'MAP':>8} {'NDCG':>8} " + " ".join(f"{'P@%d' % k:>8}" for k in PRECISION_KS) + f" {'MRR':>8}"
        row = f"{self.map:8.4f} {self.ndcg:8.4f} " + " ".join(
            f"{self.p_at[k]:8.4f}" for k in PRECISION_KS) + f" {self.mrr:8.4f}"
        return header + "\n" + row


def evaluate_rankings(lists: list[RankedList], judgments: Judgments) -> EvalReport:
    if not lists:
        raise NoRelevant("no queries to evaluate")
    per_query = []
    sums = {"map": 0.0, "ndcg": 0.0, "mrr": 0.0}
    psums = {k: 0.0 for k in PRECISION_KS}
    for ranked in lists:
        rel = judgments.relevant_for(ranked.query_id)
        row = {
            "query_id": ranked.query_id,
            "ap": average_precision(ranked, rel),
            "ndcg": ndcg(ranked, rel),
            "rr": reciprocal_rank(ranked, rel),
            "p_at": {str(k): precision_at_k(ranked, rel, k) for k in PRECISION_KS},
        }
        per_query.append(row)
        sums["map"] += row["ap"]
        sums["ndcg"] += row["ndcg"]
        sums["mrr"] += row["rr"]
        for k in PRECISION_KS:
            psums[k] += row["p_at"][str(k)]
    n = len(lists)
    return EvalReport(
        map=sums["map"] / n,
        ndcg=sums["ndcg"] / n,
        p_at={k: psums[k] / n for k in PRECISION_KS},
        mrr=sums["mrr"] / n,
        per_query=per_query,
    )


def evaluate(queries: dict[str, np.ndarray], candidates: dict[str, np.ndarray],
             judgments: Judgments) -> EvalReport:
    """Rank every query against the shared pool and aggregate all metrics."""
    lists = [rank(vec, candidates, exclude=judgments.original.get(qid), query_id=qid)
             for qid, vec in sorted(queries.items())]
    return evaluate_rankings(lists, judgments)


# --------------------------------------------------------------------------
# a deliberately naive baseline for leakage measurements

def lexical_overlap(a: str, b: str) -> float:
    """Jaccard similarity of the two texts' token sets."""
    ta, tb = set(text_tokens(a)), set(text_tokens(b))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def overlap_coefficient(a: str, b: str) -> float:
    """Shared-token fraction of the smaller side; length-robust overlap."""
    ta, tb = set(text_tokens(a)), set(text_tokens(b))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / min(len(ta), len(tb))


def rank_lexical(query_text: str, candidates: Mapping[str, str],
                 exclude: str | None = None, query_id: str = "",
                 scorer: Callable[[str, str], float] = lexical_overlap) -> RankedList:
    scored = [(tid, scorer(query_text, text))
              for tid, text in candidates.items() if tid != exclude]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return RankedList(query_id=query_id, ranking=tuple(scored))


# --------------------------------------------------------------------------
# file formats: queries / candidates / qrels / embeddings

def _read_jsonl_objects(path: str | Path) -> list[tuple[int, dict]]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(obj, dict):
                raise SchemaError("expected a JSON object", line=lineno)
            rows.append((lineno, obj))
    return rows


def _require(obj: dict, key: str, lineno: int):
    if key not in obj:
        raise SchemaError(f"missing {key!r} field", line=lineno)
    return obj[key]


def load_queries(path: str | Path) -> dict[str, dict]:
    out = {}
    for lineno, obj in _read_jsonl_objects(path):
        qid = str(_require(obj, "query_id", lineno))
        out[qid] = {"language": _require(obj, "language", lineno),
                    "context": _require(obj, "context", lineno)}
    return out


def load_candidates(path: str | Path) -> dict[str, dict]:
    out = {}
    for lineno, obj in _read_jsonl_objects(path):
        tid = str(_require(obj, "target_id", lineno))
        out[tid] = {"language": _require(obj, "language", lineno),
                    "text": _require(obj, "text", lineno)}
    return out


def load_qrels(path: str | Path) -> Judgments:
    relevant: dict[str, set[str]] = {}
    original: dict[str, str] = {}
    for lineno, obj in _read_jsonl_objects(path):
        qid = str(_require(obj, "query_id", lineno))
        tid = str(_require(obj, "target_id", lineno))
        rel = int(obj.get("relevance", 0))
        if int(obj.get("is_original", 0)):
            original[qid] = tid
        elif rel > 0:
            relevant.setdefault(qid, set()).add(tid)
    return Judgments(relevant=relevant, original=original)


def load_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    out = {}
    for lineno, obj in _read_jsonl_objects(path):
        eid = str(_require(obj, "id", lineno))
        vec = _require(obj, "vector", lineno)
        if not isinstance(vec, list) or not vec:
            raise SchemaError("'vector' must be a non-empty list", line=lineno)
        out[eid] = np.asarray(vec, dtype=np.float64)
    return out
