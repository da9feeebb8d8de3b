"""Temperature-scaled contrastive loss with in-batch negatives, plus a small
hashed-feature dual encoder that makes the full generate/train/evaluate loop
runnable without a pretrained transformer.

The loss denominator comes in two forms: the standard one includes the
positive term (non-negative loss, bounded optimum) and is the default; the
negatives-only variant, selectable by flag, omits it and can go negative.
One shared encoder embeds both contexts and targets.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BatchTooSmall,
    DimensionMismatch,
    Diverged,
    EmptyInput,
    InvalidTemperature,
    ZeroVector,
)
from .texttok import text_tokens

log = logging.getLogger(__name__)

DEFAULT_DIM = 256
DEFAULT_BUCKETS = 1 << 16
DEFAULT_TAU = 0.1
CHECKPOINT_FORMAT = 1

_GRAM_SEP = "\x1f"


# --------------------------------------------------------------------------
# similarities and the pairwise loss

def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    return float(np.dot(a, b) / (na * nb))


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + math.log(float(np.sum(np.exp(values - m))))


def info_nce(query: np.ndarray, positive: np.ndarray, negatives: list[np.ndarray],
             tau: float = DEFAULT_TAU, include_positive: bool = True) -> float:
    """Contrastive loss of one query against its positive and negatives."""
    if tau <= 0:
        raise InvalidTemperature(f"temperature must be positive, got {tau}")
    if not negatives:
        raise ValueError("at least one negative is required")
    pos = cosine(query, positive) / tau
    negs = np.array([cosine(query, n) for n in negatives], dtype=np.float64) / tau
    pool = np.concatenate(([pos], negs)) if include_positive else negs
    return _logsumexp(pool) - pos


# --------------------------------------------------------------------------
# hashed n-gram features

def stable_bucket(gram: str, buckets: int) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % buckets


def ngram_bucket_counts(tokens: list[str], buckets: int) -> dict[int, int]:
    """Unigram and bigram feature buckets with multiplicities."""
    counts: dict[int, int] = {}
    for i, tok in enumerate(tokens):
        b = stable_bucket(tok, buckets)
        counts[b] = counts.get(b, 0) + 1
        if i + 1 < len(tokens):
            b2 = stable_bucket(tok + _GRAM_SEP + tokens[i + 1], buckets)
            counts[b2] = counts.get(b2, 0) + 1
    return counts


@dataclass
class ToyEncoder:
    """Linear bag-of-hashed-ngrams encoder with L2-normalized outputs."""

    params: np.ndarray
    tau: float = DEFAULT_TAU

    @property
    def buckets(self) -> int:
        return self.params.shape[0]

    @property
    def dim(self) -> int:
        return self.params.shape[1]

    @classmethod
    def create(cls, seed: int = 0, dim: int = DEFAULT_DIM,
               buckets: int = DEFAULT_BUCKETS, tau: float = DEFAULT_TAU) -> "ToyEncoder":
        rng = np.random.default_rng(seed)
        params = rng.normal(0.0, 1.0 / math.sqrt(dim), size=(buckets, dim))
        return cls(params=params, tau=tau)

    def bucket_counts(self, text: str) -> dict[int, int]:
        tokens = text_tokens(text)
        if not tokens:
            raise EmptyInput("cannot encode an empty token sequence")
        return ngram_bucket_counts(tokens, self.buckets)

    def _raw(self, counts: dict[int, int]) -> np.ndarray:
        idx = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
        mult = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
        return mult @ self.params[idx]

    def encode(self, text: str) -> np.ndarray:
        raw = self._raw(self.bucket_counts(text))
        norm = np.linalg.norm(raw)
        if norm == 0.0:
            raise ZeroVector("degenerate embedding with zero norm")
        return raw / norm

    def encode_many(self, texts: list[str]) -> np.ndarray:
        return np.stack([self.encode(t) for t in texts])

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("wb") as fh:
            np.save(fh, self.params)
        sidecar = {
            "format_version": CHECKPOINT_FORMAT,
            "dim": self.dim,
            "buckets": self.buckets,
            "tau": self.tau,
        }
        Path(str(path) + ".json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ToyEncoder":
        path = Path(path)
        sidecar = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
        if sidecar.get("format_version") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format: {sidecar.get('format_version')}")
        with path.open("rb") as fh:
            params = np.load(fh)
        return cls(params=params, tau=float(sidecar["tau"]))


# --------------------------------------------------------------------------
# batch loss and its analytic gradient

def _embed_counts(params: np.ndarray, counts_list: list[dict[int, int]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dim = params.shape[1]
    raw = np.empty((len(counts_list), dim), dtype=np.float64)
    for i, counts in enumerate(counts_list):
        idx = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
        mult = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
        raw[i] = mult @ params[idx]
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector("degenerate embedding with zero norm")
    return raw / norms[:, None], raw, norms


def _loss_matrix(params: np.ndarray, ctx_counts: list[dict[int, int]],
                 tgt_counts: list[dict[int, int]], tau: float,
                 include_positive: bool) -> tuple[float, dict]:
    k = len(ctx_counts)
    eq, raw_q, norm_q = _embed_counts(params, ctx_counts)
    ek, raw_k, norm_k = _embed_counts(params, tgt_counts)
    z = (eq @ ek.T) / tau
    diag = np.diag(z).copy()
    if include_positive:
        m = z.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
        probs = np.exp(z - lse[:, None])
    else:
        z_off = z.copy()
        np.fill_diagonal(z_off, -np.inf)
        m = z_off.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(z_off - m).sum(axis=1))
        probs = np.exp(z_off - lse[:, None])
        np.fill_diagonal(probs, 0.0)
    loss = float(np.mean(lse - diag))
    cache = dict(eq=eq, ek=ek, norm_q=norm_q, norm_k=norm_k, probs=probs, k=k)
    return loss, cache


def batch_loss(encoder: ToyEncoder, contexts: list[str], targets: list[str],
               tau: float | None = None, include_positive: bool = True) -> float:
    """Mean contrastive loss over a batch; other pairs' targets are negatives."""
    if len(contexts) != len(targets):
        raise DimensionMismatch("context and target counts differ")
    if len(contexts) < 2:
        raise BatchTooSmall("a batch needs at least two pairs to have negatives")
    tau = encoder.tau if tau is None else tau
    if tau <= 0:
        raise InvalidTemperature(f"temperature must be positive, got {tau}")
    ctx_counts = [encoder.bucket_counts(t) for t in contexts]
    tgt_counts = [encoder.bucket_counts(t) for t in targets]
    loss, _ = _loss_matrix(encoder.params, ctx_counts, tgt_counts, tau, include_positive)
    return loss


def _counts_loss(params: np.ndarray, ctx_counts, tgt_counts, tau, include_positive) -> float:
    loss, _ = _loss_matrix(params, ctx_counts, tgt_counts, tau, include_positive)
    return loss


def batch_loss_and_grads(params: np.ndarray, ctx_counts: list[dict[int, int]],
                         tgt_counts: list[dict[int, int]], tau: float,
                         include_positive: bool = True) -> tuple[float, dict[int, np.ndarray]]:
    """Loss plus sparse parameter-row gradients (bucket -> d-vector)."""
    loss, c = _loss_matrix(params, ctx_counts, tgt_counts, tau, include_positive)
    k = c["k"]
    dz = (c["probs"] - np.eye(k)) / (k * tau)
    d_eq = dz @ c["ek"]
    d_ek = dz.T @ c["eq"]
    # backprop through the L2 normalization
    d_raw_q = (d_eq - (np.sum(d_eq * c["eq"], axis=1, keepdims=True)) * c["eq"]) / c["norm_q"][:, None]
    d_raw_k = (d_ek - (np.sum(d_ek * c["ek"], axis=1, keepdims=True)) * c["ek"]) / c["norm_k"][:, None]
    grads: dict[int, np.ndarray] = {}
    for rows, counts_list in ((d_raw_q, ctx_counts), (d_raw_k, tgt_counts)):
        for i, counts in enumerate(counts_list):
            row = rows[i]
            for bucket, mult in counts.items():
                acc = grads.get(bucket)
                if acc is None:
                    grads[bucket] = mult * row
                else:
                    acc += mult * row
    return loss, grads


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    zero_grad_checked: int
    eps: float

    @property
    def ok(self) -> bool:
        return self.max_rel_error < 1e-3


def grad_check(encoder: ToyEncoder, contexts: list[str], targets: list[str],
               eps: float = 1e-5, samples: int = 120,
               rng: random.Random | None = None,
               include_positive: bool = True) -> GradCheckReport:
    """Compare analytic row gradients against central finite differences."""
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError("eps outside the supported range [1e-6, 1e-3]")
    rng = rng or random.Random(0)
    ctx_counts = [encoder.bucket_counts(t) for t in contexts]
    tgt_counts = [encoder.bucket_counts(t) for t in targets]
    tau = encoder.tau
    _, grads = batch_loss_and_grads(encoder.params, ctx_counts, tgt_counts, tau, include_positive)

    touched = sorted(grads)
    untouched = []
    while len(untouched) < max(4, samples // 8):
        b = rng.randrange(encoder.buckets)
        if b not in grads:
            untouched.append(b)
    coords: list[tuple[int, int]] = []
    for _ in range(samples):
        bucket = touched[rng.randrange(len(touched))]
        coords.append((bucket, rng.randrange(encoder.dim)))
    zero_coords = [(b, rng.randrange(encoder.dim)) for b in untouched]

    params = encoder.params.copy()
    max_rel = 0.0
    for bucket, col in coords + zero_coords:
        analytic = float(grads.get(bucket, np.zeros(encoder.dim))[col])
        saved = params[bucket, col]
        params[bucket, col] = saved + eps
        up = _counts_loss(params, ctx_counts, tgt_counts, tau, include_positive)
        params[bucket, col] = saved - eps
        down = _counts_loss(params, ctx_counts, tgt_counts, tau, include_positive)
        params[bucket, col] = saved
        numeric = (up - down) / (2 * eps)
        scale = max(abs(analytic), abs(numeric))
        if scale > 1e-8:
            max_rel = max(max_rel, abs(analytic - numeric) / scale)
    return GradCheckReport(max_rel_error=max_rel, checked=len(coords),
                           zero_grad_checked=len(zero_coords), eps=eps)


# --------------------------------------------------------------------------
# training loop

@dataclass
class TrainConfig:
    steps: int = 1000
    lr: float = 0.5
    seed: int = 0
    dim: int = DEFAULT_DIM
    buckets: int = DEFAULT_BUCKETS
    tau: float = DEFAULT_TAU
    token_budget: int = 7000
    include_positive: bool = True
    warmup_frac: float = 0.1
    decay_power: float = 1.0
    eval_every: int = 0
    valid_cap: int = 30000


@dataclass
class TrainReport:
    steps: int
    final_loss: float
    best_mrr: float
    best_step: int
    mrr_history: list[tuple[int, float]] = field(default_factory=list)


def learning_rate(step: int, config: TrainConfig) -> float:
    """Linear warmup for the first warmup_frac of steps, then polynomial decay."""
    warmup = max(1, int(config.steps * config.warmup_frac))
    if step < warmup:
        return config.lr * (step + 1) / warmup
    remaining = max(1, config.steps - warmup)
    progress = (step - warmup) / remaining
    return config.lr * (1.0 - progress) ** config.decay_power


def validation_mrr(params: np.ndarray, ctx_counts: list[dict[int, int]],
                   tgt_counts: list[dict[int, int]], block: int = 512) -> float:
    """Mean reciprocal rank of each context's own target over all targets."""
    eq, _, _ = _embed_counts(params, ctx_counts)
    ek, _, _ = _embed_counts(params, tgt_counts)
    n = eq.shape[0]
    total = 0.0
    for start in range(0, n, block):
        stop = min(n, start + block)
        scores = eq[start:stop] @ ek.T
        own = scores[np.arange(stop - start), np.arange(start, stop)]
        greater = (scores > own[:, None]).sum(axis=1)
        ties_before = np.zeros(stop - start, dtype=np.int64)
        for r in range(stop - start):
            qi = start + r
            tied = np.flatnonzero(scores[r] == own[r])
            ties_before[r] = int((tied < qi).sum())
        ranks = 1 + greater + ties_before
        total += float(np.sum(1.0 / ranks))
    return total / n


def train_toy(train_records, valid_records, config: TrainConfig,
              encoder: ToyEncoder | None = None) -> tuple[ToyEncoder, TrainReport]:
    """SGD on language-pure batches; returns the highest-validation-MRR state."""
    from .pipeline import batch_by_language  # batching lives with the pipeline

    encoder = encoder or ToyEncoder.create(seed=config.seed, dim=config.dim,
                                           buckets=config.buckets, tau=config.tau)
    batches = [b for b in batch_by_language(train_records, config.token_budget)
               if len(b.pairs) >= 2]
    if not batches:
        raise BatchTooSmall("no trainable batch holds two or more pairs")

    counts_cache: dict[str, dict[int, int]] = {}

    def counts_for(text: str) -> dict[int, int]:
        got = counts_cache.get(text)
        if got is None:
            got = counts_cache[text] = encoder.bucket_counts(text)
        return got

    batch_counts = [
        ([counts_for(p.context) for p in b.pairs], [counts_for(p.target) for p in b.pairs])
        for b in batches
    ]
    valid = list(valid_records)[: config.valid_cap]
    valid_ctx = [counts_for(p.context) for p in valid]
    valid_tgt = [counts_for(p.target) for p in valid]

    rng = random.Random(config.seed)
    order: list[int] = []
    params = encoder.params
    best_params = params.copy()
    best_mrr = -1.0
    best_step = -1
    eval_every = config.eval_every or max(1, config.steps // 10)
    history: list[tuple[int, float]] = []
    loss = float("nan")

    for step in range(config.steps):
        if not order:
            order = list(range(len(batch_counts)))
            rng.shuffle(order)
        ctx_counts, tgt_counts = batch_counts[order.pop()]
        loss, grads = batch_loss_and_grads(params, ctx_counts, tgt_counts,
                                           config.tau, config.include_positive)
        if not math.isfinite(loss):
            raise Diverged(f"loss became non-finite at step {step}")
        lr = learning_rate(step, config)
        for bucket, grad in grads.items():
            params[bucket] -= lr * grad
        if valid and ((step + 1) % eval_every == 0 or step + 1 == config.steps):
            mrr = validation_mrr(params, valid_ctx, valid_tgt)
            history.append((step + 1, mrr))
            if mrr > best_mrr:
                best_mrr = mrr
                best_step = step + 1
                best_params = params.copy()
            log.info("step %d loss %.4f valid-mrr %.4f", step + 1, loss, mrr)

    if best_step < 0:  # no validation set: keep the final state
        best_params = params.copy()
        best_step = config.steps
        best_mrr = float("nan")
    final = ToyEncoder(params=best_params, tau=config.tau)
    report = TrainReport(steps=config.steps, final_loss=loss,
                         best_mrr=best_mrr, best_step=best_step, mrr_history=history)
    return final, report
