"""Leak removal between context and target.

Two transforms: mutual identifier masking hides identifiers occurring on both
sides behind alias tokens (VAR1, VAR2, ...) on exactly one side, and
dedentation shifts the target left so its minimum line indentation is zero.
Masking operates on identifier tokens only; text inside string or comment
tokens is never rewritten, and masking granularity is the identifier text, so
all occurrences of a name move together.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .errors import AliasCollision
from .languages import Language
from .tokenizer import WHITESPACE_KINDS, Token, expanded_width

MASK_IN_CONTEXT = "mask_in_context"
MASK_IN_TARGET = "mask_in_target"
UNMASKED = "unmasked"

DEFAULT_MASK_PROB = 0.9
DEFAULT_SKIP_PAIR_PROB = 0.05


@dataclass(frozen=True)
class MaskingPlan:
    mutual_identifiers: frozenset[str]
    decisions: dict[str, str]
    skip_pair: bool
    alias_map: dict[str, str]


@dataclass
class PairMeta:
    source: str
    span_start: int
    span_len: int
    dedent_cols: int = 0
    skipped_masking: bool = False
    aliases: dict[str, str] = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "span_start": self.span_start,
            "span_len": self.span_len,
            "dedent_cols": self.dedent_cols,
            "skipped_masking": self.skipped_masking,
            "aliases": dict(self.aliases),
            "seed": self.seed,
        }


@dataclass
class ContextTargetPair:
    pair_id: str
    language: Language
    context: list[Token]
    target: list[Token]
    meta: PairMeta

    @property
    def context_text(self) -> str:
        return "".join(t.text for t in self.context)

    @property
    def target_text(self) -> str:
        return "".join(t.text for t in self.target)


def mutual_identifiers(context: list[Token], target: list[Token]) -> set[str]:
    """Identifier texts present on both sides."""
    ctx = {t.text for t in context if t.is_identifier}
    tgt = {t.text for t in target if t.is_identifier}
    return ctx & tgt


def _first_occurrence(tokens: list[Token]) -> dict[str, int]:
    seen: dict[str, int] = {}
    for idx, tok in enumerate(tokens):
        if tok.is_identifier and tok.text not in seen:
            seen[tok.text] = idx
    return seen


def plan_masking(mutuals: set[str], rng: random.Random,
                 mask_prob: float = DEFAULT_MASK_PROB,
                 skip_pair_prob: float = DEFAULT_SKIP_PAIR_PROB,
                 *, context: list[Token] | None = None,
                 target: list[Token] | None = None) -> MaskingPlan:
    """Decide which mutual identifiers get hidden, on which side, and as what.

    The whole pair is exempted with probability skip_pair_prob; otherwise each
    identifier is hidden with probability mask_prob on a uniformly chosen
    side. Aliases are numbered by first occurrence in the sequence being
    masked (context-side ones first), skipping numbers whose VARk text already
    occurs as a token in either sequence.
    """
    if not 0 <= mask_prob <= 1 or not 0 <= skip_pair_prob <= 1:
        raise ValueError("probabilities must lie in [0, 1]")
    mutuals_frozen = frozenset(mutuals)
    if rng.random() < skip_pair_prob:
        return MaskingPlan(mutuals_frozen, {m: UNMASKED for m in sorted(mutuals_frozen)},
                           skip_pair=True, alias_map={})

    decisions: dict[str, str] = {}
    for name in sorted(mutuals_frozen):
        if rng.random() < mask_prob:
            decisions[name] = MASK_IN_CONTEXT if rng.random() < 0.5 else MASK_IN_TARGET
        else:
            decisions[name] = UNMASKED

    forbidden: set[str] = set()
    ctx_order = _first_occurrence(context) if context is not None else {}
    tgt_order = _first_occurrence(target) if target is not None else {}
    if context is not None:
        forbidden.update(t.text for t in context)
    if target is not None:
        forbidden.update(t.text for t in target)

    def order_key(name: str) -> tuple:
        if decisions[name] == MASK_IN_CONTEXT:
            return (0, ctx_order.get(name, 0), name)
        return (1, tgt_order.get(name, 0), name)

    alias_map: dict[str, str] = {}
    k = 1
    for name in sorted((n for n, d in decisions.items() if d != UNMASKED), key=order_key):
        while f"VAR{k}" in forbidden:
            k += 1
        alias_map[name] = f"VAR{k}"
        k += 1
    return MaskingPlan(mutuals_frozen, decisions, skip_pair=False, alias_map=alias_map)


def _mask_side(tokens: list[Token], to_mask: dict[str, str]) -> list[Token]:
    if not to_mask:
        return list(tokens)
    return [tok.with_text(to_mask[tok.text]) if tok.is_identifier and tok.text in to_mask
            else tok for tok in tokens]


def apply_masking(pair: ContextTargetPair, plan: MaskingPlan) -> ContextTargetPair:
    """Substitute aliases on each identifier's masked side."""
    if plan.skip_pair:
        meta = replace(pair.meta, skipped_masking=True, aliases={})
        return ContextTargetPair(pair.pair_id, pair.language,
                                 list(pair.context), list(pair.target), meta)
    ctx_mask = {n: plan.alias_map[n] for n, d in plan.decisions.items() if d == MASK_IN_CONTEXT}
    tgt_mask = {n: plan.alias_map[n] for n, d in plan.decisions.items() if d == MASK_IN_TARGET}
    for side, mapping in (("context", ctx_mask), ("target", tgt_mask)):
        tokens = pair.context if side == "context" else pair.target
        present = {t.text for t in tokens}
        clash = present & set(mapping.values())
        if clash:
            raise AliasCollision(f"alias {sorted(clash)} already occurs in {side}")
    meta = replace(pair.meta, skipped_masking=False, aliases=dict(plan.alias_map))
    return ContextTargetPair(
        pair.pair_id, pair.language,
        _mask_side(pair.context, ctx_mask),
        _mask_side(pair.target, tgt_mask),
        meta,
    )


# --------------------------------------------------------------------------
# dedentation

def _line_groups(tokens: list[Token]) -> list[list[int]]:
    """Indices grouped by source line, synthetic markers excluded; in order."""
    groups: list[list[int]] = []
    current_line: int | None = None
    for idx, tok in enumerate(tokens):
        if tok.synthetic:
            continue
        if tok.line != current_line:
            groups.append([idx])
            current_line = tok.line
        else:
            groups[-1].append(idx)
    return groups


def _line_indentation(tokens: list[Token], group: list[int]) -> int | None:
    """Expanded indentation of the line, None when it holds no real content."""
    for idx in group:
        tok = tokens[idx]
        if tok.kind not in WHITESPACE_KINDS:
            return tok.column_expanded
    return None


def dedent_target(target: list[Token]) -> tuple[list[Token], int]:
    """Shift the target left so its minimum line indentation becomes zero.

    The first line's indentation is its starting column in the original
    source, even when the target begins mid-line, so a span cut out of a
    nested block loses the cut position. Leading whitespace is re-emitted as
    spaces; lines that begin inside a multi-line token are left untouched.
    """
    groups = _line_groups(target)
    indents = [_line_indentation(target, g) for g in groups]
    real = [ind for ind in indents if ind is not None]
    if not real:
        return list(target), 0
    dedent_cols = min(real)
    if dedent_cols == 0:
        return list(target), 0

    out = list(target)
    for group in groups:
        first_idx = group[0]
        first = target[first_idx]
        if first.column != 0:
            continue  # only the first line can start mid-line; nothing to shift
        if first.kind != "whitespace":
            continue  # no leading indentation (content or empty line)
        old_width = expanded_width(first.text)
        if first.text[:dedent_cols] == " " * dedent_cols and "\t" not in first.text:
            new_text = first.text[dedent_cols:]
        else:
            new_text = " " * max(0, old_width - dedent_cols)
        out[first_idx] = first.with_text(new_text)
    return out, dedent_cols


def reindent_target(target: list[Token], dedent_cols: int) -> list[Token]:
    """Inverse of dedent_target for space-indented sources."""
    if dedent_cols == 0:
        return list(target)
    out = list(target)
    for group in _line_groups(target):
        first_idx = group[0]
        first = target[first_idx]
        if first.column != 0:
            continue
        if first.kind == "whitespace":
            out[first_idx] = first.with_text(" " * dedent_cols + first.text)
    return out


def unalias(tokens: list[Token], alias_map: dict[str, str]) -> list[Token]:
    """Replace alias tokens by the identifiers they stand for."""
    inverse = {alias: name for name, alias in alias_map.items()}
    return [tok.with_text(inverse[tok.text]) if tok.is_identifier and tok.text in inverse
            else tok for tok in tokens]
