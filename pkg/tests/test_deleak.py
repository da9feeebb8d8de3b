import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codegap.deleak import (
    MASK_IN_CONTEXT,
    MASK_IN_TARGET,
    UNMASKED,
    ContextTargetPair,
    PairMeta,
    apply_masking,
    dedent_target,
    mutual_identifiers,
    plan_masking,
    reindent_target,
    unalias,
)
from codegap.errors import AliasCollision
from codegap.languages import get_language
from codegap.spans import select_span_with_retry, split
from codegap.tokenizer import tokenize
from codegap.tree import parse


def toks(src, lang="python"):
    return tokenize(src, get_language(lang))


def make_pair(context_src, target_src, lang="python"):
    language = get_language(lang)
    return ContextTargetPair(
        pair_id="p0",
        language=language,
        context=tokenize(context_src, language),
        target=tokenize(target_src, language),
        meta=PairMeta(source="test", span_start=0, span_len=0),
    )


class ScriptedRandom(random.Random):
    """random() pops scripted values; everything else stays seeded."""

    def __new__(cls, values):
        return super().__new__(cls, 0)

    def __init__(self, values):
        super().__init__(0)
        self._values = list(values)

    def random(self):
        if self._values:
            return self._values.pop(0)
        return super().random()


# --------------------------------------------------------------------------
# mutual identifiers

def test_mutual_identifiers_intersection():
    ctx = toks("foo = bar + baz")
    tgt = toks("bar(baz, qux)")
    assert mutual_identifiers(ctx, tgt) == {"bar", "baz"}


def test_mutual_identifiers_disjoint():
    assert mutual_identifiers(toks("a = 1"), toks("b = 2")) == set()


def test_mutual_identifiers_target_without_identifiers():
    assert mutual_identifiers(toks("a = 1"), toks("42 + 7")) == set()


def test_keywords_and_strings_are_not_identifiers():
    assert mutual_identifiers(toks("for x in y: pass"), toks("for z in y: pass")) == {"y"}
    assert mutual_identifiers(toks("s = 'foo'"), toks("t = 'foo'")) == set()


# --------------------------------------------------------------------------
# masking plans

def test_plan_empty_mutuals():
    plan = plan_masking(set(), random.Random(0), 0.9, 0.05)
    assert plan.decisions == {}
    assert plan.alias_map == {}


def test_plan_skip_pair_forces_unmasked():
    plan = plan_masking({"a", "b"}, ScriptedRandom([0.0]), 0.9, 0.05)
    assert plan.skip_pair
    assert set(plan.decisions.values()) == {UNMASKED}
    assert plan.alias_map == {}


def test_plan_schedule_monte_carlo():
    # 10,000 plans with 10 mutuals each under the 0.9 / 0.05 schedule
    rng = random.Random(1234)
    mutuals = {f"name{i}" for i in range(10)}
    skips = 0
    masked = 0
    decided = 0
    ctx_side = 0
    for _ in range(10_000):
        plan = plan_masking(mutuals, rng)
        if plan.skip_pair:
            skips += 1
            continue
        for decision in plan.decisions.values():
            decided += 1
            if decision != UNMASKED:
                masked += 1
                if decision == MASK_IN_CONTEXT:
                    ctx_side += 1
    assert abs(skips / 10_000 - 0.05) <= 0.01
    assert abs(masked / decided - 0.9) <= 0.02
    assert abs(ctx_side / masked - 0.5) <= 0.03


def test_plan_alias_order_follows_first_occurrence():
    ctx = toks("alpha = beta + gamma")
    tgt = toks("gamma(beta) + alpha")
    # no skip; mask every mutual; sides: alpha->target, beta->target, gamma->target
    rng = ScriptedRandom([0.5, 0.0, 0.9, 0.0, 0.9, 0.0, 0.9])
    plan = plan_masking({"alpha", "beta", "gamma"}, rng, 0.9, 0.05, context=ctx, target=tgt)
    assert set(plan.decisions.values()) == {MASK_IN_TARGET}
    # target order: gamma (0), beta (2), alpha (6)
    assert plan.alias_map == {"gamma": "VAR1", "beta": "VAR2", "alpha": "VAR3"}


def test_plan_alias_skips_colliding_names():
    ctx = toks("VAR1 = spot + 1")
    tgt = toks("spot + VAR1")
    rng = ScriptedRandom([0.5, 0.0, 0.0])  # no skip; mask spot in context
    plan = plan_masking({"spot"}, rng, 1.0, 0.0, context=ctx, target=tgt)
    assert plan.alias_map["spot"] == "VAR2"


def test_plan_aliases_unique_and_fresh():
    ctx = toks("a = b + c + d")
    tgt = toks("a * b * c * d")
    plan = plan_masking({"a", "b", "c", "d"}, random.Random(5), 1.0, 0.0,
                        context=ctx, target=tgt)
    aliases = list(plan.alias_map.values())
    assert len(aliases) == len(set(aliases)) == 4
    present = {t.text for t in ctx} | {t.text for t in tgt}
    assert not (set(aliases) & present)


# --------------------------------------------------------------------------
# applying masks

def test_apply_masking_substitution_contract():
    pair = make_pair("bar = 1\nuse(bar)\n", "bar + bar\n")
    plan = plan_masking({"bar"}, ScriptedRandom([0.5, 0.0, 0.9]), 0.9, 0.05,
                        context=pair.context, target=pair.target)
    assert plan.decisions["bar"] == MASK_IN_TARGET
    masked = apply_masking(pair, plan)
    tgt_texts = [t.text for t in masked.target]
    ctx_texts = [t.text for t in masked.context]
    assert "bar" not in tgt_texts
    assert tgt_texts.count("VAR1") == 2
    assert ctx_texts.count("bar") == 2
    assert masked.meta.aliases == {"bar": "VAR1"}


def test_apply_masking_skip_pair_is_identity():
    pair = make_pair("bar = 1\n", "bar + 2\n")
    plan = plan_masking({"bar"}, ScriptedRandom([0.0]), 0.9, 1.0,
                        context=pair.context, target=pair.target)
    masked = apply_masking(pair, plan)
    assert [t.text for t in masked.context] == [t.text for t in pair.context]
    assert [t.text for t in masked.target] == [t.text for t in pair.target]
    assert masked.meta.skipped_masking


def test_apply_masking_alias_collision_detected():
    from codegap.deleak import MaskingPlan

    pair = make_pair("VAR1 = bar\n", "bar + 1\n")
    bogus = MaskingPlan(frozenset({"bar"}), {"bar": MASK_IN_CONTEXT},
                        skip_pair=False, alias_map={"bar": "VAR1"})
    with pytest.raises(AliasCollision):
        apply_masking(pair, bogus)


def test_occlusion_each_mutual_on_exactly_one_side():
    src = (
        "def f(items, limit):\n"
        "    total = 0\n"
        "    for v in items:\n"
        "        if v < limit:\n"
        "            total += v\n"
        "    return total\n"
    )
    tree = parse(src, "python")
    rng = random.Random(2)
    span = select_span_with_retry(tree, rng, mean=20, stddev=5, min_len=8, max_len=30)
    result = split(tree, span)
    pair = ContextTargetPair("p", tree.language, result.context, result.target,
                             PairMeta("s", span.leaf_start, span.leaf_count))
    mutuals = mutual_identifiers(pair.context, pair.target)
    plan = plan_masking(mutuals, rng, 1.0, 0.0, context=pair.context, target=pair.target)
    masked = apply_masking(pair, plan)
    ctx_ids = {t.text for t in masked.context if t.is_identifier}
    tgt_ids = {t.text for t in masked.target if t.is_identifier}
    for name in mutuals:
        assert (name in ctx_ids) != (name in tgt_ids)


# --------------------------------------------------------------------------
# dedentation

def render(tokens):
    return "".join(t.text for t in tokens)


def target_of(src, lang="python"):
    """Whole-file tokens as a target (first line owned from column zero)."""
    return toks(src, lang)


def test_dedent_uniform_shift():
    tokens = target_of("        x = 1\n        y = 2\n")
    out, cols = dedent_target(tokens)
    assert cols == 8
    assert render(out) == "x = 1\ny = 2\n"


def test_dedent_min_indent_rule():
    tokens = target_of("    a\n        b\n")
    out, cols = dedent_target(tokens)
    assert cols == 4
    assert render(out) == "a\n    b\n"


def test_dedent_identity_when_flat():
    tokens = target_of("a = 1\n    b = 2\n")
    out, cols = dedent_target(tokens)
    assert cols == 0
    assert render(out) == "a = 1\n    b = 2\n"


def test_dedent_tabs_count_as_four_columns():
    tokens = target_of("\ta\n\t\tb\n")
    out, cols = dedent_target(tokens)
    assert cols == 4
    assert render(out) == "a\n    b\n"


def test_dedent_mid_line_start_uses_source_column():
    # a target that starts at the statement token of an indented line
    src = "def f():\n    x = 1\n    y = 2\n"
    tree = parse(src, "python")
    start = next(i for i, t in enumerate(tree.leaves) if t.text == "x")
    tokens = tree.leaves[start:]
    out, cols = dedent_target(tokens)
    assert cols == 4
    assert render(out) == "x = 1\ny = 2\n"


def test_dedent_skips_multiline_string_interiors():
    src = '    body = """keep\n      exact\n"""\n    tail = 1\n'
    tokens = target_of(src)
    out, cols = dedent_target(tokens)
    assert cols == 4
    assert render(out) == 'body = """keep\n      exact\n"""\ntail = 1\n'


def test_dedent_blank_lines_do_not_count():
    tokens = target_of("    a = 1\n\n    b = 2\n")
    out, cols = dedent_target(tokens)
    assert cols == 4
    assert render(out) == "a = 1\n\nb = 2\n"


def test_dedent_then_reindent_roundtrip():
    src = "    a = 1\n        b = 2\n    c = 3\n"
    tokens = target_of(src)
    out, cols = dedent_target(tokens)
    assert render(reindent_target(out, cols)) == src


def test_unalias_inverts_masking():
    pair = make_pair("bar = baz\n", "bar + baz\n")
    plan = plan_masking({"bar", "baz"}, random.Random(3), 1.0, 0.0,
                        context=pair.context, target=pair.target)
    masked = apply_masking(pair, plan)
    restored = unalias(masked.target, masked.meta.aliases)
    assert render(restored) == render(pair.target)


def test_full_inverse_recovers_pre_transform_target():
    src = (
        "class Box:\n"
        "    def fill(self, items):\n"
        "        count = 0\n"
        "        for item in items:\n"
        "            count += item\n"
        "        return count\n"
    )
    tree = parse(src, "python")
    rng = random.Random(11)
    span = select_span_with_retry(tree, rng, mean=18, stddev=6, min_len=6, max_len=30)
    result = split(tree, span)
    original_target = render(result.target)
    pair = ContextTargetPair("p", tree.language, result.context, result.target,
                             PairMeta("s", span.leaf_start, span.leaf_count))
    plan = plan_masking(mutual_identifiers(pair.context, pair.target), rng, 1.0, 0.0,
                        context=pair.context, target=pair.target)
    masked = apply_masking(pair, plan)
    dedented, cols = dedent_target(masked.target)
    recovered = render(unalias(reindent_target(dedented, cols), masked.meta.aliases))
    assert recovered == original_target


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(min_value=0, max_value=12),
                          st.sampled_from(["x = 1", "pass", "f(2)"])),
                min_size=1, max_size=6))
def test_dedent_floor_and_relative_property(lines):
    src = "".join(" " * indent + stmt + "\n" for indent, stmt in lines)
    tokens = target_of(src)
    out, cols = dedent_target(tokens)
    before = [len(ln) - len(ln.lstrip(" ")) for ln in src.splitlines() if ln.strip()]
    after = [len(ln) - len(ln.lstrip(" ")) for ln in render(out).splitlines() if ln.strip()]
    assert cols == min(before)
    assert min(after) == 0
    assert after == [b - cols for b in before]
