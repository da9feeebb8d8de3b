"""Concrete-structure trees over lossless token streams.

Every token (whitespace included) is a leaf of exactly one node, node leaf
ranges are contiguous unions of their children's ranges, and concatenating the
leaves reproduces the source. Brace languages nest by bracket pairs and group
statement-shaped runs; python nests by indentation suites. The trees are not
full grammars — they exist so spans can be cut along whole-subtree boundaries.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import EncodingError, IndexOutOfRange
from .languages import Language, get_language
from .tokenizer import (
    BRACKET_TEXTS,
    MATCHING_BRACKET,
    OPEN_BRACKETS,
    TRIVIA_KINDS,
    WHITESPACE_KINDS,
    Token,
    expanded_width,
    make_marker,
    tokenize,
)

_Nested = Union[Token, tuple[str, list]]

CONTROL_KEYWORDS = frozenset(
    "if else elif for while do switch try catch finally return break continue goto "
    "throw raise case default synchronized assert yield with pass del global nonlocal".split()
)
DECLARATION_KEYWORDS = frozenset(
    "class interface enum struct union typedef namespace import package export "
    "function def from using".split()
)
_KIND_ALIASES = {"def": "function_definition", "class": "class_definition"}


class Node:
    """One tree node; leaves carry their token, internals carry children."""

    __slots__ = ("kind", "children", "token", "leaf_start", "leaf_count",
                 "parent", "child_index")

    def __init__(self, kind: str, children: tuple["Node", ...] = (), token: Token | None = None):
        self.kind = kind
        self.children = children
        self.token = token
        self.leaf_start = 0
        self.leaf_count = 0
        self.parent: Node | None = None
        self.child_index = 0

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    @property
    def leaf_end(self) -> int:
        return self.leaf_start + self.leaf_count

    def walk(self) -> Iterator["Node"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        if self.is_leaf:
            return f"Leaf({self.kind!r}, {self.token.text!r})"
        return f"Node({self.kind!r}, leaves[{self.leaf_start}:{self.leaf_end}])"


@dataclass
class SyntaxTree:
    language: Language
    source: str
    leaves: list[Token]
    root: Node

    def walk(self) -> Iterator[Node]:
        return self.root.walk()

    def text_of(self, start: int, count: int) -> str:
        return "".join(t.text for t in self.leaves[start:start + count])

    def node_text(self, node: Node) -> str:
        return self.text_of(node.leaf_start, node.leaf_count)

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)


def _finalize(nested: _Nested, leaves: list[Token]) -> Node:
    if isinstance(nested, Token):
        node = Node(nested.kind, token=nested)
        node.leaf_start = len(leaves)
        node.leaf_count = 1
        leaves.append(nested)
        return node
    kind, items = nested
    start = len(leaves)
    children = tuple(_finalize(item, leaves) for item in items)
    node = Node(kind, children=children)
    node.leaf_start = start
    node.leaf_count = len(leaves) - start
    for idx, child in enumerate(children):
        child.parent = node
        child.child_index = idx
    return node


def _build_tree(nested_children: list[_Nested], language: Language) -> SyntaxTree:
    leaves: list[Token] = []
    root = _finalize(("program", nested_children), leaves)
    source = "".join(t.text for t in leaves)
    return SyntaxTree(language=language, source=source, leaves=leaves, root=root)


# --------------------------------------------------------------------------
# bracket grouping (shared by both block styles)

def _group_brackets(tokens: list[Token]) -> list[_Nested]:
    """Nest bracket pairs; unmatched delimiters end up inside error nodes."""

    def parse_items(i: int, closing: str | None) -> tuple[list[_Nested], int, bool]:
        items: list[_Nested] = []
        while i < len(tokens):
            tok = tokens[i]
            if tok.kind in OPEN_BRACKETS and tok.kind == tok.text:
                inner, j, ok = parse_items(i + 1, MATCHING_BRACKET[tok.text])
                group: list[_Nested] = [tok, *inner]
                if ok:
                    group.append(tokens[j])
                    items.append((OPEN_BRACKETS[tok.text], group))
                    i = j + 1
                else:
                    items.append(("error", group))
                    i = j
                continue
            if tok.text in BRACKET_TEXTS and tok.kind == tok.text:
                if tok.text == closing:
                    return items, i, True
                items.append(("error", [tok]))  # stray closer
                i += 1
                continue
            items.append(tok)
            i += 1
        return items, i, False

    items, _, _ = parse_items(0, None)
    return items


def _is_trivia(item: _Nested) -> bool:
    return isinstance(item, Token) and item.kind in TRIVIA_KINDS


def _is_error(item: _Nested) -> bool:
    return isinstance(item, tuple) and item[0] == "error"


def _first_leaf_token(item: _Nested) -> Token:
    while not isinstance(item, Token):
        item = item[1][0]
    return item


# --------------------------------------------------------------------------
# brace-language statement grouping

def _statement_kind(first_kw: str | None, parts: list[_Nested]) -> str:
    if first_kw in CONTROL_KEYWORDS:
        return f"{first_kw}_statement"
    if first_kw in DECLARATION_KEYWORDS:
        return _KIND_ALIASES.get(first_kw, f"{first_kw}_declaration")
    if any(isinstance(p, tuple) and p[0] == "block" for p in parts):
        return "definition"
    return "statement"


def _skip_trivia(items: list[_Nested], i: int) -> int:
    while i < len(items) and _is_trivia(items[i]):
        i += 1
    return i


def _continues_statement(first_kw: str | None, item: _Nested) -> bool:
    if not isinstance(item, Token):
        return False
    if item.text in ("else", "catch", "finally"):
        return True
    if item.text == "while" and first_kw == "do":
        return True
    return item.text == ";"


def _regroup(item: tuple, lang: Language) -> _Nested:
    kind, inner = item
    if kind == "block" and len(inner) >= 2:
        return (kind, [inner[0], *_group_statements(inner[1:-1], lang), inner[-1]])
    return (kind, [x if isinstance(x, Token) else _regroup(x, lang) for x in inner])


def _group_statements(items: list[_Nested], lang: Language) -> list[_Nested]:
    processed: list[_Nested] = [
        item if isinstance(item, Token) else _regroup(item, lang) for item in items
    ]
    out: list[_Nested] = []
    i = 0
    n = len(processed)
    while i < n:
        item = processed[i]
        if _is_trivia(item) or _is_error(item):
            out.append(item)
            i += 1
            continue
        first = _first_leaf_token(item)
        first_kw = first.text if first.kind == "keyword" else None
        consume_to_semi = lang.name == "c" and first_kw == "typedef"
        parts: list[_Nested] = [item]
        ended = isinstance(item, Token) and item.text == ";"
        i += 1
        while not ended and i < n:
            nxt = processed[i]
            if _is_error(nxt):
                break
            if isinstance(nxt, Token) and nxt.text == ";":
                parts.append(nxt)
                i += 1
                break
            parts.append(nxt)
            i += 1
            if isinstance(nxt, tuple) and nxt[0] == "block" and not consume_to_semi:
                j = _skip_trivia(processed, i)
                if j < n and _continues_statement(first_kw, processed[j]):
                    cont = processed[j]
                    parts.extend(processed[i:j + 1])
                    i = j + 1
                    if isinstance(cont, Token) and cont.text == ";":
                        break
                    continue
                break
        if len(parts) == 1 and isinstance(parts[0], tuple):
            out.append(parts[0])
        else:
            out.append((_statement_kind(first_kw, parts), parts))
    return out


def _build_brace_nested(tokens: list[Token], lang: Language) -> list[_Nested]:
    return _group_statements(_group_brackets(tokens), lang)


# --------------------------------------------------------------------------
# indentation-language (python) suite grouping

class _LogicalLine:
    __slots__ = ("items", "indent", "blank", "significant")

    def __init__(self, tokens: list[Token]):
        self.items = _group_brackets(tokens)
        self.significant = [t for t in tokens if t.kind not in TRIVIA_KINDS]
        self.blank = not self.significant
        first = tokens[0]
        self.indent = expanded_width(first.text) if first.kind == "whitespace" else 0


def _split_logical_lines(tokens: list[Token]) -> list[_LogicalLine]:
    lines: list[_LogicalLine] = []
    current: list[Token] = []
    depth = 0
    for tok in tokens:
        current.append(tok)
        if tok.kind == tok.text and tok.text in "([{":
            depth += 1
        elif tok.kind == tok.text and tok.text in ")]}":
            depth = max(0, depth - 1)
        elif tok.kind == "newline" and depth == 0:
            prev = current[-2] if len(current) >= 2 else None
            if prev is not None and prev.text == "\\" and not prev.synthetic:
                continue
            lines.append(_LogicalLine(current))
            current = []
    if current:
        lines.append(_LogicalLine(current))
    return lines


_CLAUSE_OWNERS = {
    "else": {"if", "for", "while", "try"},
    "elif": {"if"},
    "except": {"try"},
    "finally": {"try"},
}


def _items_end_with_colon(items: list[_Nested]) -> bool:
    for item in reversed(items):
        if _is_trivia(item):
            continue
        return isinstance(item, Token) and item.text == ":"
    return False


def _next_real_index(lines: list[_LogicalLine], pos: int) -> int | None:
    for k in range(pos, len(lines)):
        if not lines[k].blank:
            return k
    return None


def _build_statement(lines: list[_LogicalLine], pos: int) -> tuple[list[_Nested], int]:
    line = lines[pos]
    first_sig = line.significant[0]
    stmt_kw = first_sig.text if first_sig.kind == "keyword" else None

    line_items = list(line.items)
    leading: list[_Nested] = []
    if line_items and isinstance(line_items[0], Token) and line_items[0].kind == "whitespace":
        leading.append(line_items.pop(0))
    parts: list[_Nested] = line_items
    pos += 1
    cur = line

    while _items_end_with_colon(parts):
        k = _next_real_index(lines, pos)
        if k is None or lines[k].indent <= cur.indent:
            break
        suite_items, pos = _build_suite(lines, pos, lines[k].indent)
        parts.append(("block", suite_items))
        k = _next_real_index(lines, pos)
        if k is None:
            break
        cand = lines[k]
        sig = cand.significant[0]
        if (cand.indent == cur.indent and sig.kind == "keyword"
                and stmt_kw in _CLAUSE_OWNERS.get(sig.text, ())):
            for blank in lines[pos:k]:
                parts.extend(blank.items)
            parts.extend(cand.items)  # clause line, leading ws included
            pos = k + 1
            cur = cand
            continue
        break

    if stmt_kw is None and len(parts) == 1 and isinstance(parts[0], tuple):
        node = parts[0]
    else:
        node = (_statement_kind(stmt_kw, parts), parts)
    return leading + [node], pos


def _build_suite(lines: list[_LogicalLine], pos: int, level: int) -> tuple[list[_Nested], int]:
    items: list[_Nested] = []
    while pos < len(lines):
        line = lines[pos]
        if line.blank:
            k = _next_real_index(lines, pos + 1)
            if k is not None and lines[k].indent < level:
                break
            items.extend(line.items)
            pos += 1
            continue
        if line.indent < level:
            break
        stmt_items, pos = _build_statement(lines, pos)
        items.extend(stmt_items)
    return items, pos


def _build_indent_nested(tokens: list[Token], lang: Language) -> list[_Nested]:
    lines = _split_logical_lines(tokens)
    items, pos = _build_suite(lines, 0, 0)
    for line in lines[pos:]:  # leftovers from pathological dedents
        items.extend(line.items)
    return items


# --------------------------------------------------------------------------
# public API

def parse(source: str | bytes, language: Language | str) -> SyntaxTree:
    """Parse source text into a structure tree whose leaves are all tokens."""
    lang = get_language(language) if isinstance(language, str) else language
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError(f"input is not valid UTF-8: {exc}") from exc
    tokens = tokenize(source, lang)
    if lang.indent_blocks:
        nested = _build_indent_nested(tokens, lang)
    else:
        nested = _build_brace_nested(tokens, lang)
    return _build_tree(nested, lang)


def identifier_occurrences(tree: SyntaxTree) -> list[tuple[int, str]]:
    """All identifier leaves as (leaf_index, text), in leaf order."""
    return [(i, tok.text) for i, tok in enumerate(tree.leaves) if tok.is_identifier]


def indentation_of(tree: SyntaxTree, leaf_index: int) -> int:
    """Indentation (expanded columns) of the line holding the given leaf.

    Returns the expanded column of the first non-whitespace token starting on
    that line; for all-whitespace lines, the width of the whitespace itself.
    """
    if not 0 <= leaf_index < len(tree.leaves):
        raise IndexOutOfRange(f"leaf index {leaf_index} out of range 0..{len(tree.leaves) - 1}")
    line = tree.leaves[leaf_index].line
    lines = [t.line for t in tree.leaves]
    start = bisect.bisect_left(lines, line)
    width = 0
    for tok in tree.leaves[start:]:
        if tok.line != line:
            break
        if tok.kind not in WHITESPACE_KINDS:
            return tok.column_expanded
        width = tok.column_expanded + expanded_width(tok.text, tok.column_expanded)
    return width


# --------------------------------------------------------------------------
# structural rebuilds used by file truncation

def _node_to_nested(node: Node) -> _Nested:
    if node.is_leaf:
        return node.token
    return (node.kind, [_node_to_nested(c) for c in node.children])


def tree_from_run(tree: SyntaxTree, run: tuple[Node, ...] | list[Node]) -> SyntaxTree:
    """A standalone tree viewing a sibling run as its own program."""
    nested = [_node_to_nested(n) for n in run]
    return _build_tree(nested, tree.language)


def tree_with_runs_folded(tree: SyntaxTree, runs: list[tuple[Node, ...]]) -> SyntaxTree:
    """Rebuild the tree with each sibling run replaced by one fold marker."""
    if not runs:
        return tree
    fold_at: dict[int, Token] = {}
    removed: set[int] = set()
    for run in runs:
        marker = make_marker(tree.language.fold_token, "fold",
                             at=tree.leaves[run[0].leaf_start])
        fold_at[id(run[0])] = marker
        for node in run:
            removed.add(id(node))

    def rebuild_children(node: Node) -> list[_Nested]:
        out: list[_Nested] = []
        for child in node.children:
            if id(child) in fold_at:
                out.append(fold_at[id(child)])
            elif id(child) in removed:
                continue
            elif child.is_leaf:
                out.append(child.token)
            else:
                out.append((child.kind, rebuild_children(child)))
        return out

    return _build_tree(rebuild_children(tree.root), tree.language)
