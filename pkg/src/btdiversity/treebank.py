"""Bracketed constituency trees: parsing, rendering, terminal masking, first-split signatures.

Trees are read one per line in Penn Treebank bracket notation, e.g.
``(S (NP (DT The) (NN cat)) (VP (VBZ sits)) (. .))``.  A node is either a
pre-terminal (label plus one terminal string) or an internal node with one
or more child nodes.
"""

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

DUMMY_TERMINAL = "<T>"

# Single-child wrapper labels emitted by common parsers above the sentence node.
WRAPPER_LABELS = ("ROOT", "TOP", "")

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_ESCAPES = {"(": "-LRB-", ")": "-RRB-"}


class ParseError(ValueError):
    def __init__(self, message: str, offset: int, line: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.line = line


@dataclass(frozen=True)
class ParseTree:
    label: str
    children: Tuple["ParseTree", ...] = ()
    terminal: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if (self.terminal is None) == (not self.children):
            raise ValueError(f"node {self.label!r} needs exactly one of children or terminal")
        if not self.label or any(c.isspace() or c in "()" for c in self.label):
            raise ValueError(f"invalid label {self.label!r}")

    @property
    def is_preterminal(self) -> bool:
        return self.terminal is not None

    def production(self) -> Tuple[str, Tuple[str, ...]]:
        """Label plus the ordered labels (or terminal) directly below it."""
        if self.terminal is not None:
            return self.label, (self.terminal,)
        return self.label, tuple(c.label for c in self.children)

    def nodes(self) -> Iterator["ParseTree"]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def node_count(self) -> int:
        return sum(1 for _ in self.nodes())

    def terminals(self) -> List[str]:
        return [n.terminal for n in self.nodes() if n.terminal is not None]

    def __str__(self):
        return render_bracketed(self)


@dataclass(frozen=True)
class GroupSignature:
    root_label: str
    child_labels: Tuple[str, ...]

    def __str__(self):
        return " ".join((self.root_label, "->") + tuple(self.child_labels))

    @classmethod
    def from_string(cls, text: str) -> "GroupSignature":
        parts = text.split()
        if len(parts) < 3 or parts[1] != "->":
            raise ValueError(f"not a signature: {text!r}")
        return cls(parts[0], tuple(parts[2:]))


def parse_bracketed(line: str) -> ParseTree:
    """Parse one bracketed tree.

    An unlabeled outer bracket around a single tree, as found in Penn
    Treebank files (``( (S ...) )``), is removed.  Raises :class:`ParseError`
    with the character offset of the problem.
    """
    tokens = [(m.group(), m.start()) for m in _TOKEN.finditer(line)]
    if not tokens:
        raise ParseError("empty input", len(line), line)
    pos = 0

    def expect_open():
        if pos >= len(tokens):
            raise ParseError("unexpected end of input", len(line), line)
        tok, off = tokens[pos]
        if tok != "(":
            raise ParseError(f"expected '(' but found {tok!r}", off, line)

    def parse_node():
        nonlocal pos
        expect_open()
        open_off = tokens[pos][1]
        pos += 1
        if pos >= len(tokens):
            raise ParseError("unexpected end of input", len(line), line)
        tok, off = tokens[pos]
        if tok == "(":
            label = ""
        elif tok == ")":
            raise ParseError("empty node", off, line)
        else:
            label = tok
            pos += 1
        if pos >= len(tokens):
            raise ParseError("unexpected end of input", len(line), line)
        tok, off = tokens[pos]
        if tok not in "()":
            # pre-terminal: exactly one terminal then a close bracket
            pos += 1
            if pos >= len(tokens):
                raise ParseError("unexpected end of input", len(line), line)
            close, close_off = tokens[pos]
            if close != ")":
                raise ParseError(f"pre-terminal {label!r} has more than one terminal", close_off, line)
            pos += 1
            if not label:
                raise ParseError("pre-terminal without a label", open_off, line)
            return ParseTree(label, terminal=tok)
        children = []
        while True:
            if pos >= len(tokens):
                raise ParseError("unexpected end of input", len(line), line)
            tok, off = tokens[pos]
            if tok == ")":
                pos += 1
                break
            if tok != "(":
                raise ParseError(f"terminal {tok!r} mixed with child nodes", off, line)
            children.append(parse_node())
        if not children:
            raise ParseError("node without children", open_off, line)
        if not label:
            if len(children) != 1:
                raise ParseError("unlabeled node with several children", open_off, line)
            return children[0]
        return ParseTree(label, tuple(children))

    tree = parse_node()
    if pos != len(tokens):
        raise ParseError("trailing material after tree (multiple roots?)", tokens[pos][1], line)
    return tree


def _escape(terminal: str) -> str:
    for raw, esc in _ESCAPES.items():
        terminal = terminal.replace(raw, esc)
    return terminal


def render_bracketed(tree: ParseTree) -> str:
    """Canonical single-line rendering with single spaces."""
    if tree.terminal is not None:
        return f"({tree.label} {_escape(tree.terminal)})"
    return f"({tree.label} {' '.join(render_bracketed(c) for c in tree.children)})"


def mask_terminals(tree: ParseTree, dummy: str = DUMMY_TERMINAL) -> ParseTree:
    if tree.terminal is not None:
        if tree.terminal == dummy:
            return tree
        return ParseTree(tree.label, terminal=dummy)
    return ParseTree(tree.label, tuple(mask_terminals(c, dummy) for c in tree.children))


def strip_wrappers(tree: ParseTree, wrappers: Sequence[str] = WRAPPER_LABELS) -> ParseTree:
    while tree.label in wrappers and len(tree.children) == 1 and not tree.children[0].is_preterminal:
        tree = tree.children[0]
    return tree


def first_split_signature(tree: ParseTree, wrappers: Sequence[str] = WRAPPER_LABELS) -> GroupSignature:
    """Root label and the ordered labels of its children, e.g. ``S -> PP NP VP .``.

    Unary wrapper nodes such as ``ROOT`` are skipped first so parser output
    like ``(ROOT (S ...))`` is grouped by the sentence-level split.  Pass
    ``wrappers=()`` to take the literal root.
    """
    tree = strip_wrappers(tree, wrappers)
    if tree.is_preterminal:
        raise ValueError(f"tree rooted at pre-terminal {tree.label!r} has no first split")
    return GroupSignature(tree.label, tuple(c.label for c in tree.children))


def parse_tree_lines(lines: Iterable[str]) -> Tuple[List[Optional[ParseTree]], List[Tuple[int, str]]]:
    """Parse line-aligned trees.

    Blank lines stand for a missing parse.  Returns the trees (``None`` for
    missing or unparseable lines) and a list of ``(line_number, message)``
    for the unparseable ones; line numbers are 0-based.
    """
    trees: List[Optional[ParseTree]] = []
    errors = []
    for lineno, line in enumerate(lines):
        line = line.rstrip("\n")
        if not line.strip():
            trees.append(None)
            continue
        try:
            trees.append(parse_bracketed(line))
        except ValueError as exc:
            trees.append(None)
            errors.append((lineno, str(exc)))
    return trees, errors
