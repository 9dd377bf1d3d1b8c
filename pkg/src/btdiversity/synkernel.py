"""Subset-tree (SST) kernel over terminal-masked parse trees and the tree kernel difference score.

The kernel counts the tree fragments two parses share, where a fragment
keeps every node either with all of its children or with none (complete
productions).  ``Delta(n1, n2)`` is the weighted number of common
fragments rooted at ``n1`` and ``n2``:

* 0 if the productions at ``n1`` and ``n2`` differ,
* ``lam`` if both are pre-terminals with the same production,
* ``lam * prod_i (1 + Delta(child_i(n1), child_i(n2)))`` otherwise,

and ``K(t1, t2)`` sums ``Delta`` over all node pairs.
"""

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Dict, List, Sequence, Tuple

from .treebank import DUMMY_TERMINAL, ParseTree, mask_terminals

DEFAULT_FRAGMENT_CAP = 10 ** 6


@dataclass(frozen=True)
class KernelConfig:
    lam: float = 1.0
    normalize: bool = True
    dummy_token: str = DUMMY_TERMINAL

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ValueError(f"decay lam must be in (0, 1], got {self.lam}")


@dataclass
class KernelReport:
    group_id: str
    pairwise_similarity: Dict[Tuple[int, int], float]
    difference: float
    degenerate: int = 0


@dataclass
class _Indexed:
    """Flat node table for one tree: productions and child indices."""

    productions: List[tuple] = field(default_factory=list)
    children: List[Tuple[int, ...]] = field(default_factory=list)

    @classmethod
    def build(cls, tree: ParseTree) -> "_Indexed":
        table = cls()

        def visit(node):
            idx = len(table.productions)
            table.productions.append(node.production())
            table.children.append(())
            kids = tuple(visit(c) for c in node.children)
            table.children[idx] = kids
            return idx

        visit(tree)
        return table

    def by_production(self) -> Dict[tuple, List[int]]:
        groups = defaultdict(list)
        for i, prod in enumerate(self.productions):
            groups[prod].append(i)
        return groups


def _prepared(tree: ParseTree, config: KernelConfig) -> _Indexed:
    return _Indexed.build(mask_terminals(tree, config.dummy_token))


def _kernel_tables(a: _Indexed, b: _Indexed, lam: float) -> float:
    groups_b = b.by_production()
    memo: Dict[Tuple[int, int], float] = {}

    def delta(i, j):
        key = (i, j)
        if key in memo:
            return memo[key]
        if a.productions[i] != b.productions[j]:
            value = 0
        elif not a.children[i]:
            value = lam
        else:
            value = lam
            for ci, cj in zip(a.children[i], b.children[j]):
                value *= 1 + delta(ci, cj)
        memo[key] = value
        return value

    total = 0
    # Children are indexed after their parent, so visiting matched pairs
    # bottom-up keeps the recursion shallow.
    for i in reversed(range(len(a.productions))):
        for j in groups_b.get(a.productions[i], ()):
            total += delta(i, j)
    return total


def sst_kernel(t1: ParseTree, t2: ParseTree, config: KernelConfig = KernelConfig()) -> float:
    """Raw subset-tree kernel. Trees are terminal-masked first.

    With ``lam == 1`` the result is an exact integer (returned as ``int``).
    """
    lam = 1 if config.lam == 1 else config.lam
    return _kernel_tables(_prepared(t1, config), _prepared(t2, config), lam)


def normalized_similarity(t1: ParseTree, t2: ParseTree, config: KernelConfig = KernelConfig()) -> float:
    a, b = _prepared(t1, config), _prepared(t2, config)
    return _normalized(a, b, _self(a, config), _self(b, config), config)


def _self(table: _Indexed, config: KernelConfig) -> float:
    lam = 1 if config.lam == 1 else config.lam
    return _kernel_tables(table, table, lam)


def _normalized(a, b, ka, kb, config) -> float:
    if ka <= 0 or kb <= 0:
        raise ValueError("tree with zero self-kernel cannot be normalized")
    lam = 1 if config.lam == 1 else config.lam
    k = _kernel_tables(a, b, lam)
    # Cauchy-Schwarz bounds this by 1; clamp float rounding
    return min(1.0, k / math.sqrt(ka * kb))


def kernel_difference(trees: Sequence[ParseTree], config: KernelConfig = KernelConfig(),
                      group_id: str = "") -> KernelReport:
    """100 * (1 - mean normalized similarity) over unordered pairs of a candidate group.

    Trees with a zero self-kernel are left out and counted in
    ``KernelReport.degenerate``.
    """
    if len(trees) < 2:
        raise ValueError(f"group {group_id!r} has {len(trees)} tree(s); need at least 2")
    tables = [_prepared(t, config) for t in trees]
    selfs = [_self(t, config) for t in tables]
    usable = [i for i, k in enumerate(selfs) if k > 0]
    degenerate = len(trees) - len(usable)
    if len(usable) < 2:
        raise ValueError(f"group {group_id!r} has fewer than 2 non-degenerate trees")
    sims = {}
    for i, j in combinations(usable, 2):
        sims[i, j] = _normalized(tables[i], tables[j], selfs[i], selfs[j], config)
    mean = math.fsum(sims.values()) / len(sims)
    return KernelReport(group_id, sims, 100.0 * (1.0 - mean), degenerate)


# -- brute-force oracle ---------------------------------------------------------

def _fragment_counts(table: _Indexed) -> List[int]:
    counts = [0] * len(table.productions)
    for i in reversed(range(len(table.productions))):
        c = 1
        for child in table.children[i]:
            c *= 1 + counts[child]
        counts[i] = c
    return counts


def count_fragments(tree: ParseTree, config: KernelConfig = KernelConfig()) -> int:
    return sum(_fragment_counts(_prepared(tree, config)))


def enumerate_fragments(tree: ParseTree, config: KernelConfig = KernelConfig(),
                        cap: int = DEFAULT_FRAGMENT_CAP) -> Counter:
    """All subset-tree fragments of ``tree`` as canonical bracketed strings.

    A child left unexpanded is written as its bare label, so ``(A (B <T>))``
    yields ``(A (B <T>))``, ``(A B)`` and ``(B <T>)``.  With ``lam == 1`` the
    dot product of two fragment multisets equals :func:`sst_kernel`.
    Raises ValueError if there would be more than ``cap`` fragments.
    """
    masked = mask_terminals(tree, config.dummy_token)
    table = _Indexed.build(masked)
    total = sum(_fragment_counts(table))
    if total > cap:
        raise ValueError(f"tree has {total} fragments, over the cap of {cap}")

    nodes = list(masked.nodes())  # pre-order, same numbering as the table
    rooted: Dict[int, List[str]] = {}
    for i in reversed(range(len(nodes))):
        node = nodes[i]
        if node.is_preterminal:
            rooted[i] = [f"({node.label} {node.terminal})"]
            continue
        options = [[nodes[c].label] + rooted[c] for c in table.children[i]]
        rooted[i] = [f"({node.label} {' '.join(parts)})" for parts in product(*options)]

    fragments = Counter()
    for frags in rooted.values():
        fragments.update(frags)
    return fragments


def fragment_dot(f1: Counter, f2: Counter) -> int:
    if len(f2) < len(f1):
        f1, f2 = f2, f1
    return sum(count * f2[frag] for frag, count in f1.items() if frag in f2)
