"""Partition a parallel corpus by first-split signature and build syntax-group fine-tuning sets."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .treebank import ParseTree, first_split_signature, parse_bracketed

logger = logging.getLogger(__name__)

MERGE_RULES = ("none", "merge_next_until_min")

# Not a published value: a working floor for "large enough to fine-tune on".
DEFAULT_MIN_SIZE = 10_000

TreeLike = Union[ParseTree, str, None]


@dataclass
class SignaturePartition:
    buckets: Dict[str, List[int]] = field(default_factory=dict)
    total_pairs: int = 0
    unparsed: int = 0
    unparsed_lines: List[int] = field(default_factory=list)

    def sizes(self) -> Dict[str, int]:
        return {sig: len(idx) for sig, idx in self.buckets.items()}

    def ranked(self) -> List[Tuple[str, List[int]]]:
        """Buckets by descending size, ties in signature order."""
        return sorted(self.buckets.items(), key=lambda kv: (-len(kv[1]), kv[0]))


@dataclass(frozen=True)
class FinetuneSetSpec:
    num_sets: int = 3
    min_size: int = DEFAULT_MIN_SIZE
    merge_rule: str = "merge_next_until_min"

    def __post_init__(self):
        if self.num_sets < 1:
            raise ValueError("num_sets must be >= 1")
        if self.merge_rule not in MERGE_RULES:
            raise ValueError(f"unknown merge rule {self.merge_rule!r}")


@dataclass
class FinetuneSet:
    signatures: List[str]
    indices: List[int]

    @property
    def size(self) -> int:
        return len(self.indices)


def _as_tree(item: TreeLike) -> Optional[ParseTree]:
    if item is None or isinstance(item, ParseTree):
        return item
    if not item.strip():
        return None
    return parse_bracketed(item)


def partition_by_signature(sources: Sequence[str], targets: Sequence[str],
                           trees: Sequence[TreeLike]) -> SignaturePartition:
    """Bucket line-aligned sentence pairs by the first split of their English parse.

    ``trees`` holds parsed trees, bracketed strings, or ``None``/blank for a
    missing parse.  Pairs whose parse is missing or unusable are counted in
    ``unparsed``.
    """
    if not len(sources) == len(targets) == len(trees):
        raise ValueError(f"line counts differ: source={len(sources)} target={len(targets)} "
                         f"trees={len(trees)}")
    partition = SignaturePartition()
    for i, item in enumerate(trees):
        try:
            tree = _as_tree(item)
            sig = str(first_split_signature(tree)) if tree is not None else None
        except ValueError:
            sig = None
        if sig is None:
            partition.unparsed += 1
            partition.unparsed_lines.append(i)
            continue
        partition.buckets.setdefault(sig, []).append(i)
        partition.total_pairs += 1
    return partition


def build_finetune_sets(partition: SignaturePartition, spec: FinetuneSetSpec = FinetuneSetSpec()) -> List[FinetuneSet]:
    """The ``num_sets`` largest buckets, largest first.

    Under ``merge_next_until_min``, if the last selected bucket is smaller
    than ``min_size``, the next-largest buckets are folded into it one at a
    time until it reaches ``min_size`` or the buckets run out.
    """
    ranked = [(sig, idx) for sig, idx in partition.ranked() if idx]
    if len(ranked) < spec.num_sets:
        raise ValueError(f"need {spec.num_sets} non-empty signature groups, found {len(ranked)}")
    sets = [FinetuneSet([sig], list(idx)) for sig, idx in ranked[:spec.num_sets]]
    last = sets[-1]
    if spec.merge_rule == "merge_next_until_min":
        rest = iter(ranked[spec.num_sets:])
        while last.size < spec.min_size:
            nxt = next(rest, None)
            if nxt is None:
                logger.warning("set %s stays below min_size %d after merging every remaining group",
                               last.signatures, spec.min_size)
                break
            last.signatures.append(nxt[0])
            last.indices.extend(nxt[1])
        last.indices.sort()
    return sets


def signature_histogram(trees: Iterable[TreeLike], top_n: int = 10) -> List[Tuple[str, int]]:
    """The ``top_n`` most frequent first-split signatures with counts.

    Missing or unparseable trees are skipped.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    return ranked_counts(signature_counts(trees))[:top_n]


def signature_counts(trees: Iterable[TreeLike]) -> Counter:
    counts = Counter()
    for item in trees:
        try:
            tree = _as_tree(item)
            if tree is not None:
                counts[str(first_split_signature(tree))] += 1
        except ValueError:
            continue
    return counts


def ranked_counts(counts: Counter) -> List[Tuple[str, int]]:
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def compare_histograms(counts: Sequence[Counter], top_n: int = 10) -> List[Tuple[str, List[int]]]:
    """Rows for a side-by-side comparison of several systems' signature counts.

    Rows are the ``top_n`` signatures of the first system (the baseline),
    each with its count in every system.
    """
    if not counts:
        return []
    base = ranked_counts(counts[0])[:top_n]
    return [(sig, [c.get(sig, 0) for c in counts]) for sig, _ in base]
