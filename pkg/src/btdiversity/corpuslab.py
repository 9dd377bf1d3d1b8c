"""Corpus summary statistics, neologism detection and deterministic group sampling."""

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Set

from .lexdiv import CandidateGroup
from .textnorm import wc_split

SAMPLE_METHODS = ("keyed", "reservoir")


@dataclass(frozen=True)
class CorpusStats:
    line_count: int
    word_count: int
    char_count: int
    vocab_size: int

    @property
    def mean_sentence_length(self) -> float:
        return self.word_count / self.line_count if self.line_count else 0.0

    @property
    def mean_word_length(self) -> float:
        return self.char_count / self.word_count if self.word_count else 0.0

    def as_dict(self) -> dict:
        return {
            "line_count": self.line_count,
            "word_count": self.word_count,
            "mean_sentence_length": self.mean_sentence_length,
            "mean_word_length": self.mean_word_length,
            "vocab_size": self.vocab_size,
        }


@dataclass
class StatsAccumulator:
    """Streaming, mergeable state behind :func:`corpus_stats`.

    Shards of a corpus can be accumulated separately and combined with
    :meth:`merge`; the merged result is the same as a single pass.
    """

    lines: int = 0
    words: int = 0
    chars: int = 0
    vocab: Set[str] = field(default_factory=set)

    def add(self, line: str):
        self.lines += 1
        for word in wc_split(line):
            self.words += 1
            self.chars += len(word)
            self.vocab.add(word)

    def merge(self, other: "StatsAccumulator") -> "StatsAccumulator":
        return StatsAccumulator(self.lines + other.lines, self.words + other.words,
                                self.chars + other.chars, self.vocab | other.vocab)

    def result(self) -> CorpusStats:
        return CorpusStats(self.lines, self.words, self.chars, len(self.vocab))


def corpus_stats(lines: Iterable[str]) -> CorpusStats:
    """Mean words per line, mean characters per word occurrence, and exact vocabulary size.

    Words are ``wc -w`` words (maximal non-whitespace runs); word length is
    counted in code points.
    """
    acc = StatsAccumulator()
    for line in lines:
        acc.add(line.rstrip("\n"))
    return acc.result()


def vocabulary(lines: Iterable[str]) -> Set[str]:
    vocab = set()
    for line in lines:
        vocab.update(wc_split(line))
    return vocab


@dataclass
class NeologismReport:
    count: int
    sample: List[str]


def neologisms(generated: Iterable[str], reference_vocab: Set[str], sample_size: int = 20) -> NeologismReport:
    """Distinct generated words missing from ``reference_vocab``.

    The sample lists the first ``sample_size`` of them in order of first
    appearance.
    """
    seen = set()
    sample = []
    for line in generated:
        for word in wc_split(line):
            if word in reference_vocab or word in seen:
                continue
            seen.add(word)
            if len(sample) < sample_size:
                sample.append(word)
    return NeologismReport(len(seen), sample)


@dataclass(frozen=True)
class SampleSpec:
    n: int = 30000
    seed: int = 0
    method: str = "keyed"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("sample size must be >= 1")
        if self.method not in SAMPLE_METHODS:
            raise ValueError(f"unknown sampling method {self.method!r}")


def _priority(seed: int, group_id: str) -> int:
    digest = hashlib.blake2b(group_id.encode("utf-8"), digest_size=8,
                             key=(seed % 2 ** 64).to_bytes(8, "little")).digest()
    return int.from_bytes(digest, "big")


def sample_groups(groups: Iterable[CandidateGroup], spec: Optional[SampleSpec] = None) -> List[CandidateGroup]:
    """Uniform sample of ``min(n, len(groups))`` groups, sorted by group id.

    ``keyed`` (default) keeps the ``n`` groups with the smallest seeded hash
    of their id.  It is a one-pass bounded-memory reservoir whose choice
    depends only on the ids, so datasets built from the same inputs get the
    same sampled ids.  ``reservoir`` is classic Algorithm R driven by
    ``random.Random(seed)``; it depends on input order.
    """
    spec = spec or SampleSpec()
    if spec.method == "keyed":
        heap = []  # max-heap on priority via negation
        for index, group in enumerate(groups):
            item = (-_priority(spec.seed, group.group_id), group.group_id, -index, group)
            if len(heap) < spec.n:
                heapq.heappush(heap, item)
            elif item[:3] > heap[0][:3]:
                heapq.heapreplace(heap, item)
        chosen = [entry[3] for entry in heap]
    else:
        rng = random.Random(spec.seed)
        chosen = []
        for count, group in enumerate(groups):
            if count < spec.n:
                chosen.append(group)
            else:
                slot = rng.randrange(count + 1)
                if slot < spec.n:
                    chosen[slot] = group
    return sorted(chosen, key=lambda g: g.group_id)
