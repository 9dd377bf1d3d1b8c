"""Tokenization and n-gram counting shared by the metrics and corpus tools."""

import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Sequence, Tuple

# mteval-v13a punctuation rules, applied in order.
_13A_RULES = (
    # symbols are split off unconditionally
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    # period and comma, unless preceded by a digit
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    # period and comma, unless followed by a digit
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    # dash after a digit
    (re.compile(r"([0-9])(-)"), r"\1 \2 "),
)

# What `wc -w` treats as a separator in the C locale.
_WC_SPACE = re.compile(r"[ \t\n\v\f\r]+")


@dataclass(frozen=True)
class TokenizedSentence:
    raw: str
    tokens: Tuple[str, ...]

    def __len__(self):
        return len(self.tokens)

    def joined(self) -> str:
        return " ".join(self.tokens)


@dataclass
class NGramProfile:
    """Multiset of n-grams of a single order."""

    order: int
    counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __getitem__(self, ngram):
        return self.counts[ngram]

    def __len__(self):
        return len(self.counts)

    def as_dict(self) -> dict:
        return dict(self.counts)


@lru_cache(maxsize=2 ** 16)
def _tokenize_13a_str(line: str) -> str:
    line = line.replace("<skipped>", "")
    line = line.replace("-\n", "")
    line = line.replace("\n", " ")
    if "&" in line:
        line = line.replace("&quot;", '"')
        line = line.replace("&amp;", "&")
        line = line.replace("&lt;", "<")
        line = line.replace("&gt;", ">")
    line = f" {line} "
    for pattern, repl in _13A_RULES:
        line = pattern.sub(repl, line)
    return " ".join(line.split())


def tokenize_13a(text: str) -> TokenizedSentence:
    """Tokenize ``text`` with the mteval-v13a scheme used by WMT scoring.

    Case is preserved. The result agrees token for token with the 13a
    tokenizer of sacreBLEU 2.0.0, which is what the BLEU scores in this
    package are pinned against.
    """
    joined = _tokenize_13a_str(text)
    return TokenizedSentence(text, tuple(joined.split()) if joined else ())


def wc_words(text: str) -> int:
    """Count words the way ``wc -w`` does: maximal runs of non-whitespace."""
    return sum(1 for piece in _WC_SPACE.split(text) if piece)


def wc_split(text: str) -> List[str]:
    return [piece for piece in _WC_SPACE.split(text) if piece]


def char_ngrams(text: str, n: int, strip_whitespace: bool = True) -> NGramProfile:
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    if strip_whitespace:
        text = "".join(text.split())
    return NGramProfile(n, Counter(text[i:i + n] for i in range(len(text) - n + 1)))


def word_ngrams(tokens: Sequence[str], n: int) -> NGramProfile:
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    tokens = tuple(tokens)
    return NGramProfile(n, Counter(tokens[i:i + n] for i in range(len(tokens) - n + 1)))
