"""Toy decoding lab: a pluggable next-token model contract, an n-gram model, and three decoders.

Decoders
--------
* ``beam``: beam search over summed log-probabilities, no length penalty.
* ``ancestral``: token-by-token sampling from the full distribution.
* ``nucleus``: sampling from the smallest probability-sorted prefix of the
  vocabulary whose mass reaches ``p``.

All randomness comes from :func:`make_rng`, which derives an independent
PCG64 stream from ``(seed, group_index, draw_index)`` through numpy's
``SeedSequence``; output does not depend on platform or worker count.
"""

import json
import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .lexdiv import CandidateGroup
from .textnorm import tokenize_13a

logger = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
STRATEGIES = ("beam", "ancestral", "nucleus")

MODEL_FORMAT = "btdiversity-ngram"
MODEL_VERSION = 1

# Slack on the nucleus boundary so float round-off in the cumulative sum
# cannot push an exact-threshold prefix over by one token.
_NUCLEUS_SLACK = 1e-12


class SequenceModel(Protocol):
    vocab: Sequence[str]
    bos_id: int
    eos_id: int

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        """Probabilities over ``vocab`` for the token following ``prefix`` (BOS excluded)."""


@dataclass(frozen=True)
class DecoderConfig:
    strategy: str = "nucleus"
    beam_size: int = 5
    p: float = 0.95
    max_len: int = 50
    n_best: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.n_best < 1:
            raise ValueError("n_best must be >= 1")
        if not 0 < self.p <= 1:
            raise ValueError("p must be in (0, 1]")
        if self.strategy == "beam" and self.beam_size < self.n_best:
            raise ValueError("beam_size must be >= n_best for beam search")


@dataclass(frozen=True)
class Hypothesis:
    tokens: Tuple[int, ...]
    logprob: float
    complete: bool = True


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed % 2 ** 64, *keys])))


# -- models ---------------------------------------------------------------------

class NGramModel:
    """Count-based n-gram model with additive smoothing toward the next-lower order.

    ``P(w | h) = (c(h, w) + alpha * |V'| * P(w | h')) / (c(h) + alpha * |V'|)``
    where ``h'`` drops the oldest context token and ``V'`` is the vocabulary
    without BOS.  Unseen contexts back off to the shorter one, and the
    unigram level is add-alpha, so with ``alpha > 0`` every token except BOS
    has non-zero probability everywhere.  With ``alpha == 0`` the estimate is
    maximum likelihood at the longest seen context.
    """

    def __init__(self, vocab: Sequence[str], order: int, alpha: float,
                 tables: List[Dict[tuple, Dict[int, int]]]):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.vocab = list(vocab)
        self.index = {w: i for i, w in enumerate(self.vocab)}
        self.bos_id = self.index[BOS]
        self.eos_id = self.index[EOS]
        self.unk_id = self.index[UNK]
        self.order = order
        self.alpha = float(alpha)
        self.tables = tables
        self._outcomes = len(self.vocab) - 1
        self._compiled = [
            {ctx: (np.fromiter(nxt.keys(), dtype=np.int64, count=len(nxt)),
                   np.fromiter(nxt.values(), dtype=np.float64, count=len(nxt)),
                   float(sum(nxt.values())))
             for ctx, nxt in table.items()}
            for table in tables
        ]
        unigram = np.full(len(self.vocab), self.alpha)
        ids, counts, total = self._compiled[0].get((), (np.zeros(0, np.int64), np.zeros(0), 0.0))
        unigram[ids] += counts
        unigram[self.bos_id] = 0.0
        norm = unigram.sum()
        if norm <= 0:
            raise ValueError("model has no probability mass (empty corpus with alpha = 0)")
        self._unigram = unigram / norm

    def __len__(self):
        return len(self.vocab)

    def encode(self, tokens: Sequence[str]) -> Tuple[int, ...]:
        return tuple(self.index.get(t, self.unk_id) for t in tokens)

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.vocab[i] for i in ids if i not in (self.bos_id, self.eos_id)]

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        history = [self.bos_id] * (self.order - 1) + list(prefix)
        dist = self._unigram
        weight = self.alpha * self._outcomes
        for m in range(1, self.order):
            entry = self._compiled[m].get(tuple(history[len(history) - m:]))
            if entry is None:
                break
            ids, counts, total = entry
            mixed = dist * weight
            mixed[ids] += counts
            dist = mixed / (total + weight)
        if dist is self._unigram:
            dist = dist.copy()
        return dist

    def logprob(self, tokens: Sequence[int], prefix: Sequence[int] = ()) -> float:
        total = 0.0
        history = list(prefix)
        for tok in tokens:
            total += math.log(self.next_distribution(history)[tok])
            history.append(tok)
        return total

    def perplexity(self, sentences: Iterable[Sequence[str]]) -> float:
        """Per-token perplexity (EOS included) over tokenized sentences."""
        log_total, n = 0.0, 0
        for sent in sentences:
            ids = self.encode(sent) + (self.eos_id,)
            log_total += self.logprob(ids)
            n += len(ids)
        if n == 0:
            raise ValueError("no tokens to evaluate")
        return math.exp(-log_total / n)

    def to_dict(self) -> dict:
        ngrams = []
        for m, table in enumerate(self.tables):
            for ctx in sorted(table):
                ngrams.append([m, list(ctx), sorted(table[ctx].items())])
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "order": self.order,
                "alpha": self.alpha, "vocab": self.vocab, "ngrams": ngrams}

    @classmethod
    def from_dict(cls, data: dict) -> "NGramModel":
        if data.get("format") != MODEL_FORMAT:
            raise ValueError("not an n-gram model file")
        if data.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {data.get('version')!r}")
        order = int(data["order"])
        tables = [defaultdict(dict) for _ in range(order)]
        for m, ctx, items in data["ngrams"]:
            tables[m][tuple(ctx)] = {int(t): int(c) for t, c in items}
        return cls(data["vocab"], order, data["alpha"], [dict(t) for t in tables])

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "NGramModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_ngram_model(corpus: Iterable[Sequence[str]], order: int = 3, alpha: float = 0.1) -> NGramModel:
    """Count n-grams over tokenized sentences (each sentence is a token sequence)."""
    if order < 1:
        raise ValueError("order must be >= 1")
    sentences = [list(s) for s in corpus]
    if not sentences:
        raise ValueError("cannot train on an empty corpus")
    words = sorted({w for s in sentences for w in s} - {BOS, EOS, UNK})
    vocab = [BOS, EOS, UNK] + words
    index = {w: i for i, w in enumerate(vocab)}
    tables = [defaultdict(Counter) for _ in range(order)]
    pad = [index[BOS]] * (order - 1)
    eos = index[EOS]
    for sent in sentences:
        ids = pad + [index[w] for w in sent] + [eos]
        for t in range(order - 1, len(ids)):
            tok = ids[t]
            for m in range(order):
                tables[m][tuple(ids[t - m:t])][tok] += 1
    return NGramModel(vocab, order, alpha, [{ctx: dict(c) for ctx, c in t.items()} for t in tables])


def builtin_corpus_lines() -> List[str]:
    """The bundled public-domain training text (Milton's *Paradise Lost*, one verse line per line)."""
    text = resources.files("btdiversity").joinpath("data/paradise_lost.txt").read_text(encoding="utf-8")
    return text.splitlines()


def tokenize_corpus(lines: Iterable[str]) -> List[Tuple[str, ...]]:
    return [tokenize_13a(line).tokens for line in lines]


class HashedRandomModel:
    """Toy model whose next-token distribution is a seeded Dirichlet draw keyed by the prefix.

    Deterministic per prefix; useful for exhaustive search checks.
    """

    def __init__(self, n_words: int, seed: int = 0, concentration: float = 0.5):
        self.vocab = [BOS, EOS] + [f"w{i}" for i in range(n_words)]
        self.bos_id, self.eos_id = 0, 1
        self.seed = seed
        self.concentration = concentration

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        rng = make_rng(self.seed, len(prefix), *prefix)
        dist = np.zeros(len(self.vocab))
        dist[1:] = rng.dirichlet(np.full(len(self.vocab) - 1, self.concentration))
        return dist


# -- decoders -----------------------------------------------------------------------

def truncate_nucleus(dist: Sequence[float], p: float) -> np.ndarray:
    """Keep the smallest probability-sorted prefix with mass >= p, renormalized.

    Ties are broken by token index.  ``p >= 1`` returns the distribution
    unchanged.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if p >= 1:
        return dist.copy()
    if p <= 0:
        raise ValueError("p must be in (0, 1]")
    order = np.argsort(-dist, kind="stable")
    cumulative = np.cumsum(dist[order])
    keep = min(int(np.searchsorted(cumulative, p - _NUCLEUS_SLACK, side="left")) + 1, len(dist))
    support = order[:keep]
    out = np.zeros_like(dist)
    out[support] = dist[support] / dist[support].sum()
    return out


def _draw(dist: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(dist)
    u = rng.random() * cdf[-1]
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= len(dist) or dist[idx] <= 0:
        idx = int(np.flatnonzero(dist)[-1])
    return idx


def _sample(model: SequenceModel, max_len: int, prefix: Sequence[int], rng: np.random.Generator,
            p: float) -> Hypothesis:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    history = list(prefix)
    tokens = []
    logprob = 0.0
    for _ in range(max_len):
        dist = model.next_distribution(history)
        tok = _draw(truncate_nucleus(dist, p) if p < 1 else dist, rng)
        logprob += math.log(dist[tok])
        tokens.append(tok)
        history.append(tok)
        if tok == model.eos_id:
            return Hypothesis(tuple(tokens), logprob, True)
    return Hypothesis(tuple(tokens), logprob, False)


def ancestral_sample(model: SequenceModel, config: DecoderConfig, prefix: Sequence[int] = (),
                     rng: Optional[np.random.Generator] = None) -> Hypothesis:
    return _sample(model, config.max_len, prefix, rng or make_rng(config.seed), 1.0)


def nucleus_sample(model: SequenceModel, config: DecoderConfig, prefix: Sequence[int] = (),
                   rng: Optional[np.random.Generator] = None) -> Hypothesis:
    return _sample(model, config.max_len, prefix, rng or make_rng(config.seed), config.p)


def beam_search(model: SequenceModel, config: DecoderConfig, prefix: Sequence[int] = ()) -> List[Hypothesis]:
    """Top ``n_best`` hypotheses by total log-probability, best first.

    At each step every live hypothesis proposes its ``beam_size + 1`` best
    continuations; candidates that end in EOS and rank within the top
    ``beam_size`` are finished, and the best ``beam_size`` others stay live.
    Search stops once ``n_best`` hypotheses are finished and no live one can
    still beat them (scores only decrease).  If fewer than ``n_best`` finish
    within ``max_len``, the best live ones are returned with
    ``complete=False``.
    """
    beam: List[Tuple[float, Tuple[int, ...]]] = [(0.0, ())]
    finished: List[Tuple[float, Tuple[int, ...]]] = []
    width = config.beam_size
    for _ in range(config.max_len):
        candidates = []
        for score, toks in beam:
            dist = model.next_distribution(list(prefix) + list(toks))
            nonzero = np.flatnonzero(dist > 0)
            if not len(nonzero):
                continue
            logp = np.log(dist[nonzero])
            top = np.argsort(-logp, kind="stable")[:width + 1]
            for j in top:
                candidates.append((score + float(logp[j]), toks + (int(nonzero[j]),)))
        candidates.sort(key=lambda c: (-c[0], c[1]))
        beam = []
        for rank, (score, toks) in enumerate(candidates):
            if toks[-1] == model.eos_id:
                if rank < width:
                    finished.append((score, toks))
            elif len(beam) < width:
                beam.append((score, toks))
        finished.sort(key=lambda c: (-c[0], c[1]))
        if len(finished) >= config.n_best and (not beam or beam[0][0] <= finished[config.n_best - 1][0]):
            break
        if not beam:
            break
    result = [Hypothesis(t, s, True) for s, t in finished[:config.n_best]]
    if len(result) < config.n_best:
        logger.debug("beam search finished only %d of %d hypotheses", len(result), config.n_best)
        result += [Hypothesis(t, s, False) for s, t in beam[:config.n_best - len(result)]]
    return result


def decode_group(model: SequenceModel, config: DecoderConfig, prefix: Sequence[int] = (),
                 group_index: int = 0) -> List[Hypothesis]:
    if config.strategy == "beam":
        return beam_search(model, config, prefix)
    p = 1.0 if config.strategy == "ancestral" else config.p
    return [_sample(model, config.max_len, prefix, make_rng(config.seed, group_index, draw), p)
            for draw in range(config.n_best)]


def render(model: SequenceModel, tokens: Sequence[int]) -> str:
    return " ".join(model.vocab[t] for t in tokens if t not in (model.bos_id, model.eos_id))


# Worker-process state for parallel generation.
_WORKER = {}


def _init_worker(model, config, include_prefix):
    _WORKER.update(model=model, config=config, include_prefix=include_prefix)


def _decode_job(job):
    index, group_id, prefix = job
    model, config = _WORKER["model"], _WORKER["config"]
    try:
        hyps = decode_group(model, config, prefix, index)
    except Exception as exc:  # reported per group, the stream goes on
        return index, group_id, None, f"{type(exc).__name__}: {exc}"
    lead = list(prefix) if _WORKER["include_prefix"] else []
    source = render(model, prefix) if prefix else None
    group = CandidateGroup(group_id, tuple(render(model, lead + list(h.tokens)) for h in hyps), source)
    return index, group_id, group, None


def generate_candidates(model: SequenceModel, config: DecoderConfig,
                        contexts: Optional[Sequence[Sequence[int]]] = None, count: Optional[int] = None,
                        group_ids: Optional[Sequence[str]] = None, include_prefix: bool = True,
                        workers: int = 1,
                        on_error: Optional[Callable[[str, str], None]] = None) -> Iterator[CandidateGroup]:
    """Decode one candidate group per context (or ``count`` unconditioned groups).

    Beam groups are the ``n_best`` list of a single search; sampling groups
    are ``n_best`` independent draws.  A group whose decoding fails is
    reported to ``on_error(group_id, message)`` and skipped.  Groups come out
    in index order whatever ``workers`` is.
    """
    if contexts is None:
        if count is None:
            raise ValueError("give either contexts or count")
        contexts = [()] * count
    if group_ids is None:
        group_ids = [f"{i:06d}" for i in range(len(contexts))]
    if len(group_ids) != len(contexts):
        raise ValueError("group_ids and contexts differ in length")
    jobs = [(i, gid, tuple(ctx)) for i, (gid, ctx) in enumerate(zip(group_ids, contexts))]

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(model, config, include_prefix)) as pool:
            results = pool.map(_decode_job, jobs, chunksize=max(1, len(jobs) // (8 * workers)))
            yield from _emit(results, on_error)
    else:
        _init_worker(model, config, include_prefix)
        yield from _emit(map(_decode_job, jobs), on_error)


def _emit(results, on_error):
    for _, group_id, group, error in results:
        if error is not None:
            logger.warning("decoding failed for group %s: %s", group_id, error)
            if on_error is not None:
                on_error(group_id, error)
            continue
        yield group
