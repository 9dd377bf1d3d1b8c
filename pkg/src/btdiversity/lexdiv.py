"""Sentence-level BLEU/chrF and the inter-sentence diversity scores i-BLEU and i-chrF.

Scores are on the 0-100 scale.  BLEU follows the sacreBLEU 2.0.0 signature
``nrefs:1|case:mixed|eff:no|tok:13a|smooth:exp``; chrF follows sacreBLEU's
defaults (character order 6, word order 0, beta 2, whitespace removed).
"""

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple, Union

from .textnorm import char_ngrams, tokenize_13a, word_ngrams

logger = logging.getLogger(__name__)

METRICS = ("bleu", "chrf")

# sacreBLEU floors log(0) at this value instead of raising.
_LOG_ZERO = -9999999999

# chrF++ word splitting treats these as detachable punctuation.
_PUNCTS = frozenset("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")


@dataclass(frozen=True)
class CandidateGroup:
    """Candidates generated from one input (the unit of inter-sentence diversity)."""

    group_id: str
    candidates: Tuple[str, ...]
    source: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))

    @property
    def k(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class BleuConfig:
    max_order: int = 4
    smoothing: str = "exp"
    effective_order: bool = False
    case: str = "mixed"

    def __post_init__(self):
        if self.max_order < 1:
            raise ValueError("max_order must be >= 1")
        if self.smoothing != "exp":
            raise ValueError(f"unsupported smoothing {self.smoothing!r} (only 'exp')")
        if self.case != "mixed":
            raise ValueError(f"unsupported case mode {self.case!r} (only 'mixed')")

    def signature(self) -> str:
        eff = "yes" if self.effective_order else "no"
        return f"BLEU|nrefs:1|case:{self.case}|eff:{eff}|tok:13a|smooth:{self.smoothing}"


@dataclass(frozen=True)
class ChrfConfig:
    char_order: int = 6
    word_order: int = 0
    beta: float = 2.0
    strip_whitespace: bool = True

    def __post_init__(self):
        if self.char_order < 1:
            raise ValueError("char_order must be >= 1")
        if self.word_order < 0:
            raise ValueError("word_order must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")


MetricConfig = Union[BleuConfig, ChrfConfig]


@dataclass
class PairwiseScoreMatrix:
    group_id: str
    k: int
    scores: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def mean(self) -> float:
        return math.fsum(self.scores.values()) / len(self.scores)

    def i_score(self) -> float:
        return 100.0 - self.mean()

    def __len__(self):
        return len(self.scores)


@dataclass
class DatasetScore:
    metric: str
    mean: float
    per_group: Dict[str, float]
    failures: Dict[str, str] = field(default_factory=dict)

    @property
    def n_groups(self) -> int:
        return len(self.per_group)


# -- BLEU ---------------------------------------------------------------------

def _bleu_side(sentence: str, max_order: int) -> Tuple[Counter, int]:
    tokens = tokenize_13a(sentence.rstrip()).tokens
    ngrams = Counter()
    for n in range(1, max_order + 1):
        ngrams.update(word_ngrams(tokens, n).counts)
    return ngrams, len(tokens)


def _bleu_from_sides(hyp, ref, config: BleuConfig) -> float:
    hyp_ngrams, sys_len = hyp
    ref_ngrams, ref_len = ref
    order = config.max_order
    correct = [0] * order
    total = [0] * order
    for ngram, count in hyp_ngrams.items():
        n = len(ngram) - 1
        total[n] += count
        if ngram in ref_ngrams:
            correct[n] += min(count, ref_ngrams[ngram])

    if sys_len < ref_len:
        bp = math.exp(1 - ref_len / sys_len) if sys_len > 0 else 0.0
    else:
        bp = 1.0

    if not any(correct):
        return 0.0

    precisions = [0.0] * order
    smooth = 1.0
    eff_order = order
    for n in range(1, order + 1):
        if total[n - 1] == 0:
            break
        if config.effective_order:
            eff_order = n
        if correct[n - 1] == 0:
            # each further zero-match order gets half the previous pseudo-count
            smooth *= 2
            precisions[n - 1] = 100.0 / (smooth * total[n - 1])
        else:
            precisions[n - 1] = 100.0 * correct[n - 1] / total[n - 1]

    used = precisions[:eff_order]
    if all(p == used[0] for p in used):
        # geometric mean of equal values; avoids exp(log) rounding off 100
        return min(100.0, bp * used[0])
    log_sum = sum(math.log(p) if p > 0 else _LOG_ZERO for p in used)
    return min(100.0, bp * math.exp(log_sum / eff_order))


def sentence_bleu(hypothesis: str, reference: str, config: Optional[BleuConfig] = None) -> float:
    """Single-reference sentence BLEU on the 0-100 scale.

    Raises ValueError when both sides are empty; an empty hypothesis against
    a non-empty reference scores 0.0.
    """
    config = config or BleuConfig()
    _check_not_both_empty(hypothesis, reference)
    return _bleu_from_sides(_bleu_side(hypothesis, config.max_order),
                            _bleu_side(reference, config.max_order), config)


# -- chrF ---------------------------------------------------------------------

def _chrf_words(sentence: str) -> List[str]:
    words = []
    for w in sentence.split():
        if len(w) == 1:
            words.append(w)
        elif w[-1] in _PUNCTS:
            words += [w[:-1], w[-1]]
        elif w[0] in _PUNCTS:
            words += [w[0], w[1:]]
        else:
            words.append(w)
    return words


def _chrf_side(sentence: str, config: ChrfConfig) -> List[Counter]:
    profiles = [char_ngrams(sentence, n, config.strip_whitespace).counts
                for n in range(1, config.char_order + 1)]
    if config.word_order:
        words = _chrf_words(sentence)
        profiles += [word_ngrams(words, n).counts for n in range(1, config.word_order + 1)]
    return profiles


def _chrf_from_sides(hyp: List[Counter], ref: List[Counter], config: ChrfConfig) -> float:
    factor = config.beta ** 2
    avg_prec = avg_rec = 0.0
    effective = 0
    for hyp_counts, ref_counts in zip(hyp, ref):
        n_match = n_hyp = 0
        for ngram, count in hyp_counts.items():
            n_hyp += count
            if ngram in ref_counts:
                n_match += min(count, ref_counts[ngram])
        if not ref_counts:
            n_hyp = 0
        n_ref = sum(ref_counts.values())
        # orders with no n-grams on either side are left out of the average
        if n_hyp > 0 and n_ref > 0:
            avg_prec += n_match / n_hyp
            avg_rec += n_match / n_ref
            effective += 1
    if effective == 0:
        return 0.0
    avg_prec /= effective
    avg_rec /= effective
    if not avg_prec + avg_rec:
        return 0.0
    return min(100.0, 100 * (1 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec))


def sentence_chrf(hypothesis: str, reference: str, config: Optional[ChrfConfig] = None) -> float:
    config = config or ChrfConfig()
    _check_not_both_empty(hypothesis, reference)
    return _chrf_from_sides(_chrf_side(hypothesis, config), _chrf_side(reference, config), config)


def _check_not_both_empty(hypothesis: str, reference: str):
    if not hypothesis.strip() and not reference.strip():
        raise ValueError("hypothesis and reference are both empty; score is undefined")


# -- inter-sentence scores ----------------------------------------------------

def default_config(metric: str) -> MetricConfig:
    if metric == "bleu":
        return BleuConfig()
    if metric == "chrf":
        return ChrfConfig()
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def pairwise_scores(group: CandidateGroup, metric: str = "bleu",
                    config: Optional[MetricConfig] = None) -> PairwiseScoreMatrix:
    """Score every ordered pair (i as hypothesis, j as reference), i != j."""
    config = config or default_config(metric)
    if group.k < 2:
        raise ValueError(f"group {group.group_id!r} has {group.k} candidate(s); need at least 2")
    if metric == "bleu":
        sides = [_bleu_side(c, config.max_order) for c in group.candidates]
        score = _bleu_from_sides
    elif metric == "chrf":
        sides = [_chrf_side(c, config) for c in group.candidates]
        score = _chrf_from_sides
    else:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")

    matrix = PairwiseScoreMatrix(group.group_id, group.k)
    for i, hyp in enumerate(group.candidates):
        for j, ref in enumerate(group.candidates):
            if i == j:
                continue
            _check_not_both_empty(hyp, ref)
            matrix.scores[i, j] = score(sides[i], sides[j], config)
    return matrix


def i_score(group: CandidateGroup, metric: str = "bleu",
            config: Optional[MetricConfig] = None) -> float:
    """100 minus the mean pairwise score; higher means more diverse."""
    return pairwise_scores(group, metric, config).i_score()


def i_bleu(group: CandidateGroup, config: Optional[BleuConfig] = None) -> float:
    return i_score(group, "bleu", config)


def i_chrf(group: CandidateGroup, config: Optional[ChrfConfig] = None) -> float:
    return i_score(group, "chrf", config)


def _score_one(args):
    group, metric, config = args
    try:
        return group.group_id, i_score(group, metric, config), None
    except ValueError as exc:
        return group.group_id, None, str(exc)


def dataset_i_score(groups: Iterable[CandidateGroup], metric: str = "bleu",
                    config: Optional[MetricConfig] = None, sample=None,
                    workers: int = 1) -> DatasetScore:
    """Mean i-score over a dataset of candidate groups.

    ``sample`` is an optional :class:`~btdiversity.corpuslab.SampleSpec`.
    Groups whose score is undefined (fewer than two candidates, empty
    pairs) are recorded in ``failures`` and left out of the mean.  The
    aggregate is accumulated in group-id order so the result does not
    depend on ``workers``.
    """
    config = config or default_config(metric)
    if sample is not None:
        from .corpuslab import sample_groups
        groups = sample_groups(groups, sample)
    jobs = [(g, metric, config) for g in groups]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_score_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_score_one(job) for job in jobs]

    per_group, failures = {}, {}
    for group_id, value, error in sorted(results, key=lambda r: r[0]):
        if group_id in per_group or group_id in failures:
            raise ValueError(f"duplicate group id {group_id!r}")
        if error is None:
            per_group[group_id] = value
        else:
            failures[group_id] = error
    if not per_group:
        raise ValueError("no scorable groups (empty input or every group failed)")
    if failures:
        logger.warning("%d group(s) could not be scored with %s", len(failures), metric)
    mean = math.fsum(per_group.values()) / len(per_group)
    return DatasetScore(metric, mean, per_group, failures)

