import json
import logging
import random

import pytest

from btdiversity.corpuslab import SampleSpec
from btdiversity.decodelab import builtin_corpus_lines
from btdiversity.lexdiv import (BleuConfig, CandidateGroup, ChrfConfig, PairwiseScoreMatrix, dataset_i_score,
                                i_bleu, i_chrf, i_score, pairwise_scores, sentence_bleu, sentence_chrf)


@pytest.fixture(scope="module")
def oracle_pairs(data_dir):
    return json.loads((data_dir / "metric_pairs.json").read_text(encoding="utf-8"))["pairs"]


def test_frozen_bleu_parity(oracle_pairs):
    worst = max(abs(sentence_bleu(r["hypothesis"], r["reference"]) - r["bleu"]) for r in oracle_pairs)
    assert worst <= 0.01


def test_frozen_chrf_parity(oracle_pairs):
    worst = max(abs(sentence_chrf(r["hypothesis"], r["reference"]) - r["chrf"]) for r in oracle_pairs)
    assert worst <= 0.01


def test_fixture_pair_one(oracle_pairs):
    first = oracle_pairs[0]
    assert sentence_bleu(first["hypothesis"], first["reference"]) == pytest.approx(first["bleu"], abs=0.01)
    assert sentence_chrf(first["hypothesis"], first["reference"]) == pytest.approx(first["chrf"], abs=0.01)


def test_live_parity_on_random_corpus_pairs():
    pytest.importorskip("sacrebleu")
    from sacrebleu.metrics import BLEU, CHRF
    logging.disable(logging.WARNING)
    try:
        bleu, chrf = BLEU(smooth_method="exp", effective_order=False), CHRF()
        lines = builtin_corpus_lines()
        rng = random.Random(11)
        for _ in range(300):
            hyp, ref = rng.choice(lines), rng.choice(lines)
            if rng.random() < 0.5:
                words = ref.split()
                hyp = " ".join(words[: rng.randrange(1, len(words) + 1)])
            assert sentence_bleu(hyp, ref) == pytest.approx(bleu.sentence_score(hyp, [ref]).score, abs=1e-9)
            assert sentence_chrf(hyp, ref) == pytest.approx(chrf.sentence_score(hyp, [ref]).score, abs=1e-9)
    finally:
        logging.disable(logging.NOTSET)


def test_bleu_identity_and_bounds():
    s = "The cat sat on the mat ."
    assert sentence_bleu(s, s) == 100.0
    assert sentence_chrf(s, s) == 100.0


def test_bleu_disjoint_is_zero_like_reference_toolkit():
    # No order matches at all, so the toolkit short-circuits to 0 before smoothing.
    assert sentence_bleu("completely disjoint words here", "no overlap tokens at all") == 0.0


def test_bleu_smoothing_gives_mass_to_zero_match_orders():
    value = sentence_bleu("the cat ran far away", "the dog sat on a mat")
    assert 0.0 < value < 20.0


def test_empty_sides():
    assert sentence_bleu("", "a reference") == 0.0
    assert sentence_chrf("", "a reference") == 0.0
    with pytest.raises(ValueError):
        sentence_bleu("", "  ")
    with pytest.raises(ValueError):
        sentence_chrf(" ", "")


def test_chrf_single_shared_bigram():
    value = sentence_chrf("ab", "abxyz")
    assert 0.0 < value < 100.0
    # orders 1 and 2 only (the hypothesis has no longer n-grams):
    # P1 = 1, R1 = 2/5; P2 = 1, R2 = 1/4; F2 of the averages
    p, r = 1.0, (2 / 5 + 1 / 4) / 2
    assert value == pytest.approx(100 * 5 * p * r / (4 * p + r), abs=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        BleuConfig(max_order=0)
    with pytest.raises(ValueError):
        BleuConfig(smoothing="floor")
    with pytest.raises(ValueError):
        ChrfConfig(beta=0)
    assert BleuConfig().signature() == "BLEU|nrefs:1|case:mixed|eff:no|tok:13a|smooth:exp"


def test_pairwise_counts_and_direction():
    group = CandidateGroup("g", ("the cat sat on the mat", "a cat sat on a mat today", "the dog ran off"))
    matrix = pairwise_scores(group, "bleu")
    assert len(matrix) == 6
    for (i, j), value in matrix.scores.items():
        assert value == sentence_bleu(group.candidates[i], group.candidates[j])
    chrf = pairwise_scores(group, "chrf")
    for (i, j), value in chrf.scores.items():
        assert value == sentence_chrf(group.candidates[i], group.candidates[j])
    assert len(pairwise_scores(CandidateGroup("p", ("a b", "c d")), "bleu")) == 2


def test_pairwise_identical_all_hundred():
    s = "one two three four five"
    matrix = pairwise_scores(CandidateGroup("g", (s, s, s)), "bleu")
    assert sorted(matrix.scores.values()) == [100.0] * 6


def test_i_score_identities():
    s = "one two three four five"
    group = CandidateGroup("g", (s, s, s))
    assert i_bleu(group) == 0.0 and i_chrf(group) == 0.0
    assert PairwiseScoreMatrix("g", 2, {(0, 1): 60.0, (1, 0): 60.0}).i_score() == 40.0


def test_i_score_short_identical_follows_toolkit():
    # Under eff:no a 3-token sentence has no 4-grams, so its self-BLEU is 0.
    assert i_bleu(CandidateGroup("g", ("a b c",) * 3)) == 100.0


def test_i_score_needs_two_candidates():
    with pytest.raises(ValueError):
        i_score(CandidateGroup("g", ("only one",)), "bleu")
    with pytest.raises(ValueError):
        i_score(CandidateGroup("g", ("x", "y")), "meteor")


def test_i_score_permutation_invariant_and_monotone():
    a, b, c = "the cat sat on the mat", "a dog lay on the rug", "birds sing in tall green trees"
    base = i_bleu(CandidateGroup("g", (a, b, c)))
    assert i_bleu(CandidateGroup("g", (c, a, b))) == pytest.approx(base, abs=1e-12)
    same = CandidateGroup("g", (a, a, a))
    changed = CandidateGroup("g", (a, a, "zebras quietly eat purple fruit"))
    assert i_bleu(changed) > i_bleu(same)
    assert i_chrf(changed) > i_chrf(same)


def _groups(n):
    rng = random.Random(5)
    lines = builtin_corpus_lines()
    return [CandidateGroup(f"{i:05d}", tuple(rng.choice(lines) for _ in range(3))) for i in range(n)]


def test_dataset_score_single_group_and_identical():
    group = _groups(1)[0]
    assert dataset_i_score([group], "bleu").mean == i_bleu(group)
    s = "one two three four five"
    identical = [CandidateGroup(str(i), (s, s, s)) for i in range(4)]
    assert dataset_i_score(identical, "chrf").mean == 0.0


def test_dataset_score_failures_and_errors():
    groups = _groups(3) + [CandidateGroup("solo", ("lonely",))]
    result = dataset_i_score(groups, "bleu")
    assert set(result.failures) == {"solo"} and result.n_groups == 3
    with pytest.raises(ValueError):
        dataset_i_score([], "bleu")
    with pytest.raises(ValueError):
        dataset_i_score(_groups(2) + _groups(1), "bleu")


def test_dataset_score_sampling_reproducible_and_worker_independent():
    groups = _groups(60)
    spec = SampleSpec(n=25, seed=3)
    one = dataset_i_score(groups, "bleu", sample=spec)
    two = dataset_i_score(list(reversed(groups)), "bleu", sample=spec)
    assert one.per_group == two.per_group and one.mean == two.mean
    assert one.n_groups == 25
    par = dataset_i_score(groups, "bleu", sample=spec, workers=2)
    assert par.mean == one.mean
