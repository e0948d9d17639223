import itertools
from functools import lru_cache

import numpy as np
import pytest

from nbrescore.data import (
    GRAMMAR,
    Corpus,
    GeneratorConfig,
    Hypothesis,
    NBestRecord,
    align,
    annotate_corpus,
    annotate_errors,
    cer,
    edit_distance,
    generate_synthetic_nbest,
    grammar_words,
    load_texts,
    sample_texts,
    save_texts,
    slot_classes,
    wer,
)


def naive_distance(a, b):
    """Textbook recursion, no DP table."""
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return d(len(a), len(b))


def all_short_strings(alphabet="abc", max_len=4):
    for n in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


# -- records -----------------------------------------------------------------

def test_record_json_round_trip():
    rec = NBestRecord("u1", ["a", "b"], [Hypothesis(["a"], 1.5), Hypothesis(["a", "c"], 2.0)], eps=[1, 1])
    d = rec.to_json()
    assert set(d) == {"id", "ref", "hyps", "eps"}
    assert NBestRecord.from_json(d) == rec


@pytest.mark.parametrize("bad", [
    {"id": "x", "ref": ["a"], "hyps": []},
    {"id": "x", "ref": ["a"], "hyps": [{"tokens": ["a"], "score": float("nan")}]},
    {"id": "x", "ref": ["a"], "hyps": [{"tokens": ["a"], "score": 1.0}], "eps": [0, 1]},
    {"id": "x", "ref": ["a"]},
])
def test_record_rejects_invalid(bad):
    with pytest.raises(ValueError):
        NBestRecord.from_json(bad)


def test_corpus_rejects_duplicate_ids():
    rec = NBestRecord("dup", ["a"], [Hypothesis(["a"], 0.0)])
    with pytest.raises(ValueError, match="dup"):
        Corpus([rec, rec])


def test_corpus_and_texts_files_round_trip(tmp_path):
    corpus = generate_synthetic_nbest(GeneratorConfig(utterances=5), seed=1)
    corpus.save(tmp_path / "c.jsonl")
    assert Corpus.load(tmp_path / "c.jsonl").records == corpus.records
    texts = sample_texts(4, seed=2)
    save_texts(tmp_path / "t.jsonl", texts)
    assert load_texts(tmp_path / "t.jsonl") == texts


# -- edit distance ------------------------------------------------------------

def test_edit_distance_examples():
    assert edit_distance("play some jazz".split(), "play some jazz".split()) == 0
    assert edit_distance(["a"], []) == 1
    assert edit_distance("play some jazz music".split(), "play sum jazz".split()) == 2


def test_edit_distance_matches_naive_recursion_exhaustively():
    strings = list(all_short_strings())
    for a in strings:
        for b in strings:
            assert edit_distance(a, b) == naive_distance(a, b), (a, b)


def test_edit_distance_is_a_metric():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b, c = (list(rng.integers(0, 3, size=rng.integers(0, 6))) for _ in range(3))
        assert edit_distance(a, b) == edit_distance(b, a)
        assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)
        assert (edit_distance(a, b) == 0) == (a == b)


def test_align_counts_sum_to_distance():
    al = align("play some jazz music".split(), "play sum jazz".split())
    assert al == {"sub": 1, "ins": 0, "del": 1, "errors": 2}
    rng = np.random.default_rng(1)
    for _ in range(100):
        a, b = (list(rng.integers(0, 3, size=rng.integers(0, 6))) for _ in range(2))
        al = align(a, b)
        assert al["sub"] + al["ins"] + al["del"] == al["errors"] == edit_distance(a, b)
        assert len(a) - al["del"] + al["ins"] == len(b)


# -- annotation and error rates -----------------------------------------------

def test_annotation_matches_direct_calls_and_is_idempotent():
    corpus = generate_synthetic_nbest(GeneratorConfig(utterances=20), seed=3)
    annotate_corpus(corpus)
    for r in corpus:
        assert r.eps == [edit_distance(r.ref, h.tokens) for h in r.hyps]
    once = [list(r.eps) for r in corpus]
    annotate_corpus(corpus)
    assert [r.eps for r in corpus] == once


def test_reference_hypothesis_has_zero_errors():
    rec = annotate_errors(NBestRecord("u", ["a", "b"], [Hypothesis(["a", "b"], 0.0)]))
    assert rec.eps == [0]


def test_wer_examples():
    assert wer([(["a", "b"], ["a", "b"])]) == 0.0
    assert wer([(["w", "x", "y", "z"], ["w", "x", "y", "q"])]) == 0.25
    # pooled, not averaged per utterance
    assert wer([(["a"], ["b"]), (["a", "b", "c"], ["a", "b", "c"])]) == 0.25


def test_cer_example():
    assert abs(cer([(["abc"], ["abd"])]) - 1 / 3) < 1e-15


def test_wer_rejects_empty_references():
    with pytest.raises(ValueError):
        wer([([], ["a"])])


# -- generator -----------------------------------------------------------------

def test_generator_is_deterministic():
    cfg = GeneratorConfig(utterances=50)
    a = generate_synthetic_nbest(cfg, seed=9)
    b = generate_synthetic_nbest(cfg, seed=9)
    assert [r.to_json() for r in a] == [r.to_json() for r in b]
    c = generate_synthetic_nbest(cfg, seed=10)
    assert [r.to_json() for r in a] != [r.to_json() for r in c]


def test_generator_lists_sorted_unique_and_sized():
    corpus = generate_synthetic_nbest(GeneratorConfig(utterances=100, n=5), seed=4)
    for r in corpus:
        scores = r.first_pass_scores
        assert np.all(np.diff(scores) >= 0)
        assert len({tuple(h.tokens) for h in r.hyps}) == r.n
        assert 1 <= r.n <= 5 and all(h.tokens for h in r.hyps)
        assert all(t in grammar_words() for t in r.ref)


def test_zero_corruption_gives_reference_only():
    cfg = GeneratorConfig(utterances=30, n=1, p_sub=0, p_ins=0, p_del=0, p_ref=0)
    corpus = annotate_corpus(generate_synthetic_nbest(cfg, seed=0))
    for r in corpus:
        assert all(h.tokens == r.ref for h in r.hyps)
        assert r.eps == [0] * r.n
    assert wer((r.ref, min(zip(r.eps, (h.tokens for h in r.hyps)))[1]) for r in corpus) == 0.0


def test_substitution_rate_monte_carlo():
    cfg = GeneratorConfig(utterances=2500, n=1, p_ref=0.0)
    corpus = generate_synthetic_nbest(cfg, seed=11)
    subs = sum(r.channel_ops[0][0] for r in corpus)
    words = sum(len(r.ref) for r in corpus)
    assert abs(subs / words - cfg.p_sub) <= 0.2 * cfg.p_sub


def test_in_class_confusions_stay_in_slot():
    classes = slot_classes(GRAMMAR)
    assert "<genre>" in classes and len(classes["<genre>"]) >= 3
    from nbrescore.data import NoisyChannel
    ch = NoisyChannel(GeneratorConfig(), grammar_words(), np.random.default_rng(0), classes)
    genre = classes["<genre>"]
    for w in genre:
        assert all(p in genre for p in ch.confusions[w][:2])
        assert w not in ch.confusions[w]


@pytest.mark.parametrize("bad", [dict(p_sub=1.5), dict(p_sub=0.6, p_del=0.5), dict(n=0), dict(score_noise=-1.0),
                                 dict(in_class=5)])
def test_generator_config_validation(bad):
    with pytest.raises(ValueError):
        GeneratorConfig(**bad).validate()
