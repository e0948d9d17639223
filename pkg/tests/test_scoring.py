import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbrescore.model import ModelConfig, Vocab, init_model
from nbrescore.scoring import (
    ScoredHypothesis,
    fuse,
    fuse_all,
    masked_variants,
    pll,
    pll_loop,
    pll_many,
    rerank,
    rerank_order,
    second_pass_scores,
)

M = 4


def make_model(words=20, seed=0, max_len=12):
    vocab = Vocab([f"w{i}" for i in range(words)])
    return init_model(ModelConfig(layers=2, hidden=16, heads=2, ffn=32, max_len=max_len,
                                  vocab_size=len(vocab), seed=seed), vocab)


# -- masked variants ---------------------------------------------------------

def test_masked_variants_examples():
    assert masked_variants([7, 8]) == [[M, 8], [7, M]]
    assert masked_variants([9]) == [[M]]
    assert masked_variants([]) == []


def test_masked_variants_hamming_one():
    seq = list(np.random.default_rng(0).integers(5, 50, size=7))
    variants = masked_variants(seq)
    assert len(variants) == 7
    for t, v in enumerate(variants):
        diff = [i for i in range(7) if v[i] != seq[i]]
        assert diff == [t] and v[t] == M


# -- PLL ---------------------------------------------------------------------

def test_pll_uniform_model():
    model = make_model(words=5)  # 5 reserved + 5 words
    assert model.config.vocab_size == 10
    model["mlm.w"].data[:] = 0.0
    model["mlm.b"].data[:] = 0.0
    assert abs(pll(model, [5, 6, 7]) - 3 * math.log(10)) < 1e-12


def test_pll_confident_model_near_zero():
    model = make_model()
    model["mlm.w"].data[:] = 0.0
    model["mlm.b"].data[:] = 0.0
    model["mlm.b"].data[9] = 60.0
    assert 0 <= pll(model, [9, 9, 9]) < 1e-20


def test_pll_empty_is_zero():
    assert pll(make_model(), []) == 0.0


def test_pll_rejects_over_length():
    with pytest.raises(ValueError, match="max_len"):
        pll(make_model(max_len=6), [5, 6, 7, 8, 9])


@pytest.mark.parametrize("seed", range(5))
def test_pll_batched_equals_loop(seed):
    model = make_model(seed=seed)
    rng = np.random.default_rng(seed)
    seqs = [rng.integers(5, 25, size=rng.integers(1, 10)).tolist() for _ in range(6)]
    batched = pll_many(model, seqs, chunk=7)
    for s, b in zip(seqs, batched):
        assert abs(b - pll_loop(model, s)) < 1e-8
        assert abs(pll(model, s) - b) < 1e-8


def test_pll_is_positive():
    model = make_model(seed=4)
    assert pll(model, [5, 10, 15]) > 0


# -- second-pass scores -------------------------------------------------------

def test_second_pass_matches_cls_score_map():
    model = make_model(seed=2)
    hyps = [[5, 6], [7, 8, 9, 10], [11]]
    scores = second_pass_scores(model, hyps)
    expected = [model.cls_score(model.frame(h)).item() for h in hyps]
    np.testing.assert_allclose(scores, expected, atol=1e-10, rtol=0)


def test_second_pass_order_independent_and_duplicates_equal():
    model = make_model(seed=5)
    hyps = [[5, 6], [7, 8, 9], [5, 6], [12]]
    scores = second_pass_scores(model, hyps)
    assert abs(scores[0] - scores[2]) < 1e-12
    perm = [3, 1, 0, 2]
    permuted = second_pass_scores(model, [hyps[i] for i in perm])
    np.testing.assert_allclose(permuted, scores[perm], atol=1e-10, rtol=0)


def test_second_pass_rejects_empty_list():
    with pytest.raises(ValueError):
        second_pass_scores(make_model(), [])


# -- fuse ----------------------------------------------------------------------

def test_fuse_examples():
    assert fuse(1.0, 2.0, 0.5) == 2.0
    assert fuse(3.25, 99.0, 0.0) == 3.25


@pytest.mark.parametrize("bad", [(math.nan, 1.0, 1.0), (1.0, math.inf, 1.0), (1.0, 1.0, -math.inf)])
def test_fuse_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        fuse(*bad)
    with pytest.raises(ValueError):
        fuse_all([bad[0]], [bad[1]], bad[2])


def test_beta_zero_keeps_first_pass_order():
    rng = np.random.default_rng(0)
    for _ in range(50):
        sa = rng.permutation(8).astype(float) + rng.uniform(0, 0.5)
        sl = rng.normal(size=8)
        assert rerank_order(fuse_all(sa, sl, 0.0)) == list(np.argsort(sa))


# -- rerank --------------------------------------------------------------------

def test_rerank_order_example():
    assert rerank_order([3.0, 1.0, 2.0]) == [1, 2, 0]


def test_rerank_ties_keep_first_pass_order():
    assert rerank_order([2.0, 2.0, 2.0, 2.0]) == [0, 1, 2, 3]
    hyps = [ScoredHypothesis(tokens=[str(i)], first_pass=float(i), fused=1.0, rank=i) for i in range(4)]
    assert [h.rank for h in rerank(hyps[::-1])] == [0, 1, 2, 3]


def test_rerank_requires_fused():
    with pytest.raises(ValueError):
        rerank([ScoredHypothesis(tokens=["a"], first_pass=1.0)])


def test_large_beta_selects_best_second_pass():
    rng = np.random.default_rng(1)
    for _ in range(100):
        sa = rng.normal(0, 5, size=6)
        sl = rng.permutation(6) + rng.normal(0, 0.1, size=6)
        assert rerank_order(fuse_all(sa, sl, 1e6))[0] == int(np.argmin(sl))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=8),
       st.lists(st.integers(-20, 20), min_size=8, max_size=8),
       st.integers(-1000, 1000), st.sampled_from([0.0, 0.5, 1.0, 2.5]))
def test_shift_invariance_of_ranking(sa, sl, c, beta):
    # integer-valued inputs keep the shifted sums exact, so ties are preserved too
    sa = np.asarray(sa, dtype=float)
    sl = np.asarray(sl[: len(sa)], dtype=float)
    assert rerank_order(fuse_all(sa + c, sl, beta)) == rerank_order(fuse_all(sa, sl, beta))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=0, max_size=10))
def test_rerank_is_permutation(scores):
    hyps = [ScoredHypothesis(tokens=[f"t{i}"], first_pass=0.0, fused=s, rank=i) for i, s in enumerate(scores)]
    out = rerank(hyps)
    assert sorted(h.rank for h in out) == list(range(len(scores)))
    assert [h.fused for h in out] == sorted(scores)
    assert sorted(rerank_order(scores)) == list(range(len(scores)))
