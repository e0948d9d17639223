"""Sequence scoring: pseudo log-likelihood, CLS scores, interpolation, reranking.

Orientation is fixed everywhere: lower first-pass, second-pass and fused
scores all mean a more likely hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .model import EncoderModel, pad_batch

MASK_ID = 4


@dataclass
class ScoredHypothesis:
    tokens: list[str]
    first_pass: float
    second_pass: float | None = None
    fused: float | None = None
    beta: float | None = None
    errors: int | None = None
    rank: int = 0  # position in the first-pass list


def masked_variants(token_ids: Sequence[int], mask_id: int = MASK_ID) -> list[list[int]]:
    """One copy of ``token_ids`` per position, with that position masked."""
    out = []
    for t in range(len(token_ids)):
        v = list(token_ids)
        v[t] = mask_id
        out.append(v)
    return out


def _check_fits(model: EncoderModel, n_tokens: int) -> None:
    if n_tokens + 2 > model.config.max_len:
        raise ValueError(
            f"{n_tokens} tokens plus [CLS]/[SEP] exceed max_len {model.config.max_len}; truncate first"
        )


def pll(model: EncoderModel, token_ids: Sequence[int]) -> float:
    """Sum over positions of -log P(token | rest) with that position masked.

    All masked variants go through the encoder as one batch.
    """
    token_ids = list(token_ids)
    if not token_ids:
        return 0.0
    _check_fits(model, len(token_ids))
    return float(pll_many(model, [token_ids])[0])


def pll_loop(model: EncoderModel, token_ids: Sequence[int]) -> float:
    """Position-by-position PLL; reference path for the batched version."""
    token_ids = list(token_ids)
    total = 0.0
    with ad.no_grad():
        for t, variant in enumerate(masked_variants(token_ids)):
            rows = model.mlm_log_probs(model.frame(variant), [t + 1])
            total -= rows.data[0, token_ids[t]]
    return total


def pll_many(model: EncoderModel, sequences: Sequence[Sequence[int]], chunk: int = 512) -> np.ndarray:
    """Batched PLL for many id sequences (empty sequences score 0)."""
    owners, positions, targets, framed = [], [], [], []
    for i, seq in enumerate(sequences):
        _check_fits(model, len(seq))
        for t, variant in enumerate(masked_variants(seq)):
            owners.append(i)
            positions.append(t + 1)
            targets.append(seq[t])
            framed.append(model.frame(variant))
    result = np.zeros(len(sequences))
    if not framed:
        return result
    # length-sorted chunks keep padding small
    order = np.argsort([len(f) for f in framed], kind="stable")
    mlm_w, mlm_b = model.params["mlm.w"], model.params["mlm.b"]
    with ad.no_grad():
        for start in range(0, len(order), chunk):
            idx = order[start:start + chunk]
            ids, mask = pad_batch([framed[j] for j in idx])
            hidden = model.encode(ids, mask).data
            pos = np.asarray([positions[j] for j in idx])
            h = hidden[np.arange(len(idx)), pos]
            logp = ad.log_softmax(ad.Tensor(h) @ mlm_w + mlm_b, axis=-1).data
            tgt = np.asarray([targets[j] for j in idx])
            np.add.at(result, np.asarray([owners[j] for j in idx]), -logp[np.arange(len(idx)), tgt])
    return result


def second_pass_scores(model: EncoderModel, hypotheses: Sequence[Sequence[int]]) -> np.ndarray:
    """CLS score for each hypothesis; each one is encoded on its own row."""
    if not hypotheses:
        raise ValueError("second_pass_scores needs at least one hypothesis")
    for h in hypotheses:
        _check_fits(model, len(h))
    ids, mask = pad_batch([model.frame(h) for h in hypotheses])
    with ad.no_grad():
        return model.cls_scores(ids, mask).data.copy()


def fuse(first_pass: float, second_pass: float, beta: float) -> float:
    """Interpolated score ``first_pass + beta * second_pass``."""
    if not all(math.isfinite(x) for x in (first_pass, second_pass, beta)):
        raise ValueError(f"fuse needs finite inputs, got {(first_pass, second_pass, beta)}")
    return first_pass + beta * second_pass


def fuse_all(first_pass, second_pass, beta: float) -> np.ndarray:
    first_pass = np.asarray(first_pass, dtype=np.float64)
    second_pass = np.asarray(second_pass, dtype=np.float64)
    if not (np.all(np.isfinite(first_pass)) and np.all(np.isfinite(second_pass)) and math.isfinite(beta)):
        raise ValueError("fuse needs finite inputs")
    return first_pass + beta * second_pass


def rerank_order(fused) -> list[int]:
    """Indices sorted by ascending fused score; ties keep first-pass order."""
    return [int(i) for i in np.argsort(np.asarray(fused, dtype=np.float64), kind="stable")]


def rerank(hypotheses: Sequence[ScoredHypothesis]) -> list[ScoredHypothesis]:
    if any(h.fused is None for h in hypotheses):
        raise ValueError("rerank needs fused scores on every hypothesis")
    return sorted(hypotheses, key=lambda h: (h.fused, h.rank))
