"""Training procedures, PLL precomputation, beta search and evaluation."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from . import autodiff as ad
from .autodiff import Tensor
from .data import Corpus, NBestRecord, cer, edit_distance, wer
from .io import read_jsonl, write_jsonl
from .losses import (
    DEFAULT_LAMBDA,
    LossReport,
    fused_loss,
    mwed_loss,
    mwed_temperature,
    mwer_loss,
)
from .model import EncoderModel, ModelConfig, init_model, pad_batch
from .scoring import fuse_all, pll_many, rerank_order

logger = logging.getLogger(__name__)

OBJECTIVES = ("mlm", "md", "mwer-only", "mwed-only", "md-mwer", "md-mwed")
DISCRIMINATIVE = ("mwer-only", "mwed-only", "md-mwer", "md-mwed")
SCHEDULES = ("constant", "linear")


@dataclass
class TrainingConfig:
    objective: str = "md-mwer"
    learning_rate: float = 1e-3
    batch_size: int = 8
    steps: int = 200
    lam: float = DEFAULT_LAMBDA
    beta: float = 1.0
    seed: int = 0
    max_len: int = 24
    mask_rate: float = 0.15
    clip: float = 1.0
    log_every: int = 50
    # "constant" or "linear" (decay to zero over ``steps``)
    schedule: str = "constant"

    def validate(self) -> None:
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}; expected one of {OBJECTIVES}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.steps < 0:
            raise ValueError("learning_rate and batch_size must be positive, steps non-negative")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.max_len < 3:
            raise ValueError("max_len must be >= 3")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}; expected one of {SCHEDULES}")
        if self.objective == "mlm" and not 0 < self.mask_rate <= 1:
            raise ValueError("mask_rate must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown TrainingConfig fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainLog:
    objective: str
    steps: int = 0
    updates: int = 0
    losses: list[tuple[int, float]] = field(default_factory=list)
    skipped: dict[str, int] = field(default_factory=dict)
    reports: list[dict] = field(default_factory=list)

    def skip(self, reason: str) -> None:
        self.skipped[reason] = self.skipped.get(reason, 0) + 1

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# optimisation

def learning_rate_at(config: TrainingConfig, step: int) -> float:
    """Learning rate for 1-based ``step`` under the config's schedule."""
    if config.schedule == "linear":
        return config.learning_rate * (1.0 - (step - 1) / config.steps)
    return config.learning_rate


class Adam:
    """Adam with global gradient-norm clipping."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, clip: float | None = 1.0):
        self.params = list(params)
        self.lr, self.b1, self.b2, self.eps, self.clip = lr, betas[0], betas[1], eps, clip
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]
        self.t = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> float:
        grads = [np.zeros(p.shape) if p.grad is None else p.grad for p in self.params]
        norm = math.sqrt(sum(float((g * g).sum()) for g in grads))
        scale = self.clip / norm if self.clip is not None and norm > self.clip else 1.0
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = g * scale
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return norm


def truncate(tokens: Sequence[str], max_len: int) -> tuple[list[str], bool]:
    """Keep the prefix that fits ``max_len`` once [CLS]/[SEP] are added."""
    room = max_len - 2
    return list(tokens[:room]), len(tokens) > room


def _ids(model: EncoderModel, tokens: Sequence[str], max_len: int) -> list[int]:
    if model.vocab is None:
        raise ValueError("model has no vocabulary attached")
    return model.vocab.encode(truncate(tokens, min(max_len, model.config.max_len))[0])


class _Batcher:
    """Seeded epoch-wise shuffling over ``n`` items."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        self.n, self.batch_size, self.rng = n, batch_size, rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next(self) -> np.ndarray:
        out = []
        while len(out) < min(self.batch_size, self.n):
            if self.pos >= self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
            out.append(self.order[self.pos])
            self.pos += 1
        return np.asarray(out)


# ---------------------------------------------------------------------------
# masked-LM domain adaptation

def mask_batch(model: EncoderModel, id_seqs: Sequence[Sequence[int]], rng: np.random.Generator,
               mask_rate: float = 0.15):
    """BERT-style masking of framed sequences: 80% [MASK], 10% random, 10% kept.

    Returns (ids, pad_mask, rows, cols, targets); every sequence with at least
    one token gets at least one selected position.
    """
    framed = [model.frame(s) for s in id_seqs]
    ids, pad_mask = pad_batch(framed)
    n_special = 5
    rows, cols, targets = [], [], []
    for b, seq in enumerate(id_seqs):
        if not seq:
            continue
        chosen = np.flatnonzero(rng.random(len(seq)) < mask_rate)
        if chosen.size == 0:
            chosen = np.array([rng.integers(len(seq))])
        for t in chosen:
            pos = t + 1
            rows.append(b)
            cols.append(pos)
            targets.append(seq[t])
            u = rng.random()
            if u < 0.8:
                ids[b, pos] = 4
            elif u < 0.9:
                ids[b, pos] = rng.integers(n_special, model.config.vocab_size)
    return ids, pad_mask, np.asarray(rows), np.asarray(cols), np.asarray(targets)


def mlm_batch_loss(model: EncoderModel, id_seqs, rng, mask_rate: float = 0.15) -> Tensor:
    ids, pad_mask, rows, cols, targets = mask_batch(model, id_seqs, rng, mask_rate)
    hidden = model.encode(ids, pad_mask)
    logp = ad.log_softmax(model.mlm_logits(hidden[rows, cols]), axis=-1)
    return -ad.mean(logp[np.arange(len(targets)), targets])


def mlm_eval_loss(model: EncoderModel, texts: Sequence[Sequence[str]], seed: int = 1234,
                  mask_rate: float = 0.15, max_len: int = 24, batch: int = 256) -> float:
    """Mean masked-token cross-entropy with a fixed masking seed."""
    rng = np.random.default_rng(seed)
    seqs = [_ids(model, t, max_len) for t in texts]
    total, count = 0.0, 0
    with ad.no_grad():
        for i in range(0, len(seqs), batch):
            chunk = seqs[i:i + batch]
            ids, pad_mask, rows, cols, targets = mask_batch(model, chunk, rng, mask_rate)
            hidden = model.encode(ids, pad_mask)
            logp = ad.log_softmax(model.mlm_logits(hidden[rows, cols]), axis=-1).data
            total -= logp[np.arange(len(targets)), targets].sum()
            count += len(targets)
    return total / count


def train_domain_adapt(model: EncoderModel, texts: Sequence[Sequence[str]],
                       config: TrainingConfig) -> tuple[EncoderModel, TrainLog]:
    """Masked-LM training on an in-domain text corpus; returns a new model."""
    config.validate()
    if config.objective != "mlm":
        raise ValueError(f"domain adaptation needs objective 'mlm', got {config.objective!r}")
    if not texts:
        raise ValueError("empty text corpus")
    model = model.copy()
    log = TrainLog("mlm")
    seqs = [_ids(model, t, config.max_len) for t in texts]
    rng = np.random.default_rng(config.seed)
    batcher = _Batcher(len(seqs), config.batch_size, rng)
    opt = Adam(model.parameters(), config.learning_rate, clip=config.clip)
    for step in range(1, config.steps + 1):
        idx = batcher.next()
        opt.zero_grad()
        opt.lr = learning_rate_at(config, step)
        loss = mlm_batch_loss(model, [seqs[i] for i in idx], rng, config.mask_rate)
        loss.backward()
        opt.step()
        log.steps = log.updates = step
        if step % config.log_every == 0 or step == config.steps:
            log.losses.append((step, loss.item()))
            logger.info("mlm step %d loss %.4f", step, loss.item())
    return model, log


# ---------------------------------------------------------------------------
# PLL precomputation

class PLLTable:
    """PLL values keyed by (untruncated) token sequence."""

    def __init__(self):
        self.entries: dict[tuple[str, ...], tuple[float, bool]] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, tokens) -> bool:
        return tuple(tokens) in self.entries

    def __getitem__(self, tokens) -> float:
        return self.entries[tuple(tokens)][0]

    def truncated(self, tokens) -> bool:
        return self.entries[tuple(tokens)][1]

    def missing(self, sequences: Iterable[Sequence[str]]) -> list[tuple[str, ...]]:
        return [tuple(s) for s in sequences if tuple(s) not in self.entries]

    def save(self, path) -> None:
        write_jsonl(path, ({"tokens": list(k), "pll": v, "truncated": t}
                           for k, (v, t) in self.entries.items()))

    @classmethod
    def load(cls, path) -> "PLLTable":
        table = cls()
        for d in read_jsonl(path):
            table.entries[tuple(str(t) for t in d["tokens"])] = (float(d["pll"]), bool(d["truncated"]))
        return table


def corpus_sequences(corpus: Corpus) -> list[list[str]]:
    """Every hypothesis of every record, in corpus order."""
    return [h.tokens for r in corpus for h in r.hyps]


def precompute_pll(teacher: EncoderModel, sequences: Iterable[Sequence[str]], path=None,
                   max_len: int | None = None, table: PLLTable | None = None) -> PLLTable:
    """Score each unique sequence with the teacher's PLL, reusing a cache.

    With ``path`` set, an existing table there is loaded first and only the
    missing sequences are scored; the merged table is written back.
    """
    max_len = max_len or teacher.config.max_len
    if table is None:
        table = PLLTable.load(path) if path is not None and Path(path).exists() else PLLTable()
    todo: dict[tuple[str, ...], None] = {}
    for s in sequences:
        key = tuple(s)
        if key not in table.entries:
            todo.setdefault(key, None)
    if todo:
        keys = list(todo)
        truncated = [truncate(k, max_len) for k in keys]
        values = pll_many(teacher, [teacher.vocab.encode(t) for t, _ in truncated])
        for k, (_, flag), v in zip(keys, truncated, values):
            table.entries[k] = (float(v), flag)
        if path is not None:
            table.save(path)
    return table


# ---------------------------------------------------------------------------
# MLM distillation

def md_eval_mse(model: EncoderModel, texts: Sequence[Sequence[str]], table: PLLTable,
                max_len: int = 24) -> float:
    scores = score_sequences(model, texts, max_len)
    targets = np.array([table[t] for t in texts])
    return float(np.mean((scores - targets) ** 2))


def train_md(model: EncoderModel, texts: Sequence[Sequence[str]], table: PLLTable,
             config: TrainingConfig) -> tuple[EncoderModel, TrainLog]:
    """Regress the CLS score onto precomputed PLL values (mean squared error)."""
    config.validate()
    if config.objective != "md":
        raise ValueError(f"train_md needs objective 'md', got {config.objective!r}")
    if not texts:
        raise ValueError("empty text corpus")
    missing = table.missing(texts)
    if missing:
        raise KeyError(f"PLL table lacks {len(missing)} sequences, e.g. {' '.join(missing[0])!r}")
    model = model.copy()
    log = TrainLog("md")
    seqs = [model.frame(_ids(model, t, config.max_len)) for t in texts]
    targets = np.array([table[t] for t in texts])
    rng = np.random.default_rng(config.seed)
    batcher = _Batcher(len(seqs), config.batch_size, rng)
    opt = Adam(model.parameters(), config.learning_rate, clip=config.clip)
    for step in range(1, config.steps + 1):
        idx = batcher.next()
        ids, pad_mask = pad_batch([seqs[i] for i in idx])
        opt.zero_grad()
        opt.lr = learning_rate_at(config, step)
        loss = ad.mean(ad.squared_error(model.cls_scores(ids, pad_mask), targets[idx]))
        loss.backward()
        opt.step()
        log.steps = log.updates = step
        if step % config.log_every == 0 or step == config.steps:
            log.losses.append((step, loss.item()))
            logger.info("md step %d mse %.4f", step, loss.item())
    return model, log


# ---------------------------------------------------------------------------
# discriminative training

def _utterance_loss(objective: str, s_first: np.ndarray, s_second: Tensor, eps: Sequence[int],
                    beta: float, lam: float, pll_targets: np.ndarray | None,
                    log: TrainLog) -> tuple[Tensor, LossReport] | None:
    n = len(eps)
    if n < 2:
        log.skip("single_hypothesis")
        return None
    fused = s_first + beta * s_second
    temperature = None
    if "mwed" in objective:
        temperature = mwed_temperature(fused.data, eps)
        if temperature is None:
            log.skip("zero_errors")
            return None
    if len(set(eps)) == 1:
        log.skip("equal_errors")
        return None
    if "mwer" in objective:
        disc = mwer_loss(fused, eps)
    else:
        disc = mwed_loss(fused, eps, temperature)
    report = LossReport(discriminative=disc.item(), objective=objective, temperature=temperature)
    if objective.startswith("md-"):
        md_terms = ad.squared_error(s_second, pll_targets)
        total = fused_loss(disc, [ad.sum(md_terms)], lam)
        report.md_sum = float(md_terms.data.sum())
        report.lam = lam
    else:
        total = disc
    report.total = total.item()
    report.check()
    return total, report


def train_discriminative(model: EncoderModel, corpus: Corpus, config: TrainingConfig,
                         pll_table: PLLTable | None = None) -> tuple[EncoderModel, TrainLog]:
    """Fine-tune the CLS score with MWER/MWED, optionally fused with MD.

    Each step samples ``batch_size`` utterances, scores all of their
    hypotheses in one padded forward pass, fuses with the first-pass scores at
    the training beta and averages the per-utterance losses.  Utterances with
    one hypothesis or identical error counts (and, for MWED, zero total
    errors) carry no contrast and are skipped; a step with nothing left is
    not applied.
    """
    config.validate()
    if config.objective not in DISCRIMINATIVE:
        raise ValueError(f"objective {config.objective!r} is not discriminative")
    if not corpus.annotated:
        raise ValueError("corpus must be annotated with word errors first")
    use_md = config.objective.startswith("md-")
    if use_md:
        if pll_table is None:
            raise ValueError(f"objective {config.objective} needs a PLL table")
        missing = pll_table.missing(corpus_sequences(corpus))
        if missing:
            raise KeyError(f"PLL table lacks {len(missing)} hypotheses, e.g. {' '.join(missing[0])!r}")
    model = model.copy()
    log = TrainLog(config.objective)
    records = corpus.records
    framed = [[model.frame(_ids(model, h.tokens, config.max_len)) for h in r.hyps] for r in records]
    targets = [np.array([pll_table[h.tokens] for h in r.hyps]) if use_md else None for r in records]
    rng = np.random.default_rng(config.seed)
    batcher = _Batcher(len(records), config.batch_size, rng)
    opt = Adam(model.parameters(), config.learning_rate, clip=config.clip)
    for step in range(1, config.steps + 1):
        idx = batcher.next()
        log.steps = step
        seqs, spans = [], []
        for i in idx:
            spans.append((len(seqs), len(seqs) + len(framed[i])))
            seqs.extend(framed[i])
        opt.zero_grad()
        opt.lr = learning_rate_at(config, step)
        ids, pad_mask = pad_batch(seqs)
        s_second = model.cls_scores(ids, pad_mask)
        terms, reports = [], []
        for i, (a, b) in zip(idx, spans):
            r = records[i]
            out = _utterance_loss(config.objective, r.first_pass_scores, s_second[a:b], r.eps,
                                  config.beta, config.lam, targets[i], log)
            if out is not None:
                terms.append(out[0])
                reports.append(out[1])
        if not terms:
            continue
        loss = ad.mean(ad.stack(terms))
        loss.backward()
        opt.step()
        log.updates += 1
        if step % config.log_every == 0 or step == config.steps:
            log.losses.append((step, loss.item()))
            log.reports.append({
                "step": step,
                "total": loss.item(),
                "discriminative": float(np.mean([r.discriminative for r in reports])),
                "md_sum": float(np.mean([r.md_sum for r in reports])),
            })
            logger.info("%s step %d loss %.4f", config.objective, step, loss.item())
    return model, log


def discriminative_eval_loss(model: EncoderModel, corpus: Corpus, objective: str = "mwer-only",
                             beta: float = 1.0, max_len: int = 24) -> float:
    """Mean MWER (or MWED) loss over the utterances that carry contrast."""
    second = score_corpus(model, corpus, max_len)
    values = []
    for r, sl in zip(corpus, second):
        if r.n < 2 or len(set(r.eps)) == 1:
            continue
        fused = fuse_all(r.first_pass_scores, sl, beta)
        if "mwer" in objective:
            values.append(mwer_loss(fused, r.eps).item())
        else:
            t = mwed_temperature(fused, r.eps)
            if t is not None:
                values.append(mwed_loss(fused, r.eps, t).item())
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# scoring corpora

Scorer = Callable[[NBestRecord], np.ndarray]


def score_sequences(model: EncoderModel, texts: Sequence[Sequence[str]], max_len: int = 24,
                    chunk: int = 256) -> np.ndarray:
    out = np.zeros(len(texts))
    with ad.no_grad():
        for i in range(0, len(texts), chunk):
            ids, mask = pad_batch([model.frame(_ids(model, t, max_len)) for t in texts[i:i + chunk]])
            out[i:i + chunk] = model.cls_scores(ids, mask).data
    return out


def score_corpus(scorer, corpus: Corpus, max_len: int = 24, workers: int = 1,
                 chunk_records: int = 64) -> list[np.ndarray]:
    """Second-pass scores per record.

    ``scorer`` is either an :class:`EncoderModel` or a callable mapping a
    record to one score per hypothesis.  Records are scored in fixed chunks,
    so the result does not depend on ``workers``.
    """
    records = corpus.records
    if not isinstance(scorer, EncoderModel):
        return [np.asarray(scorer(r), dtype=np.float64) for r in records]
    model = scorer

    def run(start: int) -> list[np.ndarray]:
        part = records[start:start + chunk_records]
        flat = score_sequences(model, [h.tokens for r in part for h in r.hyps], max_len, chunk=10**9)
        out, k = [], 0
        for r in part:
            out.append(flat[k:k + r.n])
            k += r.n
        return out

    starts = range(0, len(records), chunk_records)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return [x for part in parts for x in part]


def oracle_scorer(record: NBestRecord) -> np.ndarray:
    """Second-pass 'scores' equal to the word errors (the ideal rescorer)."""
    return np.asarray(record.eps, dtype=np.float64)


# ---------------------------------------------------------------------------
# beta search and evaluation

def _require_annotated(corpus: Corpus) -> None:
    if not corpus.annotated:
        raise ValueError("corpus must be annotated with word errors first")


def _choose(corpus: Corpus, second: list[np.ndarray], beta: float) -> list[int]:
    return [rerank_order(fuse_all(r.first_pass_scores, sl, beta))[0] for r, sl in zip(corpus, second)]


def _wer_of(corpus: Corpus, chosen: Sequence[int]) -> float:
    edits = sum(r.eps[c] for r, c in zip(corpus, chosen))
    words = sum(len(r.ref) for r in corpus)
    if words == 0:
        raise ValueError("total reference length is zero")
    return edits / words


def default_beta_grid(stop: float = 5.0, step: float = 0.05) -> list[float]:
    return [round(i * step, 10) for i in range(int(round(stop / step)) + 1)]


@dataclass
class BetaSearchResult:
    beta: float
    wer: float
    curve: list[tuple[float, float]]

    def to_dict(self) -> dict:
        return {"beta": self.beta, "wer": self.wer, "curve": [list(p) for p in self.curve]}


def search_beta(scorer, corpus: Corpus, grid: Sequence[float] | None = None, max_len: int = 24,
                second: list[np.ndarray] | None = None) -> BetaSearchResult:
    """Dev-set WER at every grid beta; ties go to the smallest beta."""
    _require_annotated(corpus)
    grid = default_beta_grid() if grid is None else list(grid)
    if not grid:
        raise ValueError("beta grid is empty")
    if second is None:
        second = score_corpus(scorer, corpus, max_len)
    curve = [(float(b), _wer_of(corpus, _choose(corpus, second, b))) for b in grid]
    best_beta, best_wer = min(curve, key=lambda p: (p[1], p[0]))
    return BetaSearchResult(best_beta, best_wer, curve)


@dataclass
class EvalReport:
    wer: float
    cer: float
    first_pass_wer: float
    oracle_wer: float
    beta: float
    utterances: list[dict]
    tool: str = "nbrescore"
    version: str = __version__
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(scorer, corpus: Corpus, beta: float, max_len: int = 24,
             second: list[np.ndarray] | None = None, workers: int = 1) -> EvalReport:
    """Rerank every list at ``beta`` and report WER/CER against baselines."""
    _require_annotated(corpus)
    if second is None:
        second = score_corpus(scorer, corpus, max_len, workers=workers)
    chosen = _choose(corpus, second, beta)
    first = [rerank_order(r.first_pass_scores)[0] for r in corpus]
    oracle = [int(np.argmin(r.eps)) for r in corpus]
    utts = []
    for r, c, sl in zip(corpus, chosen, second):
        utts.append({
            "id": r.id,
            "chosen": int(c),
            "tokens": list(r.hyps[c].tokens),
            "eps": int(r.eps[c]),
            "ref_len": len(r.ref),
            "first_pass_eps": int(r.eps[rerank_order(r.first_pass_scores)[0]]),
            "oracle_eps": int(min(r.eps)),
        })
    return EvalReport(
        wer=_wer_of(corpus, chosen),
        cer=cer((r.ref, r.hyps[c].tokens) for r, c in zip(corpus, chosen)),
        first_pass_wer=_wer_of(corpus, first),
        oracle_wer=_wer_of(corpus, oracle),
        beta=float(beta),
        utterances=utts,
    )


# ---------------------------------------------------------------------------
# teacher -> student distillation

def distill_student(teacher: EncoderModel, student_config: ModelConfig, texts: Sequence[Sequence[str]],
                    nbest: Corpus, objective: str = "md-mwer", md_config: TrainingConfig | None = None,
                    disc_config: TrainingConfig | None = None, pll_table: PLLTable | None = None,
                    student: EncoderModel | None = None) -> tuple[EncoderModel, dict]:
    """Teacher PLLs -> MD pretraining of the student -> fused discriminative step.

    ``student`` may supply an already initialised (e.g. domain-adapted) student;
    otherwise one is built from ``student_config`` with the teacher's vocab.
    """
    if objective not in ("md-mwer", "md-mwed"):
        raise ValueError(f"distillation objective must be md-mwer or md-mwed, got {objective!r}")
    if student is None:
        student = init_model(student_config, teacher.vocab)
    if student.num_parameters() >= teacher.num_parameters():
        raise ValueError(
            f"student ({student.num_parameters()} params) must be smaller than teacher ({teacher.num_parameters()})"
        )
    md_config = md_config or TrainingConfig(objective="md")
    disc_config = disc_config or TrainingConfig(objective=objective)
    if disc_config.objective != objective:
        disc_config = TrainingConfig.from_dict({**disc_config.to_dict(), "objective": objective})
    table = precompute_pll(teacher, list(texts) + corpus_sequences(nbest), table=pll_table)
    student, md_log = train_md(student, texts, table, md_config)
    student, disc_log = train_discriminative(student, nbest, disc_config, table)
    return student, {"md": md_log.to_dict(), "discriminative": disc_log.to_dict(),
                     "teacher_params": teacher.num_parameters(), "student_params": student.num_parameters()}
