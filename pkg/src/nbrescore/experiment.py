"""End-to-end synthetic recipe: MLM adaptation, PLL, MD, discriminative variants, distillation.

``run_recipe`` is what the acceptance suite and ``examples`` in the README
drive.  All randomness flows from the single ``seed`` argument.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace

from .data import Corpus, GeneratorConfig, annotate_corpus, generate_synthetic_nbest, grammar_words, sample_texts
from .model import ModelConfig, Vocab, init_model
from .training import (
    TrainingConfig,
    corpus_sequences,
    distill_student,
    evaluate,
    precompute_pll,
    score_corpus,
    search_beta,
    train_discriminative,
    train_domain_adapt,
    train_md,
)

logger = logging.getLogger(__name__)


@dataclass
class RecipeConfig:
    train_utts: int = 2000
    dev_utts: int = 300
    test_utts: int = 300
    text_sentences: int = 4000
    n: int = 5
    teacher: ModelConfig = field(default_factory=lambda: ModelConfig(layers=4, hidden=64, heads=4, ffn=128))
    student: ModelConfig = field(default_factory=ModelConfig)
    mlm: TrainingConfig = field(default_factory=lambda: TrainingConfig(
        objective="mlm", learning_rate=2e-3, batch_size=32, steps=800))
    md: TrainingConfig = field(default_factory=lambda: TrainingConfig(
        objective="md", learning_rate=2e-3, batch_size=32, steps=800))
    disc: TrainingConfig = field(default_factory=lambda: TrainingConfig(
        objective="md-mwer", learning_rate=5e-4, batch_size=8, steps=700, schedule="linear"))
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    # MD regresses on grammar text plus the (unlabelled) training hypotheses
    md_on_hypotheses: bool = True
    # warm-start the student with a short MLM run before distillation
    student_mlm: bool = True
    student_mlm_steps: int = 500
    # the student is ~5x cheaper per step, so it gets twice the discriminative steps
    student_disc_steps: int = 1400

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SystemResult:
    name: str
    beta: float
    dev_wer: float
    test_wer: float
    params: int


@dataclass
class RecipeResult:
    seed: int
    first_pass_test_wer: float
    oracle_test_wer: float
    first_pass_dev_wer: float
    oracle_dev_wer: float
    systems: dict[str, SystemResult]
    seconds: float

    def test(self, name: str) -> float:
        return self.systems[name].test_wer

    def dev(self, name: str) -> float:
        return self.systems[name].dev_wer

    def to_dict(self) -> dict:
        return asdict(self)


def make_data(config: RecipeConfig, seed: int):
    base = seed * 1000
    gen = config.generator
    splits = {}
    for offset, (split, count) in enumerate((("train", config.train_utts), ("dev", config.dev_utts),
                                              ("test", config.test_utts))):
        g = replace(gen, utterances=count, n=config.n, id_prefix=f"{split}-")
        splits[split] = annotate_corpus(generate_synthetic_nbest(g, base + offset, split=split))
    texts = sample_texts(config.text_sentences, base + 7)
    return texts, splits


def _system(name, model, dev: Corpus, test: Corpus) -> SystemResult:
    found = search_beta(model, dev, second=score_corpus(model, dev))
    report = evaluate(model, test, found.beta)
    logger.info("%s: beta=%.2f dev=%.4f test=%.4f", name, found.beta, found.wer, report.wer)
    return SystemResult(name, found.beta, found.wer, report.wer, model.num_parameters())


def run_recipe(seed: int, config: RecipeConfig | None = None) -> RecipeResult:
    config = config or RecipeConfig()
    start = time.perf_counter()
    texts, splits = make_data(config, seed)
    train, dev, test = splits["train"], splits["dev"], splits["test"]
    vocab = Vocab(grammar_words())

    def with_seed(cfg: TrainingConfig, k: int) -> TrainingConfig:
        return replace(cfg, seed=seed * 100 + k)

    teacher0 = init_model(replace(config.teacher, vocab_size=len(vocab), seed=seed), vocab)
    teacher, _ = train_domain_adapt(teacher0, texts, with_seed(config.mlm, 1))
    table = precompute_pll(teacher, list(texts) + corpus_sequences(train) + corpus_sequences(dev)
                           + corpus_sequences(test))

    md_texts = list(texts) + (corpus_sequences(train) if config.md_on_hypotheses else [])
    md_model, _ = train_md(teacher, md_texts, table, with_seed(config.md, 2))
    disc = with_seed(config.disc, 3)
    mwer_only, _ = train_discriminative(teacher, train, replace(disc, objective="mwer-only"))
    md_mwer, _ = train_discriminative(md_model, train, replace(disc, objective="md-mwer"), table)
    md_mwed, _ = train_discriminative(md_model, train, replace(disc, objective="md-mwed"), table)

    student_cfg = replace(config.student, vocab_size=len(vocab), seed=seed + 1)
    student0 = init_model(student_cfg, vocab)
    if config.student_mlm:
        student0, _ = train_domain_adapt(student0, texts,
                                         replace(with_seed(config.mlm, 4), steps=config.student_mlm_steps))
    student, _ = distill_student(teacher, student_cfg, md_texts, train, "md-mwer",
                                 with_seed(config.md, 5), with_seed(replace(disc, objective="md-mwer", steps=config.student_disc_steps), 6),
                                 pll_table=table, student=student0)

    systems = {}
    for name, model in (("md", md_model), ("mwer-only", mwer_only), ("md-mwer", md_mwer),
                        ("md-mwed", md_mwed), ("student-md-mwer", student)):
        systems[name] = _system(name, model, dev, test)
    fp_test = evaluate(lambda r: [0.0] * r.n, test, 0.0)
    fp_dev = evaluate(lambda r: [0.0] * r.n, dev, 0.0)
    return RecipeResult(
        seed=seed,
        first_pass_test_wer=fp_test.first_pass_wer,
        oracle_test_wer=fp_test.oracle_wer,
        first_pass_dev_wer=fp_dev.first_pass_wer,
        oracle_dev_wer=fp_dev.oracle_wer,
        systems=systems,
        seconds=time.perf_counter() - start,
    )
