"""Command-line entry point.

Every subcommand validates its input paths before doing any work, writes its
outputs atomically and embeds the run configuration (including the seed) in
what it writes: inside checkpoints and JSON reports directly, and as a
``<file>.meta.json`` sidecar next to JSON-lines outputs.

Exit statuses::

    0  success
    1  runtime failure
    2  usage error (unknown command, bad flag)
    3  malformed or invalid config
    4  missing input file
    5  invalid input data

Failures print one JSON line to stderr: ``{"error": kind, "status": n, "message": ...}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .data import Corpus, GeneratorConfig, annotate_corpus, generate_synthetic_nbest, grammar_words, load_texts, \
    sample_texts, save_texts
from .io import dumps_json, read_jsonl, write_json
from .model import EncoderModel, ModelConfig, Vocab, init_model
from .training import (
    PLLTable,
    TrainingConfig,
    corpus_sequences,
    default_beta_grid,
    distill_student,
    evaluate,
    precompute_pll,
    search_beta,
    train_discriminative,
    train_domain_adapt,
    train_md,
)

logger = logging.getLogger("nbrescore")

COMMANDS = ("gen-data", "annotate", "train-mlm", "pll", "train-md", "train-disc", "distill",
            "search-beta", "evaluate", "bench")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_CONFIG, EXIT_MISSING, EXIT_DATA = 0, 1, 2, 3, 4, 5


class CLIError(Exception):
    def __init__(self, kind: str, status: int, message: str):
        super().__init__(message)
        self.kind, self.status, self.message = kind, status, message


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError("usage", EXIT_USAGE, message)


# -- helpers ---------------------------------------------------------------

def _require(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise CLIError("missing-file", EXIT_MISSING, f"no such file: {p}")


def _load_config(path) -> dict:
    if path is None:
        return {}
    _require(path)
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CLIError("config", EXIT_CONFIG, f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(cfg, dict):
        raise CLIError("config", EXIT_CONFIG, f"{path}: top level must be an object")
    return cfg


def _training_config(section: dict | None, objective: str, seed: int | None) -> TrainingConfig:
    section = dict(section or {})
    section.setdefault("objective", objective)
    if seed is not None:
        section["seed"] = seed
    try:
        cfg = TrainingConfig.from_dict(section)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise CLIError("config", EXIT_CONFIG, f"training config: {exc}") from None
    return cfg


def _model_config(section: dict | None, vocab: Vocab, seed: int | None) -> ModelConfig:
    section = dict(section or {})
    section["vocab_size"] = len(vocab)
    if seed is not None:
        section["seed"] = seed
    try:
        cfg = ModelConfig.from_dict(section)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise CLIError("config", EXIT_CONFIG, f"model config: {exc}") from None
    return cfg


def _meta(args, config: dict) -> dict:
    return {"tool": "nbrescore", "version": __version__, "command": args.command,
            "seed": getattr(args, "seed", None), "config": config}


def _write_meta(path, meta: dict) -> None:
    write_json(f"{path}.meta.json", meta)


def _load_model(path) -> EncoderModel:
    try:
        return EncoderModel.load(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CLIError("invalid-input", EXIT_DATA, f"{path}: {exc}") from None


def _load_corpus(path, split="train", need_eps=False) -> Corpus:
    corpus = Corpus.load(path, split)
    if need_eps and not corpus.annotated:
        raise CLIError("invalid-input", EXIT_DATA, f"{path}: corpus is not annotated (run annotate)")
    return corpus


def _load_sequences(path) -> list[list[str]]:
    """Token sequences from a text JSONL or an n-best JSONL (all hypotheses)."""
    rows = list(read_jsonl(path))
    if rows and "hyps" in rows[0]:
        return corpus_sequences(Corpus([_record(r) for r in rows]))
    return [[str(t) for t in r["tokens"]] for r in rows]


def _record(d):
    from .data import NBestRecord
    return NBestRecord.from_json(d)


def _parse_grid(spec: str | None) -> list[float]:
    if spec is None:
        return default_beta_grid()
    try:
        if ":" in spec:
            start, stop, step = (float(x) for x in spec.split(":"))
            count = int(round((stop - start) / step))
            return [round(start + i * step, 10) for i in range(count + 1)]
        return [float(x) for x in spec.split(",")]
    except ValueError:
        raise CLIError("usage", EXIT_USAGE, f"bad --grid {spec!r}; use start:stop:step or a,b,c") from None


# -- subcommands -------------------------------------------------------------

def cmd_gen_data(args) -> None:
    cfg = _load_config(args.config)
    try:
        gen = GeneratorConfig(**cfg.get("generator", {}))
        gen.validate()
    except (TypeError, ValueError) as exc:
        raise CLIError("config", EXIT_CONFIG, f"generator config: {exc}") from None
    counts = {split: int(cfg.get(split, default)) for split, default in
              (("train", 2000), ("dev", 300), ("test", 300))}
    out = Path(args.out_dir)
    meta = _meta(args, cfg)
    for offset, (split, count) in enumerate(counts.items()):
        g = replace(gen, utterances=count, id_prefix=f"{split}-")
        corpus = generate_synthetic_nbest(g, args.seed * 1000 + offset, split=split)
        if not args.no_annotate:
            annotate_corpus(corpus)
        corpus.save(out / f"{split}.jsonl")
        _write_meta(out / f"{split}.jsonl", meta)
    texts = sample_texts(int(cfg.get("text_sentences", 4000)), args.seed * 1000 + 7)
    save_texts(out / "text.jsonl", texts)
    _write_meta(out / "text.jsonl", meta)
    write_json(out / "vocab.json", {**meta, "tokens": Vocab(grammar_words()).to_list()})


def cmd_annotate(args) -> None:
    _require(args.input)
    corpus = annotate_corpus(_load_corpus(args.input))
    corpus.save(args.out)
    _write_meta(args.out, _meta(args, {"input": args.input}))


def _vocab_from(path) -> Vocab:
    _require(path)
    with open(path) as fh:
        d = json.load(fh)
    return Vocab.from_list(d["tokens"] if isinstance(d, dict) else d)


def cmd_train_mlm(args) -> None:
    _require(args.text, args.init, args.vocab)
    if args.init is None and args.vocab is None:
        raise CLIError("usage", EXIT_USAGE, "train-mlm needs --init or --vocab")
    cfg = _load_config(args.config)
    training = _training_config(cfg.get("training"), "mlm", args.seed)
    if args.init:
        model = _load_model(args.init)
    else:
        vocab = _vocab_from(args.vocab)
        model = init_model(_model_config(cfg.get("model"), vocab, args.seed), vocab)
    model, log = train_domain_adapt(model, load_texts(args.text), training)
    model.save(args.out, {**_meta(args, cfg), "training": training.to_dict(), "log": log.to_dict()})


def cmd_pll(args) -> None:
    _require(args.model, *args.input)
    teacher = _load_model(args.model)
    sequences = [s for path in args.input for s in _load_sequences(path)]
    before = teacher.forward_calls
    table = precompute_pll(teacher, sequences, path=args.out)
    _write_meta(args.out, {**_meta(args, {"model": args.model, "inputs": args.input}),
                           "entries": len(table)})
    logger.info("pll: %d entries, %d forward passes", len(table), teacher.forward_calls - before)


def cmd_train_md(args) -> None:
    _require(args.init, args.text, args.pll, args.nbest)
    cfg = _load_config(args.config)
    training = _training_config(cfg.get("training"), "md", args.seed)
    texts = load_texts(args.text)
    if args.nbest:
        texts += _load_sequences(args.nbest)
    table = PLLTable.load(args.pll)
    try:
        model, log = train_md(_load_model(args.init), texts, table, training)
    except KeyError as exc:
        raise CLIError("invalid-input", EXIT_DATA, str(exc).strip("'\"")) from None
    model.save(args.out, {**_meta(args, cfg), "training": training.to_dict(), "log": log.to_dict()})


def cmd_train_disc(args) -> None:
    _require(args.init, args.nbest, args.pll)
    cfg = _load_config(args.config)
    training = _training_config(cfg.get("training"), args.objective or "md-mwer", args.seed)
    if args.objective:
        training = replace(training, objective=args.objective)
    corpus = _load_corpus(args.nbest, need_eps=True)
    table = PLLTable.load(args.pll) if args.pll else None
    try:
        model, log = train_discriminative(_load_model(args.init), corpus, training, table)
    except KeyError as exc:
        raise CLIError("invalid-input", EXIT_DATA, str(exc).strip("'\"")) from None
    model.save(args.out, {**_meta(args, cfg), "training": training.to_dict(), "log": log.to_dict()})


def cmd_distill(args) -> None:
    _require(args.teacher, args.text, args.nbest)
    cfg = _load_config(args.config)
    teacher = _load_model(args.teacher)
    student_cfg = _model_config(cfg.get("student", {"layers": 1, "hidden": 16, "heads": 2, "ffn": 32,
                                                    "max_len": teacher.config.max_len}),
                                teacher.vocab, args.seed)
    md = _training_config(cfg.get("md"), "md", args.seed)
    disc = _training_config(cfg.get("disc"), args.objective, args.seed)
    corpus = _load_corpus(args.nbest, need_eps=True)
    texts = load_texts(args.text) + corpus_sequences(corpus)
    table = PLLTable.load(args.pll) if args.pll and Path(args.pll).exists() else None
    table = precompute_pll(teacher, texts, path=args.pll, table=table)
    try:
        student, info = distill_student(teacher, student_cfg, texts, corpus, args.objective, md, disc, table)
    except ValueError as exc:
        raise CLIError("config", EXIT_CONFIG, str(exc)) from None
    student.save(args.out, {**_meta(args, cfg), "distill": info})


def _scorer_and_corpus(args):
    _require(args.model, args.nbest)
    return _load_model(args.model), _load_corpus(args.nbest, need_eps=True)


def cmd_search_beta(args) -> None:
    model, corpus = _scorer_and_corpus(args)
    grid = _parse_grid(args.grid)
    result = search_beta(model, corpus, grid)
    report = {**_meta(args, {"model": args.model, "nbest": args.nbest, "grid": args.grid}), **result.to_dict()}
    write_json(args.out, report)
    curve_tsv = Path(args.out).with_suffix(".tsv")
    from .io import atomic_write_text
    atomic_write_text(curve_tsv, "beta\twer\n" + "".join(f"{b:g}\t{w:.6f}\n" for b, w in result.curve))
    if not args.no_figure:
        from .plotting import plot_beta_curve
        plot_beta_curve(result.curve, result.beta, args.figure or Path(args.out).with_suffix(".png"),
                        title=Path(args.nbest).name)


def cmd_evaluate(args) -> None:
    model, corpus = _scorer_and_corpus(args)
    beta = args.beta
    if args.beta_from:
        _require(args.beta_from)
        with open(args.beta_from) as fh:
            beta = float(json.load(fh)["beta"])
    if beta is None:
        raise CLIError("usage", EXIT_USAGE, "evaluate needs --beta or --beta-from")
    report = evaluate(model, corpus, beta, workers=args.workers)
    report.config = _meta(args, {"model": args.model, "nbest": args.nbest, "beta": beta})
    payload = report.to_dict()
    write_json(args.out, payload)
    if not args.no_figure:
        from .plotting import plot_eval_summary
        plot_eval_summary(payload, args.figure or Path(args.out).with_suffix(".png"))


def cmd_bench(args) -> None:
    from .bench import bench_latency, validate_latency_report

    _require(*args.models)
    models = [(Path(p).stem, _load_model(p)) for p in args.models]
    baseline = Path(args.baseline).stem if args.baseline else None
    try:
        report = bench_latency(models, args.batch_size, args.seq_lens, args.threads, args.iters,
                               args.warmup, baseline, args.seed)
    except ValueError as exc:
        raise CLIError("invalid-input", EXIT_DATA, str(exc)) from None
    validate_latency_report(report)
    report["config"] = _meta(args, {"models": args.models, "batch_size": args.batch_size,
                                    "seq_lens": args.seq_lens, "threads": args.threads})
    write_json(args.out, report)
    from .io import atomic_write_text
    tsv = "label\tparams\tseq_len\tmean_ms\tp50_ms\tp95_ms\trelative\n" + "".join(
        f"{r['label']}\t{r['params']}\t{r['seq_len']}\t{r['mean_ms']:.4f}\t{r['p50_ms']:.4f}\t"
        f"{r['p95_ms']:.4f}\t{'' if r['relative'] is None else format(r['relative'], '.4f')}\n"
        for r in report["results"])
    atomic_write_text(Path(args.out).with_suffix(".tsv"), tsv)
    if not args.no_figure:
        from .plotting import plot_latency
        plot_latency(report, args.figure or Path(args.out).with_suffix(".png"))


HANDLERS = {
    "gen-data": cmd_gen_data, "annotate": cmd_annotate, "train-mlm": cmd_train_mlm, "pll": cmd_pll,
    "train-md": cmd_train_md, "train-disc": cmd_train_disc, "distill": cmd_distill,
    "search-beta": cmd_search_beta, "evaluate": cmd_evaluate, "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nbrescore", description="Second-pass n-best rescoring toolkit")
    parser.add_argument("--version", action="version", version=f"nbrescore {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--seed", type=int, default=0)
        return p

    p = command("gen-data", "generate synthetic train/dev/test n-best lists and a text corpus")
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-annotate", action="store_true", help="leave eps out of the n-best files")

    p = command("annotate", "cache word-error counts on an n-best file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = command("train-mlm", "masked-LM domain adaptation")
    p.add_argument("--text", required=True)
    p.add_argument("--vocab")
    p.add_argument("--init")
    p.add_argument("--config")
    p.add_argument("--out", required=True)

    p = command("pll", "precompute (teacher) PLL scores; reuses an existing table at --out")
    p.add_argument("--model", required=True)
    p.add_argument("--input", nargs="+", required=True, help="text or n-best JSONL files")
    p.add_argument("--out", required=True)

    p = command("train-md", "distil PLL into the CLS score")
    p.add_argument("--init", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--nbest", help="also regress on these hypotheses")
    p.add_argument("--pll", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)

    p = command("train-disc", "discriminative fine-tuning (mwer-only, mwed-only, md-mwer, md-mwed)")
    p.add_argument("--init", required=True)
    p.add_argument("--nbest", required=True)
    p.add_argument("--pll")
    p.add_argument("--objective", choices=("mwer-only", "mwed-only", "md-mwer", "md-mwed"))
    p.add_argument("--config")
    p.add_argument("--out", required=True)

    p = command("distill", "teacher PLL -> student MD -> fused discriminative training")
    p.add_argument("--teacher", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--nbest", required=True)
    p.add_argument("--pll", help="PLL cache path (created if absent)")
    p.add_argument("--objective", choices=("md-mwer", "md-mwed"), default="md-mwer")
    p.add_argument("--config")
    p.add_argument("--out", required=True)

    for name, help in (("search-beta", "linear search of the interpolation weight on a dev set"),
                       ("evaluate", "rerank a test set and report WER/CER")):
        p = command(name, help)
        p.add_argument("--model", required=True)
        p.add_argument("--nbest", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--figure", help="figure path (default: next to --out)")
        p.add_argument("--no-figure", action="store_true")
        if name == "search-beta":
            p.add_argument("--grid", help="start:stop:step or comma list (default 0:5:0.05)")
        else:
            p.add_argument("--beta", type=float)
            p.add_argument("--beta-from", help="search-beta report to take beta from")
            p.add_argument("--workers", type=int, default=1)

    p = command("bench", "batch scoring latency")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--batch-size", type=int, default=5)
    p.add_argument("--seq-lens", type=int, nargs="+", default=[16, 32])
    p.add_argument("--threads", type=int, default=2)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--baseline", help="checkpoint whose latency the others are expressed against")
    p.add_argument("--out", required=True)
    p.add_argument("--figure")
    p.add_argument("--no-figure", action="store_true")
    return parser


def _fail(kind: str, status: int, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "status": status, "message": message}) + "\n")
    return status


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CLIError("usage", EXIT_USAGE, f"missing command; choose from {', '.join(COMMANDS)}")
        if args.verbose:
            logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
        HANDLERS[args.command](args)
    except CLIError as exc:
        return _fail(exc.kind, exc.status, exc.message)
    except FileNotFoundError as exc:
        return _fail("missing-file", EXIT_MISSING, str(exc))
    except (ValueError, KeyError) as exc:
        return _fail("invalid-input", EXIT_DATA, str(exc))
    except Exception as exc:  # noqa: BLE001
        return _fail("runtime", EXIT_RUNTIME, f"{type(exc).__name__}: {exc}")
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
