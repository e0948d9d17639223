"""Batch-scoring latency harness (scoring path only, no training)."""

from __future__ import annotations

import time
from typing import Sequence

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import autodiff as ad
from .model import EncoderModel
from .scoring import second_pass_scores

LATENCY_SCHEMA = {
    "type": "object",
    "required": ["tool", "version", "batch_size", "threads", "iterations", "warmup", "results",
                 "backward_calls"],
    "properties": {
        "tool": {"const": "nbrescore"},
        "version": {"type": "string"},
        "batch_size": {"type": "integer", "minimum": 1},
        "threads": {"type": "integer", "minimum": 1},
        "iterations": {"type": "integer", "minimum": 100},
        "warmup": {"type": "integer", "minimum": 10},
        "backward_calls": {"const": 0},
        "baseline": {"type": ["string", "null"]},
        "results": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["label", "params", "batch_size", "seq_len", "threads", "mean_ms",
                             "p50_ms", "p95_ms", "iterations"],
                "properties": {
                    "label": {"type": "string"},
                    "params": {"type": "integer", "minimum": 1},
                    "batch_size": {"type": "integer", "minimum": 1},
                    "seq_len": {"type": "integer", "minimum": 1},
                    "threads": {"type": "integer", "minimum": 1},
                    "mean_ms": {"type": "number", "exclusiveMinimum": 0},
                    "p50_ms": {"type": "number", "exclusiveMinimum": 0},
                    "p95_ms": {"type": "number", "exclusiveMinimum": 0},
                    "iterations": {"type": "integer", "minimum": 100},
                    "relative": {"type": ["number", "null"]},
                },
            },
        },
    },
}


def validate_latency_report(report: dict) -> None:
    """Schema check plus the mean-within-sanity-band invariant."""
    jsonschema.validate(report, LATENCY_SCHEMA)
    for r in report["results"]:
        if not (r["p50_ms"] * 0.1 <= r["mean_ms"] <= r["p95_ms"] * 10):
            raise ValueError(f"{r['label']} SL={r['seq_len']}: mean {r['mean_ms']} outside sanity band")


def bench_latency(models: Sequence[tuple[str, EncoderModel]], batch_size: int = 5,
                  seq_lens: Sequence[int] = (16, 32), threads: int = 2, iterations: int = 100,
                  warmup: int = 10, baseline: str | None = None, seed: int = 0) -> dict:
    """Time ``second_pass_scores`` on synthetic batches for every (model, length).

    Timed calls are interleaved round-robin across configurations so slow
    drift of the machine affects all of them alike.
    """
    if iterations < 100 or warmup < 10:
        raise ValueError("need at least 100 timed and 10 warm-up iterations")
    if baseline is not None and baseline not in {label for label, _ in models}:
        raise ValueError(f"baseline {baseline!r} is not one of the benchmarked models")
    rng = np.random.default_rng(seed)
    configs = []
    for label, model in models:
        for sl in seq_lens:
            if sl + 2 > model.config.max_len:
                raise ValueError(
                    f"model {label!r} has max_len {model.config.max_len}; cannot score length {sl} (+2 framing)"
                )
            batch = [rng.integers(5, model.config.vocab_size, size=sl).tolist() for _ in range(batch_size)]
            configs.append((label, model, sl, batch))

    before = ad.backward_calls()
    timings = [[] for _ in configs]
    with threadpool_limits(limits=threads):
        for _ in range(warmup):
            for _, model, _, batch in configs:
                second_pass_scores(model, batch)
        for _ in range(iterations):
            for k, (_, model, _, batch) in enumerate(configs):
                t0 = time.perf_counter_ns()
                second_pass_scores(model, batch)
                timings[k].append((time.perf_counter_ns() - t0) / 1e6)

    results = []
    for (label, model, sl, _), ts in zip(configs, timings):
        ts = np.asarray(ts)
        results.append({
            "label": label,
            "params": model.num_parameters(),
            "batch_size": batch_size,
            "seq_len": int(sl),
            "threads": threads,
            "mean_ms": float(ts.mean()),
            "p50_ms": float(np.percentile(ts, 50)),
            "p95_ms": float(np.percentile(ts, 95)),
            "iterations": len(ts),
            "relative": None,
        })
    if baseline is not None:
        base = {r["seq_len"]: r["mean_ms"] for r in results if r["label"] == baseline}
        for r in results:
            r["relative"] = r["mean_ms"] / base[r["seq_len"]]
    return {
        "tool": "nbrescore",
        "version": __version__,
        "batch_size": batch_size,
        "threads": threads,
        "iterations": iterations,
        "warmup": warmup,
        "baseline": baseline,
        "backward_calls": ad.backward_calls() - before,
        "results": results,
    }
