"""Figures written next to the JSON reports."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import atomic_write_bytes  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
    # fixed metadata keeps repeated renders byte-identical
    "svg.hashsalt": "nbrescore",
}


def _save(fig, path) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format=Path(path).suffix.lstrip(".") or "png", bbox_inches="tight",
                metadata={"Software": None} if str(path).endswith(".png") else None)
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def plot_beta_curve(curve: Sequence[Sequence[float]], best_beta: float, path, title: str = "") -> None:
    """Dev WER against interpolation weight, best point marked."""
    betas = [c[0] for c in curve]
    wers = [100.0 * c[1] for c in curve]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(betas, wers, color="tab:blue", lw=1.5)
        best = min(curve, key=lambda c: abs(c[0] - best_beta))
        ax.plot([best[0]], [100.0 * best[1]], "o", color="tab:red", label=f"beta = {best_beta:g}")
        if betas and betas[0] == 0:
            ax.axhline(wers[0], color="0.5", ls="--", lw=0.8, label="first pass")
        ax.set_xlabel("interpolation weight beta")
        ax.set_ylabel("WER (%)")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        _save(fig, path)


def plot_eval_summary(report: dict, path) -> None:
    """First-pass, rescored and oracle WER side by side."""
    labels = ["first pass", f"rescored (beta={report['beta']:g})", "oracle"]
    values = [100.0 * report["first_pass_wer"], 100.0 * report["wer"], 100.0 * report["oracle_wer"]]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        bars = ax.bar(labels, values, color=["0.6", "tab:blue", "tab:green"])
        for b, v in zip(bars, values):
            ax.annotate(f"{v:.2f}", (b.get_x() + b.get_width() / 2, v), ha="center", va="bottom")
        ax.set_ylabel("WER (%)")
        _save(fig, path)


def plot_latency(report: dict, path) -> None:
    """Mean batch latency per model, grouped by sequence length, p95 as error bar."""
    rows = report["results"]
    labels = list(dict.fromkeys(r["label"] for r in rows))
    lengths = sorted({r["seq_len"] for r in rows})
    width = 0.8 / max(len(labels), 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for k, label in enumerate(labels):
            xs, ys, errs = [], [], []
            for i, sl in enumerate(lengths):
                match = [r for r in rows if r["label"] == label and r["seq_len"] == sl]
                if match:
                    xs.append(i + k * width)
                    ys.append(match[0]["mean_ms"])
                    errs.append(max(match[0]["p95_ms"] - match[0]["mean_ms"], 0.0))
            ax.bar(xs, ys, width, yerr=[[0] * len(errs), errs], label=label, capsize=2)
        ax.set_xticks([i + width * (len(labels) - 1) / 2 for i in range(len(lengths))])
        ax.set_xticklabels([f"SL={sl}" for sl in lengths])
        ax.set_ylabel(f"ms / batch of {rows[0]['batch_size']}" if rows else "ms / batch")
        ax.legend(frameon=False)
        _save(fig, path)
