"""Training objectives over n-best lists.

Every loss accepts either plain floats/arrays or autodiff tensors for the
scores; the word-error counts are always constants.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

DEFAULT_LAMBDA = 1e-4
T_FLOOR = 1e-2


class DegenerateListError(ValueError):
    """The n-best list carries no contrast for a discriminative loss."""


def _scores_tensor(scores) -> Tensor:
    if isinstance(scores, Tensor):
        return scores.reshape(-1)
    return Tensor(np.asarray(scores, dtype=np.float64).reshape(-1))


def _errors_array(errors, n: int) -> np.ndarray:
    eps = np.asarray(errors, dtype=np.float64).reshape(-1)
    if eps.shape[0] != n:
        raise ValueError(f"{n} scores but {eps.shape[0]} error counts")
    if not np.all(np.isfinite(eps)) or np.any(eps < 0):
        raise ValueError("word errors must be finite and non-negative")
    return eps


def md_loss(second_pass, pll_target) -> Tensor:
    """Squared error between the CLS score and its PLL target."""
    s = second_pass if isinstance(second_pass, Tensor) else Tensor(second_pass)
    target = np.asarray(pll_target, dtype=np.float64)
    if not (np.all(np.isfinite(s.data)) and np.all(np.isfinite(target))):
        raise ValueError("md_loss needs finite inputs")
    return ad.squared_error(s, target)


def mwer_loss(scores, errors) -> Tensor:
    """Expected relative word errors under the posterior softmax(-s)."""
    s = _scores_tensor(scores)
    n = s.shape[0]
    if n < 2:
        raise DegenerateListError(f"MWER needs at least 2 hypotheses, got {n}")
    if not np.all(np.isfinite(s.data)):
        raise ValueError("scores must be finite")
    eps = _errors_array(errors, n)
    posterior = ad.softmax(-s, axis=-1)
    return ad.sum(posterior * (eps - eps.mean()))


def mwed_temperature(scores, errors) -> float | None:
    """Sum of scores over sum of errors; None means skip this list for MWED.

    Magnitudes below ``T_FLOOR`` are pushed out to ``±T_FLOOR`` (sign kept,
    a zero sum counts as positive).
    """
    s = np.asarray(scores.data if isinstance(scores, Tensor) else scores, dtype=np.float64).reshape(-1)
    eps = _errors_array(errors, s.shape[0])
    total_errors = eps.sum()
    if total_errors == 0:
        return None
    t = s.sum() / total_errors
    if abs(t) < T_FLOOR:
        t = math.copysign(T_FLOOR, t) if t != 0 else T_FLOOR
    return float(t)


def error_distribution(errors) -> np.ndarray:
    eps = np.asarray(errors, dtype=np.float64)
    z = np.exp(eps - eps.max())
    return z / z.sum()


def mwed_loss(scores, errors, temperature: float) -> Tensor:
    """Cross-entropy from softmax(s / T) to softmax(errors)."""
    if temperature == 0 or not math.isfinite(temperature):
        raise ValueError(f"MWED temperature must be finite and non-zero, got {temperature}")
    s = _scores_tensor(scores)
    n = s.shape[0]
    if n < 2:
        raise DegenerateListError(f"MWED needs at least 2 hypotheses, got {n}")
    eps = _errors_array(errors, n)
    target = error_distribution(eps)
    return -ad.sum(target * ad.log_softmax(s / temperature, axis=-1))


def entropy(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def fused_loss(discriminative, md_terms: Sequence, lam: float = DEFAULT_LAMBDA) -> Tensor:
    """``discriminative + lam * sum(md_terms)``."""
    if lam < 0 or not math.isfinite(lam):
        raise ValueError(f"lambda must be finite and >= 0, got {lam}")
    disc = discriminative if isinstance(discriminative, Tensor) else Tensor(discriminative)
    if not md_terms:
        return disc
    md_sum = ad.sum(ad.stack([m.reshape(()) if isinstance(m, Tensor) else Tensor(m) for m in md_terms]))
    return disc + lam * md_sum


@dataclass
class LossReport:
    discriminative: float = 0.0
    md_sum: float = 0.0
    total: float = 0.0
    lam: float = 0.0
    temperature: float | None = None
    objective: str = ""
    terms: dict = field(default_factory=dict)

    def check(self, tol: float = 1e-12) -> None:
        expected = self.discriminative + self.lam * self.md_sum
        if abs(self.total - expected) > tol * max(1.0, abs(expected)):
            raise AssertionError(f"fused total {self.total} != {expected}")

    def to_dict(self) -> dict:
        return asdict(self)
