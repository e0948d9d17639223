"""N-best records, edit distance, error rates and the synthetic corpus generator."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .io import read_jsonl, write_jsonl


# ---------------------------------------------------------------------------
# records

@dataclass
class Hypothesis:
    tokens: list[str]
    score: float


@dataclass
class NBestRecord:
    id: str
    ref: list[str]
    hyps: list[Hypothesis]
    eps: list[int] | None = None
    # generator bookkeeping, never serialised: (sub, ins, del) per hypothesis
    channel_ops: list[tuple[int, int, int]] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.hyps:
            raise ValueError(f"record {self.id!r} has no hypotheses")
        for h in self.hyps:
            if not math.isfinite(h.score):
                raise ValueError(f"record {self.id!r} has a non-finite first-pass score")
        if self.eps is not None and len(self.eps) != len(self.hyps):
            raise ValueError(f"record {self.id!r}: {len(self.eps)} eps for {len(self.hyps)} hypotheses")

    @property
    def n(self) -> int:
        return len(self.hyps)

    @property
    def first_pass_scores(self) -> np.ndarray:
        return np.array([h.score for h in self.hyps], dtype=np.float64)

    def to_json(self) -> dict:
        d = {"id": self.id, "ref": list(self.ref),
             "hyps": [{"tokens": list(h.tokens), "score": h.score} for h in self.hyps]}
        if self.eps is not None:
            d["eps"] = list(self.eps)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "NBestRecord":
        try:
            hyps = [Hypothesis([str(t) for t in h["tokens"]], float(h["score"])) for h in d["hyps"]]
            eps = [int(e) for e in d["eps"]] if d.get("eps") is not None else None
            return cls(str(d["id"]), [str(t) for t in d["ref"]], hyps, eps)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed n-best record: {exc}") from None


@dataclass
class Corpus:
    records: list[NBestRecord]
    split: str = "train"

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.id in seen:
                raise ValueError(f"duplicate utterance id {r.id!r} in {self.split} split")
            seen.add(r.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def annotated(self) -> bool:
        return all(r.eps is not None for r in self.records)

    def save(self, path) -> None:
        write_jsonl(path, (r.to_json() for r in self.records))

    @classmethod
    def load(cls, path, split: str = "train") -> "Corpus":
        return cls([NBestRecord.from_json(d) for d in read_jsonl(path)], split)


def save_texts(path, texts: Iterable[Sequence[str]]) -> None:
    write_jsonl(path, ({"tokens": list(t)} for t in texts))


def load_texts(path) -> list[list[str]]:
    return [[str(t) for t in d["tokens"]] for d in read_jsonl(path)]


# ---------------------------------------------------------------------------
# edit distance and error rates

def edit_distance(reference: Sequence, hypothesis: Sequence) -> int:
    """Levenshtein distance with unit substitution/insertion/deletion costs."""
    ref, hyp = list(reference), list(hypothesis)
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, 1):
        cur = [i] + [0] * len(hyp)
        for j, h in enumerate(hyp, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h))
        prev = cur
    return prev[-1]


def align(reference: Sequence, hypothesis: Sequence) -> dict:
    """Minimum-edit alignment counts: substitutions, insertions, deletions."""
    ref, hyp = list(reference), list(hypothesis)
    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i, j] = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]))
    i, j, sub, ins, dele = n, m, 0, 0, 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            sub += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            dele += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return {"sub": int(sub), "ins": int(ins), "del": int(dele), "errors": int(d[n, m])}


def annotate_errors(record: NBestRecord) -> NBestRecord:
    record.eps = [edit_distance(record.ref, h.tokens) for h in record.hyps]
    return record


def annotate_corpus(corpus: Corpus) -> Corpus:
    for r in corpus.records:
        annotate_errors(r)
    return corpus


def _to_chars(tokens: Sequence[str]) -> list[str]:
    return list("".join(tokens))


def error_rate(pairs: Iterable[tuple[Sequence, Sequence]]) -> float:
    edits = length = 0
    for ref, hyp in pairs:
        edits += edit_distance(ref, hyp)
        length += len(ref)
    if length == 0:
        raise ValueError("total reference length is zero")
    return edits / length


def wer(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> float:
    """Total word edits over total reference words for (ref, hyp) pairs."""
    return error_rate(pairs)


def cer(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> float:
    """Character error rate; tokens are concatenated without separators."""
    return error_rate((_to_chars(r), _to_chars(h)) for r, h in pairs)


# ---------------------------------------------------------------------------
# synthetic grammar + noisy channel

GRAMMAR: dict[str, list[tuple[float, list[str]]]] = {
    "S": [
        (3.0, ["play", "<song>", "by", "<artist>"]),
        (3.0, ["play", "some", "<genre>", "music"]),
        (2.0, ["play", "<genre>", "music", "in", "the", "<room>"]),
        (3.0, ["what", "is", "the", "weather", "in", "<city>", "<time>"]),
        (2.0, ["what", "time", "is", "it", "in", "<city>"]),
        (2.0, ["set", "a", "timer", "for", "<number>", "minutes"]),
        (2.0, ["set", "an", "alarm", "for", "<number>", "<ampm>", "<time>"]),
        (2.0, ["call", "<name>", "on", "<device>"]),
        (2.0, ["add", "<item>", "to", "my", "shopping", "list"]),
        (2.0, ["turn", "<onoff>", "the", "<room>", "lights"]),
        (1.5, ["remind", "me", "to", "<task>", "<time>"]),
        (1.5, ["how", "tall", "is", "the", "<landmark>"]),
        (1.5, ["navigate", "to", "the", "nearest", "<place>"]),
        (1.0, ["send", "a", "message", "to", "<name>", "saying", "<phrase>"]),
    ],
    "<song>": [(1.0, ["yellow", "submarine"]), (1.0, ["blue", "moon"]), (1.0, ["hey", "jude"]),
               (1.0, ["purple", "rain"]), (1.0, ["let", "it", "be"]), (1.0, ["summer", "wine"])],
    "<artist>": [(1.0, [w]) for w in ("adele", "madonna", "queen", "prince", "shakira", "eminem", "drake", "beyonce")],
    "<genre>": [(1.0, [w]) for w in ("jazz", "rock", "classical", "country", "blues", "reggae", "pop", "folk")],
    "<room>": [(1.0, [w]) for w in ("kitchen", "bedroom", "garage", "office", "hallway")] + [(1.0, ["living", "room"])],
    "<city>": [(1.0, [w]) for w in ("paris", "boston", "tokyo", "seattle", "london", "berlin", "madrid", "denver")],
    "<time>": [(1.0, [w]) for w in ("today", "tomorrow", "tonight")] + [(1.0, ["this", "weekend"]), (1.0, ["next", "week"])],
    "<number>": [(1.0, [w]) for w in ("five", "ten", "fifteen", "twenty", "thirty", "seven", "eight", "nine")],
    "<ampm>": [(1.0, ["a.m."]), (1.0, ["p.m."])],
    "<name>": [(1.0, [w]) for w in ("mom", "dad", "alice", "bob", "carol", "dave", "emma", "frank")],
    "<device>": [(1.0, [w]) for w in ("mobile", "speaker", "tablet")],
    "<item>": [(1.0, [w]) for w in ("milk", "eggs", "bread", "butter", "apples", "coffee", "rice", "cheese")],
    "<onoff>": [(1.0, ["on"]), (1.0, ["off"])],
    "<task>": [(1.0, ["water", "the", "plants"]), (1.0, ["buy", "milk"]), (1.0, ["call", "mom"]),
               (1.0, ["pay", "the", "bills"]), (1.0, ["walk", "the", "dog"])],
    "<landmark>": [(1.0, ["eiffel", "tower"]), (1.0, ["empire", "state", "building"]), (1.0, ["space", "needle"])],
    "<place>": [(1.0, [w]) for w in ("pharmacy", "hospital", "airport", "restaurant", "station", "bank")],
    "<phrase>": [(1.0, ["i", "am", "late"]), (1.0, ["see", "you", "soon"]), (1.0, ["call", "me", "back"]),
                 (1.0, ["on", "my", "way"])],
}

INSERTION_WORDS = ("the", "a", "to", "uh", "and", "in", "of", "um")


def grammar_words(grammar: dict = GRAMMAR) -> list[str]:
    """Terminal words of ``grammar`` in first-appearance order."""
    words: dict[str, None] = {}
    for expansions in grammar.values():
        for _, rhs in expansions:
            for sym in rhs:
                if not sym.startswith("<"):
                    words.setdefault(sym, None)
    for w in INSERTION_WORDS:
        words.setdefault(w, None)
    return list(words)


def sample_sentence(rng: np.random.Generator, grammar: dict = GRAMMAR, symbol: str = "S") -> list[str]:
    expansions = grammar[symbol]
    weights = np.array([w for w, _ in expansions])
    _, rhs = expansions[rng.choice(len(expansions), p=weights / weights.sum())]
    out: list[str] = []
    for sym in rhs:
        out.extend(sample_sentence(rng, grammar, sym) if sym.startswith("<") else [sym])
    return out


def sample_texts(count: int, seed: int, grammar: dict = GRAMMAR) -> list[list[str]]:
    rng = np.random.default_rng(seed)
    return [sample_sentence(rng, grammar) for _ in range(count)]


@dataclass
class GeneratorConfig:
    utterances: int = 100
    n: int = 5
    p_sub: float = 0.15
    p_ins: float = 0.03
    p_del: float = 0.04
    p_ref: float = 0.2
    score_noise: float = 3.0
    confusions: int = 3
    in_class: int = 2
    id_prefix: str = "utt"

    def validate(self) -> None:
        for name in ("p_sub", "p_ins", "p_del", "p_ref"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.p_sub + self.p_del >= 1.0:
            raise ValueError("p_sub + p_del must be < 1")
        if self.p_ins >= 1.0:
            raise ValueError("p_ins must be < 1")
        if self.utterances < 1 or self.n < 1:
            raise ValueError("utterances and n must be >= 1")
        if self.score_noise < 0:
            raise ValueError("score_noise must be >= 0")
        if self.confusions < 1:
            raise ValueError("confusions must be >= 1")
        if not 0 <= self.in_class <= self.confusions:
            raise ValueError("in_class must lie in [0, confusions]")

    def to_dict(self) -> dict:
        return asdict(self)


def slot_classes(grammar: dict = GRAMMAR) -> dict[str, list[str]]:
    """Single-word fillers of each slot, e.g. every ``<genre>`` word."""
    classes = {}
    for sym, expansions in grammar.items():
        if sym == "S":
            continue
        singles = [rhs[0] for _, rhs in expansions if len(rhs) == 1]
        if len(singles) >= 2:
            classes[sym] = singles
    return classes


class NoisyChannel:
    """Word-level corruption channel with per-word confusion sets.

    Slot fillers are confused partly with other fillers of the same slot
    (``in_class`` of them), which keeps the corrupted sentence grammatical;
    remaining partners are drawn from the whole vocabulary.
    """

    def __init__(self, config: GeneratorConfig, words: Sequence[str], rng: np.random.Generator,
                 classes: dict[str, list[str]] | None = None):
        self.config = config
        self.words = list(words)
        member_of = {w: ws for ws in (classes or {}).values() for w in ws}
        self.confusions = {}
        for w in self.words:
            partners: list[str] = []
            peers = [x for x in member_of.get(w, ()) if x != w]
            if peers and config.in_class:
                picks = rng.choice(len(peers), size=min(config.in_class, len(peers)), replace=False)
                partners = [peers[i] for i in sorted(picks)]
            others = [x for x in self.words if x != w and x not in partners]
            k = max(config.confusions - len(partners), 0)
            picks = rng.choice(len(others), size=min(k, len(others)), replace=False)
            self.confusions[w] = partners + [others[i] for i in sorted(picks)]

    def corrupt(self, ref: Sequence[str], rng: np.random.Generator) -> tuple[list[str], float, tuple[int, int, int]]:
        """Sample a corrupted copy; returns (tokens, channel NLL, (sub, ins, del))."""
        c = self.config
        keep_p = 1.0 - c.p_sub - c.p_del
        out: list[str] = []
        nll = 0.0
        sub = ins = dele = 0

        def maybe_insert():
            nonlocal nll, ins
            if rng.random() < c.p_ins:
                out.append(INSERTION_WORDS[rng.integers(len(INSERTION_WORDS))])
                nll -= math.log(c.p_ins / len(INSERTION_WORDS))
                ins += 1
            elif c.p_ins > 0:
                nll -= math.log(1.0 - c.p_ins)

        maybe_insert()
        for w in ref:
            u = rng.random()
            if u < c.p_sub:
                choices = self.confusions.get(w) or self.words
                out.append(choices[rng.integers(len(choices))])
                nll -= math.log(c.p_sub / len(choices))
                sub += 1
            elif u < c.p_sub + c.p_del:
                nll -= math.log(c.p_del)
                dele += 1
            else:
                out.append(w)
                nll -= math.log(keep_p)
            maybe_insert()
        return out, nll, (sub, ins, dele)

    def clean_nll(self, ref: Sequence[str]) -> float:
        c = self.config
        nll = -len(ref) * math.log(1.0 - c.p_sub - c.p_del)
        if c.p_ins > 0:
            nll -= (len(ref) + 1) * math.log(1.0 - c.p_ins)
        return nll


def generate_synthetic_nbest(config: GeneratorConfig, seed: int, grammar: dict = GRAMMAR,
                             split: str = "train") -> Corpus:
    """Sample references from ``grammar`` and n-best lists from the noisy channel.

    First-pass scores are the channel negative log-likelihood plus Gaussian
    noise; each list is sorted by that score, as a decoder would emit it.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    channel = NoisyChannel(config, grammar_words(grammar), rng, slot_classes(grammar))
    records = []
    for u in range(config.utterances):
        ref = sample_sentence(rng, grammar)
        seen: set[tuple[str, ...]] = set()
        cands: list[tuple[list[str], float, tuple[int, int, int]]] = []
        if rng.random() < config.p_ref:
            cands.append((list(ref), channel.clean_nll(ref), (0, 0, 0)))
            seen.add(tuple(ref))
        attempts = 0
        while len(cands) < config.n and attempts < 50 * config.n:
            attempts += 1
            toks, nll, ops = channel.corrupt(ref, rng)
            key = tuple(toks)
            if config.n > 1 and (key in seen or not toks):
                continue
            seen.add(key)
            cands.append((toks, nll, ops))
        noise = rng.normal(0.0, config.score_noise, size=len(cands))
        scored = [(nll + z, toks, ops) for (toks, nll, ops), z in zip(cands, noise)]
        scored.sort(key=lambda x: x[0])
        rec = NBestRecord(
            id=f"{config.id_prefix}{u:06d}",
            ref=list(ref),
            hyps=[Hypothesis(t, float(s)) for s, t, _ in scored],
            channel_ops=[ops for _, _, ops in scored],
        )
        records.append(rec)
    return Corpus(records, split)
