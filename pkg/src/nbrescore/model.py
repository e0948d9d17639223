"""Toy bidirectional transformer encoder with an MLM head and a CLS score head."""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
RESERVED = (PAD, UNK, CLS, SEP, MASK)

CHECKPOINT_FORMAT = "nbrescore-checkpoint/1"


class Vocab:
    """Dense token <-> id bijection with the five reserved symbols at ids 0..4."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = list(RESERVED)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def cls_id(self) -> int:
        return 2

    @property
    def sep_id(self) -> int:
        return 3

    @property
    def mask_id(self) -> int:
        return 4

    @property
    def num_reserved(self) -> int:
        return len(RESERVED)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, 1) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, itos: Sequence[str]) -> "Vocab":
        if tuple(itos[: len(RESERVED)]) != RESERVED:
            raise ValueError(f"vocab must start with reserved tokens {RESERVED}")
        if len(set(itos)) != len(itos):
            raise ValueError("vocab contains duplicate tokens")
        return cls(itos[len(RESERVED):])


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    hidden: int = 32
    heads: int = 2
    ffn: int = 64
    max_len: int = 24
    vocab_size: int = 128
    seed: int = 0

    def validate(self) -> None:
        problems = []
        for name in ("layers", "hidden", "heads", "ffn", "vocab_size"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.heads >= 1 and self.hidden % self.heads:
            problems.append(f"hidden ({self.hidden}) must be divisible by heads ({self.heads})")
        if self.max_len < 3:
            problems.append(f"max_len ({self.max_len}) must be >= 3")
        if self.vocab_size <= len(RESERVED):
            problems.append(f"vocab_size ({self.vocab_size}) must exceed the {len(RESERVED)} reserved ids")
        if problems:
            raise ValueError("invalid ModelConfig: " + "; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown ModelConfig fields: {sorted(unknown)}")
        return cls(**d)


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Ordered parameter names and shapes for ``config``."""
    h, f, v = config.hidden, config.ffn, config.vocab_size
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (v, h),
        "pos_emb": (config.max_len, h),
    }
    for i in range(config.layers):
        p = f"layer{i}."
        shapes.update({
            p + "ln1.g": (h,), p + "ln1.b": (h,),
            p + "attn.wq": (h, h), p + "attn.bq": (h,),
            p + "attn.wk": (h, h), p + "attn.bk": (h,),
            p + "attn.wv": (h, h), p + "attn.bv": (h,),
            p + "attn.wo": (h, h), p + "attn.bo": (h,),
            p + "ln2.g": (h,), p + "ln2.b": (h,),
            p + "ffn.w1": (h, f), p + "ffn.b1": (f,),
            p + "ffn.w2": (f, h), p + "ffn.b2": (h,),
        })
    shapes.update({
        "final_ln.g": (h,), "final_ln.b": (h,),
        "mlm.w": (h, v), "mlm.b": (v,),
        "cls.w1": (h, h), "cls.b1": (h,),
        "cls.w2": (h, 1), "cls.b2": (1,),
    })
    return shapes


class EncoderModel:
    """Parameters plus the forward computations of the encoder.

    Token/position embeddings feed ``layers`` pre-norm transformer blocks and
    a final layer norm.  The MLM head projects hidden states onto the vocab;
    the score head reads the hidden state at the [CLS] position through one
    GELU layer down to a scalar.
    """

    def __init__(self, config: ModelConfig, params: dict[str, Tensor], vocab: Vocab | None = None):
        self.config = config
        self.params = params
        self.vocab = vocab
        self.forward_calls = 0

    # -- bookkeeping --------------------------------------------------------
    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name, p in self.params.items():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
        return digest.hexdigest()

    def copy(self) -> "EncoderModel":
        params = {k: Tensor(v.data.copy(), requires_grad=True) for k, v in self.params.items()}
        return EncoderModel(self.config, params, self.vocab)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    # -- forward ------------------------------------------------------------
    def frame(self, token_ids: Sequence[int]) -> list[int]:
        """Wrap raw ids as ``[CLS] ids [SEP]``."""
        return [2, *token_ids, 3]

    def _check_ids(self, ids: np.ndarray) -> None:
        if ids.shape[-1] > self.config.max_len:
            raise ValueError(
                f"sequence length {ids.shape[-1]} exceeds max_len {self.config.max_len}; truncate first"
            )
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise ValueError(f"token ids must lie in [0, {self.config.vocab_size})")

    def encode(self, ids, pad_mask=None) -> Tensor:
        """Hidden states for framed ids of shape (L,) or (B, L).

        ``pad_mask`` is True at real tokens and False at padding; padded keys are
        excluded from attention so real positions are unaffected by padding.
        """
        ids = np.asarray(ids, dtype=np.int64)
        single = ids.ndim == 1
        if single:
            ids = ids[None, :]
        self._check_ids(ids)
        if pad_mask is None:
            pad_mask = ids != 0
        pad_mask = np.asarray(pad_mask, dtype=bool).reshape(ids.shape)
        self.forward_calls += 1

        cfg, P = self.config, self.params
        B, L = ids.shape
        nh, dh = cfg.heads, cfg.hidden // cfg.heads
        x = ad.embedding(P["tok_emb"], ids) + P["pos_emb"][:L]
        key_bias = np.where(pad_mask, 0.0, -1e9)[:, None, None, :]
        scale = 1.0 / np.sqrt(dh)
        for i in range(cfg.layers):
            p = f"layer{i}."
            h = ad.layer_norm(x, P[p + "ln1.g"], P[p + "ln1.b"])
            q = (h @ P[p + "attn.wq"] + P[p + "attn.bq"]).reshape(B, L, nh, dh).transpose(0, 2, 1, 3)
            k = (h @ P[p + "attn.wk"] + P[p + "attn.bk"]).reshape(B, L, nh, dh).transpose(0, 2, 3, 1)
            v = (h @ P[p + "attn.wv"] + P[p + "attn.bv"]).reshape(B, L, nh, dh).transpose(0, 2, 1, 3)
            att = ad.softmax((q @ k) * scale + key_bias, axis=-1)
            ctx = (att @ v).transpose(0, 2, 1, 3).reshape(B, L, cfg.hidden)
            x = x + (ctx @ P[p + "attn.wo"] + P[p + "attn.bo"])
            h = ad.layer_norm(x, P[p + "ln2.g"], P[p + "ln2.b"])
            h = ad.gelu(h @ P[p + "ffn.w1"] + P[p + "ffn.b1"])
            x = x + (h @ P[p + "ffn.w2"] + P[p + "ffn.b2"])
        x = ad.layer_norm(x, P["final_ln.g"], P["final_ln.b"])
        return x[0] if single else x

    def mlm_logits(self, hidden: Tensor) -> Tensor:
        return hidden @ self.params["mlm.w"] + self.params["mlm.b"]

    def score_head(self, cls_hidden: Tensor) -> Tensor:
        P = self.params
        h = ad.gelu(cls_hidden @ P["cls.w1"] + P["cls.b1"])
        return (h @ P["cls.w2"] + P["cls.b2"]).reshape(cls_hidden.shape[:-1])

    def mlm_log_probs(self, ids, positions) -> Tensor:
        """Log-probability rows over the vocab at ``positions`` of framed ``ids``.

        Every queried position must hold [MASK]; ``ids`` is one framed sequence.
        """
        ids = np.asarray(ids, dtype=np.int64)
        positions = np.asarray(positions, dtype=np.int64).reshape(-1)
        if ids.ndim != 1:
            raise ValueError("mlm_log_probs takes a single framed sequence")
        bad = [int(p) for p in positions if not (0 <= p < len(ids)) or ids[p] != 4]
        if bad:
            raise ValueError(f"positions {bad} do not hold [MASK]")
        hidden = self.encode(ids)
        return ad.log_softmax(self.mlm_logits(hidden[positions]), axis=-1)

    def cls_scores(self, batch_ids, pad_mask=None) -> Tensor:
        """Second-pass scores for a padded (B, L) batch of framed ids."""
        hidden = self.encode(batch_ids, pad_mask)
        return self.score_head(hidden[:, 0, :])

    def cls_score(self, ids) -> Tensor:
        """Scalar score for one framed sequence (lower = more probable)."""
        hidden = self.encode(ids)
        return self.score_head(hidden[0:1, :]).reshape(())

    # -- persistence ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "config": self.config.to_dict(),
            "vocab": self.vocab.to_list() if self.vocab is not None else None,
            "params": {
                name: {
                    "shape": list(p.shape),
                    "dtype": "<f8",
                    "data": base64.b64encode(np.ascontiguousarray(p.data, dtype="<f8").tobytes()).decode("ascii"),
                }
                for name, p in self.params.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderModel":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"not a checkpoint (format={d.get('format')!r})")
        config = ModelConfig.from_dict(d["config"])
        expected = param_shapes(config)
        params = {}
        for name, shape in expected.items():
            entry = d["params"].get(name)
            if entry is None:
                raise ValueError(f"checkpoint is missing parameter {name}")
            arr = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f8").reshape(entry["shape"])
            if arr.shape != shape:
                raise ValueError(f"parameter {name} has shape {arr.shape}, expected {shape}")
            params[name] = Tensor(arr.astype(np.float64), requires_grad=True)
        vocab = Vocab.from_list(d["vocab"]) if d.get("vocab") else None
        return cls(config, params, vocab)

    def save(self, path, extra: dict | None = None) -> None:
        from .io import atomic_write_text

        payload = self.to_dict()
        if extra:
            payload["meta"] = extra
        atomic_write_text(path, json.dumps(payload))

    @classmethod
    def load(cls, path) -> "EncoderModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def init_model(config: ModelConfig, vocab: Vocab | None = None) -> EncoderModel:
    """Seeded N(0, 0.02) weights, zero biases, unit layer-norm gains."""
    config.validate()
    if vocab is not None and len(vocab) != config.vocab_size:
        raise ValueError(f"vocab has {len(vocab)} tokens but vocab_size is {config.vocab_size}")
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            data = np.ones(shape)
        elif leaf.startswith("b"):
            data = np.zeros(shape)
        else:
            data = rng.normal(0.0, 0.02, size=shape)
        params[name] = Tensor(data, requires_grad=True)
    return EncoderModel(config, params, vocab)


def pad_batch(sequences: Sequence[Sequence[int]], pad_id: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad framed id sequences into ``(ids, pad_mask)`` arrays."""
    width = max(len(s) for s in sequences)
    ids = np.full((len(sequences), width), pad_id, dtype=np.int64)
    mask = np.zeros((len(sequences), width), dtype=bool)
    for i, s in enumerate(sequences):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask
