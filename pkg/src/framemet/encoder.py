"""Small pre-norm transformer encoder over a word-level vocabulary.

The input embedding is the sum of word, learned position, and binary target
type embeddings; a stack of multi-head self-attention blocks with GELU
feedforwards follows, closed by a final layer norm. The CLS position (index 0)
serves as the whole-sentence representation and the marked target position as
the contextual target representation. A second entry point encodes the bare
target word alone to obtain its isolated (context-free) representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError, UsageError

LN_EPS = 1e-5
ATTN_MASK_FILL = -1e9
INIT_STD = 0.02


@dataclass
class EncoderConfig:
    vocab_size: int
    hidden_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    max_seq_len: int = 64
    ffn_dim: int | None = None

    def __post_init__(self):
        if self.ffn_dim is None:
            self.ffn_dim = 4 * self.hidden_dim
        for name in ("vocab_size", "hidden_dim", "num_layers", "num_heads",
                     "max_seq_len", "ffn_dim"):
            if getattr(self, name) <= 0:
                raise UsageError(f"EncoderConfig.{name} must be positive")
        if self.hidden_dim % self.num_heads:
            raise UsageError(
                f"hidden_dim {self.hidden_dim} not divisible by "
                f"num_heads {self.num_heads}"
            )

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "hidden_dim": self.hidden_dim,
            "num_layers": self.num_layers,
            "num_heads": self.num_heads,
            "max_seq_len": self.max_seq_len,
            "ffn_dim": self.ffn_dim,
        }


@dataclass
class TokenBatch:
    """Padded id matrix plus the per-token annotations the encoder consumes.

    ``type_ids`` holds 1 exactly on the (single, contiguous) target span of
    each row and 0 elsewhere; ``mask`` holds 1 on real tokens and 0 on
    padding; position 0 is always the CLS token. ``target_index`` caches the
    column of each row's target.
    """

    token_ids: np.ndarray
    type_ids: np.ndarray
    mask: np.ndarray
    target_index: np.ndarray

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.int64)
        self.type_ids = np.asarray(self.type_ids, dtype=np.int64)
        self.mask = np.asarray(self.mask, dtype=np.int64)
        self.target_index = np.asarray(self.target_index, dtype=np.int64)
        if not (self.token_ids.shape == self.type_ids.shape == self.mask.shape):
            raise ShapeError("token_ids, type_ids, and mask must share a shape")
        b, s = self.token_ids.shape
        if self.target_index.shape != (b,):
            raise ShapeError(f"target_index must have shape ({b},)")
        for r in range(b):
            cols = np.flatnonzero(self.type_ids[r])
            if cols.size == 0 or np.any(np.diff(cols) != 1):
                raise UsageError(f"row {r} lacks a single contiguous target span")
            if self.target_index[r] != cols[0]:
                raise UsageError(f"row {r}: target_index disagrees with type ids")
            if self.target_index[r] == 0:
                raise UsageError(f"row {r}: position 0 is reserved for CLS")

    @property
    def batch_size(self) -> int:
        return self.token_ids.shape[0]

    @property
    def seq_len(self) -> int:
        return self.token_ids.shape[1]


@dataclass
class EncoderOutput:
    """Hidden states plus the CLS and target rows (graph-connected views)."""

    hidden: Tensor            # [batch, seq, d]
    target_index: np.ndarray
    cls: Tensor = field(init=False)      # hidden[:, 0, :]
    target: Tensor = field(init=False)   # hidden[b, target_index[b], :]

    def __post_init__(self):
        b = self.hidden.shape[0]
        self.cls = ad.gather_rows(self.hidden, np.zeros(b, dtype=np.int64))
        self.target = ad.gather_rows(self.hidden, self.target_index)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    return ad.layer_norm(x, gain, bias, eps=LN_EPS)


class TransformerEncoder:
    """Stack of pre-norm self-attention blocks over summed embeddings.

    Parameters are registered under hierarchical names (``emb.word``,
    ``layer0.attn.wq``, ...). Construction consumes the given RNG; forward
    passes never mutate parameters.
    """

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        self.config = config
        d, f = config.hidden_dim, config.ffn_dim
        self.params: dict[str, Tensor] = {}

        def weight(name, shape):
            self.params[name] = Tensor(
                rng.normal(0.0, INIT_STD, size=shape), requires_grad=True
            )

        def zeros(name, shape):
            self.params[name] = Tensor(np.zeros(shape), requires_grad=True)

        def ones(name, shape):
            self.params[name] = Tensor(np.ones(shape), requires_grad=True)

        weight("emb.word", (config.vocab_size, d))
        weight("emb.pos", (config.max_seq_len, d))
        weight("emb.type", (2, d))
        for i in range(config.num_layers):
            p = f"layer{i}."
            ones(p + "ln1.gain", (d,))
            zeros(p + "ln1.bias", (d,))
            for mat in ("wq", "wk", "wv", "wo"):
                weight(p + "attn." + mat, (d, d))
                zeros(p + "attn.b" + mat[1], (d,))
            ones(p + "ln2.gain", (d,))
            zeros(p + "ln2.bias", (d,))
            weight(p + "ffn.w1", (d, f))
            zeros(p + "ffn.b1", (f,))
            weight(p + "ffn.w2", (f, d))
            zeros(p + "ffn.b2", (d,))
        ones("final_ln.gain", (d,))
        zeros("final_ln.bias", (d,))

    def embed(self, batch: TokenBatch) -> Tensor:
        """Sum of word, position, and target-type lookups: [batch, seq, d]."""
        s = batch.seq_len
        if s > self.config.max_seq_len:
            raise ShapeError(
                f"sequence length {s} exceeds max_seq_len {self.config.max_seq_len}"
            )
        word = ad.embedding(self.params["emb.word"], batch.token_ids)
        pos = ad.embedding(self.params["emb.pos"],
                           np.arange(s, dtype=np.int64)[None, :])
        typ = ad.embedding(self.params["emb.type"], batch.type_ids)
        return word + pos + typ

    def encode(self, batch: TokenBatch) -> EncoderOutput:
        x = self.embed(batch)
        b, s = batch.batch_size, batch.seq_len
        h = self.config.num_heads
        dh = self.config.hidden_dim // h
        # additive key mask: padded positions receive -1e9 before softmax and
        # therefore exactly zero attention weight in float64
        key_mask = Tensor((1.0 - batch.mask)[:, None, None, :] * ATTN_MASK_FILL)

        for i in range(self.config.num_layers):
            p = self.params
            pre = f"layer{i}."
            a = layer_norm(x, p[pre + "ln1.gain"], p[pre + "ln1.bias"])

            def heads(t: Tensor) -> Tensor:
                return ad.transpose(ad.reshape(t, (b, s, h, dh)), (0, 2, 1, 3))

            q = heads(a @ p[pre + "attn.wq"] + p[pre + "attn.bq"])
            k = heads(a @ p[pre + "attn.wk"] + p[pre + "attn.bk"])
            v = heads(a @ p[pre + "attn.wv"] + p[pre + "attn.bv"])
            scores = (q @ ad.transpose(k, (0, 1, 3, 2))) * (dh**-0.5) + key_mask
            weights = ad.softmax(scores, axis=-1)
            ctx = ad.reshape(ad.transpose(weights @ v, (0, 2, 1, 3)), (b, s, -1))
            x = x + (ctx @ p[pre + "attn.wo"] + p[pre + "attn.bo"])

            f = layer_norm(x, p[pre + "ln2.gain"], p[pre + "ln2.bias"])
            f = ad.gelu(f @ p[pre + "ffn.w1"] + p[pre + "ffn.b1"])
            x = x + (f @ p[pre + "ffn.w2"] + p[pre + "ffn.b2"])

        hidden = layer_norm(x, self.params["final_ln.gain"],
                            self.params["final_ln.bias"])
        return EncoderOutput(hidden=hidden, target_index=batch.target_index)

    def encode_isolated(self, batch: TokenBatch) -> Tensor:
        """Hidden state of the bare target word: [batch, d].

        The batch must contain nothing but CLS plus the target span; any
        other real token would contaminate the context-free representation.
        """
        context = (batch.mask == 1) & (batch.type_ids == 0)
        context[:, 0] = False  # CLS is allowed
        if np.any(context):
            rows = np.flatnonzero(context.any(axis=1))
            raise UsageError(
                f"isolated pass received context words in rows {rows.tolist()}"
            )
        return self.encode(batch).target
