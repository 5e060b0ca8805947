"""Frame classification on top of an encoder: the concept side of the model.

A dedicated encoder is fine-tuned to predict semantic frames: a sigmoid
multi-label head over the CLS state scores every frame the sentence evokes,
and a softmax head over the target state picks the target word's frame. The
joint pretraining loss is ``lambda * cls_loss + target_loss``. After
pretraining, the encoder's hidden states act as frame embeddings for the
metaphor head, and the softmax head doubles as the top-k frame probe used by
the concept analysis report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import LOG_EPS, Tensor
from .encoder import INIT_STD, EncoderConfig, TokenBatch, TransformerEncoder
from .errors import DomainError, ShapeError, UsageError


class FrameInventory:
    """Ordered frame names with a dense name<->index bijection."""

    def __init__(self, names: list[str]):
        if len(set(names)) != len(names):
            raise UsageError("frame names must be unique")
        self.names = list(names)
        self.index = {name: i for i, name in enumerate(self.names)}

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, FrameInventory) and self.names == other.names

    def multi_hot(self, frames) -> np.ndarray:
        row = np.zeros(len(self.names))
        for name in frames:
            row[self.index[name]] = 1.0
        return row


class FrameHeads:
    """Sentence-level sigmoid head and target-level softmax head.

    Both map the encoder dimension ``d`` to the ``n_frames`` frame scores;
    weights are stored input-first so a batch applies as ``h @ W + b``.
    """

    def __init__(self, d: int, n_frames: int, rng: np.random.Generator):
        self.d = d
        self.n_frames = n_frames
        self.params = {
            "cls.weight": Tensor(rng.normal(0.0, INIT_STD, (d, n_frames)),
                                 requires_grad=True),
            "cls.bias": Tensor(np.zeros(n_frames), requires_grad=True),
            "target.weight": Tensor(rng.normal(0.0, INIT_STD, (d, n_frames)),
                                    requires_grad=True),
            "target.bias": Tensor(np.zeros(n_frames), requires_grad=True),
        }


def frame_logits_cls(h_cls: Tensor, heads: FrameHeads) -> Tensor:
    """Independent per-frame probabilities for the whole sentence: [batch, L]."""
    if h_cls.shape[-1] != heads.d:
        raise ShapeError(
            f"sentence state dim {h_cls.shape[-1]} does not match head dim {heads.d}"
        )
    return ad.sigmoid(h_cls @ heads.params["cls.weight"] + heads.params["cls.bias"])


def frame_logits_target(h_t: Tensor, heads: FrameHeads) -> Tensor:
    """Softmax distribution over frames for each target state: [batch, L]."""
    if h_t.shape[-1] != heads.d:
        raise ShapeError(
            f"target state dim {h_t.shape[-1]} does not match head dim {heads.d}"
        )
    return ad.softmax(h_t @ heads.params["target.weight"]
                      + heads.params["target.bias"], axis=-1)


def frame_loss(
    pred_target: Tensor,
    gold_target_index: np.ndarray,
    pred_cls: Tensor,
    gold_frame_rows: np.ndarray,
    lam: float,
) -> Tensor:
    """Joint pretraining objective: lam * cls_loss + target_loss.

    The target term is categorical cross entropy averaged over the batch;
    the sentence term is binary cross entropy summed over every frame class
    and averaged over the batch. Logs are clamped at 1e-7.
    """
    if lam < 0:
        raise DomainError(f"loss weight lambda must be >= 0, got {lam}")
    n, n_frames = pred_target.shape
    gold_target_index = np.asarray(gold_target_index)
    if gold_target_index.size and (
        gold_target_index.min() < 0 or gold_target_index.max() >= n_frames
    ):
        raise DomainError(f"gold frame index out of range [0, {n_frames})")
    gold_frame_rows = np.asarray(gold_frame_rows, dtype=np.float64)
    if not np.all((gold_frame_rows == 0.0) | (gold_frame_rows == 1.0)):
        raise DomainError("gold frame rows must be multi-hot (0/1)")

    picked = ad.gather_rows(pred_target, gold_target_index)
    target_loss = ad.tmean(-ad.tlog(ad.clamp(picked, LOG_EPS, 1.0 - LOG_EPS)))

    p = ad.clamp(pred_cls, LOG_EPS, 1.0 - LOG_EPS)
    y = Tensor(gold_frame_rows)
    per_label = -(y * ad.tlog(p) + (1.0 - y) * ad.tlog(1.0 - p))
    cls_loss = ad.tmean(ad.tsum(per_label, axis=1))

    return cls_loss * lam + target_loss


def top_k_frames(
    h: Tensor | np.ndarray,
    heads: FrameHeads,
    inventory: FrameInventory,
    k: int,
) -> list[tuple[str, float]]:
    """k most probable frames for one target state, by the softmax head.

    Ties break toward the lower frame index, so the output is deterministic.
    """
    if not 1 <= k <= len(inventory):
        raise UsageError(f"k must be in [1, {len(inventory)}], got {k}")
    vec = np.asarray(getattr(h, "data", h), dtype=np.float64).reshape(1, -1)
    with ad.no_grad():
        probs = frame_logits_target(Tensor(vec), heads).data[0]
    order = np.argsort(-probs, kind="stable")[:k]
    return [(inventory.names[i], float(probs[i])) for i in order]


@dataclass
class ConceptModel:
    """Concept encoder, its frame heads, and the frame inventory they index."""

    encoder: TransformerEncoder
    heads: FrameHeads
    inventory: FrameInventory

    @classmethod
    def build(cls, config: EncoderConfig, inventory: FrameInventory,
              encoder_rng: np.random.Generator,
              heads_rng: np.random.Generator) -> "ConceptModel":
        return cls(
            encoder=TransformerEncoder(config, encoder_rng),
            heads=FrameHeads(config.hidden_dim, len(inventory), heads_rng),
            inventory=inventory,
        )

    def parameters(self) -> dict[str, Tensor]:
        out = {f"concept_encoder.{k}": v for k, v in self.encoder.params.items()}
        out.update({f"frame_heads.{k}": v for k, v in self.heads.params.items()})
        return out

    def pretrain_step(
        self,
        batch: TokenBatch,
        gold_target_index: np.ndarray,
        gold_frame_rows: np.ndarray,
        optimizer,
        lam: float,
    ) -> float:
        """One forward/backward/update on a frame batch; returns pre-step loss."""
        if batch.batch_size == 0:
            raise UsageError("pretrain_step on an empty batch")
        out = self.encoder.encode(batch)
        pred_cls = frame_logits_cls(out.cls, self.heads)
        pred_target = frame_logits_target(out.target, self.heads)
        loss = frame_loss(pred_target, gold_target_index, pred_cls,
                          gold_frame_rows, lam)
        loss.backward()
        optimizer.step()
        return loss.item()
