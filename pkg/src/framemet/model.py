"""The complete metaphor detector: two encoders, frame heads, fusion head.

A forward pass runs each encoder twice per sample batch: once over the full
sentence with the target marked (yielding the sentence state and the
in-context target state) and once over the bare target word (yielding the
isolated state). The six resulting vectors feed MIP/SPV fusion and the
prediction head. Parameters are registered under four disjoint prefixes so
both encoders stay independent and checkpoints can name every array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .concepts import ConceptModel, FrameInventory
from .data import Vocabulary, isolated_batch, make_batches
from .encoder import EncoderConfig, TokenBatch, TransformerEncoder
from .errors import UsageError
from .fusion import NORMAL, FusionInputs, PredictionHead, fuse_and_predict
from .seeding import (
    CONCEPT_INIT,
    FRAME_HEADS_INIT,
    PREDICTION_HEAD_INIT,
    SENTENCE_INIT,
    seeded_rng,
)


@dataclass
class MetaphorModel:
    vocab: Vocabulary
    inventory: FrameInventory
    sentence_encoder: TransformerEncoder
    concept: ConceptModel
    head: PredictionHead

    @classmethod
    def build(
        cls,
        vocab: Vocabulary,
        inventory: FrameInventory,
        sentence_config: EncoderConfig,
        concept_config: EncoderConfig,
        seed: int,
    ) -> "MetaphorModel":
        sentence_encoder = TransformerEncoder(
            sentence_config, seeded_rng(seed, SENTENCE_INIT)
        )
        concept = ConceptModel.build(
            concept_config,
            inventory,
            seeded_rng(seed, CONCEPT_INIT),
            seeded_rng(seed, FRAME_HEADS_INIT),
        )
        head = PredictionHead(
            sentence_config.hidden_dim,
            concept_config.hidden_dim,
            seeded_rng(seed, PREDICTION_HEAD_INIT),
        )
        return cls(vocab, inventory, sentence_encoder, concept, head)

    def parameters(self) -> dict[str, Tensor]:
        out = {
            f"sentence_encoder.{k}": v
            for k, v in self.sentence_encoder.params.items()
        }
        out.update(self.concept.parameters())
        out.update(
            {f"prediction_head.{k}": v for k, v in self.head.params.items()}
        )
        return out

    def trainable_metaphor_parameters(self) -> dict[str, Tensor]:
        """Everything on the metaphor-loss gradient path (frame heads are not)."""
        return {
            name: p
            for name, p in self.parameters().items()
            if not name.startswith("frame_heads.")
        }

    def fusion_inputs(self, tokens: TokenBatch, isolated: TokenBatch) -> FusionInputs:
        sent = self.sentence_encoder.encode(tokens)
        conc = self.concept.encoder.encode(tokens)
        return FusionInputs(
            sentence=sent.cls,
            contextual_target=sent.target,
            isolated_target=self.sentence_encoder.encode_isolated(isolated),
            concept_sentence=conc.cls,
            concept_contextual_target=conc.target,
            concept_isolated_target=self.concept.encoder.encode_isolated(isolated),
        )

    def score_tokens(
        self,
        tokens: TokenBatch,
        isolated: TokenBatch,
        mode: str = NORMAL,
        rng: np.random.Generator | None = None,
        permutation: np.ndarray | None = None,
    ) -> Tensor:
        return fuse_and_predict(
            self.fusion_inputs(tokens, isolated), self.head,
            mode=mode, rng=rng, permutation=permutation,
        )

    def forward(
        self,
        samples,
        mode: str = NORMAL,
        rng: np.random.Generator | None = None,
        permutation: np.ndarray | None = None,
    ) -> Tensor:
        """Metaphoricity scores for a list of samples, as one batch."""
        if not samples:
            raise UsageError("forward on an empty sample list")
        max_len = self.sentence_encoder.config.max_seq_len
        batches, rejected = make_batches(
            samples, self.vocab, max_len, batch_size=len(samples)
        )
        if rejected:
            raise UsageError(
                f"{len(rejected)} samples do not fit max_seq_len {max_len}: "
                + "; ".join(r.reason for r in rejected[:3])
            )
        batch = batches[0]
        return self.score_tokens(
            batch.tokens, isolated_batch(batch.samples, self.vocab),
            mode=mode, rng=rng, permutation=permutation,
        )
