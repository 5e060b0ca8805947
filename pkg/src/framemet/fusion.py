"""MIP/SPV fusion of sentence and concept representations, and the final score.

The MIP vector contrasts a target word's isolated and in-context
representations (its literal vs. contextual meaning); the SPV vector
contrasts the sentence with the in-context target (the word against its
surroundings). Each is the concatenation of two sentence-encoder vectors and
two concept-encoder vectors; a single affine map over their concatenation
yields the metaphoricity score.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import INIT_STD
from .errors import ShapeError, UsageError

NORMAL = "normal"
SHUFFLE_FRAMES = "shuffle_frames"


@dataclass
class FusionInputs:
    """The six per-sample vectors fusion consumes.

    Sentence-encoder side: ``sentence`` (CLS state), ``contextual_target``
    (target state within the sentence), ``isolated_target`` (target encoded
    alone). Concept-encoder side: the same three, carrying frame information.
    """

    sentence: Tensor
    contextual_target: Tensor
    isolated_target: Tensor
    concept_sentence: Tensor
    concept_contextual_target: Tensor
    concept_isolated_target: Tensor

    def __post_init__(self):
        batches = {
            t.shape[0]
            for t in (self.sentence, self.contextual_target, self.isolated_target,
                      self.concept_sentence, self.concept_contextual_target,
                      self.concept_isolated_target)
        }
        if len(batches) != 1:
            raise ShapeError(f"fusion inputs disagree on batch size: {batches}")


class PredictionHead:
    """Affine map from the fused MIP+SPV vector to one logit per sample."""

    def __init__(self, d_sentence: int, d_concept: int, rng: np.random.Generator):
        self.in_dim = 4 * d_sentence + 4 * d_concept
        self.params = {
            "weight": Tensor(rng.normal(0.0, INIT_STD, (self.in_dim, 1)),
                             requires_grad=True),
            "bias": Tensor(np.zeros(1), requires_grad=True),
        }


def build_mip(inputs: FusionInputs) -> Tensor:
    """isolated ++ contextual ++ concept-isolated ++ concept-contextual."""
    return ad.concat(
        [inputs.isolated_target, inputs.contextual_target,
         inputs.concept_isolated_target, inputs.concept_contextual_target],
        axis=1,
    )


def build_spv(inputs: FusionInputs) -> Tensor:
    """sentence ++ contextual ++ concept-sentence ++ concept-contextual."""
    return ad.concat(
        [inputs.sentence, inputs.contextual_target,
         inputs.concept_sentence, inputs.concept_contextual_target],
        axis=1,
    )


def predict(h_mip: Tensor, h_spv: Tensor, head: PredictionHead) -> Tensor:
    """Metaphoricity scores in (0, 1), one per sample."""
    fused = ad.concat([h_mip, h_spv], axis=1)
    if fused.shape[1] != head.in_dim:
        raise ShapeError(
            f"fused dim {fused.shape[1]} does not match head input {head.in_dim}"
        )
    logits = fused @ head.params["weight"] + head.params["bias"]
    return ad.reshape(ad.sigmoid(logits), (fused.shape[0],))


def metaphor_loss(scores: Tensor, labels: np.ndarray) -> Tensor:
    """Mean binary cross entropy of the metaphoricity scores."""
    return ad.bce(scores, np.asarray(labels, dtype=np.float64))


def batch_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded permutation of ``n`` rows without fixed points whenever n >= 2.

    Uses the Sattolo cycle, so the result is a single n-cycle: every row
    moves, keeping the frame-shuffling ablation maximally disruptive yet
    reproducible. For n == 1 only the identity exists.
    """
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def shuffle_concept_inputs(
    inputs: FusionInputs, permutation: np.ndarray
) -> FusionInputs:
    """Apply one batch permutation to all three concept vectors.

    The sentence-side vectors stay put, so each sample keeps its own words
    but receives another sample's (internally consistent) frame information.
    """
    return FusionInputs(
        sentence=inputs.sentence,
        contextual_target=inputs.contextual_target,
        isolated_target=inputs.isolated_target,
        concept_sentence=ad.permute_rows(inputs.concept_sentence, permutation),
        concept_contextual_target=ad.permute_rows(
            inputs.concept_contextual_target, permutation),
        concept_isolated_target=ad.permute_rows(
            inputs.concept_isolated_target, permutation),
    )


def fuse_and_predict(
    inputs: FusionInputs,
    head: PredictionHead,
    mode: str = NORMAL,
    rng: np.random.Generator | None = None,
    permutation: np.ndarray | None = None,
) -> Tensor:
    """Fusion pipeline with the optional frame-shuffling ablation.

    In ``shuffle_frames`` mode the concept vectors are permuted across the
    batch (``permutation`` overrides the seeded draw; a singleton batch can
    only be the identity, which is reported as a warning).
    """
    if mode not in (NORMAL, SHUFFLE_FRAMES):
        raise UsageError(f"unknown forward mode {mode!r}")
    if mode == SHUFFLE_FRAMES:
        n = inputs.sentence.shape[0]
        if permutation is None:
            if n == 1:
                warnings.warn(
                    "shuffle_frames on a batch of one is the identity permutation",
                    stacklevel=2,
                )
                permutation = np.arange(1)
            else:
                if rng is None:
                    raise UsageError("shuffle_frames needs an RNG or a permutation")
                permutation = batch_permutation(n, rng)
        inputs = shuffle_concept_inputs(inputs, permutation)
    return predict(build_mip(inputs), build_spv(inputs), head)
