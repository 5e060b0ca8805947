"""Concept-level metaphor detection with frame-pretrained embeddings.

A self-contained implementation: a float64 autodiff tensor core, a small
word-level transformer encoder, a frame-classification concept encoder,
MIP/SPV fusion for the final metaphoricity score, a deterministic synthetic
corpus generator, and a training/ablation/analysis harness with a CLI.
"""

from .autodiff import Tensor, bce, concat, no_grad, sigmoid, softmax, zero_grads
from .concepts import (
    ConceptModel,
    FrameHeads,
    FrameInventory,
    frame_logits_cls,
    frame_logits_target,
    frame_loss,
    top_k_frames,
)
from .data import (
    FrameSample,
    MetaphorSample,
    SyntheticCorpus,
    Vocabulary,
    build_vocab,
    load_frame_tsv,
    load_metaphor_tsv,
    make_batches,
    synth_generate,
)
from .encoder import EncoderConfig, EncoderOutput, TokenBatch, TransformerEncoder
from .errors import (
    CheckpointError,
    DomainError,
    FramemetError,
    ParseError,
    ShapeError,
    UsageError,
    VocabError,
)
from .fusion import (
    FusionInputs,
    PredictionHead,
    build_mip,
    build_spv,
    fuse_and_predict,
    metaphor_loss,
    predict,
)
from .harness import (
    ExperimentConfig,
    Metrics,
    analyze_concepts,
    compute_metrics,
    run_ablation,
    run_eval,
    run_pretrain,
    run_train,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .model import MetaphorModel
from .optim import Adam

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "CheckpointError",
    "ConceptModel",
    "DomainError",
    "EncoderConfig",
    "EncoderOutput",
    "ExperimentConfig",
    "FrameHeads",
    "FrameInventory",
    "FrameSample",
    "FramemetError",
    "FusionInputs",
    "MetaphorModel",
    "MetaphorSample",
    "Metrics",
    "ParseError",
    "PredictionHead",
    "ShapeError",
    "SyntheticCorpus",
    "Tensor",
    "TokenBatch",
    "TransformerEncoder",
    "UsageError",
    "Vocabulary",
    "VocabError",
    "analyze_concepts",
    "bce",
    "build_mip",
    "build_spv",
    "build_vocab",
    "compute_metrics",
    "concat",
    "frame_logits_cls",
    "frame_logits_target",
    "frame_loss",
    "fuse_and_predict",
    "load_checkpoint",
    "load_frame_tsv",
    "load_metaphor_tsv",
    "make_batches",
    "metaphor_loss",
    "no_grad",
    "predict",
    "run_ablation",
    "run_eval",
    "run_pretrain",
    "run_train",
    "save_checkpoint",
    "sigmoid",
    "softmax",
    "synth_generate",
    "top_k_frames",
    "zero_grads",
]
