"""One-stop derivation of every RNG stream from the single run seed.

Each consumer gets its own tagged stream so that sharing stages between runs
(e.g. one pretraining reused by several ablation modes) cannot shift the
random state of any other stage.
"""

from __future__ import annotations

import numpy as np

SYNTH_DATA = 1
SENTENCE_INIT = 2
CONCEPT_INIT = 3
FRAME_HEADS_INIT = 4
PREDICTION_HEAD_INIT = 5
PRETRAIN_ORDER = 6
TRAIN_ORDER = 7
TRAIN_SHUFFLE = 8
EVAL_SHUFFLE = 9


def seeded_rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, tag])))
