"""Annotation carriers, vocabulary, batching, and the synthetic corpus.

Two plain-TSV formats move data in and out of the package:

* metaphor records: ``sentence<TAB>target_index<TAB>label`` where the
  sentence is whitespace-tokenized, the index is the 0-based target word
  position, and the label is 0 (literal) or 1 (metaphorical);
* frame records: ``sentence<TAB>target_index<TAB>target_frame<TAB>frames``
  where ``frames`` is the comma-joined set of frames the sentence evokes and
  must contain the target frame.

Files are UTF-8 with LF line endings. The synthetic generator produces both
corpora from one seed: it invents disjoint eight-word vocabularies for each
frame, composes templated sentences out of frame words and shared function
words, and labels a metaphor sample positive exactly when the target word's
home frame differs from the frame evoked by the surrounding words.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .concepts import FrameInventory
from .encoder import TokenBatch
from .errors import ParseError, UsageError
from .seeding import SYNTH_DATA, seeded_rng

CLS_TOKEN = "<cls>"
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
CLS_ID, PAD_ID, UNK_ID = 0, 1, 2


@dataclass
class MetaphorSample:
    tokens: list[str]
    target_index: int
    label: int


@dataclass
class FrameSample:
    tokens: list[str]
    target_index: int
    target_frame: str
    sentence_frames: frozenset[str]


class Vocabulary:
    """Word<->id bijection with fixed ids 0/1/2 for CLS, PAD, and UNK."""

    def __init__(self, words: list[str]):
        self.id_to_word = [CLS_TOKEN, PAD_TOKEN, UNK_TOKEN] + list(words)
        if len(set(self.id_to_word)) != len(self.id_to_word):
            raise UsageError("vocabulary words must be unique and non-reserved")
        self.word_to_id = {w: i for i, w in enumerate(self.id_to_word)}

    def __len__(self) -> int:
        return len(self.id_to_word)

    def encode(self, word: str) -> int:
        return self.word_to_id.get(word, UNK_ID)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_word == other.id_to_word


def build_vocab(corpora, min_count: int = 1) -> Vocabulary:
    """Count words across sample lists; frequent words get ids, others UNK.

    Order is deterministic: count descending, then lexicographic.
    """
    if min_count < 1:
        raise UsageError(f"min_count must be >= 1, got {min_count}")
    counts: Counter[str] = Counter()
    for samples in corpora:
        for sample in samples:
            counts.update(sample.tokens)
    kept = [w for w, c in counts.items() if c >= min_count]
    kept.sort(key=lambda w: (-counts[w], w))
    return Vocabulary(kept)


# -- TSV carriers ------------------------------------------------------------


def _parse_common(line: str, lineno: int, n_fields: int) -> tuple[list[str], int, list[str]]:
    parts = line.split("\t")
    if len(parts) != n_fields:
        raise ParseError(
            f"line {lineno}: expected {n_fields} tab-separated fields, "
            f"got {len(parts)}"
        )
    tokens = parts[0].split()
    if not tokens:
        raise ParseError(f"line {lineno}: empty sentence")
    try:
        target_index = int(parts[1])
    except ValueError:
        raise ParseError(f"line {lineno}: target index {parts[1]!r} is not an integer")
    if not 0 <= target_index < len(tokens):
        raise ParseError(
            f"line {lineno}: target index {target_index} outside sentence "
            f"of {len(tokens)} words"
        )
    return tokens, target_index, parts


def load_metaphor_tsv(path) -> list[MetaphorSample]:
    samples = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens, target_index, parts = _parse_common(line, lineno, 3)
        if parts[2] not in ("0", "1"):
            raise ParseError(f"line {lineno}: label {parts[2]!r} is not 0 or 1")
        samples.append(MetaphorSample(tokens, target_index, int(parts[2])))
    return samples


def dump_metaphor_tsv(samples, path) -> None:
    lines = [f"{' '.join(s.tokens)}\t{s.target_index}\t{s.label}" for s in samples]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_frame_tsv(path) -> tuple[FrameInventory, list[FrameSample]]:
    """Parse frame records; the inventory is the sorted set of frames seen."""
    samples = []
    names: set[str] = set()
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens, target_index, parts = _parse_common(line, lineno, 4)
        target_frame = parts[2].strip()
        sentence_frames = frozenset(
            f.strip() for f in parts[3].split(",") if f.strip()
        )
        if not target_frame:
            raise ParseError(f"line {lineno}: empty target frame")
        if target_frame not in sentence_frames:
            raise ParseError(
                f"line {lineno}: target frame {target_frame!r} missing from "
                f"sentence frames {sorted(sentence_frames)}"
            )
        names.update(sentence_frames)
        samples.append(FrameSample(tokens, target_index, target_frame,
                                   sentence_frames))
    return FrameInventory(sorted(names)), samples


def dump_frame_tsv(samples, path) -> None:
    lines = [
        f"{' '.join(s.tokens)}\t{s.target_index}\t{s.target_frame}"
        f"\t{','.join(sorted(s.sentence_frames))}"
        for s in samples
    ]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


# -- batching ----------------------------------------------------------------


@dataclass
class Batch:
    tokens: TokenBatch
    samples: list


@dataclass
class Rejection:
    position: int
    reason: str


def make_batches(
    samples,
    vocab: Vocabulary,
    max_len: int,
    batch_size: int,
    shuffle_rng: np.random.Generator | None = None,
) -> tuple[list[Batch], list[Rejection]]:
    """Group samples into padded CLS-prefixed batches.

    Prepending CLS shifts every target index by one. Overlong sentences are
    truncated on the right, but a sample whose target itself falls beyond
    ``max_len`` is rejected (truncating through the target would corrupt it).
    Input order is preserved unless a shuffle RNG is passed.
    """
    if batch_size < 1:
        raise UsageError(f"batch_size must be >= 1, got {batch_size}")
    if max_len < 2:
        raise UsageError(f"max_len must fit CLS plus a target, got {max_len}")
    order = np.arange(len(samples))
    if shuffle_rng is not None:
        shuffle_rng.shuffle(order)
    accepted: list[int] = []
    rejected: list[Rejection] = []
    for pos in order:
        sample = samples[pos]
        if sample.target_index + 1 > max_len - 1:
            rejected.append(
                Rejection(
                    int(pos),
                    f"target at word {sample.target_index} does not fit "
                    f"max_len {max_len}",
                )
            )
        else:
            accepted.append(int(pos))

    batches = []
    for start in range(0, len(accepted), batch_size):
        chunk = [samples[i] for i in accepted[start:start + batch_size]]
        width = min(max_len, 1 + max(len(s.tokens) for s in chunk))
        ids = np.full((len(chunk), width), PAD_ID, dtype=np.int64)
        types = np.zeros((len(chunk), width), dtype=np.int64)
        mask = np.zeros((len(chunk), width), dtype=np.int64)
        targets = np.zeros(len(chunk), dtype=np.int64)
        for r, s in enumerate(chunk):
            kept = s.tokens[: width - 1]
            ids[r, 0] = CLS_ID
            ids[r, 1:1 + len(kept)] = [vocab.encode(w) for w in kept]
            mask[r, : 1 + len(kept)] = 1
            targets[r] = s.target_index + 1
            types[r, targets[r]] = 1
        batches.append(Batch(TokenBatch(ids, types, mask, targets), chunk))
    return batches, rejected


def isolated_batch(samples, vocab: Vocabulary) -> TokenBatch:
    """CLS plus the bare target word of each sample, for the isolated pass."""
    n = len(samples)
    ids = np.full((n, 2), PAD_ID, dtype=np.int64)
    types = np.zeros((n, 2), dtype=np.int64)
    mask = np.ones((n, 2), dtype=np.int64)
    for r, s in enumerate(samples):
        ids[r, 0] = CLS_ID
        ids[r, 1] = vocab.encode(s.tokens[s.target_index])
        types[r, 1] = 1
    return TokenBatch(ids, types, mask, np.ones(n, dtype=np.int64))


# -- synthetic corpus ---------------------------------------------------------

FUNCTION_WORDS = [
    "the", "a", "and", "was", "is", "it", "very", "quite", "so", "then",
    "near", "still",
]

FRAME_NAME_POOL = [
    "Temperature", "Motion", "Body_parts", "Commerce", "Conflict", "Cooking",
    "Emotion", "Weather", "Light", "Sound", "Plants", "Water",
]

WORDS_PER_FRAME = 8
# frame-corpus sample mix: bare targets anchor the word->home-frame mapping
# the isolated pass relies on; cross-frame samples (annotated with the frame
# the context evokes) force the contextual prediction to follow context
BARE_FRACTION = 0.15
COHERENT_FRACTION = 0.50
_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class SyntheticCorpus:
    inventory: FrameInventory
    frame_words: dict[str, list[str]]
    frame_train: list[FrameSample]
    frame_eval: list[FrameSample]
    metaphor_train: list[MetaphorSample]
    metaphor_eval: list[MetaphorSample]
    home_frame: dict[str, str] = field(init=False)

    def __post_init__(self):
        self.home_frame = {
            w: name for name, words in self.frame_words.items() for w in words
        }


def _make_words(rng: np.random.Generator, count: int) -> list[str]:
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    taken = set(FUNCTION_WORDS)
    words = []
    while len(words) < count:
        n_syl = 2 + int(rng.integers(0, 2))
        word = "".join(syllables[int(rng.integers(0, len(syllables)))]
                       for _ in range(n_syl))
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


def _frame_names(n_frames: int) -> list[str]:
    names = FRAME_NAME_POOL[:n_frames]
    names += [f"Frame_{i:02d}" for i in range(len(names), n_frames)]
    return names


def _compose(rng: np.random.Generator, context_words: list[str],
             target_word: str) -> tuple[list[str], int]:
    """Interleave the content words with function words; return the target slot."""
    items = [(w, False) for w in context_words] + [(target_word, True)]
    rng.shuffle(items)
    tokens: list[str] = []
    target_index = -1
    if rng.random() < 0.7:
        tokens.append(FUNCTION_WORDS[int(rng.integers(0, len(FUNCTION_WORDS)))])
    for word, is_target in items:
        if is_target:
            target_index = len(tokens)
        tokens.append(word)
        if rng.random() < 0.6:
            tokens.append(FUNCTION_WORDS[int(rng.integers(0, len(FUNCTION_WORDS)))])
    return tokens, target_index


def _pick_context(rng, words: list[str], exclude: str | None) -> list[str]:
    pool = [w for w in words if w != exclude]
    k = 2 + int(rng.integers(0, 3))
    idx = rng.choice(len(pool), size=k, replace=False)
    return [pool[int(i)] for i in idx]


def _gen_frame_samples(rng, names, frame_words, count) -> list[FrameSample]:
    """Frame annotations in three flavours.

    Half are coherent (target and context share a frame), a third are
    cross-frame (the target word sits in another frame's context and is
    annotated with the frame the context evokes, the way an annotator labels
    a word by its in-context sense), and the rest are bare targets whose only
    evidence is the word itself.
    """
    samples = []
    for _ in range(count):
        r = rng.random()
        context_frame = names[int(rng.integers(0, len(names)))]
        if r < BARE_FRACTION:
            target = frame_words[context_frame][int(rng.integers(0, WORDS_PER_FRAME))]
            tokens, ti = _compose(rng, [], target)
            gold, evoked = context_frame, {context_frame}
        elif r < BARE_FRACTION + COHERENT_FRACTION:
            target = frame_words[context_frame][int(rng.integers(0, WORDS_PER_FRAME))]
            ctx = _pick_context(rng, frame_words[context_frame], target)
            tokens, ti = _compose(rng, ctx, target)
            gold, evoked = context_frame, {context_frame}
        else:
            others = [n for n in names if n != context_frame]
            home = others[int(rng.integers(0, len(others)))]
            target = frame_words[home][int(rng.integers(0, WORDS_PER_FRAME))]
            ctx = _pick_context(rng, frame_words[context_frame], None)
            tokens, ti = _compose(rng, ctx, target)
            gold, evoked = context_frame, {context_frame, home}
        samples.append(FrameSample(tokens, ti, gold, frozenset(evoked)))
    return samples


def _gen_metaphor_samples(rng, names, frame_words, count) -> list[MetaphorSample]:
    labels = np.array([1] * (count // 2) + [0] * (count - count // 2))
    rng.shuffle(labels)
    samples = []
    for label in labels:
        context_frame = names[int(rng.integers(0, len(names)))]
        ctx = _pick_context(rng, frame_words[context_frame], None)
        if label:
            others = [n for n in names if n != context_frame]
            home = others[int(rng.integers(0, len(others)))]
            target = frame_words[home][int(rng.integers(0, WORDS_PER_FRAME))]
        else:
            target = frame_words[context_frame][int(rng.integers(0, WORDS_PER_FRAME))]
        tokens, ti = _compose(rng, ctx, target)
        samples.append(MetaphorSample(tokens, ti, int(label)))
    return samples


def synth_generate(seed: int, n_frames: int = 12, n_train: int = 1000,
                   n_eval: int = 300) -> SyntheticCorpus:
    """Deterministic frame and metaphor corpora with train/eval splits."""
    if n_frames < 2:
        raise UsageError(f"need at least 2 frames, got {n_frames}")
    rng = seeded_rng(seed, SYNTH_DATA)
    names = _frame_names(n_frames)
    flat = _make_words(rng, n_frames * WORDS_PER_FRAME)
    frame_words = {
        name: flat[i * WORDS_PER_FRAME:(i + 1) * WORDS_PER_FRAME]
        for i, name in enumerate(sorted(names))
    }
    inventory = FrameInventory(sorted(names))
    return SyntheticCorpus(
        inventory=inventory,
        frame_words=frame_words,
        frame_train=_gen_frame_samples(rng, inventory.names, frame_words, n_train),
        frame_eval=_gen_frame_samples(rng, inventory.names, frame_words, n_eval),
        metaphor_train=_gen_metaphor_samples(rng, inventory.names, frame_words,
                                             n_train),
        metaphor_eval=_gen_metaphor_samples(rng, inventory.names, frame_words,
                                            n_eval),
    )
