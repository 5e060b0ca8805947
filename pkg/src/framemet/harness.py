"""Experiment harness: two-stage training, evaluation, ablations, analysis.

Stage one fine-tunes the concept encoder on frame classification; stage two
jointly trains both encoders and the prediction head on metaphor labels. The
ablation runner covers the four modes (full model, frames shuffled at
evaluation, frames shuffled during training and evaluation, and no frame
pretraining) from a single shared pretraining. Every artifact a run writes
(per-epoch JSONL logs, metrics documents, prediction dumps, comparison
tables, figures) is deterministic given the config and seed.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plots
from .autodiff import no_grad
from .checkpoint import load_checkpoint, save_checkpoint
from .concepts import (
    FrameInventory,
    frame_logits_target,
    top_k_frames,
)
from .data import (
    SyntheticCorpus,
    Vocabulary,
    build_vocab,
    dump_frame_tsv,
    dump_metaphor_tsv,
    isolated_batch,
    load_frame_tsv,
    load_metaphor_tsv,
    make_batches,
)
from .encoder import EncoderConfig
from .errors import CheckpointError, UsageError
from .fusion import NORMAL, SHUFFLE_FRAMES, metaphor_loss
from .model import MetaphorModel
from .optim import Adam
from .seeding import (
    EVAL_SHUFFLE,
    PRETRAIN_ORDER,
    TRAIN_ORDER,
    TRAIN_SHUFFLE,
    seeded_rng,
)

log = logging.getLogger(__name__)

MODE_NONE = "none"
MODE_RAND_EVAL = "rand_in_eval"
MODE_RAND_TRAIN_EVAL = "rand_in_train_and_eval"
MODE_NO_FRAME_FINETUNE = "no_frame_finetune"
MODES = (MODE_NONE, MODE_RAND_EVAL, MODE_RAND_TRAIN_EVAL, MODE_NO_FRAME_FINETUNE)

THRESHOLD = 0.5

PRETRAIN_CKPT = "pretrained.ckpt"
MODEL_CKPT = "model.ckpt"


@dataclass
class ExperimentConfig:
    seed: int = 0
    lam: float = 2.0
    pretrain_epochs: int = 20
    train_epochs: int = 15
    batch_size: int = 32
    # 3e-4 keeps the jointly fine-tuned concept encoder aligned with its
    # frozen frame heads; 1e-3 drifts far enough to scramble the frame probe
    learning_rate: float = 3e-4
    mode: str = MODE_NONE
    d_sentence: int = 64
    d_concept: int = 64
    num_layers: int = 2
    num_heads: int = 4
    max_seq_len: int = 64
    n_frames: int = 12
    n_train: int = 1000
    n_eval: int = 300
    min_count: int = 1
    k: int = 3

    def __post_init__(self):
        if self.lam <= 0:
            raise UsageError(f"lambda must be positive, got {self.lam}")
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("pretrain_epochs", "train_epochs", "batch_size",
                     "n_train", "n_eval", "k"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    def sentence_encoder_config(self, vocab_size: int) -> EncoderConfig:
        return EncoderConfig(
            vocab_size=vocab_size, hidden_dim=self.d_sentence,
            num_layers=self.num_layers, num_heads=self.num_heads,
            max_seq_len=self.max_seq_len,
        )

    def concept_encoder_config(self, vocab_size: int) -> EncoderConfig:
        return EncoderConfig(
            vocab_size=vocab_size, hidden_dim=self.d_concept,
            num_layers=self.num_layers, num_heads=self.num_heads,
            max_seq_len=self.max_seq_len,
        )


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> "Metrics":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        return cls(tp, fp, fn, tn, precision, recall, f1)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def compute_metrics(preds, golds) -> Metrics:
    preds = np.asarray(preds)
    golds = np.asarray(golds)
    if preds.shape != golds.shape or preds.ndim != 1:
        raise UsageError(
            f"prediction/gold shapes disagree: {preds.shape} vs {golds.shape}"
        )
    if preds.size == 0:
        raise UsageError("compute_metrics on zero samples")
    for name, arr in (("preds", preds), ("golds", golds)):
        if not np.all((arr == 0) | (arr == 1)):
            raise UsageError(f"{name} must be binary 0/1")
    tp = int(np.sum((preds == 1) & (golds == 1)))
    fp = int(np.sum((preds == 1) & (golds == 0)))
    fn = int(np.sum((preds == 0) & (golds == 1)))
    tn = int(np.sum((preds == 0) & (golds == 0)))
    return Metrics.from_counts(tp, fp, fn, tn)


METRICS_TSV_HEADER = "mode\ttp\tfp\tfn\ttn\tprecision\trecall\tf1"


def metrics_tsv_row(mode: str, m: Metrics) -> str:
    return (
        f"{mode}\t{m.tp}\t{m.fp}\t{m.fn}\t{m.tn}"
        f"\t{m.precision!r}\t{m.recall!r}\t{m.f1!r}"
    )


# -- deterministic writers ------------------------------------------------------


def write_json(path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def write_jsonl(path, records) -> None:
    Path(path).write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in records),
        encoding="utf-8",
    )


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


# -- data directory layout -------------------------------------------------------

FRAME_TRAIN_TSV = "frame_train.tsv"
FRAME_EVAL_TSV = "frame_eval.tsv"
METAPHOR_TRAIN_TSV = "metaphor_train.tsv"
METAPHOR_EVAL_TSV = "metaphor_eval.tsv"
INVENTORY_JSON = "frame_inventory.json"


@dataclass
class DataBundle:
    inventory: FrameInventory
    frame_train: list
    frame_eval: list
    metaphor_train: list
    metaphor_eval: list


def save_data_dir(corpus: SyntheticCorpus, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_frame_tsv(corpus.frame_train, out / FRAME_TRAIN_TSV)
    dump_frame_tsv(corpus.frame_eval, out / FRAME_EVAL_TSV)
    dump_metaphor_tsv(corpus.metaphor_train, out / METAPHOR_TRAIN_TSV)
    dump_metaphor_tsv(corpus.metaphor_eval, out / METAPHOR_EVAL_TSV)
    write_json(out / INVENTORY_JSON, {"frames": corpus.inventory.names})


def load_data_dir(data_dir) -> DataBundle:
    d = Path(data_dir)
    inv_train, frame_train = load_frame_tsv(d / FRAME_TRAIN_TSV)
    inv_eval, frame_eval = load_frame_tsv(d / FRAME_EVAL_TSV)
    inventory_path = d / INVENTORY_JSON
    if inventory_path.exists():
        inventory = FrameInventory(
            json.loads(inventory_path.read_text(encoding="utf-8"))["frames"]
        )
    else:
        inventory = FrameInventory(sorted(set(inv_train.names) | set(inv_eval.names)))
    for side in (inv_train, inv_eval):
        stray = set(side.names) - set(inventory.names)
        if stray:
            raise CheckpointError(
                f"frames {sorted(stray)} are absent from the inventory"
            )
    return DataBundle(
        inventory=inventory,
        frame_train=frame_train,
        frame_eval=frame_eval,
        metaphor_train=load_metaphor_tsv(d / METAPHOR_TRAIN_TSV),
        metaphor_eval=load_metaphor_tsv(d / METAPHOR_EVAL_TSV),
    )


def build_run_vocab(config: ExperimentConfig, bundle: DataBundle) -> Vocabulary:
    return build_vocab(
        [bundle.frame_train, bundle.metaphor_train], min_count=config.min_count
    )


def check_compatible(model: MetaphorModel, bundle: DataBundle) -> None:
    if model.inventory != bundle.inventory:
        raise CheckpointError(
            "checkpoint frame inventory does not match the data directory "
            f"({len(model.inventory)} vs {len(bundle.inventory)} frames)"
        )


# -- stage one: frame pretraining -------------------------------------------------


def _frame_golds(batch_samples, inventory: FrameInventory):
    idx = np.array([inventory.index[s.target_frame] for s in batch_samples])
    rows = np.stack([inventory.multi_hot(s.sentence_frames) for s in batch_samples])
    return idx, rows


def frame_accuracy(model: MetaphorModel, samples, config: ExperimentConfig):
    """Held-out target-frame top-1 and top-3 accuracy via the contextual pass."""
    batches, _ = make_batches(
        samples, model.vocab, config.max_seq_len, config.batch_size
    )
    hits1 = hits3 = total = 0
    with no_grad():
        for batch in batches:
            out = model.concept.encoder.encode(batch.tokens)
            probs = frame_logits_target(out.target, model.concept.heads).data
            gold = np.array(
                [model.inventory.index[s.target_frame] for s in batch.samples]
            )
            order = np.argsort(-probs, axis=1, kind="stable")
            hits1 += int(np.sum(order[:, 0] == gold))
            hits3 += int(np.sum(np.any(order[:, :3] == gold[:, None], axis=1)))
            total += len(batch.samples)
    return hits1 / total, hits3 / total


def run_pretrain(
    config: ExperimentConfig,
    bundle: DataBundle,
    out_dir=None,
) -> tuple[MetaphorModel, list[dict]]:
    """Train the concept encoder and frame heads; returns model and history."""
    if config.mode == MODE_NO_FRAME_FINETUNE:
        raise UsageError("mode no_frame_finetune skips the pretraining stage")
    if not bundle.frame_train:
        raise UsageError("pretraining corpus is empty")
    vocab = build_run_vocab(config, bundle)
    model = MetaphorModel.build(
        vocab,
        bundle.inventory,
        config.sentence_encoder_config(len(vocab)),
        config.concept_encoder_config(len(vocab)),
        config.seed,
    )
    optimizer = Adam(
        list(model.concept.parameters().values()), lr=config.learning_rate
    )
    order_rng = seeded_rng(config.seed, PRETRAIN_ORDER)
    history = []
    for epoch in range(1, config.pretrain_epochs + 1):
        batches, _ = make_batches(
            bundle.frame_train, vocab, config.max_seq_len, config.batch_size,
            shuffle_rng=order_rng,
        )
        losses = []
        for batch in batches:
            gold_idx, gold_rows = _frame_golds(batch.samples, bundle.inventory)
            losses.append(
                model.concept.pretrain_step(
                    batch.tokens, gold_idx, gold_rows, optimizer, config.lam
                )
            )
        top1, top3 = frame_accuracy(model, bundle.frame_eval, config)
        record = {
            "epoch": epoch,
            "loss": float(np.mean(losses)),
            "top1": top1,
            "top3": top3,
        }
        history.append(record)
        log.info(
            "pretrain epoch %d/%d loss %.4f top1 %.3f top3 %.3f",
            epoch, config.pretrain_epochs, record["loss"], top1, top3,
        )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, out / PRETRAIN_CKPT)
        write_jsonl(out / "pretrain_log.jsonl", history)
        write_json(out / "pretrain_metrics.json", history[-1])
        plots.save_curves(
            out / "pretrain_curves.png", history, ("loss", "top1", "top3"),
            "Frame pretraining",
        )
    return model, history


# -- stage two: joint metaphor training ---------------------------------------------


def run_train(
    config: ExperimentConfig,
    bundle: DataBundle,
    pretrained: MetaphorModel | None,
    out_dir=None,
) -> tuple[MetaphorModel, list[dict]]:
    """Jointly train both encoders and the prediction head on metaphor labels."""
    if not bundle.metaphor_train:
        raise UsageError("metaphor training corpus is empty")
    if pretrained is None:
        if config.mode != MODE_NO_FRAME_FINETUNE:
            raise UsageError(f"mode {config.mode} requires a pretrained checkpoint")
        vocab = build_run_vocab(config, bundle)
        model = MetaphorModel.build(
            vocab,
            bundle.inventory,
            config.sentence_encoder_config(len(vocab)),
            config.concept_encoder_config(len(vocab)),
            config.seed,
        )
    else:
        model = pretrained
        check_compatible(model, bundle)
    optimizer = Adam(
        list(model.trainable_metaphor_parameters().values()),
        lr=config.learning_rate,
    )
    order_rng = seeded_rng(config.seed, TRAIN_ORDER)
    shuffle_rng = seeded_rng(config.seed, TRAIN_SHUFFLE)
    shuffle_in_training = config.mode == MODE_RAND_TRAIN_EVAL
    history = []
    for epoch in range(1, config.train_epochs + 1):
        batches, _ = make_batches(
            bundle.metaphor_train, model.vocab, config.max_seq_len,
            config.batch_size, shuffle_rng=order_rng,
        )
        losses = []
        for batch in batches:
            scores = model.score_tokens(
                batch.tokens,
                isolated_batch(batch.samples, model.vocab),
                mode=SHUFFLE_FRAMES if shuffle_in_training else NORMAL,
                rng=shuffle_rng,
            )
            loss = metaphor_loss(
                scores, np.array([s.label for s in batch.samples])
            )
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        record = {"epoch": epoch, "loss": float(np.mean(losses))}
        history.append(record)
        log.info(
            "train[%s] epoch %d/%d loss %.4f",
            config.mode, epoch, config.train_epochs, record["loss"],
        )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, out / MODEL_CKPT)
        write_jsonl(out / "train_log.jsonl", history)
        plots.save_curves(
            out / "train_curves.png", history, ("loss",),
            f"Metaphor training ({config.mode})",
        )
    return model, history


# -- evaluation ---------------------------------------------------------------------


def run_eval(
    config: ExperimentConfig,
    model: MetaphorModel,
    samples,
    mode: str | None = None,
    out_dir=None,
) -> tuple[Metrics, np.ndarray, np.ndarray]:
    """Score an eval corpus; returns metrics plus raw scores and gold labels."""
    if not samples:
        raise UsageError("evaluation corpus is empty")
    mode = config.mode if mode is None else mode
    if mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}, got {mode!r}")
    shuffled = mode in (MODE_RAND_EVAL, MODE_RAND_TRAIN_EVAL)
    shuffle_rng = seeded_rng(config.seed, EVAL_SHUFFLE)
    batches, _ = make_batches(
        samples, model.vocab, config.max_seq_len, config.batch_size
    )
    scores = []
    with no_grad():
        for batch in batches:
            out = model.score_tokens(
                batch.tokens,
                isolated_batch(batch.samples, model.vocab),
                mode=SHUFFLE_FRAMES if shuffled else NORMAL,
                rng=shuffle_rng,
            )
            scores.append(out.data)
    scores = np.concatenate(scores)
    golds = np.array([s.label for s in samples])
    preds = (scores >= THRESHOLD).astype(int)
    metrics = compute_metrics(preds, golds)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        document = {
            "mode": mode,
            "threshold": THRESHOLD,
            "eval_batch_size": config.batch_size,
            "seed": config.seed,
            **metrics.to_dict(),
        }
        write_json(out / "metrics.json", document)
        write_text(
            out / "metrics.tsv",
            METRICS_TSV_HEADER + "\n" + metrics_tsv_row(mode, metrics) + "\n",
        )
        write_text(
            out / "predictions.tsv",
            "id\tscore\tlabel\n"
            + "".join(
                f"{i}\t{float(s)!r}\t{g}\n"
                for i, (s, g) in enumerate(zip(scores, golds))
            ),
        )
        plots.save_score_histogram(out / "score_histogram.png", scores, golds)
    return metrics, scores, golds


# -- concept analysis -----------------------------------------------------------------


def analyze_concepts(
    config: ExperimentConfig,
    model: MetaphorModel,
    samples,
    out_dir=None,
) -> tuple[list[dict], dict]:
    """Per-sample literal vs. contextual top-k frames with predicted labels."""
    if not samples:
        raise UsageError("analysis corpus is empty")
    k = config.k
    batches, _ = make_batches(
        samples, model.vocab, config.max_seq_len, config.batch_size
    )
    rows = []
    with no_grad():
        for batch in batches:
            iso = isolated_batch(batch.samples, model.vocab)
            contextual = model.concept.encoder.encode(batch.tokens).target
            literal = model.concept.encoder.encode_isolated(iso)
            scores = model.score_tokens(batch.tokens, iso).data
            for r, sample in enumerate(batch.samples):
                rows.append(
                    {
                        "id": len(rows),
                        "target": sample.tokens[sample.target_index],
                        "gold": sample.label,
                        "pred": int(scores[r] >= THRESHOLD),
                        "literal": top_k_frames(
                            literal.data[r], model.concept.heads,
                            model.inventory, k,
                        ),
                        "contextual": top_k_frames(
                            contextual.data[r], model.concept.heads,
                            model.inventory, k,
                        ),
                    }
                )
    pos = [r for r in rows if r["gold"] == 1]
    neg = [r for r in rows if r["gold"] == 0]

    def _top1_differs(row) -> bool:
        return row["literal"][0][0] != row["contextual"][0][0]

    summary = {
        "samples": len(rows),
        "k": k,
        "positives": len(pos),
        "negatives": len(neg),
        "positive_top1_differs": (
            sum(_top1_differs(r) for r in pos) / len(pos) if pos else 0.0
        ),
        "negative_top1_identical": (
            sum(not _top1_differs(r) for r in neg) / len(neg) if neg else 0.0
        ),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        def fmt(frames):
            return ",".join(f"{name}:{prob!r}" for name, prob in frames)

        write_text(
            out / "concept_report.tsv",
            "id\ttarget\tgold\tpred\tliteral_top_k\tcontextual_top_k\n"
            + "".join(
                f"{r['id']}\t{r['target']}\t{r['gold']}\t{r['pred']}"
                f"\t{fmt(r['literal'])}\t{fmt(r['contextual'])}\n"
                for r in rows
            ),
        )
        write_json(out / "concept_summary.json", summary)
        plots.save_concept_agreement(
            out / "concept_agreement.png",
            summary["positive_top1_differs"],
            summary["negative_top1_identical"],
        )
    return rows, summary


# -- the four-mode ablation -------------------------------------------------------------


def run_ablation(
    config: ExperimentConfig, bundle: DataBundle, out_dir
) -> list[tuple[str, Metrics]]:
    """All four modes from one pretraining; emits the comparison table.

    Each mode reloads the shared pretrained checkpoint from disk, so its
    training starts from exactly the state an individual run would load.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pretrain_cfg = dataclasses.replace(config, mode=MODE_NONE)
    (out / "pretrain").mkdir(parents=True, exist_ok=True)
    write_json(out / "pretrain" / "resolved_config.json", pretrain_cfg.to_dict())
    run_pretrain(pretrain_cfg, bundle, out_dir=out / "pretrain")
    results = []
    for mode in MODES:
        mode_cfg = dataclasses.replace(config, mode=mode)
        (out / mode).mkdir(parents=True, exist_ok=True)
        write_json(out / mode / "resolved_config.json", mode_cfg.to_dict())
        if mode == MODE_NO_FRAME_FINETUNE:
            start = None
        else:
            start = load_checkpoint(out / "pretrain" / PRETRAIN_CKPT)
        model, _ = run_train(mode_cfg, bundle, start, out_dir=out / mode)
        metrics, _, _ = run_eval(
            mode_cfg, model, bundle.metaphor_eval, out_dir=out / mode
        )
        results.append((mode, metrics))
        log.info("ablation %s: f1 %.4f", mode, metrics.f1)
    table = METRICS_TSV_HEADER + "\n" + "".join(
        metrics_tsv_row(mode, m) + "\n" for mode, m in results
    )
    write_text(out / "ablation.tsv", table)
    write_json(
        out / "ablation.json",
        {mode: m.to_dict() for mode, m in results},
    )
    plots.save_ablation_bar(
        out / "ablation_f1.png", [(mode, m.f1) for mode, m in results]
    )
    return results
