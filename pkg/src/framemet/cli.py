"""Command-line entry point for reproducible runs.

Subcommands: ``gen-data`` (seeded synthetic corpora), ``pretrain-frames``
(stage one), ``train`` (stage two), ``eval`` (metrics and prediction dump),
``ablate`` (all four modes from one pretraining, with a comparison table),
and ``analyze`` (literal vs. contextual frame report). Settings resolve as
flags over config file over defaults, and every run writes its fully
resolved config next to its outputs. Exit codes: 0 success, 1 validation or
usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .data import synth_generate
from .errors import FramemetError
from .harness import (
    ExperimentConfig,
    MODE_NO_FRAME_FINETUNE,
    MODES,
    analyze_concepts,
    check_compatible,
    load_data_dir,
    run_ablation,
    run_eval,
    run_pretrain,
    run_train,
    save_data_dir,
    write_json,
)

log = logging.getLogger(__name__)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--seed", type=int, help="run seed (default 0)")
    sub.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framemet",
        description="Concept-level metaphor detection experiments.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("gen-data", help="generate seeded synthetic corpora")
    _add_common(p)
    p.add_argument("--n-frames", type=int, dest="n_frames")
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--n-eval", type=int, dest="n_eval")

    p = commands.add_parser("pretrain-frames", help="stage one: frame pretraining")
    _add_common(p)
    p.add_argument("--data", required=True, help="directory from gen-data")
    p.add_argument("--epochs", type=int, dest="pretrain_epochs")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lambda", type=float, dest="lam",
                   help="weight of the sentence-frame loss term")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")

    p = commands.add_parser("train", help="stage two: joint metaphor training")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint",
                   help="pretrained checkpoint (required except in "
                        "no_frame_finetune mode)")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--epochs", type=int, dest="train_epochs")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")

    p = commands.add_parser("eval", help="evaluate a trained checkpoint")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--batch-size", type=int, dest="batch_size")

    p = commands.add_parser("ablate", help="run all four modes of the ablation")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, dest="train_epochs")
    p.add_argument("--pretrain-epochs", type=int, dest="pretrain_epochs")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")

    p = commands.add_parser("analyze", help="literal vs. contextual frame report")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, help="frames listed per column (default 3)")
    p.add_argument("--batch-size", type=int, dest="batch_size")

    return parser


_CONFIG_FLAGS = (
    "seed", "lam", "pretrain_epochs", "train_epochs", "batch_size",
    "learning_rate", "mode", "n_frames", "n_train", "n_eval", "k",
)


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values = json.loads(Path(args.config).read_text(encoding="utf-8"))
    for name in _CONFIG_FLAGS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return ExperimentConfig.from_dict(values)


def _write_resolved(config: ExperimentConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "resolved_config.json", config.to_dict())


def _cmd_gen_data(args) -> int:
    config = resolve_config(args)
    out = Path(args.out)
    _write_resolved(config, out)
    corpus = synth_generate(
        config.seed, config.n_frames, config.n_train, config.n_eval
    )
    save_data_dir(corpus, out)
    log.info(
        "wrote %d frames, %d/%d frame samples, %d/%d metaphor samples to %s",
        len(corpus.inventory), len(corpus.frame_train), len(corpus.frame_eval),
        len(corpus.metaphor_train), len(corpus.metaphor_eval), out,
    )
    return 0


def _cmd_pretrain(args) -> int:
    config = resolve_config(args)
    out = Path(args.out)
    _write_resolved(config, out)
    bundle = load_data_dir(args.data)
    run_pretrain(config, bundle, out_dir=out)
    return 0


def _cmd_train(args) -> int:
    config = resolve_config(args)
    out = Path(args.out)
    _write_resolved(config, out)
    bundle = load_data_dir(args.data)
    pretrained = None
    if args.checkpoint:
        pretrained = load_checkpoint(args.checkpoint)
        check_compatible(pretrained, bundle)
    elif config.mode != MODE_NO_FRAME_FINETUNE:
        raise FramemetError(
            f"train in mode {config.mode!r} requires --checkpoint"
        )
    run_train(config, bundle, pretrained, out_dir=out)
    return 0


def _cmd_eval(args) -> int:
    config = resolve_config(args)
    out = Path(args.out)
    _write_resolved(config, out)
    bundle = load_data_dir(args.data)
    model = load_checkpoint(args.checkpoint)
    check_compatible(model, bundle)
    metrics, _, _ = run_eval(config, model, bundle.metaphor_eval, out_dir=out)
    log.info("eval[%s]: P %.4f R %.4f F1 %.4f",
             config.mode, metrics.precision, metrics.recall, metrics.f1)
    return 0


def _cmd_ablate(args) -> int:
    config = resolve_config(args)
    out = Path(args.out)
    _write_resolved(config, out)
    bundle = load_data_dir(args.data)
    results = run_ablation(config, bundle, out)
    for mode, metrics in results:
        log.info("%-24s F1 %.4f", mode, metrics.f1)
    return 0


def _cmd_analyze(args) -> int:
    config = resolve_config(args)
    out = Path(args.out)
    _write_resolved(config, out)
    bundle = load_data_dir(args.data)
    model = load_checkpoint(args.checkpoint)
    check_compatible(model, bundle)
    _, summary = analyze_concepts(config, model, bundle.metaphor_eval, out_dir=out)
    log.info(
        "analyzed %d samples: top-1 differs on %.1f%% of positives, "
        "identical on %.1f%% of negatives",
        summary["samples"],
        100 * summary["positive_top1_differs"],
        100 * summary["negative_top1_identical"],
    )
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "pretrain-frames": _cmd_pretrain,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "analyze": _cmd_analyze,
}


def dispatch(argv) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; map onto our validation code
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except FramemetError as exc:
        print(f"framemet {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"framemet {args.command}: bad config file: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"framemet {args.command}: i/o error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(message)s"
    )
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
