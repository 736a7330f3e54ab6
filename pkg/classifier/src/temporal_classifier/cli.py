"""Train/evaluate the fusion classifier on a pipeline-emitted pairs CSV."""

from __future__ import annotations

import argparse
import logging
import sys

from .data import load_pairs_csv
from .errors import ClassifierError
from .model import FusionModel
from .train import TrainConfig, evaluate, load_model, save_model, train, write_metrics

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="temporal-classifier")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="fine-tune on a pairs CSV")
    tr.add_argument("--pairs", required=True, help="training pairs CSV")
    tr.add_argument("--eval-pairs", help="held-out pairs CSV for the metrics file")
    tr.add_argument("--out", required=True, help="model output directory")
    tr.add_argument("--learning-rate", type=float, default=2e-5)
    tr.add_argument("--batch-size", type=int, default=4)
    tr.add_argument("--epochs", type=int, default=5)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--mixed-precision", action="store_true")

    ev = sub.add_parser("evaluate", help="accuracy of a saved model on a pairs CSV")
    ev.add_argument("--pairs", required=True)
    ev.add_argument("--model-dir", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "train":
            config = TrainConfig(
                learning_rate=args.learning_rate,
                batch_size=args.batch_size,
                epochs=args.epochs,
                mixed_precision=args.mixed_precision,
                seed=args.seed,
            )
            import torch

            torch.manual_seed(config.seed)
            model = FusionModel()
            dataset = load_pairs_csv(args.pairs)
            model, trace = train(model, dataset, config)
            out = save_model(model, config, args.out)
            eval_set = load_pairs_csv(args.eval_pairs) if args.eval_pairs else dataset
            accuracy = evaluate(model, eval_set)
            write_metrics(accuracy, trace, out / "metrics.json")
            logger.info("accuracy %.4f, final loss %.6f", accuracy, trace[-1])
        else:
            model = load_model(FusionModel(), args.model_dir)
            accuracy = evaluate(model, load_pairs_csv(args.pairs))
            print(f"{accuracy:.6f}")
    except ClassifierError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
