"""Command-line experiment runner.

Subcommands: ``generate`` (datasets), ``train`` (classifiers from
<out>/train.csv), ``eval`` (ROC/summary from <out>/models and
<out>/test.csv), ``run`` (all three), ``sweep`` (one run per axis value).
All artifacts are plain CSV/text and byte-reproducible per seed.
"""

import argparse
import sys

from .experiment import (
    ConfigError,
    default_config,
    evaluate_saved,
    generate_phase,
    load_config,
    run,
    sweep,
    train_phase,
    validate_config,
)
from .sensing import load_dataset
from .svm import TrainingError

_DESC = "Cooperative spectrum sensing simulator and classifier toolkit"


def _add_common(parser):
    parser.add_argument("--config", metavar="PATH", help="JSON config file (built-in defaults if omitted)")
    parser.add_argument("--seed", type=int, metavar="U64", help="override the config seed")
    parser.add_argument("--out", metavar="DIR", help="output directory (overrides config output_dir)")


def _build_parser():
    parser = argparse.ArgumentParser(prog="cogsense", description=_DESC)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("generate", "generate the train/test datasets"),
        ("train", "train classifiers on <out>/train.csv"),
        ("eval", "evaluate saved models on <out>/test.csv"),
        ("run", "generate, train and evaluate in one go"),
    ]:
        _add_common(sub.add_parser(name, help=text))
    sw = sub.add_parser("sweep", help="repeat the run across one parameter axis")
    _add_common(sw)
    sw.add_argument(
        "--axis",
        required=True,
        choices=["sample_size", "snr_db", "num_sus", "train_size"],
    )
    sw.add_argument(
        "--values",
        required=True,
        metavar="V1,V2,...",
        help="comma-separated axis values",
    )
    sw.add_argument("--workers", type=int, default=1, help="parallel sub-runs (default 1)")
    return parser


def _load(args):
    if args.config:
        config = load_config(args.config)
    else:
        config = validate_config(default_config())
    if args.seed is not None:
        raw = dict(config.raw)
        raw["seed"] = args.seed
        config = validate_config(raw)
    out_dir = args.out or config.output_dir
    if not out_dir:
        raise ConfigError("output_dir", "missing key")
    return config, out_dir


def _parse_values(axis, text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        out.append(float(part) if axis == "snr_db" else int(part))
    if not out:
        raise ValueError("sweep needs a nonempty list of values")
    return out


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config, out_dir = _load(args)
        if args.command == "generate":
            generate_phase(config, out_dir)
        elif args.command == "train":
            import os

            train_path = os.path.join(out_dir, "train.csv")
            if not os.path.exists(train_path):
                raise FileNotFoundError(f"no training data at {train_path}; run 'generate' first")
            _, errors = train_phase(config, load_dataset(train_path), out_dir)
            for line in errors:
                print(f"warning: {line}", file=sys.stderr)
        elif args.command == "eval":
            evaluate_saved(config, out_dir)
        elif args.command == "run":
            run(config, out_dir)
        elif args.command == "sweep":
            values = _parse_values(args.axis, args.values)
            sweep(config, args.axis, values, out_dir, workers=args.workers)
    except (ConfigError, TrainingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
