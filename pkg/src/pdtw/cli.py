"""Command-line entry point: ``pdtw discover | eval | synth``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .classfile import read_pairs
from .config import PipelineConfig, load_config
from .errors import PdtwError
from .evaluation import evaluate, load_gold
from .pipeline import STATS_FILE, read_manifest, run_discover
from .synth import SynthSpec, generate, write_corpus
from .vad import read_masks

log = logging.getLogger("pdtw")


def _discover_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("manifest", help="text file with one input path per line")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--alpha", type=float)
    p.add_argument("--window-frames", type=int, dest="L")
    p.add_argument("--shift-frames", type=int, dest="S")
    p.add_argument("--downsample-frames", type=int, dest="M")
    p.add_argument("--knn", type=int, dest="k")
    p.add_argument("--expand-frames", type=int, dest="E")
    p.add_argument("--min-path-steps", type=int, dest="L_min")
    p.add_argument("--calib-samples", type=int, dest="n_calib_samples")
    p.add_argument("--seed", type=int, dest="rng_seed")
    p.add_argument("--threads", type=int, dest="thread_count")
    p.add_argument("--no-vad", action="store_const", const=False, dest="vad_enabled")
    p.add_argument("--features", choices=("mfcc", "files"), dest="feature_source")
    p.add_argument("--dtw-cost", choices=("raw", "log"), dest="dtw_cost_mode")
    p.add_argument("--norm-scope", choices=("per-file", "per-corpus"), dest="normalization_scope")
    p.add_argument("--csv-frame-shift", type=float, dest="csv_frame_shift")
    p.add_argument("--dump-candidates", action="store_true")


_OVERRIDES = ("alpha", "L", "S", "M", "k", "E", "L_min", "n_calib_samples", "rng_seed",
              "thread_count", "vad_enabled", "feature_source", "dtw_cost_mode",
              "normalization_scope", "csv_frame_shift")


def cmd_discover(args) -> int:
    config = load_config(args.config) if args.config else PipelineConfig()
    config = config.with_overrides(**{k: getattr(args, k) for k in _OVERRIDES})
    inputs = read_manifest(args.manifest)
    result = run_discover(config, inputs, args.out, dump_candidates=args.dump_candidates)
    sys.stdout.write(result.stats.as_text())
    return 0


def _frame_geometry(args) -> tuple[float, float]:
    shift, length = args.frame_shift, args.frame_length
    stats = Path(args.masks).with_name(STATS_FILE)
    if (shift is None or length is None) and stats.exists():
        kv = dict(line.split("=", 1) for line in stats.read_text().splitlines() if "=" in line)
        shift = float(kv["frame_shift"]) if shift is None else shift
        length = float(kv["frame_length"]) if length is None else length
    shift = 0.010 if shift is None else shift
    return shift, (shift if length is None else length)


def cmd_eval(args) -> int:
    shift, length = _frame_geometry(args)
    masks = read_masks(args.masks, shift, length)
    gold = load_gold(args.phones, args.words)
    pairs = read_pairs(args.pairs, known_files=masks.keys())
    report = evaluate(pairs, gold, masks, tolerance=args.tolerance)
    sys.stdout.write(report.as_table())
    sys.stdout.write(report.as_text())
    if args.out:
        Path(args.out).write_text(report.as_text())
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(n_words=args.words, instances=args.instances, noise=args.noise,
                     warp=args.warp, background_seconds=args.background_seconds,
                     n_files=args.files, seed=args.seed)
    corpus = write_corpus(generate(spec), args.out)
    print(f"wrote {len(corpus.matrices)} feature files and {len(corpus.planted)} planted "
          f"instances to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdtw", description="Probabilistic DTW pattern discovery")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", help="find recurring pattern pairs")
    _discover_args(p)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("eval", help="score a pairs file against gold tiers")
    p.add_argument("--pairs", required=True)
    p.add_argument("--phones", required=True)
    p.add_argument("--words", required=True)
    p.add_argument("--masks", required=True, help="masks.tsv written by discover")
    p.add_argument("--frame-shift", type=float)
    p.add_argument("--frame-length", type=float)
    p.add_argument("--tolerance", type=float, default=0.030)
    p.add_argument("--out", help="write the key=value report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a planted-pattern feature corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--words", type=int, default=20)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--warp", type=float, default=0.2)
    p.add_argument("--background-seconds", type=float, default=600.0)
    p.add_argument("--files", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PdtwError, OSError) as exc:
        print(f"pdtw {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
