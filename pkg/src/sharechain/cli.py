"""``sharechain`` command-line interface.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .cascade import ChainCascade, InferenceError, TrainingError, train_cascade
from .chains import ChainError, parse_chain_label
from .config import ConfigError, ExperimentConfig
from .evaluation import evaluate_cascade, summary_line, write_report
from .features import FeatureError, extract_all, extract_batch, normalize_subset, read_jsonl, write_jsonl
from .separability import SeparabilityError, separability_report
from .simulator.dataset import SPLITS, DatasetManifest, build_dataset


class UsageError(Exception):
    """Bad arguments or configuration: exit status 2."""


def _load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        return ExperimentConfig.load(path)
    except FileNotFoundError as exc:
        raise UsageError(f"config file not found: {path}") from exc
    except ConfigError as exc:
        raise UsageError(f"invalid config: {exc}") from exc


def _read_records(path: str, config: ExperimentConfig | None = None):
    try:
        if config is None:
            return read_jsonl(path)
        return read_jsonl(path, config.platforms, config.max_len)
    except (ValueError, ChainError, KeyError) as exc:
        raise UsageError(f"{path}: malformed feature file ({exc})") from exc


def _write_json(path: str, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    seed = config.seed if args.seed is None else args.seed
    manifest = build_dataset(args.sources, config.profiles, config.universe(), config.initial_qualities, args.out,
                             seed, crop=config.crop, fractions=config.split, threads=args.threads)
    counts = {s: len(manifest.split(s)) for s in SPLITS}
    print(f"wrote {len(manifest.entries)} files to {args.out} ({', '.join(f'{k}={v}' for k, v in counts.items())})")
    return 0


def cmd_extract(args) -> int:
    try:
        subset = normalize_subset(args.features)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    manifest_path = Path(args.manifest)
    manifest = DatasetManifest.load(manifest_path)
    entries = manifest.entries if args.split is None else manifest.split(args.split)
    root = manifest_path.parent
    platforms, max_len = manifest.platforms or None, manifest.max_len or None
    items = [(e.path, root / e.path, parse_chain_label(e.label, platforms, max_len)) for e in entries]
    records = extract_batch(items, subset, threads=args.threads)
    write_jsonl(records, args.out)
    print(f"extracted {'+'.join(subset)} for {len(records)} files -> {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args.config)
    train = _read_records(args.train, config)
    val = _read_records(args.val, config)
    if not train:
        raise UsageError(f"training file {args.train} is empty")
    if not val:
        raise UsageError(f"validation file {args.val} is empty")
    try:
        model = train_cascade(train, val, config.cascade_config(args.informed))
    except (TrainingError, ChainError, KeyError) as exc:
        raise UsageError(f"training failed: {exc}") from exc
    model.save(args.out)
    for w in model.warnings_:
        print(f"warning: {w}", file=sys.stderr)
    print(f"model written to {args.out}")
    return 0


def _load_model(path: str) -> ChainCascade:
    try:
        return ChainCascade.load(path)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{path}: invalid model file ({exc})") from exc


def cmd_infer(args) -> int:
    model = _load_model(args.model)
    paths = list(args.images)
    if paths == ["-"]:
        paths = [line.strip() for line in sys.stdin if line.strip()]
    status = 0
    for path in paths:
        try:
            data = Path(path).read_bytes()
            rec = extract_all(data, model.features_, id=path)
            out = model.decode([rec])[0]
        except (OSError, FeatureError, InferenceError) as exc:
            print(f"{path}: error: {exc}", file=sys.stderr)
            status = 1
            continue
        print(f"{path}\t{out.chain}\t{int(out.rejected)}")
    return status


def cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    records = _read_records(args.test)
    if not records:
        raise UsageError(f"test file {args.test} is empty")
    try:
        reports = evaluate_cascade(model, records, single_feature=args.single_feature)
    except (InferenceError, ChainError, KeyError, ValueError) as exc:
        raise UsageError(f"evaluation failed: {exc}") from exc
    write_report(reports, model, args.out, single_feature=args.single_feature, csv_dir=args.csv_dir)
    print(summary_line(reports))
    return 0


def cmd_separability(args) -> int:
    records = _read_records(args.features)
    unlabeled = [r.id for r in records if r.label is None]
    if unlabeled:
        raise UsageError(f"{len(unlabeled)} record(s) have no label, e.g. {unlabeled[0]!r}")
    if not records:
        raise UsageError(f"feature file {args.features} is empty")
    try:
        names = normalize_subset(args.descriptors) if args.descriptors else records[0].available()
        X = np.hstack([np.vstack([np.asarray(r.get(n), dtype=float) for r in records]) for n in names])
        doc = separability_report(X, [r.label for r in records], args.metric, standardized=args.standardize)
    except (SeparabilityError, KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    doc["descriptors"] = list(names)
    _write_json(args.out, doc)
    print(f"{args.metric} report for {len(records)} samples -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sharechain", description="Sharing-chain reconstruction for JPEG images.")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="build a synthetic chain dataset")
    s.add_argument("--config")
    s.add_argument("--sources", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("extract", help="compute descriptors for a manifest")
    s.add_argument("--features", default="dct,meta,header")
    s.add_argument("--manifest", required=True)
    s.add_argument("--split", choices=SPLITS)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("train", help="train the cascade")
    s.add_argument("--config")
    s.add_argument("--train", required=True)
    s.add_argument("--val", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--informed", metavar="PLATFORM", help="stop backtracking after this platform")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("infer", help="reconstruct the chains of JPEG files")
    s.add_argument("--model", required=True)
    s.add_argument("images", nargs="+", help="image paths, or - to read paths from stdin")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("evaluate", help="per-step accuracy and rejection on a labelled set")
    s.add_argument("--model", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--single-feature", choices=("dct", "meta", "header"))
    s.add_argument("--csv-dir")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("separability", help="nearest-neighbour separability of a feature file")
    s.add_argument("--features", required=True)
    s.add_argument("--metric", choices=("lsr", "ier"), default="lsr")
    s.add_argument("--descriptors", help="comma-separated subset (default: all present)")
    s.add_argument("--standardize", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_separability)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sharechain {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, FeatureError, ValueError) as exc:
        print(f"sharechain {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
