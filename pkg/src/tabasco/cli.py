"""Command-line entry point.

Subcommands::

    tabasco generate --out DIR [simulator flags]
    tabasco select   --input DIR --out DIR [--eta 0.6 --epsilon 0.05 --threads N]
    tabasco baseline --input DIR --strategy {jsd-small,naive-cd} --out DIR
    tabasco evaluate --input DIR --partition FILE_OR_DIR --report FILE
    tabasco bench    [--config FILE] [--out DIR]

Exit codes: 0 success, 1 invalid input or arguments, 2 file-system problems,
3 internal errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import BenchConfig, format_summary, run_bench, write_bench_outputs
from .dataio import (DIAGNOSTIC_COLUMNS, PARTITION_COLUMNS, read_dataset, read_diagnostics,
                     read_partition, write_csv, write_dataset, write_partition)
from .errors import DataIOError, TabascoError, ValidationError
from .evaluation import BASELINES, REPORT_COLUMNS, outcomes_from_partition, run_baseline, score_selection
from .selection import SelectionConfig, select_all
from .simulator import SimulatorConfig, generate

log = logging.getLogger("tabasco")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3

REPORT_HELP = "report CSV columns: " + ", ".join(REPORT_COLUMNS)
SELECT_HELP = ("writes partition.csv (" + ", ".join(PARTITION_COLUMNS) + "), diagnostics.csv ("
               + ", ".join(DIAGNOSTIC_COLUMNS) + ") and run.json with the settings used")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 means I/O trouble here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _selection_args(p):
    d = SelectionConfig()
    p.add_argument("--eta", type=float, default=d.eta, help="variance-ratio threshold (default %(default)s)")
    p.add_argument("--epsilon", type=float, default=d.epsilon,
                   help="centroid-similarity tolerance (default %(default)s)")
    p.add_argument("--em-tol", type=float, default=d.em_tol, help="EM log-likelihood tolerance")
    p.add_argument("--em-max-iter", type=int, default=d.em_max_iter, help="EM iteration cap")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for per-class selection (default: available cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tabasco", description="Clean/noisy sample selection for noisy long-tailed data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = SimulatorConfig()
    g = sub.add_parser("generate", help="write a synthetic dataset with ground truth")
    g.add_argument("--classes", type=int, default=d.num_classes)
    g.add_argument("--max-size", type=int, default=d.max_class_size, help="size of the largest class")
    g.add_argument("--imbalance-factor", type=float, default=d.imbalance_factor,
                   help="smallest / largest class size")
    g.add_argument("--noise-type", choices=("sym", "asym"), default="sym")
    g.add_argument("--noise-ratio", type=float, default=d.noise_ratio)
    g.add_argument("--feature-dim", type=int, default=d.feature_dim)
    g.add_argument("--model-quality", type=float, default=d.model_quality)
    g.add_argument("--temperature", type=float, default=d.temperature)
    g.add_argument("--seed", type=int, default=d.seed)
    g.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("select", help="split every class into clean and noisy samples", description=SELECT_HELP)
    s.add_argument("--input", required=True, help="dataset directory")
    s.add_argument("--out", required=True, help="output directory")
    _selection_args(s)

    b = sub.add_parser("baseline", help="single-metric selection for comparison", description=SELECT_HELP)
    b.add_argument("--input", required=True)
    b.add_argument("--strategy", choices=BASELINES, required=True)
    b.add_argument("--out", required=True)
    _selection_args(b)

    e = sub.add_parser("evaluate", help="score a partition against true labels", description=REPORT_HELP)
    e.add_argument("--input", required=True, help="dataset directory (records need true labels)")
    e.add_argument("--partition", required=True, help="partition.csv or the directory holding it")
    e.add_argument("--report", required=True, help="report CSV to write")

    r = sub.add_parser("bench", help="run the sweep and print the acceptance summary")
    r.add_argument("--config", help="JSON file overriding bench settings")
    r.add_argument("--out", help="directory for acceptance.csv, runs.csv and details.json")
    return parser


def _selection_config(args) -> SelectionConfig:
    return SelectionConfig(eta=args.eta, epsilon=args.epsilon, em_tol=args.em_tol,
                           em_max_iter=args.em_max_iter, threads=args.threads)


def _run_info(command, dataset, config: SelectionConfig, **extra) -> dict:
    return {"command": command, "selection": config.as_dict(), "record_count": dataset.n,
            "num_classes": dataset.num_classes, "dataset_seed": dataset.manifest.get("seed"), **extra}


def cmd_generate(args) -> int:
    config = SimulatorConfig(num_classes=args.classes, max_class_size=args.max_size,
                             imbalance_factor=args.imbalance_factor, noise_type=args.noise_type,
                             noise_ratio=args.noise_ratio, feature_dim=args.feature_dim,
                             model_quality=args.model_quality, temperature=args.temperature, seed=args.seed)
    synthetic = generate(config)
    write_dataset(synthetic.dataset, args.out)
    print(f"wrote {synthetic.dataset.n} records to {args.out}")
    return EXIT_OK


def cmd_select(args) -> int:
    dataset = read_dataset(args.input)
    config = _selection_config(args)
    outcomes = select_all(dataset, config)
    write_partition(outcomes, args.out, run_info=_run_info("select", dataset, config))
    n_clean = sum(o.clean_ids.size for o in outcomes.values())
    print(f"selected {n_clean} of {dataset.n} samples as clean; partition in {args.out}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    dataset = read_dataset(args.input)
    config = _selection_config(args)
    outcomes = run_baseline(dataset, args.strategy, config)
    write_partition(outcomes, args.out, run_info=_run_info("baseline", dataset, config, strategy=args.strategy))
    n_clean = sum(o.clean_ids.size for o in outcomes.values())
    print(f"{args.strategy}: {n_clean} of {dataset.n} samples clean; partition in {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    dataset = read_dataset(args.input)
    assignments = read_partition(args.partition)
    part = Path(args.partition)
    diagnostics = read_diagnostics(part if part.is_dir() else part.parent)
    outcomes = outcomes_from_partition(assignments, dataset, diagnostics)
    report = score_selection(outcomes, dataset)
    write_csv(report.table(), REPORT_COLUMNS, args.report)
    micro = report.aggregate("micro")
    print(f"precision {micro['precision']:.4f} recall {micro['recall']:.4f}; report in {args.report}")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = BenchConfig.from_json(args.config) if args.config else BenchConfig()
    results, runs = run_bench(config)
    print(format_summary(results))
    if args.out:
        write_bench_outputs(results, runs, args.out)
        (Path(args.out) / "config.json").write_text(json.dumps(config.as_dict(), indent=2) + "\n",
                                                    encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "select": cmd_select,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DataIOError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except TabascoError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the internal exit code
        log.debug("unhandled error", exc_info=True)
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
