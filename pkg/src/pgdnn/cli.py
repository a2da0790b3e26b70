"""Command-line entry point: ``pgdnn {gen-data,train-one,run-grid,report}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from . import datagen, harness
from .network import parse_scheme

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

log = logging.getLogger("pgdnn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; this tool reserves 2 for runtime failures.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pgdnn", description="Physics-guided DNN plate-frequency experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_default):
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--out-dir", type=Path, default=Path(out_default))

    def training(p):
        p.add_argument("--ensemble", type=int, default=harness.ENSEMBLE_SIZE, help="replicates per config")
        p.add_argument(
            "--target-scale",
            choices=datagen.TARGET_SCALES,
            default="log",
            help="standardize log-frequency (default) or raw Hz",
        )

    p = sub.add_parser("gen-data", help="write all dataset CSVs")
    common(p, "data")

    p = sub.add_parser("train-one", help="train a single configuration")
    common(p, "out")
    training(p)
    p.add_argument("--train-size", type=int, required=True, choices=datagen.SUBSET_SIZES)
    p.add_argument("--physics", default="none", help="comma list from W,D,G, or none")
    p.add_argument("--layers", default="none", help="comma list of layers or a named scheme (1-4, 2-4, 2-5)")

    p = sub.add_parser("run-grid", help="run the full or a filtered experiment grid")
    common(p, "out")
    training(p)
    p.add_argument("--train-size", type=_int_list, action="append", help="filter; repeatable or comma list")
    p.add_argument("--physics", action="append", help="filter; repeatable (e.g. --physics D --physics W,D)")
    p.add_argument("--layers", action="append", help="filter; repeatable (e.g. --layers 2,3,4)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (0 = all cores)")

    p = sub.add_parser("report", help="re-aggregate saved results")
    p.add_argument("--out-dir", type=Path, default=Path("out"))
    return parser


def cmd_gen_data(args) -> int:
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    grid = datagen.build_full_grid(args.seed)
    pool, test1 = datagen.split_train_independent(grid, args.seed)
    datagen.write_csv(grid, out / "grid.csv")
    datagen.write_csv(pool, out / "pool_261.csv")
    datagen.write_csv(test1, out / "test1.csv")
    datagen.write_csv(datagen.build_test2(args.seed), out / "test2.csv")
    for size in datagen.SUBSET_SIZES:
        subset = datagen.nested_subset(pool, size, args.seed)
        fit, val = datagen.split_validation(subset, args.seed)
        datagen.write_csv(subset, out / f"subset_{size:03d}.csv")
        datagen.write_csv(fit, out / f"train_{size:03d}.csv")
        datagen.write_csv(val, out / f"validation_{size:03d}.csv")
    print(f"wrote datasets to {out}")
    return EXIT_OK


def cmd_train_one(args) -> int:
    try:
        physics = harness.parse_physics(args.physics)
        scheme = parse_scheme(args.layers)
        config = harness.ExperimentConfig(physics, scheme, args.train_size, args.ensemble, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = harness.run_ensemble(config, target_scale=args.target_scale, keep_records=True)
    out = args.out_dir
    harness.save_result(result, out / "results")
    harness.write_loss_histories(result, out / "loss")
    harness.write_trace(result, out / f"trace_{config.config_id}.csv")
    for name, s in result.summaries.items():
        print(f"{config.config_id} {name}: mean {s.mean:.3f}%  median {s.median:.3f}%  "
              f"std {s.std:.3f}%  min {s.min:.3f}%  max {s.max:.3f}%")
    return EXIT_OK


def _grid_filters(args):
    sizes = None if not args.train_size else sorted({s for group in args.train_size for s in group})
    try:
        physics = None if not args.physics else [harness.parse_physics(p) for p in args.physics]
        schemes = None if not args.layers else [parse_scheme(s) for s in args.layers]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if sizes and any(s not in datagen.SUBSET_SIZES for s in sizes):
        raise UsageError(f"training sizes must come from {datagen.SUBSET_SIZES}")
    return sizes, physics, schemes


def cmd_run_grid(args) -> int:
    sizes, physics, schemes = _grid_filters(args)
    if args.ensemble < 1:
        raise UsageError("--ensemble must be at least 1")
    configs = harness.enumerate_grid(args.seed, args.ensemble, sizes, physics, schemes)
    if not configs:
        raise UsageError("the filters select no configuration")
    jobs = args.jobs or os.cpu_count() or 1
    out = args.out_dir
    results_dir = out / "results"
    log.info("running %d configs x %d replicates with %d job(s)", len(configs), args.ensemble, jobs)

    def on_result(result):
        harness.save_result(result, results_dir)
        harness.write_trace(result, out / "traces" / f"{result.config_id}.csv")

    (out / "traces").mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        harness.run_grid(configs, jobs, args.target_scale, on_result)
    except KeyboardInterrupt:
        log.warning("interrupted; writing report for the configs finished so far")
        _write_report(out)
        return EXIT_RUNTIME
    elapsed = time.perf_counter() - start
    _write_report(out, {"elapsed_seconds": elapsed, "jobs": jobs, "configs_run": len(configs)})
    print(f"{len(configs)} configs, {len(configs) * args.ensemble} training runs in {elapsed:.0f} s; report in {out}")
    return EXIT_OK


def _write_report(out: Path, run_info: dict | None = None) -> None:
    results_dir = out / "results"
    results = harness.load_results(results_dir) if results_dir.is_dir() else []
    if not results:
        return
    rep = harness.report(results)
    if run_info:
        rep.summary["run"] = run_info
    harness.write_report(rep, out)


def cmd_report(args) -> int:
    results_dir = args.out_dir / "results"
    if not results_dir.is_dir() or not any(results_dir.glob("*.json")):
        raise UsageError(f"no saved results under {results_dir}")
    _write_report(args.out_dir)
    print(f"report written to {args.out_dir}")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-one": cmd_train_one,
    "run-grid": cmd_run_grid,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pgdnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, OSError, ValueError) as exc:
        print(f"pgdnn: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
