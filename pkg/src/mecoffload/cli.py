"""Command-line entry point: ``mecoffload run|summarize|replay``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig
from .harness import (ALL_SCHEMES, COLUMNS, EXPERIMENTS, SUMMARY_COLUMNS, ExperimentSpec,
                      ResultTable, SpecError, run_experiment, summarize, write_summary)

EXIT_OK, EXIT_PARTIAL, EXIT_SPEC = 0, 1, 2

EPILOG = f"""\
CSV columns (fixed order)
  <experiment>.csv          {", ".join(COLUMNS)}
  <experiment>_timing.csv   experiment, scheme, value, bandwidth, seed, wall_time
  <experiment>_traces.csv   experiment, scheme, value, bandwidth, seed, iteration,
                            relaxed_value, rounded_value   (convergence only)
  <experiment>_summary.csv  {", ".join(SUMMARY_COLUMNS)}

revenue is sum ln(accuracy), cost is -sum ln(delay), both over counted users.
status is ok, run_error, violation or error:<type>.

exit codes: 0 success, 1 some runs failed, 2 invalid spec or config
"""


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v)


def _seeds(text: str) -> tuple[int, ...]:
    """``10`` means seeds 0..9; ``3,7,9`` lists them; ``5-9`` is a range."""
    if "," in text:
        return tuple(int(v) for v in text.split(","))
    if "-" in text:
        lo, hi = text.split("-")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(range(int(text)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mecoffload", epilog=EPILOG,
                                     formatter_class=argparse.RawDescriptionHelpFormatter,
                                     description="Multi-cell MEC offloading experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment sweep", epilog=EPILOG,
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--values", type=_floats, default=(),
                     help="comma-separated sweep values (default: built-in grid)")
    run.add_argument("--seeds", type=_seeds, default=tuple(range(10)),
                     help="count N (seeds 0..N-1), list a,b,c or range lo-hi (default 10)")
    run.add_argument("--bandwidth", type=_floats, default=(1e7,),
                     help="comma-separated total bandwidths in Hz (default 1e7)")
    run.add_argument("--schemes", type=lambda s: tuple(s.split(",")), default=ALL_SCHEMES,
                     help=f"comma-separated subset of {','.join(ALL_SCHEMES)}")
    run.add_argument("--out-dir", type=Path, default=Path("results"))
    run.add_argument("--config", type=Path, help="JSON run configuration overriding defaults")
    run.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--cache-dir", type=Path, help="reuse successful runs stored here")

    summ = sub.add_parser("summarize", help="summary statistics of a result CSV")
    summ.add_argument("csv", type=Path)
    summ.add_argument("-o", "--output", type=Path, help="write here instead of stdout")

    rep = sub.add_parser("replay", help="re-run schemes on a saved scenario file")
    rep.add_argument("scenario", type=Path)
    rep.add_argument("--config", type=Path)
    rep.add_argument("--schemes", type=lambda s: tuple(s.split(",")), default=("proposed",))
    rep.add_argument("--out-dir", type=Path, help="save each run as <scheme>.json here")
    return parser


def _load_config(path: Path | None) -> RunConfig:
    return RunConfig() if path is None else RunConfig.load(path)


def cmd_run(args) -> int:
    spec = ExperimentSpec(args.experiment, args.values, args.bandwidth, args.seeds,
                          args.schemes, _load_config(args.config))
    total = len(spec.tasks())
    done = [0]

    def progress(row):
        done[0] += 1
        print(f"[{done[0]}/{total}] {row.scheme} value={row.value:g} seed={row.seed} "
              f"{row.status} utility={row.utility:.4f} ({row.wall_time:.1f}s)", file=sys.stderr)

    table = run_experiment(spec, args.out_dir, args.workers, args.cache_dir, progress)
    failed = [r for r in table.rows if r.status != "ok"]
    print(f"{len(table.rows)} runs, {len(failed)} failed; outputs in {args.out_dir}")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_summarize(args) -> int:
    text = write_summary(summarize(ResultTable.read_csv(args.csv)), args.output)
    if args.output is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_replay(args) -> int:
    from .baselines import SCHEMES, run_scheme
    from .scenario import Scenario

    unknown = set(args.schemes) - set(SCHEMES)
    if unknown:
        raise SpecError(f"unknown schemes {sorted(unknown)}")
    config = _load_config(args.config)
    scenario = Scenario.load(args.scenario)
    params = replace(config.params, num_subcarriers=scenario.num_subcarriers)
    status = EXIT_OK
    for name in args.schemes:
        res = run_scheme(name, scenario, params, config.outer)
        rep = res.report
        print(f"{name}: utility={rep.value:.6f} revenue={rep.revenue:.6f} cost={rep.cost:.6f} "
              f"infeasible={len(rep.infeasible_users)} iterations={res.trace.iterations} "
              f"converged={res.trace.converged}")
        if rep.violations and not set(rep.infeasible_users) <= set(res.flagged):
            status = EXIT_PARTIAL
        if args.out_dir is not None:
            args.out_dir.mkdir(parents=True, exist_ok=True)
            res.save(args.out_dir / f"{name}.json", config)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return {"run": cmd_run, "summarize": cmd_summarize, "replay": cmd_replay}[args.command](args)
    except (SpecError, ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
