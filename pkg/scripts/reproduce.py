"""Run the experiment sweeps and write CSVs, summaries and SVG charts.

    python3 scripts/reproduce.py                 # acceptance subset (~1 h on one core)
    python3 scripts/reproduce.py --full          # every scheme on every grid, both bandwidths
    python3 scripts/reproduce.py --workers 4

Successful runs are cached under <out-dir>/cache, so an interrupted sweep
resumes where it stopped and the acceptance tests reuse the results.
"""
import argparse
import sys
import time
from pathlib import Path

from mecoffload.harness import EXPERIMENTS, ExperimentSpec, acceptance_specs, run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--out-dir", type=Path, default=ROOT / "results")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    seeds = tuple(range(args.seeds))
    if args.full:
        specs = [ExperimentSpec(e, seeds=seeds, bandwidths=(1e7, 5e7)) for e in EXPERIMENTS]
    else:
        specs = acceptance_specs(seeds)
    failed = 0
    for spec in specs:
        start = time.perf_counter()
        table = run_experiment(spec, args.out_dir / ("full" if args.full else "acceptance"),
                               args.workers, args.out_dir / "cache",
                               progress=lambda r: print(f"  {r.scheme} {r.value:g} seed={r.seed} "
                                                        f"{r.status} {r.utility:.4f}", flush=True))
        bad = sum(r.status != "ok" for r in table.rows)
        failed += bad
        print(f"{spec.experiment}: {len(table.rows)} runs, {bad} failed, "
              f"{time.perf_counter() - start:.0f}s", flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
