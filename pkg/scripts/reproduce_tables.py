#!/usr/bin/env python3
"""Reproduce every benchmark table and write CSV + markdown into an output dir.

Usage:
    python3 scripts/reproduce_tables.py --out results/ [--fast] [--jobs N] [--tables 1 2 3]

Full-size runs take ~15 minutes total (dominated by the fine 1-D and 2-D
reference solves); --fast substitutes the coarse grids and finishes in well
under a minute.
"""

from __future__ import annotations

import argparse
import pathlib
import sys
import time

from fracpg.report import ConvergenceReport, emit_markdown, emit_report
from fracpg.study import expected_rates, run_study, table_studies


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=pathlib.Path, default=pathlib.Path("results"))
    parser.add_argument("--fast", action="store_true", help="coarse grids, <1 min total")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers per table")
    parser.add_argument(
        "--tables", type=int, nargs="+", default=[1, 2, 3, 4, 5], help="which tables to run"
    )
    args = parser.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)

    for table in args.tables:
        configs, value = table_studies(table, fast=args.fast, jobs=args.jobs)
        start = time.perf_counter()
        rows = []
        for config in configs:
            rows.extend(run_study(config).rows)
        report = ConvergenceReport(tuple(rows))
        elapsed = time.perf_counter() - start

        csv_path = args.out / f"table{table}.csv"
        emit_report(report, "csv", csv_path)
        md_path = args.out / f"table{table}.md"
        md_path.write_text(
            emit_markdown(report, value=value, theory=expected_rates(report, value))
        )
        print(f"table {table}: {len(rows)} rows in {elapsed:.1f}s -> {csv_path}, {md_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
