"""
Benchmark tables
================

Run one of the four benchmark examples on a short level list and write its
CSV tables, iteration logs and field dumps. Usage:

    python demos/04_example_tables.py [example] [levels] [outdir]

e.g. ``python demos/04_example_tables.py 1 4,8,16 out/ex1``.
"""
import sys

from reactcoef.experiments import run_example
from reactcoef.report import table_csv, write_report

example = int(sys.argv[1]) if len(sys.argv) > 1 else 1
levels = tuple(int(v) for v in sys.argv[2].split(",")) if len(sys.argv) > 2 else (4, 8, 16)
out = sys.argv[3] if len(sys.argv) > 3 else f"out/example{example}"

report = run_example(example, seed=0, levels=levels, keep_fields=True)
for name, rows in report["tables"].items():
    print(f"-- {name}")
    print(table_csv(rows))

files = write_report(report, out)
print(f"{len(files)} files written to {out}")
