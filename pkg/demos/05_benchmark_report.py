"""A miniature multi-seed benchmark, end to end.

Runs HAMD, SA and tabu on one instance from three seeds with a fixed
iteration budget, writes one JSON record per run, and renders the
summary tables as text. The same flow is available from the command line:

    cubic-portfolio bench --kind multiseed --n 60 --k 12 --budget-iters 300 --out runs/
    cubic-portfolio report --results runs/records --out runs/report

    python demos/05_benchmark_report.py
"""

import tempfile
from pathlib import Path

from cubic_portfolio.bench import ExperimentSpec, run_experiment, table_to_text, tables_for

with tempfile.TemporaryDirectory() as tmp:
    spec = ExperimentSpec(kind="multiseed", sizes=((60, 12),), budget_iters=300, out=tmp)
    records, summary = run_experiment(spec, fmt="table-text")
    print(f"{len(records)} records, e.g. {sorted(p.name for p in Path(tmp, 'records').iterdir())[0]}")
    for table in tables_for(summary):
        print(f"\n[{table.name}]")
        print(table_to_text(table))
