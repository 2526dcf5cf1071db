"""Optimal objective across the core-count and request-size levels, with CSV and gnuplot output.

    python demos/04_sweeps.py [out_dir] [replications]
"""
import sys
from pathlib import Path

from mecmig.harness import (
    SUMMARY_COLUMNS,
    SWEEP_COLUMNS,
    SweepSpec,
    gnuplot_script,
    run_sweep,
    summarize_sweep,
    write_csv,
)
from mecmig.scenario import ScenarioConfig

out = Path(sys.argv[1] if len(sys.argv) > 1 else "sweeps")
reps = int(sys.argv[2]) if len(sys.argv) > 2 else 10
cfg = ScenarioConfig()

for axis in ("cores", "request"):
    rows = run_sweep(cfg, SweepSpec(axis, replications=reps))
    table = summarize_sweep(rows)
    write_csv(rows, out / axis / "sweep.csv", SWEEP_COLUMNS)
    write_csv(table, out / axis / "sweep_summary.csv", SUMMARY_COLUMNS)
    (out / axis / "sweep.gp").write_text(gnuplot_script("sweep", "sweep_summary.csv"))
    print(axis)
    for row in table:
        print(f"  {row['level']:>8}: {row['optimal_mean']:.4f} +- {row['optimal_std']:.4f}")
