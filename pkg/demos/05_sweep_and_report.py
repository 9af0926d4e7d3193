"""A detuning sweep end to end: config, checkpoints, manifest, report
===================================================================

``run_sweep`` solves every detuning of a config (warm-starting each point
from the previous one), writes a checkpoint, observables and snapshots per
point, and seals everything in a hashed manifest. ``report`` re-reads the
directory, checks the hashes and writes the summary tables. The same thing
is available as ``python3 -m rydberg_dqcp sweep`` / ``report``.
"""
import json
import tempfile
from pathlib import Path

from rydberg_dqcp.config import parse_config
from rydberg_dqcp.workflows import report, run_sweep

CONFIG = """
[lattice]
lx = 2
ly = 1

[model]
omega_over_u = 0.33
delta_over_u = 2.6, 2.9, 3.2, 3.5, 3.8

[dmrg]
chi_schedule = 16, 32

[sampling]
shots = 500
seed = 3
bulk = all
"""

cfg = parse_config(CONFIG)
with tempfile.TemporaryDirectory() as tmp:
    run = Path(tmp) / "sweep"
    manifest = run_sweep(cfg, run)
    print(f"{len(manifest.completed)} points complete, {len(manifest.failed)} failed")
    print("files per point:", sorted(p.name for p in (run / "p000").iterdir()))
    summary = report(run)
    print(json.dumps({k: summary[k] for k in ("completed", "signs", "delta_c")}, indent=1))
    print((run / "report" / "order_parameter.csv").read_text())
