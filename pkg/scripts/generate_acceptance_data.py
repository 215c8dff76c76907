#!/usr/bin/env python3
"""Regenerate every committed acceptance dataset from configs/.

Completed sweeps are skipped (the CLI treats a matching, footer-complete CSV
as a no-op), so this is safe to re-run and to resume after interruption.
Order is cheap-first so partial runs leave the most useful artifacts.

Run from the repository root:  python scripts/generate_acceptance_data.py
The heavy tail (two L=6 sweeps, two L=7 sweeps, one L=7 steady solve) takes
hours of single-core time; pass --skip-heavy to stop before them.
"""

import argparse
import subprocess
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

CHEAP = [
    ("free", "configs/free_L200.json"),
    ("free", "configs/free_L6.json"),
    ("spectrum", "configs/fig4_L10.json"),
    ("spectrum", "configs/fig4_L7.json"),
    ("steady", "configs/fig3_L5_nav0p05_phi0.json"),
    ("steady", "configs/fig3_L5_nav0p05_phipi2.json"),
    ("steady", "configs/fig3_L5_nav0p05_phipi.json"),
    ("steady", "configs/fig3_L5_nav0p25_phi0.json"),
    ("steady", "configs/fig3_L5_nav0p25_phipi2.json"),
    ("steady", "configs/fig3_L5_nav0p25_phipi.json"),
    ("steady", "configs/fig3_L5_nav0p5_phi0.json"),
    ("steady", "configs/fig3_L5_nav0p5_phipi2.json"),
    ("steady", "configs/fig3_L5_nav0p5_phipi.json"),
    ("sweep", "configs/fig5_L5_phi0.json"),
    ("sweep", "configs/fig5_L5_phipi.json"),
]

SUPPLEMENT = [
    ("sweep", f"configs/supp_gamma_L4_{g}_{n}.json")
    for g in ("g0p5", "g1", "g2") for n in ("nav0p1", "nav0p5")
]

HEAVY = [
    ("sweep", "configs/fig2_L6_nav0p1.json"),
    ("sweep", "configs/fig2_L6_nav0p5.json"),
    ("sweep", "configs/fig5_L7_phi0.json"),
    ("sweep", "configs/fig5_L7_phipi.json"),
    ("steady", "configs/fig3_L7_nav0p05_phipi2.json"),
]


def run(cmd, cfg):
    t0 = time.time()
    print(f"=== {cmd} {cfg}", flush=True)
    proc = subprocess.run(
        [sys.executable, "-m", "fluxladder.cli", cmd, "--config", cfg],
        cwd=ROOT,
    )
    print(f"=== done ({time.time() - t0:.0f}s, exit {proc.returncode})", flush=True)
    return proc.returncode


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--skip-heavy", action="store_true")
    ap.add_argument("--skip-supplement", action="store_true")
    ap.add_argument("--only", choices=["cheap", "supplement", "heavy"])
    args = ap.parse_args()
    jobs = []
    if args.only:
        jobs = {"cheap": CHEAP, "supplement": SUPPLEMENT, "heavy": HEAVY}[args.only]
    else:
        jobs = list(CHEAP)
        if not args.skip_supplement:
            jobs += SUPPLEMENT
        if not args.skip_heavy:
            jobs += HEAVY
    failures = 0
    for cmd, cfg in jobs:
        failures += run(cmd, cfg) != 0
    print(f"all jobs done, {failures} failures", flush=True)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
