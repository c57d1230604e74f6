"""Throughput of the compiled and numpy walk kernels.

    python3 benchmarks/bench_kernels.py [--paths N] [--repeat K] [--json out.json]

For each step law both backends simulate the same exit-time block (same
keys, same radius) and the steps per second are reported together with the
speedup.  The two backends must return identical exit times; a mismatch
aborts the run.
"""
from __future__ import annotations

import argparse
import json
import logging
import time

import numpy as np

from exitwalk import (DiscreteRadial, FixedSubsetRademacher, GaussianSteps, RandomSubsetRademacher,
                      TypeWitness)
from exitwalk import _kernels_py as py
from exitwalk.rng import stream_keys

log = logging.getLogger("bench")

# (label, law, p, r): radii chosen so E T is a few hundred steps
CASES = [
    ("scalar +-1", DiscreteRadial(1, (1.0,), (1.0,), "axis"), 2.0, 16.0),
    ("gaussian d=2", GaussianSteps((1.0, 1.0)), 2.0, 16.0),
    ("gaussian d=8", GaussianSteps((1.0,) * 8), 2.0, 40.0),
    ("fixed subset k=4, p=4", FixedSubsetRademacher(4, (0, 1, 2, 3)), 4.0, 12.0),
    ("random subset d=64 k=1, p=4", RandomSubsetRademacher(64, 1), 4.0, 8.0),
    ("radial mixture d=3", DiscreteRadial(3, (0.5, 2.0, 7.0), (0.5, 0.3, 0.2)), 2.0, 30.0),
    ("type witness N=2", TypeWitness(((1.0, 0.0), (0.0, 1.0))), 2.0, 16.0),
]


def _time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(paths: int, repeat: int) -> list[dict]:
    try:
        from exitwalk import _kernels as cy
    except ImportError:
        cy = None
        log.warning("compiled extension not available; timing the numpy kernels only")
    rows = []
    for label, dist, p, r in CASES:
        ks = dist.kernel_spec()
        keys = stream_keys(1, 0, paths)
        cap = 10 ** 6
        t_py, out_py = _time(lambda: py.exit_times(*ks.args(), keys, 0, p, r, cap, 0.0), repeat)
        steps = int(out_py.sum())
        row = {"law": label, "paths": paths, "steps": steps, "python_s": t_py,
               "python_steps_per_s": steps / t_py}
        if cy is not None:
            t_cy, out_cy = _time(lambda: cy.exit_times(*ks.args(), keys, 0, p, r, cap, 0.0), repeat)
            if not np.array_equal(out_cy, out_py):
                raise SystemExit(f"{label}: backends disagree")
            row.update(cython_s=t_cy, cython_steps_per_s=steps / t_cy, speedup=t_py / t_cy)
        rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--paths", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the rows to this file")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    rows = run(args.paths, args.repeat)
    print(f"{'law':<30} {'steps':>10} {'numpy Msteps/s':>15} {'cython Msteps/s':>16} {'speedup':>8}")
    for t in rows:
        cy_rate = f"{t['cython_steps_per_s'] / 1e6:16.1f}" if "cython_s" in t else f"{'-':>16}"
        speed = f"{t['speedup']:8.1f}" if "speedup" in t else f"{'-':>8}"
        print(f"{t['law']:<30} {t['steps']:>10} {t['python_steps_per_s'] / 1e6:15.2f} {cy_rate} {speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
