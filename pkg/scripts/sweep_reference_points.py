#!/usr/bin/env python3
"""Reproduce the design-point table of the six shipped configurations.

Runs the reference-points sweep over the four workload networks and
prints the latency/resource/power summary next to the Pareto flags;
optionally writes the CSV (first argument).
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from convaccel.dse import enumerate_points, load_sweep, pareto_front, write_csv

HERE = os.path.dirname(os.path.abspath(__file__))
SWEEP = os.path.join(HERE, "..", "data", "sweeps", "reference_points.sw")


def main():
    spec = load_sweep(SWEEP)
    points = enumerate_points(spec)
    if len(sys.argv) > 1:
        with open(sys.argv[1], "w", encoding="utf-8") as fh:
            write_csv(points, spec, fh)
        print(f"wrote {sys.argv[1]}")
    names = [net.name for net in spec.workloads]
    header = f"{'point':<8}{'FREQ':>6}{'ICP':>5}{'OCP':>5}{'PACK':>6}{'DSP':>6}{'W':>8}"
    header += "".join(f"{n[:10]:>12}" for n in names) + f"{'pareto':>8}"
    print(header)
    for i, p in enumerate(points, start=1):
        row = (
            f"{'#%d' % i:<8}{p.fields['FREQ']:>6.0f}{p.fields['ICP']:>5}"
            f"{p.fields['OCP']:>5}{p.fields['APACK']:>6}"
            f"{p.metrics['dsp']:>6}{p.metrics['power']:>8.3f}"
        )
        row += "".join(f"{p.metrics[f'latency:{n}']:>12.3f}" for n in names)
        row += f"{'yes' if (p.feasible and not p.dominated) else 'no':>8}"
        print(row)
    front = pareto_front(points, spec.objectives)
    print(f"\n{len(front)} of {len(points)} points on the Pareto front "
          f"(objectives: {', '.join(spec.objectives)})")


if __name__ == "__main__":
    main()
