#!/usr/bin/env python3
"""Regenerate the six reference accelerator configurations under data/configs/.

The six points walk the tuning path of the measured implementations:
OCP doubles, then the packing factors double, then ICP doubles, then the
clock steps 100/200/300 MHz.  The buffer budgets are shared and sized so
all four workload networks are legal (the largest layers split).
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from convaccel.config import AccelConfig, save_config

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "data", "configs")

# Shared buffer budgets (bytes).  Sized against the workload maxima:
# input rows up to (28+2)*512 = 15360, windows up to 9*512 = 4608, pool
# rows up to 14336; the weight OCM holds 64 output channels of a
# 3x3x512 layer.
BUDGETS = dict(
    filter_max=3,
    win_x_chin_pad_max=16384,
    filter_x_filter_x_chin_max=4608,
    chout_x_filter_x_filter_x_chin_max=294912,
    chout_max=512,
    pwin_x_pch_max=14336,
    pch_max=512,
)

POINTS = (
    ("conf1", 100.0, 16, 8, 8),
    ("conf2", 100.0, 16, 16, 8),
    ("conf3", 100.0, 16, 16, 16),
    ("conf4", 100.0, 32, 16, 16),
    ("conf5", 200.0, 32, 16, 16),
    ("conf6", 300.0, 32, 16, 16),
)


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    for name, freq, icp, ocp, pack in POINTS:
        cfg = AccelConfig(
            freq_mhz=freq,
            apack=pack,
            ppack=pack,
            icp=icp,
            ocp=ocp,
            pe_dsp=ocp,
            name=name,
            **BUDGETS,
        )
        path = os.path.join(OUT_DIR, f"{name}.cfg")
        save_config(cfg, path)
        print(f"{name}: FREQ={freq:g} ICP={icp} OCP={ocp} PACK={pack} -> {path}")


if __name__ == "__main__":
    main()
