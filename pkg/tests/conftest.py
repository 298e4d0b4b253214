import os
import random

import numpy as np
import pytest

from convaccel import AccelConfig, DfpScheme, LayerSpec, PoolSpec, QFilterBank, QTensor3

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(REPO_ROOT, "data")


@pytest.fixture
def data_dir():
    return DATA_DIR


def random_tensor(rng: random.Random, h, x, c, frac=None) -> QTensor3:
    frac = rng.randint(0, 7) if frac is None else frac
    vals = [rng.randint(-128, 127) for _ in range(h * x * c)]
    return QTensor3(h, x, c, vals, frac)


def random_bank(rng: random.Random, co, f, ci, wf=None, bf=None) -> QFilterBank:
    wf = rng.randint(0, 7) if wf is None else wf
    bf = rng.randint(0, 7) if bf is None else bf
    weights = [rng.randint(-128, 127) for _ in range(co * f * f * ci)]
    biases = [rng.randint(-128, 127) for _ in range(co)]
    return QFilterBank(co, f, f, ci, weights, biases, wf, bf)


def random_scheme(rng: random.Random) -> DfpScheme:
    fi = rng.randint(0, 7)
    fp = rng.randint(0, 7)
    fb = rng.randint(0, 7)
    # Keep the shift window small enough that outputs stay informative.
    fo = rng.randint(max(-8, fi + fp - 12), min(15, fi + fp + 2))
    return DfpScheme(fi, fp, fb, fo)


def random_layer(rng: random.Random, h, x, ci, co, *, pool_ok=True) -> LayerSpec:
    f = rng.choice((1, 3))
    if f == 1:
        p = 0
    else:
        p = rng.choice((0, 1))
    s = rng.choice((1, 2))
    pool = None
    if pool_ok and rng.random() < 0.4:
        pool = PoolSpec(rng.choice((2, 3)))
    return LayerSpec(f, s, p, co, rng.random() < 0.5, pool, random_scheme(rng))


def random_instance(rng: random.Random, *, max_hw=10, max_ch=12, pool_ok=True):
    """A legal (input, bank, spec) triple with bounded size."""
    while True:
        h, x = rng.randint(1, max_hw), rng.randint(1, max_hw)
        ci, co = rng.randint(1, max_ch), rng.randint(1, max_ch)
        spec = random_layer(rng, h, x, ci, co, pool_ok=pool_ok)
        ho = (h + 2 * spec.padding - spec.filter) // spec.stride + 1
        wo = (x + 2 * spec.padding - spec.filter) // spec.stride + 1
        if ho < 1 or wo < 1:
            continue
        if spec.pool and (ho < spec.pool.window or wo < spec.pool.window):
            continue
        return (
            random_tensor(rng, h, x, ci, frac=spec.scheme.input_frac),
            random_bank(
                rng, co, spec.filter, ci, wf=spec.scheme.weight_frac, bf=spec.scheme.bias_frac
            ),
            spec,
        )


def wide_open_config(**overrides) -> AccelConfig:
    """A configuration whose budgets never bind; tests override what they probe."""
    values = dict(
        freq_mhz=100.0,
        apack=8,
        ppack=8,
        icp=16,
        ocp=8,
        pe_dsp=8,
        filter_max=3,
        win_x_chin_pad_max=1 << 20,
        filter_x_filter_x_chin_max=1 << 20,
        chout_x_filter_x_filter_x_chin_max=1 << 24,
        chout_max=1 << 16,
        pwin_x_pch_max=1 << 20,
        pch_max=1 << 16,
    )
    values.update(overrides)
    return AccelConfig(**values)


def seeded(seed: int) -> random.Random:
    return random.Random(seed)


def np_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
