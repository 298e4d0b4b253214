"""Bit-exact functional model of the accelerator pipeline.

One accelerator invocation computes MPOOL(ReLU(CONV(ia, weights, bias)))
with the ReLU and MPOOL stages optional.  The convolution walks output
channels in tiles of OCP (one PE per output channel) and input channels
in tiles of ICP (parallel multiplies feeding an adder tree); integer
addition is associative, so tiling never changes results and exists here
only to mirror the hardware loop structure.

When a layer's weights exceed the on-chip weight budget, the layer is
split along the output-channel dimension into secondary convolutions
that each re-stream the full input; their outputs concatenate back in
channel order, bit-exactly equal to the unsplit run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import AccelConfig
from .errors import AccumulatorOverflow, ConfigTooSmallError, ShapeError
from .quant import DfpScheme, I32_MAX, I32_MIN, rescale_block
from .tensors import QFilterBank, QTensor3


@dataclass(frozen=True)
class PoolSpec:
    """Max-pool window fused behind a convolution; only 2x2/s2 and 3x3/s2 exist."""

    window: int
    stride: int = 2

    def __post_init__(self):
        if self.window not in (2, 3):
            raise ValueError(f"pool window must be 2 or 3, got {self.window}")
        if self.stride != 2:
            raise ValueError(f"pool stride must be 2, got {self.stride}")


@dataclass(frozen=True)
class LayerSpec:
    """Geometry and post-processing flags of one accelerated layer."""

    filter: int
    stride: int
    padding: int
    co: int
    relu: bool
    pool: PoolSpec | None
    scheme: DfpScheme

    def __post_init__(self):
        if self.filter not in (1, 3):
            raise ValueError(f"filter must be 1 or 3, got {self.filter}")
        if self.stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {self.stride}")
        if self.filter == 1 and self.padding != 0:
            raise ValueError("1x1 filters require padding 0")
        if self.padding not in (0, 1):
            raise ValueError(f"padding must be 0 or 1, got {self.padding}")
        if self.co < 1:
            raise ValueError(f"co must be positive, got {self.co}")


def conv_out_dims(h: int, x: int, spec: LayerSpec) -> tuple[int, int]:
    ho = (h + 2 * spec.padding - spec.filter) // spec.stride + 1
    wo = (x + 2 * spec.padding - spec.filter) // spec.stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(
            f"{h}x{x} input too small for filter {spec.filter}, "
            f"stride {spec.stride}, padding {spec.padding}"
        )
    return ho, wo


def pool_out_dims(h: int, x: int, pool: PoolSpec) -> tuple[int, int]:
    if h < pool.window or x < pool.window:
        raise ShapeError(f"{h}x{x} input smaller than pool window {pool.window}")
    return (h - pool.window) // pool.stride + 1, (x - pool.window) // pool.stride + 1


def conv_exec(
    ia: QTensor3,
    bank: QFilterBank,
    spec: LayerSpec,
    *,
    icp: int | None = None,
    ocp: int | None = None,
) -> QTensor3:
    """Quantized convolution with optional fused ReLU.

    Padded positions contribute raw zero.  ``icp``/``ocp`` set the tile
    sizes; None means one tile spanning the full extent.
    """
    if bank.ci != ia.channels:
        raise ShapeError(f"bank expects {bank.ci} input channels, tensor has {ia.channels}")
    if bank.co != spec.co:
        raise ShapeError(f"bank has {bank.co} output channels, spec wants {spec.co}")
    if bank.fh != spec.filter:
        raise ShapeError(f"bank filter {bank.fh}x{bank.fw}, spec wants {spec.filter}")

    h, x, ci = ia.geom
    co, f, s, p = spec.co, spec.filter, spec.stride, spec.padding
    ho, wo = conv_out_dims(h, x, spec)
    icp = icp or ci
    ocp = ocp or co

    src = ia.as_3d().astype(np.int64)
    if p:
        padded = np.zeros((h + 2 * p, x + 2 * p, ci), dtype=np.int64)
        padded[p : p + h, p : p + x] = src
    else:
        padded = src
    w4 = bank.as_4d().astype(np.int64)

    acc = np.zeros((ho, wo, co), dtype=np.int64)
    for c0 in range(0, co, ocp):
        c1 = min(c0 + ocp, co)
        for k0 in range(0, ci, icp):
            k1 = min(k0 + icp, ci)
            part = np.zeros((ho, wo, c1 - c0), dtype=np.int64)
            for fy in range(f):
                for fx in range(f):
                    window = padded[fy : fy + s * ho : s, fx : fx + s * wo : s, k0:k1]
                    part += np.tensordot(window, w4[c0:c1, fy, fx, k0:k1], axes=([2], [1]))
            acc[:, :, c0:c1] += part

    if acc.size and (acc.min() < I32_MIN or acc.max() > I32_MAX):
        raise AccumulatorOverflow("convolution accumulator left the 32-bit range")
    out = rescale_block(acc, spec.scheme, bank.biases)
    if spec.relu:
        out = np.maximum(out, 0)
    return QTensor3(ho, wo, co, out.reshape(-1), spec.scheme.output_frac)


def mpool_exec(t: QTensor3, window: int, stride: int = 2) -> QTensor3:
    """Channel-wise max pool via the two-phase reduction.

    Phase one reduces the window rows into a result row (MAX between 3-D
    rows along the height); phase two reduces pixels within that row.
    Equals the direct window max by associativity of max.
    """
    pool = PoolSpec(window, stride)
    ho, wo = pool_out_dims(t.height, t.width, pool)
    v = t.as_3d()
    out = np.empty((ho, wo, t.channels), dtype=np.int8)
    for yo in range(ho):
        result_row = v[yo * stride].copy()
        for j in range(1, window):
            np.maximum(result_row, v[yo * stride + j], out=result_row)
        for xo in range(wo):
            result_pixel = result_row[xo * stride].copy()
            for k in range(1, window):
                np.maximum(result_pixel, result_row[xo * stride + k], out=result_pixel)
            out[yo, xo] = result_pixel
    return QTensor3(ho, wo, t.channels, out.reshape(-1), t.frac_bits)


def accel_exec(
    ia: QTensor3,
    bank: QFilterBank,
    spec: LayerSpec,
    *,
    icp: int | None = None,
    ocp: int | None = None,
) -> QTensor3:
    """Full accelerator invocation: CONV, then optional ReLU, then optional MPOOL."""
    out = conv_exec(ia, bank, spec, icp=icp, ocp=ocp)
    if spec.pool is not None:
        out = mpool_exec(out, spec.pool.window, spec.pool.stride)
    return out


@dataclass(frozen=True)
class SplitPlan:
    """Contiguous output-channel ranges, one secondary convolution per group."""

    groups: tuple[tuple[int, int], ...]

    @property
    def restreams(self) -> int:
        return len(self.groups)


def plan_split(bank_geom: tuple[int, int, int, int], cfg: AccelConfig) -> SplitPlan:
    """Greedy split of a parameter bank across the weight OCM budget.

    Packs the largest group size allowed by both the weight byte budget
    and the output-pixel capacity, then covers [0, co) with equal chunks.
    """
    co, fh, fw, ci = bank_geom
    per_out_bytes = fh * fw * ci
    group = min(cfg.chout_max, cfg.chout_x_filter_x_filter_x_chin_max // per_out_bytes)
    if group < 1:
        raise ConfigTooSmallError(
            f"one output channel needs {per_out_bytes} weight bytes but "
            f"CHOUTxFILTERxFILTERxCHIN_MAX is {cfg.chout_x_filter_x_filter_x_chin_max}"
        )
    groups = tuple((lo, min(lo + group, co)) for lo in range(0, co, group))
    return SplitPlan(groups)


def check_plan(plan: SplitPlan, bank_geom: tuple[int, int, int, int], cfg: AccelConfig) -> None:
    """Raise if a plan violates the split invariants for this geometry/config."""
    co, fh, fw, ci = bank_geom
    per_out_bytes = fh * fw * ci
    cursor = 0
    for lo, hi in plan.groups:
        if lo != cursor or hi <= lo:
            raise ValueError(f"groups are not contiguous ranges covering [0, {co})")
        size = hi - lo
        if size > cfg.chout_max:
            raise ValueError(f"group [{lo}, {hi}) exceeds CHOUT_MAX={cfg.chout_max}")
        if size * per_out_bytes > cfg.chout_x_filter_x_filter_x_chin_max:
            raise ValueError(f"group [{lo}, {hi}) exceeds the weight OCM budget")
        cursor = hi
    if cursor != co:
        raise ValueError(f"groups cover [0, {cursor}) but co={co}")


def exec_with_split(
    ia: QTensor3,
    bank: QFilterBank,
    spec: LayerSpec,
    cfg: AccelConfig,
    *,
    plan: SplitPlan | None = None,
) -> QTensor3:
    """Run a layer as secondary convolutions and merge along the channel dim.

    Each group re-streams the full input; outputs concatenate in ascending
    channel order.  Bit-exact equal to the unsplit accel_exec for any plan
    satisfying the split invariants, not only the greedy one.
    """
    if plan is None:
        plan = plan_split(bank.geom, cfg)
    else:
        check_plan(plan, bank.geom, cfg)
    if len(plan.groups) == 1:
        return accel_exec(ia, bank, spec, icp=cfg.icp, ocp=cfg.ocp)
    pieces = []
    for lo, hi in plan.groups:
        sub_bank = bank.slice_out_channels(lo, hi)
        sub_spec = LayerSpec(
            spec.filter, spec.stride, spec.padding, hi - lo, spec.relu, spec.pool, spec.scheme
        )
        pieces.append(accel_exec(ia, sub_bank, sub_spec, icp=cfg.icp, ocp=cfg.ocp).as_3d())
    merged = np.concatenate(pieces, axis=2)
    h, x, c = merged.shape
    return QTensor3(h, x, c, merged.reshape(-1), spec.scheme.output_frac)
