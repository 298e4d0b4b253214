"""Dynamic fixed-point quantization and the accumulator rescale path.

A tensor's real value is raw * 2**-frac_bits.  Exponent selection is
max-abs driven: the largest f with max|x| * 2**f <= 127.  Rounding is
half-away-from-zero everywhere.  Convolution accumulators are 32-bit;
products are 16-bit; both are assumed never to overflow, and the
simulator raises AccumulatorOverflow instead of wrapping if they do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccumulatorOverflow
from .tensors import FTensor3, I8_MAX, I8_MIN, QTensor3

I32_MIN = -(2**31)
I32_MAX = 2**31 - 1

# Sanity window for scheme exponents; widen here if a workload needs it.
FRAC_MIN = -8
FRAC_MAX = 15

ZERO_DATA_FRAC = 7


@dataclass(frozen=True)
class DfpScheme:
    """Quantization exponents of one convolution: input, weight, bias, output."""

    input_frac: int
    weight_frac: int
    bias_frac: int
    output_frac: int

    def __post_init__(self):
        for name in ("input_frac", "weight_frac", "bias_frac", "output_frac"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not FRAC_MIN <= v <= FRAC_MAX:
                raise ValueError(f"{name}={v!r} outside sanity window [{FRAC_MIN}, {FRAC_MAX}]")


def choose_frac_bits(data) -> int:
    """Largest exponent f such that max|x| * 2**f <= 127; 7 for all-zero data."""
    arr = np.asarray(data, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("cannot choose an exponent for empty data")
    if not np.isfinite(arr).all():
        raise ValueError("data contains non-finite values")
    m = float(np.max(np.abs(arr)))
    if m == 0.0:
        return ZERO_DATA_FRAC
    f = math.floor(math.log2(127.0 / m))
    # Scaling by powers of two is exact in binary floats, so these
    # comparisons pin f down even when log2 was off by one.
    while m * 2.0 ** (f + 1) <= 127.0:
        f += 1
    while m * 2.0**f > 127.0:
        f -= 1
    return f


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0.0, np.floor(x + 0.5), np.ceil(x - 0.5))


def quantize(t: FTensor3, frac_bits: int) -> QTensor3:
    """Quantize to int8 at the given exponent; saturation absorbs overflow."""
    scaled = t.values * 2.0**frac_bits
    q = np.clip(_round_half_away(scaled), I8_MIN, I8_MAX).astype(np.int8)
    return QTensor3(t.height, t.width, t.channels, q, frac_bits)


def dequantize(t: QTensor3) -> FTensor3:
    return FTensor3(
        t.height, t.width, t.channels, t.values.astype(np.float64) * 2.0**-t.frac_bits
    )


def shift_round(value: int, shift: int) -> int:
    """Scale an integer by 2**-shift.

    shift > 0: right shift with half-away-from-zero rounding.
    shift <= 0: exact left shift (pure integer doubling).
    """
    if shift <= 0:
        return value << -shift
    half = 1 << (shift - 1)
    if value >= 0:
        return (value + half) >> shift
    return -((-value + half) >> shift)


def _check_i32(value: int, what: str) -> None:
    if not I32_MIN <= value <= I32_MAX:
        raise AccumulatorOverflow(f"{what} {value} outside 32-bit range")


def saturate_i8(value: int) -> int:
    return I8_MAX if value > I8_MAX else I8_MIN if value < I8_MIN else value


def rescale_acc(acc: int, scheme: DfpScheme, bias_raw: int = 0) -> int:
    """Bring a 32-bit MAC sum down to an int8 output value.

    The accumulator carries scale 2**-(fi+fp) and the bias 2**-fb; both
    addends are shifted to the output scale, combined in 32 bits, and
    saturated once.
    """
    acc = int(acc)
    _check_i32(acc, "accumulator")
    a = shift_round(acc, scheme.input_frac + scheme.weight_frac - scheme.output_frac)
    b = shift_round(int(bias_raw), scheme.bias_frac - scheme.output_frac)
    _check_i32(a, "rescaled accumulator")
    _check_i32(b, "rescaled bias")
    _check_i32(a + b, "rescaled sum")
    return saturate_i8(a + b)


def _shift_round_block(values: np.ndarray, shift: int) -> np.ndarray:
    if shift <= 0:
        return values << -shift
    half = 1 << (shift - 1)
    mag = (np.abs(values) + half) >> shift
    return np.where(values >= 0, mag, -mag)


def rescale_block(acc: np.ndarray, scheme: DfpScheme, biases: np.ndarray) -> np.ndarray:
    """Vectorized rescale_acc over an (..., co) int64 accumulator block.

    ``biases`` broadcasts along the last axis.  Bit-exact with the scalar
    path; the engine uses this, tests cross-check the two.
    """
    if acc.size and (acc.min() < I32_MIN or acc.max() > I32_MAX):
        raise AccumulatorOverflow("accumulator outside 32-bit range")
    a = _shift_round_block(acc, scheme.input_frac + scheme.weight_frac - scheme.output_frac)
    b = _shift_round_block(
        biases.astype(np.int64), scheme.bias_frac - scheme.output_frac
    )
    total = a + b
    for part, what in ((a, "rescaled accumulator"), (total, "rescaled sum")):
        if part.size and (part.min() < I32_MIN or part.max() > I32_MAX):
            raise AccumulatorOverflow(f"{what} outside 32-bit range")
    return np.clip(total, I8_MIN, I8_MAX).astype(np.int8)
