"""Bit-width-parameterized fixed-point arithmetic for the decoder.

Values are unsigned pure fractions in [0, 1) stored as integer mantissas
with scale 2^-total_bits.  Multiplication truncates toward zero into the
format; pair normalization divides by the pair sum after substituting the
smallest representable positive value for any zero operand (the "zero
clamp"), which removes divide-by-zero by construction.

All operations exist in two flavours: scalar (:class:`FixedPoint`, mirroring
how a hardware datapath treats one value) and vectorized int64 mantissa
arrays used by the batched decoder.  Both share the same arithmetic rules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUPPORTED_BITS = (12, 16, 24)


@dataclass(frozen=True)
class FixedPointFormat:
    total_bits: int

    def __post_init__(self):
        if not 1 <= self.total_bits <= 30:
            raise ValueError("total_bits must be in [1, 30]")

    @property
    def scale(self) -> int:
        return 1 << self.total_bits

    @property
    def max_raw(self) -> int:
        return self.scale - 1

    def quantize(self, x):
        """Round a probability (array) into the format, saturating at bounds."""
        raw = np.rint(np.asarray(x, dtype=float) * self.scale).astype(np.int64)
        return np.clip(raw, 0, self.max_raw)

    def to_float(self, raw):
        return np.asarray(raw, dtype=float) / self.scale

    def mul(self, a, b):
        """Truncating multiply of mantissa arrays."""
        return (np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)) >> self.total_bits

    def clamp_zero(self, raw):
        """Replace zero mantissas by the smallest representable positive value."""
        return np.maximum(np.asarray(raw, dtype=np.int64), 1)

    def normalize_pair(self, q0, q1):
        """Zero-clamp both mantissas, then divide each by the sum.

        Floor division keeps p0 + p1 within one least-significant unit of
        one, and is symmetric under swapping the pair.
        """
        q0 = self.clamp_zero(q0)
        q1 = self.clamp_zero(q1)
        s = q0 + q1
        return (q0 * self.scale) // s, (q1 * self.scale) // s


@dataclass(frozen=True)
class FixedPoint:
    """One fixed-point value: raw integer mantissa at scale 2^-total_bits."""

    raw: int
    total_bits: int

    def __post_init__(self):
        fmt = FixedPointFormat(self.total_bits)
        if not 0 <= self.raw <= fmt.max_raw:
            raise ValueError(f"mantissa {self.raw} outside [0, {fmt.max_raw}]")

    @classmethod
    def from_float(cls, x: float, total_bits: int) -> "FixedPoint":
        fmt = FixedPointFormat(total_bits)
        return cls(int(fmt.quantize(x)), total_bits)

    @property
    def value(self) -> float:
        return self.raw / (1 << self.total_bits)


def fixed_mul(x: FixedPoint, y: FixedPoint) -> FixedPoint:
    """Truncating fixed-point product (both operands in the same format)."""
    if x.total_bits != y.total_bits:
        raise ValueError("operands must share a format")
    return FixedPoint((x.raw * y.raw) >> x.total_bits, x.total_bits)


def fixed_normalize(pair: tuple[FixedPoint, FixedPoint]) -> tuple[FixedPoint, FixedPoint]:
    """Normalize a probability pair with the zero clamp applied first."""
    x, y = pair
    if x.total_bits != y.total_bits:
        raise ValueError("operands must share a format")
    fmt = FixedPointFormat(x.total_bits)
    p0, p1 = fmt.normalize_pair(x.raw, y.raw)
    return FixedPoint(int(p0), x.total_bits), FixedPoint(int(p1), x.total_bits)
