"""Saturating fixed-point scalars and tensors.

Every dense value in the engine (weights, membrane potentials, wide
accumulators) is an integer tagged with a power-of-two scale: the stored
integer ``v`` represents the real value ``v * 2**scale_exp``.  Keeping all
scales as powers of two means every rescale is an arithmetic shift, and the
single rounding rule used throughout is round-half-away-from-zero.

Layer arithmetic accumulates in a 32-bit wide format and saturates exactly
once on the way back to a narrow format.  Because 10-bit operands summed
over at most 2**16 terms stay below 2**26, wide accumulation can never
overflow and is therefore order-independent; parallel and sequential
schedules produce bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WIDE_WIDTH = 32


@dataclass(frozen=True)
class FixedFormat:
    """Bit width plus power-of-two scale for stored integers."""

    width: int
    scale_exp: int
    signed: bool = True

    def __post_init__(self):
        if not 2 <= self.width <= 32:
            raise ValueError(f"format width must be in [2, 32], got {self.width}")

    @property
    def min_int(self) -> int:
        return -(1 << (self.width - 1)) if self.signed else 0

    @property
    def max_int(self) -> int:
        if self.signed:
            return (1 << (self.width - 1)) - 1
        return (1 << self.width) - 1

    def wide(self) -> "FixedFormat":
        """32-bit accumulator format at the same scale."""
        return FixedFormat(WIDE_WIDTH, self.scale_exp, self.signed)


#: Format of raw spike values: binary 0/1 at unit scale.
SPIKE_FORMAT = FixedFormat(width=2, scale_exp=0)


def shift_round(v, k: int):
    """Arithmetic right shift by ``k`` with round-half-away-from-zero.

    Accepts a Python int or an integer ndarray; ``k`` must be >= 0.
    """
    if k < 0:
        raise ValueError(f"shift must be non-negative, got {k}")
    if k == 0:
        return v
    half = 1 << (k - 1)
    if isinstance(v, np.ndarray):
        q = (np.abs(v) + half) >> k
        return np.where(v < 0, -q, q)
    q = (abs(v) + half) >> k
    return -q if v < 0 else q


def quantize(value, fmt: FixedFormat):
    """Map a real value to the stored integer of ``fmt``.

    Rounds half away from zero, then saturates to the representable range,
    so out-of-range reals clamp instead of wrapping.
    """
    x = np.asarray(value, dtype=np.float64) * (2.0 ** -fmt.scale_exp)
    r = np.copysign(np.floor(np.abs(x) + 0.5), x)
    out = np.clip(r, fmt.min_int, fmt.max_int).astype(np.int64)
    if np.isscalar(value) or np.ndim(value) == 0:
        return int(out)
    return out


def sat_narrow(acc, fmt: FixedFormat, from_scale_exp: int | None = None):
    """Clamp a wide accumulator into ``fmt``.

    When the accumulator scale differs from the target scale the rescale is
    a single right shift (round-half-away-from-zero); the target scale must
    therefore be no finer than the accumulator scale.
    """
    if from_scale_exp is not None:
        shift = fmt.scale_exp - from_scale_exp
        if shift < 0:
            raise ValueError(
                f"cannot narrow from scale 2^{from_scale_exp} to finer scale "
                f"2^{fmt.scale_exp}; output scale must be coarser or equal"
            )
        acc = shift_round(acc, shift)
    if isinstance(acc, np.ndarray):
        return np.clip(acc, fmt.min_int, fmt.max_int)
    return max(fmt.min_int, min(fmt.max_int, int(acc)))


def choose_scale_exp(max_abs: float, width: int) -> int:
    """Smallest power-of-two scale whose ``width``-bit range covers ``max_abs``.

    An all-zero tensor gets the scale that puts full range at roughly unit
    magnitude, so downstream shift constraints stay satisfiable.
    """
    if max_abs < 0:
        raise ValueError("max_abs must be non-negative")
    if max_abs == 0.0:
        return -(width - 1)
    limit = (1 << (width - 1)) - 1
    e = int(np.ceil(np.log2(max_abs / limit)))
    # Float fuzz in the log can be off by one in either direction.
    while max_abs * (2.0 ** -e) > limit:
        e += 1
    while e > -(width - 1) and max_abs * (2.0 ** -(e - 1)) <= limit:
        e -= 1
    return e


@dataclass
class FixedTensor:
    """Integer tensor with a shared fixed-point format.

    ``data`` is stored as a C-contiguous int64 array (row-major), every
    element within the format's representable range.  Treat instances as
    immutable: operations return new tensors.
    """

    data: np.ndarray
    fmt: FixedFormat

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.int64)
        if self.data.size:
            lo = int(self.data.min())
            hi = int(self.data.max())
            if lo < self.fmt.min_int or hi > self.fmt.max_int:
                raise ValueError(
                    f"tensor values [{lo}, {hi}] exceed format range "
                    f"[{self.fmt.min_int}, {self.fmt.max_int}]"
                )

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @classmethod
    def from_real(cls, values, fmt: FixedFormat) -> "FixedTensor":
        return cls(np.asarray(quantize(np.asarray(values, dtype=np.float64), fmt)), fmt)

    @classmethod
    def zeros(cls, dims, fmt: FixedFormat) -> "FixedTensor":
        return cls(np.zeros(dims, dtype=np.int64), fmt)

    def to_real(self) -> np.ndarray:
        return self.data.astype(np.float64) * (2.0 ** self.fmt.scale_exp)

    def reshape(self, dims) -> "FixedTensor":
        return FixedTensor(self.data.reshape(dims), self.fmt)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FixedTensor):
            return NotImplemented
        return (
            self.fmt == other.fmt
            and self.dims == other.dims
            and bool(np.array_equal(self.data, other.data))
        )


def add_elementwise(a: FixedTensor, b: FixedTensor) -> FixedTensor:
    """Wide element-wise add followed by one saturation to the shared format."""
    if a.dims != b.dims:
        raise ValueError(f"shape mismatch in add: {a.dims} vs {b.dims}")
    if a.fmt != b.fmt:
        raise ValueError(f"format mismatch in add: {a.fmt} vs {b.fmt}")
    acc = a.data + b.data
    return FixedTensor(sat_narrow(acc, a.fmt), a.fmt)
