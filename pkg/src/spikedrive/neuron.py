"""Leaky integrate-and-fire dynamics over fixed-point tensors.

Per element and timestep the neuron adds its spatial input to the carried
temporal state, fires when the membrane potential reaches the threshold
(firing at exact equality), and either resets or decays:

    mem[t]  = sat(spa[t] + temp[t-1])
    s[t]    = 1  if mem[t] >= v_th else 0
    temp[t] = v_reset        if s[t] == 1
              gamma * mem[t] otherwise

The decay constant is a dyadic rational g / 2**k so the decay is a
multiply-shift with the engine's single rounding rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .fixedpoint import FixedFormat, FixedTensor, quantize, sat_narrow, shift_round

MAX_GAMMA_SHIFT = 16


@dataclass(frozen=True)
class LifParams:
    """Threshold, reset value, and dyadic decay constant.

    ``v_th`` and ``v_reset`` are stored integers in the membrane format of
    the tensors the neuron runs over; ``gamma_num / 2**gamma_shift`` is the
    decay in [0, 1].
    """

    v_th: int
    v_reset: int = 0
    gamma_num: int = 1
    gamma_shift: int = 1

    def __post_init__(self):
        if self.v_th <= self.v_reset:
            raise ValueError(
                f"v_th ({self.v_th}) must exceed v_reset ({self.v_reset})"
            )
        if self.gamma_shift < 0 or self.gamma_shift > MAX_GAMMA_SHIFT:
            raise ValueError(f"gamma_shift must be in [0, {MAX_GAMMA_SHIFT}]")
        if not 0 <= self.gamma_num <= (1 << self.gamma_shift):
            raise ValueError("gamma must lie in [0, 1]")

    @classmethod
    def from_real(
        cls,
        v_th: float,
        v_reset: float,
        gamma: float,
        fmt: FixedFormat,
    ) -> "LifParams":
        """Quantize real threshold/reset into ``fmt`` and split gamma into g/2^k."""
        frac = Fraction(gamma)
        if frac < 0 or frac > 1:
            raise ValueError(f"gamma must be in [0, 1], got {gamma}")
        denom = frac.denominator  # binary floats always give a power of two
        shift = denom.bit_length() - 1
        if (1 << shift) != denom or shift > MAX_GAMMA_SHIFT:
            raise ValueError(
                f"gamma must be representable as g/2^k with k <= {MAX_GAMMA_SHIFT}, "
                f"got {gamma}"
            )
        return cls(
            v_th=quantize(v_th, fmt),
            v_reset=quantize(v_reset, fmt),
            gamma_num=frac.numerator,
            gamma_shift=shift,
        )

    @property
    def gamma(self) -> float:
        return self.gamma_num / (1 << self.gamma_shift)


@dataclass
class LifState:
    """Carried temporal input and the index of the next timestep."""

    temp_prev: FixedTensor
    t: int = 0

    @classmethod
    def fresh(cls, dims, fmt: FixedFormat) -> "LifState":
        return cls(temp_prev=FixedTensor.zeros(dims, fmt), t=0)


def lif_step(
    state: LifState, spa: FixedTensor, params: LifParams
) -> tuple[np.ndarray, LifState]:
    """Advance every neuron one timestep.

    Returns the binary spike tensor for this step and the state carrying
    the updated temporal input.
    """
    if spa.dims != state.temp_prev.dims:
        raise ValueError(
            f"shape mismatch: input {spa.dims} vs state {state.temp_prev.dims}"
        )
    fmt = spa.fmt
    mem = sat_narrow(spa.data + state.temp_prev.data, fmt)
    spikes = (mem >= params.v_th).astype(np.uint8)
    decayed = shift_round(params.gamma_num * mem, params.gamma_shift)
    temp = np.where(spikes, np.int64(params.v_reset), decayed)
    return spikes, LifState(FixedTensor(temp, fmt), state.t + 1)


def lif_run(spa_seq: FixedTensor, params: LifParams) -> np.ndarray:
    """Fold :func:`lif_step` over the leading (time) axis from a fresh state."""
    if len(spa_seq.dims) < 2:
        raise ValueError("expected a tensor with a leading time axis")
    t_steps = spa_seq.dims[0]
    out = np.zeros(spa_seq.dims, dtype=np.uint8)
    state = LifState.fresh(spa_seq.dims[1:], spa_seq.fmt)
    for t in range(t_steps):
        step_in = FixedTensor(spa_seq.data[t], spa_seq.fmt)
        out[t], state = lif_step(state, step_in, params)
    return out
