"""Linear layers driven by encoded spike streams.

A binary input turns matrix multiply into gather-accumulate: for every
stored spike at channel ``c`` the kernel adds weight column ``c`` into the
token's accumulator, and channels that never spiked contribute nothing and
cost nothing. Accumulation happens at full width with a single saturation
when the result is narrowed to the output format — either directly, or
through a leaky neuron when the layer feeds another spiking stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .fixedpoint import WIDE_WIDTH, FixedFormat, FixedTensor, sat_narrow
from .neuron import LifParams, LifState
from .perf import LayerCounters, count_sops_linear
from .spike_stream import EncodedSpikeMap, encode_from_potentials


@dataclass(frozen=True)
class LinearWeights:
    """Quantized dense weights ``[c_out, c_in]`` with optional bias.

    The bias lives at the accumulator scale (weight scale, since spikes are
    unit-valued) so it can be added before the single narrowing step.
    """

    weights: FixedTensor
    bias: np.ndarray | None = None  # int64 [c_out] at accumulator scale

    def __post_init__(self):
        if len(self.weights.dims) != 2:
            raise ValueError("weights must be [c_out, c_in]")
        if self.bias is not None:
            bias = np.ascontiguousarray(self.bias, dtype=np.int64)
            if bias.shape != (self.c_out,):
                raise ValueError("bias must be [c_out]")
            object.__setattr__(self, "bias", bias)

    @property
    def c_out(self) -> int:
        return self.weights.dims[0]

    @property
    def c_in(self) -> int:
        return self.weights.dims[1]

    @property
    def acc_format(self) -> FixedFormat:
        return FixedFormat(width=WIDE_WIDTH, scale_exp=self.weights.fmt.scale_exp)


def _accumulate(
    spike_map: EncodedSpikeMap,
    lw: LinearWeights,
    counters: LayerCounters | None,
) -> np.ndarray:
    """Gather-accumulate into a wide [T, c_out, L] array."""
    if spike_map.channels != lw.c_in:
        raise ValueError(
            f"spike map has {spike_map.channels} channels, weights expect {lw.c_in}"
        )
    t_steps, tokens = spike_map.t_steps, spike_map.tokens
    # Kernel layout is [T, L, c_out] so each spike updates one contiguous row.
    acc = np.empty((t_steps, tokens, lw.c_out), dtype=np.int64)
    if lw.bias is not None:
        acc[:] = lw.bias
    else:
        acc[:] = 0
    _kernels.linear_accumulate(spike_map.indptr, spike_map.pos, lw.weights.data, acc)
    if counters is not None:
        counters.note_input(spike_map)
        sops = count_sops_linear(spike_map, lw.c_out)
        counters.sop_count += sops
        counters.dense_op_count += t_steps * lw.c_in * tokens * lw.c_out
        counters.accumulates += sops
    return np.ascontiguousarray(acc.transpose(0, 2, 1))  # [T, c_out, L]


def spike_linear(
    spike_map: EncodedSpikeMap,
    lw: LinearWeights,
    out_fmt: FixedFormat,
    counters: LayerCounters | None = None,
) -> FixedTensor:
    """Linear layer over spikes, narrowed once to ``out_fmt``."""
    acc = _accumulate(spike_map, lw, counters)
    data = sat_narrow(acc, out_fmt, from_scale_exp=lw.acc_format.scale_exp)
    return FixedTensor(data=data, fmt=out_fmt)


def spike_linear_into_neuron(
    spike_map: EncodedSpikeMap,
    lw: LinearWeights,
    params: LifParams,
    out_fmt: FixedFormat,
    pos_width: int | None = None,
    state: LifState | None = None,
    counters: LayerCounters | None = None,
) -> EncodedSpikeMap:
    """Linear layer fused with the output neuron: the narrowed result is
    treated as the per-timestep charge of a leaky integrate-and-fire layer
    and the spikes are emitted directly in encoded form."""
    acc = _accumulate(spike_map, lw, counters)
    data = sat_narrow(acc, out_fmt, from_scale_exp=lw.acc_format.scale_exp)
    spa = FixedTensor(data=data, fmt=out_fmt)
    if pos_width is None:
        pos_width = spike_map.pos_width
    return encode_from_potentials(spa, params, pos_width=pos_width, state=state)
