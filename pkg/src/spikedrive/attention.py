"""Self-attention on two spike operands via sorted-address intersection.

Because query and key segments store token positions in ascending order, the
dot product of two binary vectors collapses to counting common addresses with
a single two-pointer merge: compare heads, advance the smaller, count a hit
on equality. Comparator steps are bounded by the number of stored spikes —
never by sequence length — and the result per (timestep, channel) is an
integer score. Thresholding the score gives a binary channel mask that is
applied to the value operand by keeping or clearing whole segments, so the
attention stage performs no multiplications at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .perf import LayerCounters
from .spike_stream import EncodedSpikeMap


def intersect_count(a: np.ndarray, b: np.ndarray) -> tuple[int, int]:
    """Count common addresses of two strictly increasing arrays.

    Returns ``(matches, comparator_steps)`` where a step is one head-to-head
    comparison of the merge loop.
    """
    a = np.ascontiguousarray(a, dtype=np.int32)
    b = np.ascontiguousarray(b, dtype=np.int32)
    count, steps = _kernels.intersect_count(a, b)
    return int(count), int(steps)


@dataclass(frozen=True)
class ChannelMask:
    """Binary keep/clear decision per (timestep, channel)."""

    t_steps: int
    channels: int
    bits: np.ndarray  # uint8 [t_steps * channels]

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if bits.shape != (self.t_steps * self.channels,):
            raise ValueError("mask bits must be flat [t_steps * channels]")
        if bits.size and bits.max() > 1:
            raise ValueError("mask bits must be 0/1")
        object.__setattr__(self, "bits", bits)

    def kept(self) -> int:
        return int(self.bits.sum())


def sdsa_mask(
    q: EncodedSpikeMap,
    k: EncodedSpikeMap,
    v_th_attn: int = 1,
    counters: LayerCounters | None = None,
) -> ChannelMask:
    """Intersect query/key segments and threshold the match counts.

    A threshold of 0 keeps every channel (any count satisfies it); the
    default of 1 keeps channels where query and key agree on at least one
    token.
    """
    if (q.t_steps, q.channels, q.tokens) != (k.t_steps, k.channels, k.tokens):
        raise ValueError("query and key spike maps must share dimensions")
    if v_th_attn < 0:
        raise ValueError("v_th_attn must be >= 0")
    bits, total_steps = _kernels.sdsa_mask_bits(
        q.indptr, q.pos, k.indptr, k.pos, v_th_attn
    )
    if counters is not None:
        counters.note_input(q)
        counters.note_input(k)
        counters.sop_count += int(total_steps)
        counters.dense_op_count += q.t_steps * q.channels * q.tokens
        counters.comparator_steps += int(total_steps)
    return ChannelMask(t_steps=q.t_steps, channels=q.channels, bits=bits)


def apply_mask(v: EncodedSpikeMap, mask: ChannelMask) -> EncodedSpikeMap:
    """Keep or drop whole (timestep, channel) segments of the value stream."""
    if (v.t_steps, v.channels) != (mask.t_steps, mask.channels):
        raise ValueError("mask dimensions do not match the value stream")
    lengths = np.diff(v.indptr)
    kept_lengths = lengths * mask.bits.astype(np.int64)
    out_indptr = np.zeros_like(v.indptr)
    np.cumsum(kept_lengths, out=out_indptr[1:])
    keep = np.repeat(mask.bits.view(np.bool_), lengths)
    out_pos = np.ascontiguousarray(v.pos[keep])
    return EncodedSpikeMap(
        t_steps=v.t_steps,
        channels=v.channels,
        tokens=v.tokens,
        indptr=out_indptr,
        pos=out_pos,
        pos_width=v.pos_width,
    )


def sdsa(
    q: EncodedSpikeMap,
    k: EncodedSpikeMap,
    v: EncodedSpikeMap,
    v_th_attn: int = 1,
    counters: LayerCounters | None = None,
) -> EncodedSpikeMap:
    """Full spike-driven self-attention: mask from q∩k, applied to v."""
    if (v.t_steps, v.channels, v.tokens) != (q.t_steps, q.channels, q.tokens):
        raise ValueError("value spike map must share dimensions with query/key")
    mask = sdsa_mask(q, k, v_th_attn, counters=counters)
    return apply_mask(v, mask)
