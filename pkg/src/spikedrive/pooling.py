"""Spike-driven max pooling over position-encoded streams.

Binary spikes make max pooling a pure coverage problem: an output window is
1 exactly when at least one input spike lands in it. The sparse kernel walks
only the stored spikes, marks every window each one covers, and emits the
surviving window addresses in ascending order — zero windows are never
touched, which is where the skipped work comes from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .perf import LayerCounters
from .spike_stream import CapacityError, EncodedSpikeMap


@dataclass(frozen=True)
class PoolSpec:
    """Geometry of one 2-D max-pool layer."""

    in_h: int
    in_w: int
    kernel_h: int = 3
    kernel_w: int = 3
    stride_h: int = 2
    stride_w: int = 2

    def __post_init__(self):
        for fname in ("in_h", "in_w", "kernel_h", "kernel_w", "stride_h", "stride_w"):
            if getattr(self, fname) < 1:
                raise ValueError(f"{fname} must be >= 1")
        if self.kernel_h > self.in_h or self.kernel_w > self.in_w:
            raise ValueError("kernel does not fit inside the input plane")

    @property
    def out_h(self) -> int:
        return (self.in_h - self.kernel_h) // self.stride_h + 1

    @property
    def out_w(self) -> int:
        return (self.in_w - self.kernel_w) // self.stride_w + 1

    @property
    def out_tokens(self) -> int:
        return self.out_h * self.out_w

    @property
    def windows(self) -> int:
        return self.out_tokens


def spike_maxpool(
    spike_map: EncodedSpikeMap,
    spec: PoolSpec,
    counters: LayerCounters | None = None,
) -> EncodedSpikeMap:
    """Max-pool an encoded spike stream without materializing zeros.

    Work scales with stored spikes times the windows each covers; the
    per-channel mark/sweep cost is independent of the number of empty
    positions in the plane.
    """
    if spike_map.tokens != spec.in_h * spec.in_w:
        raise ValueError(
            f"spike map carries {spike_map.tokens} tokens but pool expects "
            f"{spec.in_h}x{spec.in_w}={spec.in_h * spec.in_w}"
        )
    if spec.out_tokens > (1 << spike_map.pos_width):
        raise CapacityError(
            f"pool output has {spec.out_tokens} positions; "
            f"{spike_map.pos_width}-bit addresses hold at most "
            f"{1 << spike_map.pos_width}"
        )

    out_indptr, out_pos, marks = _kernels.maxpool_segments(
        spike_map.indptr,
        spike_map.pos,
        spec.in_h,
        spec.in_w,
        spec.kernel_h,
        spec.kernel_w,
        spec.stride_h,
        spec.stride_w,
        spec.out_h,
        spec.out_w,
    )
    out = EncodedSpikeMap(
        t_steps=spike_map.t_steps,
        channels=spike_map.channels,
        tokens=spec.out_tokens,
        indptr=out_indptr,
        pos=out_pos,
        pos_width=spike_map.pos_width,
    )
    if counters is not None:
        counters.note_input(spike_map)
        counters.sop_count += int(marks)
        counters.dense_op_count += (
            spike_map.t_steps * spike_map.channels
            * spec.windows * spec.kernel_h * spec.kernel_w
        )
        counters.accumulates += out.nnz
    return out


def dense_maxpool(frames: np.ndarray, spec: PoolSpec) -> np.ndarray:
    """Window-scanning reference: plain max over every window of a dense
    ``[T, C, H, W]`` array. Shares no code with the sparse path."""
    frames = np.asarray(frames)
    if frames.ndim != 4:
        raise ValueError("expected a [T, C, H, W] array")
    t_steps, channels, in_h, in_w = frames.shape
    if (in_h, in_w) != (spec.in_h, spec.in_w):
        raise ValueError("frame plane does not match pool spec")
    out = np.zeros((t_steps, channels, spec.out_h, spec.out_w), dtype=frames.dtype)
    for r in range(spec.out_h):
        for c in range(spec.out_w):
            window = frames[
                :,
                :,
                r * spec.stride_h: r * spec.stride_h + spec.kernel_h,
                c * spec.stride_w: c * spec.stride_w + spec.kernel_w,
            ]
            out[:, :, r, c] = window.max(axis=(2, 3))
    return out
