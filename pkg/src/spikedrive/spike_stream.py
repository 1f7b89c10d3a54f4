"""Position-encoded spike streams.

Instead of binary maps, a layer's spike output is stored as one ascending
list of token addresses per (timestep, channel).  Consumers iterate spikes
only, so all downstream work scales with activity rather than tensor size.
Lists are kept per channel so channel-parallel consumers can stream them
independently.

Internally a map is a CSR-style pair: a flat int32 ``pos`` array holding
all addresses, segmented by an int64 ``indptr`` with one segment per
(timestep, channel), timestep-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .fixedpoint import FixedTensor
from .neuron import LifParams, LifState

DEFAULT_POS_WIDTH = 8
MAX_POS_WIDTH = 16


class CapacityError(ValueError):
    """Token count exceeds what the configured address width can encode."""


def _check_capacity(tokens: int, pos_width: int) -> None:
    if not 1 <= pos_width <= MAX_POS_WIDTH:
        raise ValueError(f"pos_width must be in [1, {MAX_POS_WIDTH}], got {pos_width}")
    if tokens > (1 << pos_width):
        raise CapacityError(
            f"{tokens} tokens cannot be addressed with {pos_width}-bit positions "
            f"(capacity {1 << pos_width})"
        )


@dataclass
class EncodedSpikeMap:
    """Ascending token-address lists per (timestep, channel).

    Immutable after construction; construction validates the structural
    invariants (strictly increasing segments, addresses below the token
    count, token count within address capacity).
    """

    t_steps: int
    channels: int
    tokens: int
    indptr: np.ndarray
    pos: np.ndarray
    pos_width: int = DEFAULT_POS_WIDTH

    def __post_init__(self):
        _check_capacity(self.tokens, self.pos_width)
        self.indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        self.pos = np.ascontiguousarray(self.pos, dtype=np.int32)
        n_seg = self.t_steps * self.channels
        if self.indptr.shape != (n_seg + 1,):
            raise ValueError(
                f"indptr length {self.indptr.shape} does not match "
                f"{self.t_steps}x{self.channels} segments"
            )
        if self.indptr[0] != 0 or self.indptr[-1] != self.pos.size:
            raise ValueError("indptr does not span the position array")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr must be non-decreasing")
        n = self.pos.size
        if n:
            if int(self.pos.min()) < 0 or int(self.pos.max()) >= self.tokens:
                raise ValueError(
                    f"positions must lie in [0, {self.tokens}), "
                    f"got [{self.pos.min()}, {self.pos.max()}]"
                )
            if n > 1:
                ascending = np.diff(self.pos) > 0
                inner = self.indptr[1:-1]
                inner = inner[(inner > 0) & (inner < n)]
                ascending[inner - 1] = True  # segment boundaries may restart
                if not bool(ascending.all()):
                    raise ValueError(
                        "position lists must be strictly increasing per segment"
                    )

    # -- accessors ---------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.pos.size)

    @property
    def slot_count(self) -> int:
        return self.t_steps * self.channels * self.tokens

    def positions(self, t: int, c: int) -> np.ndarray:
        seg = t * self.channels + c
        return self.pos[self.indptr[seg] : self.indptr[seg + 1]]

    def segment_lengths(self) -> np.ndarray:
        """Spike count per (timestep, channel), shaped [t_steps, channels]."""
        return np.diff(self.indptr).reshape(self.t_steps, self.channels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EncodedSpikeMap):
            return NotImplemented
        return (
            (self.t_steps, self.channels, self.tokens)
            == (other.t_steps, other.channels, other.tokens)
            and bool(np.array_equal(self.indptr, other.indptr))
            and bool(np.array_equal(self.pos, other.pos))
        )

    @classmethod
    def empty(
        cls, t_steps: int, channels: int, tokens: int,
        pos_width: int = DEFAULT_POS_WIDTH,
    ) -> "EncodedSpikeMap":
        return cls(
            t_steps,
            channels,
            tokens,
            np.zeros(t_steps * channels + 1, dtype=np.int64),
            np.empty(0, dtype=np.int32),
            pos_width,
        )

    @classmethod
    def from_lists(
        cls, t_steps: int, channels: int, tokens: int, lists,
        pos_width: int = DEFAULT_POS_WIDTH,
    ) -> "EncodedSpikeMap":
        """Build from nested lists indexed [t][c] (test/CLI convenience)."""
        chunks = []
        indptr = np.zeros(t_steps * channels + 1, dtype=np.int64)
        seg = 0
        for t in range(t_steps):
            for c in range(channels):
                entry = np.asarray(lists[t][c], dtype=np.int32)
                chunks.append(entry)
                indptr[seg + 1] = indptr[seg] + entry.size
                seg += 1
        pos = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int32)
        return cls(t_steps, channels, tokens, indptr, pos, pos_width)


def encode(spikes: np.ndarray, pos_width: int = DEFAULT_POS_WIDTH) -> EncodedSpikeMap:
    """Encode a binary [t, c, l] tensor into ascending address lists."""
    spikes = np.asarray(spikes)
    if spikes.ndim != 3:
        raise ValueError(f"expected a [t, c, l] tensor, got shape {spikes.shape}")
    if spikes.size and not np.isin(spikes, (0, 1)).all():
        raise ValueError("spike tensor must be binary")
    t_steps, channels, tokens = spikes.shape
    _check_capacity(tokens, pos_width)
    flat = spikes.reshape(t_steps * channels, tokens)
    seg_idx, addr = np.nonzero(flat)
    counts = np.bincount(seg_idx, minlength=t_steps * channels)
    indptr = np.zeros(t_steps * channels + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return EncodedSpikeMap(
        t_steps, channels, tokens, indptr, addr.astype(np.int32), pos_width
    )


def decode(spike_map: EncodedSpikeMap) -> np.ndarray:
    """Exact inverse of :func:`encode`: back to a binary uint8 [t, c, l] tensor."""
    n_seg = spike_map.t_steps * spike_map.channels
    out = np.zeros((n_seg, spike_map.tokens), dtype=np.uint8)
    if spike_map.nnz:
        seg_idx = np.repeat(np.arange(n_seg), np.diff(spike_map.indptr))
        out[seg_idx, spike_map.pos] = 1
    return out.reshape(spike_map.t_steps, spike_map.channels, spike_map.tokens)


def encode_from_potentials(
    spa_seq: FixedTensor,
    params: LifParams,
    pos_width: int = DEFAULT_POS_WIDTH,
    state: LifState | None = None,
) -> EncodedSpikeMap:
    """Fused neuron update and position write.

    Runs the membrane dynamics over a [t, c, l] potential sequence and
    records the address of every firing neuron directly, equivalent
    bit-for-bit to running the neurons and encoding their spike tensor.
    """
    if len(spa_seq.dims) != 3:
        raise ValueError(f"expected [t, c, l] potentials, got {spa_seq.dims}")
    t_steps, channels, tokens = spa_seq.dims
    _check_capacity(tokens, pos_width)
    if state is None:
        temp_init = np.zeros((channels, tokens), dtype=np.int64)
    else:
        if state.temp_prev.dims != (channels, tokens):
            raise ValueError(
                f"state shape {state.temp_prev.dims} does not match input "
                f"({channels}, {tokens})"
            )
        temp_init = state.temp_prev.data
    fmt = spa_seq.fmt
    indptr, pos = _kernels.lif_encode(
        spa_seq.data,
        params.gamma_num,
        params.gamma_shift,
        params.v_th,
        params.v_reset,
        fmt.min_int,
        fmt.max_int,
        temp_init,
    )
    return EncodedSpikeMap(t_steps, channels, tokens, indptr, pos, pos_width)


def sparsity(spike_map: EncodedSpikeMap) -> float:
    """Fraction of (timestep, channel, token) slots that carry no spike."""
    return 1.0 - spike_map.nnz / spike_map.slot_count


def dump_text(spike_map: EncodedSpikeMap) -> str:
    """Debug dump: one line per (t, c) as ``t,c:p1 p2 p3`` with ascending positions."""
    lines = []
    for t in range(spike_map.t_steps):
        for c in range(spike_map.channels):
            entries = " ".join(str(p) for p in spike_map.positions(t, c))
            lines.append(f"{t},{c}:{entries}")
    return "\n".join(lines) + "\n"


def parse_text(
    text: str, tokens: int, pos_width: int = DEFAULT_POS_WIDTH
) -> EncodedSpikeMap:
    """Inverse of :func:`dump_text` (the token count is not stored in the dump)."""
    entries = {}
    t_max = c_max = -1
    for line in text.strip().splitlines():
        head, _, tail = line.partition(":")
        t_str, _, c_str = head.partition(",")
        t, c = int(t_str), int(c_str)
        entries[(t, c)] = [int(v) for v in tail.split()] if tail.strip() else []
        t_max = max(t_max, t)
        c_max = max(c_max, c)
    lists = [
        [entries.get((t, c), []) for c in range(c_max + 1)] for t in range(t_max + 1)
    ]
    return EncodedSpikeMap.from_lists(t_max + 1, c_max + 1, tokens, lists, pos_width)
