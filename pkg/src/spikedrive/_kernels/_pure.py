"""Pure NumPy/Python implementations of the hot spike kernels.

These are the fallback twins of the compiled extension in ``_core``.  Both
backends must produce bit-identical outputs for identical inputs; the test
suite enforces that whenever the extension is available.

Conventions shared with the compiled backend: position lists arrive as one
flat int32 array ``pos`` segmented by an int64 ``indptr`` of length
``n_segments + 1`` (segment ``i`` is ``pos[indptr[i]:indptr[i+1]]``),
every segment strictly increasing.
"""

from __future__ import annotations

import numpy as np

from ..fixedpoint import shift_round


def intersect_count(a: np.ndarray, b: np.ndarray) -> tuple[int, int]:
    """Two-pointer merge over two ascending address lists.

    Each iteration compares the heads; equal addresses count as a match and
    consume both, otherwise the smaller side advances (the larger address is
    the one held for the next comparison).  Stops as soon as either list is
    exhausted.  Returns (match count, comparison count).
    """
    al = a.tolist()
    bl = b.tolist()
    na = len(al)
    nb = len(bl)
    i = j = count = steps = 0
    while i < na and j < nb:
        steps += 1
        x = al[i]
        y = bl[j]
        if x == y:
            count += 1
            i += 1
            j += 1
        elif x < y:
            i += 1
        else:
            j += 1
    return count, steps


def sdsa_mask_bits(
    q_indptr: np.ndarray,
    q_pos: np.ndarray,
    k_indptr: np.ndarray,
    k_pos: np.ndarray,
    threshold: int,
) -> tuple[np.ndarray, int]:
    """Per-segment intersection counts thresholded into mask bits."""
    n_seg = q_indptr.size - 1
    bits = np.zeros(n_seg, dtype=np.uint8)
    total_steps = 0
    for seg in range(n_seg):
        count, steps = intersect_count(
            q_pos[q_indptr[seg] : q_indptr[seg + 1]],
            k_pos[k_indptr[seg] : k_indptr[seg + 1]],
        )
        total_steps += steps
        if count >= threshold:
            bits[seg] = 1
    return bits, total_steps


def maxpool_segments(
    indptr: np.ndarray,
    pos: np.ndarray,
    in_h: int,
    in_w: int,
    kernel_h: int,
    kernel_w: int,
    stride_h: int,
    stride_w: int,
    out_h: int,
    out_w: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Window-coverage maxpool driven by the spikes, not the windows.

    Every spike marks the output cells of all windows covering it in a
    per-segment bitmap; the bitmap is then swept in ascending order to emit
    a sorted, deduplicated position list.  Work (and the returned mark
    count) is proportional to spikes times windows-per-spike.
    """
    n_seg = indptr.size - 1
    l_out = out_h * out_w
    bitmap = np.zeros(l_out, dtype=bool)
    out_indptr = np.zeros(n_seg + 1, dtype=np.int64)
    chunks = []
    marks = 0
    for seg in range(n_seg):
        lo, hi = int(indptr[seg]), int(indptr[seg + 1])
        if lo == hi:
            out_indptr[seg + 1] = out_indptr[seg]
            continue
        p = pos[lo:hi]
        h = p // in_w
        w = p % in_w
        r0 = np.maximum((h - kernel_h + stride_h) // stride_h, 0)
        r1 = np.minimum(h // stride_h, out_h - 1)
        c0 = np.maximum((w - kernel_w + stride_w) // stride_w, 0)
        c1 = np.minimum(w // stride_w, out_w - 1)
        covered = (r1 >= r0) & (c1 >= c0)
        marks += int(np.sum((r1 - r0 + 1) * (c1 - c0 + 1) * covered))
        for i in np.flatnonzero(covered):
            rows = np.arange(r0[i], r1[i] + 1)
            cols = np.arange(c0[i], c1[i] + 1)
            bitmap[(rows[:, None] * out_w + cols[None, :]).ravel()] = True
        cells = np.flatnonzero(bitmap)
        bitmap[cells] = False
        chunks.append(cells.astype(np.int32))
        out_indptr[seg + 1] = out_indptr[seg] + cells.size
    if chunks:
        out_pos = np.concatenate(chunks)
    else:
        out_pos = np.empty(0, dtype=np.int32)
    return out_indptr, out_pos, marks


def linear_accumulate(
    indptr: np.ndarray,
    pos: np.ndarray,
    weights: np.ndarray,
    acc: np.ndarray,
) -> None:
    """Gather weight columns selected by spike addresses into the accumulator.

    ``weights`` is int64 [c_out, c_in]; ``acc`` is int64 [t, l, c_out],
    pre-filled by the caller (with the bias) and updated in place.  Only
    columns of channels that actually spiked are ever read.
    """
    t_steps = acc.shape[0]
    c_in = weights.shape[1]
    seg = 0
    for t in range(t_steps):
        plane = acc[t]
        for c in range(c_in):
            lo, hi = int(indptr[seg]), int(indptr[seg + 1])
            seg += 1
            if lo != hi:
                plane[pos[lo:hi]] += weights[:, c]


def lif_encode(
    spa: np.ndarray,
    gamma_num: int,
    gamma_shift: int,
    v_th: int,
    v_reset: int,
    mem_min: int,
    mem_max: int,
    temp_init: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Fused neuron step and position write.

    Runs the membrane update over int64 ``spa`` [t, c, l], and instead of
    returning binary spikes, records the token address of every firing
    neuron, ascending per (t, c) segment.  ``temp_init`` [c, l] is consumed
    as the starting temporal state (not mutated).
    """
    t_steps, channels, tokens = spa.shape
    temp = temp_init.copy()
    indptr = np.zeros(t_steps * channels + 1, dtype=np.int64)
    chunks = []
    for t in range(t_steps):
        mem = np.clip(spa[t] + temp, mem_min, mem_max)
        fired = mem >= v_th
        decayed = shift_round(gamma_num * mem, gamma_shift)
        temp = np.where(fired, np.int64(v_reset), decayed)
        flat = np.flatnonzero(fired)  # row-major: ascending per channel
        chunks.append((flat % tokens).astype(np.int32))
        counts = np.count_nonzero(fired, axis=1)
        base = t * channels
        indptr[base + 1 : base + channels + 1] = indptr[base] + np.cumsum(counts)
    pos = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int32)
    return indptr, pos
