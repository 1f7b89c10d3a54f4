# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the pure spike kernels.

Semantics are defined by ``_pure``; this module only makes the per-spike
inner loops run at C speed.  Outputs must stay bit-identical to the pure
backend for every input.
"""

import numpy as np

ctypedef long long i64


cdef inline i64 _shift_round(i64 v, int k) noexcept nogil:
    # arithmetic right shift, round half away from zero
    cdef i64 half
    if k == 0:
        return v
    half = (<i64>1) << (k - 1)
    if v >= 0:
        return (v + half) >> k
    return -(((-v) + half) >> k)


cdef inline i64 _merge_count(const int[::1] a, Py_ssize_t alo, Py_ssize_t ahi,
                             const int[::1] b, Py_ssize_t blo, Py_ssize_t bhi,
                             i64* steps) noexcept nogil:
    cdef Py_ssize_t i = alo, j = blo
    cdef i64 count = 0
    cdef int x, y
    while i < ahi and j < bhi:
        steps[0] += 1
        x = a[i]
        y = b[j]
        if x == y:
            count += 1
            i += 1
            j += 1
        elif x < y:
            i += 1
        else:
            j += 1
    return count


def intersect_count(a, b):
    cdef const int[::1] av = np.ascontiguousarray(a, dtype=np.int32)
    cdef const int[::1] bv = np.ascontiguousarray(b, dtype=np.int32)
    cdef i64 steps = 0
    cdef i64 count = _merge_count(av, 0, av.shape[0], bv, 0, bv.shape[0], &steps)
    return int(count), int(steps)


def sdsa_mask_bits(q_indptr, q_pos, k_indptr, k_pos, threshold):
    cdef const i64[::1] qip = q_indptr
    cdef const int[::1] qp = q_pos
    cdef const i64[::1] kip = k_indptr
    cdef const int[::1] kp = k_pos
    cdef i64 thr = threshold
    cdef Py_ssize_t n_seg = qip.shape[0] - 1
    bits_arr = np.zeros(n_seg, dtype=np.uint8)
    cdef unsigned char[::1] bits = bits_arr
    cdef i64 total_steps = 0
    cdef i64 count
    cdef Py_ssize_t seg
    with nogil:
        for seg in range(n_seg):
            count = _merge_count(qp, qip[seg], qip[seg + 1],
                                 kp, kip[seg], kip[seg + 1], &total_steps)
            if count >= thr:
                bits[seg] = 1
    return bits_arr, int(total_steps)


def maxpool_segments(indptr, pos, int in_h, int in_w, int kernel_h, int kernel_w,
                     int stride_h, int stride_w, int out_h, int out_w):
    cdef const i64[::1] ip = indptr
    cdef const int[::1] p = pos
    cdef Py_ssize_t n_seg = ip.shape[0] - 1
    cdef int l_out = out_h * out_w

    bitmap_arr = np.zeros(l_out, dtype=np.uint8)
    cdef unsigned char[::1] bitmap = bitmap_arr
    out_indptr_arr = np.zeros(n_seg + 1, dtype=np.int64)
    cdef i64[::1] out_indptr = out_indptr_arr
    # worst case: every output cell fires in every non-empty segment
    out_pos_arr = np.empty(min(<i64>n_seg * l_out, <i64>p.shape[0] * kernel_h * kernel_w + 1),
                           dtype=np.int32)
    cdef int[::1] out_pos = out_pos_arr

    cdef i64 marks = 0, n_out = 0
    cdef Py_ssize_t seg, k
    cdef int h, w, r0, r1, c0, c1, r, c, cell
    with nogil:
        for seg in range(n_seg):
            if ip[seg] == ip[seg + 1]:
                out_indptr[seg + 1] = n_out
                continue
            for k in range(ip[seg], ip[seg + 1]):
                h = p[k] / in_w
                w = p[k] % in_w
                # floor((h - kernel + stride) / stride) == ceil((h - kernel + 1) / stride)
                r0 = h - kernel_h + stride_h
                r0 = r0 / stride_h if r0 >= 0 else -((-r0 + stride_h - 1) / stride_h)
                if r0 < 0:
                    r0 = 0
                r1 = h / stride_h
                if r1 > out_h - 1:
                    r1 = out_h - 1
                c0 = w - kernel_w + stride_w
                c0 = c0 / stride_w if c0 >= 0 else -((-c0 + stride_w - 1) / stride_w)
                if c0 < 0:
                    c0 = 0
                c1 = w / stride_w
                if c1 > out_w - 1:
                    c1 = out_w - 1
                for r in range(r0, r1 + 1):
                    for c in range(c0, c1 + 1):
                        marks += 1
                        bitmap[r * out_w + c] = 1
            for cell in range(l_out):
                if bitmap[cell]:
                    bitmap[cell] = 0
                    out_pos[n_out] = cell
                    n_out += 1
            out_indptr[seg + 1] = n_out
    return out_indptr_arr, out_pos_arr[:n_out].copy(), int(marks)


def linear_accumulate(indptr, pos, weights, acc):
    cdef const i64[::1] ip = indptr
    cdef const int[::1] p = pos
    cdef const i64[:, ::1] w = weights
    cdef i64[:, :, ::1] a = acc
    cdef Py_ssize_t t_steps = a.shape[0]
    cdef Py_ssize_t c_out = a.shape[2]
    cdef Py_ssize_t c_in = w.shape[1]
    cdef Py_ssize_t t, c, k, o, seg = 0
    cdef int l
    with nogil:
        for t in range(t_steps):
            for c in range(c_in):
                for k in range(ip[seg], ip[seg + 1]):
                    l = p[k]
                    for o in range(c_out):
                        a[t, l, o] += w[o, c]
                seg += 1


def lif_encode(spa, i64 gamma_num, int gamma_shift, i64 v_th, i64 v_reset,
               i64 mem_min, i64 mem_max, temp_init):
    cdef const i64[:, :, ::1] x = spa
    cdef Py_ssize_t t_steps = x.shape[0]
    cdef Py_ssize_t channels = x.shape[1]
    cdef Py_ssize_t tokens = x.shape[2]

    temp_arr = np.ascontiguousarray(temp_init, dtype=np.int64).copy()
    cdef i64[:, ::1] temp = temp_arr
    indptr_arr = np.zeros(t_steps * channels + 1, dtype=np.int64)
    cdef i64[::1] indptr = indptr_arr
    pos_arr = np.empty(t_steps * channels * tokens, dtype=np.int32)
    cdef int[::1] pos = pos_arr

    cdef i64 n = 0, mem
    cdef Py_ssize_t t, c, l, seg = 0
    with nogil:
        for t in range(t_steps):
            for c in range(channels):
                for l in range(tokens):
                    mem = x[t, c, l] + temp[c, l]
                    if mem < mem_min:
                        mem = mem_min
                    elif mem > mem_max:
                        mem = mem_max
                    if mem >= v_th:
                        temp[c, l] = v_reset
                        pos[n] = <int>l
                        n += 1
                    else:
                        temp[c, l] = _shift_round(gamma_num * mem, gamma_shift)
                seg += 1
                indptr[seg] = n
    return indptr_arr, pos_arr[:n].copy()
