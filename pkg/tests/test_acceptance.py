"""Acceptance gate: every shipping criterion, one printed verdict line each.

Each test pins one externally stated guarantee of the package at its exact
tolerance and prints a single ``ACCEPTANCE n PASS`` line to the terminal
(outside pytest's capture) when it holds.  Failures surface as ordinary
assertion errors.
"""

import time

import numpy as np
import pytest

from spikedrive.attention import intersect_count, sdsa
from spikedrive.fixedpoint import FixedFormat, FixedTensor, quantize, sat_narrow
from spikedrive.linear import LinearWeights, spike_linear
from spikedrive.model import ModelConfig
from spikedrive.neuron import LifParams, lif_run
from spikedrive.perf import HardwareModel, PerfCounters, peak_throughput
from spikedrive.pooling import PoolSpec, dense_maxpool, spike_maxpool
from spikedrive.reference import dense_sdsa
from spikedrive.spike_stream import decode, encode
from spikedrive.verify import verify_many

ACT_FMT = FixedFormat(width=10, scale_exp=-6)


def announce(capsys, line):
    with capsys.disabled():
        print(f"\n{line}")


# --------------------------------------------------------------------------
# criterion 1: peak throughput
# --------------------------------------------------------------------------

def test_acceptance_1_peak_throughput(capsys):
    """1536 lanes at 200 MHz must give 307.2 GSOP/s, bit-exactly."""
    peak = peak_throughput(HardwareModel(lanes=1536, freq_hz=200e6))
    assert peak == 307.2e9  # tolerance: exact
    assert peak == 1536 * 200e6
    announce(capsys, "ACCEPTANCE 1 PASS — peak throughput 307.2 GSOP/s exact")


# --------------------------------------------------------------------------
# criterion 2: end-to-end engine vs dense reference, 1000 toy instances
# --------------------------------------------------------------------------

def test_acceptance_2_end_to_end_equivalence(capsys):
    """≥1000 seeded toy instances, sparse logits == dense logits, zero
    tolerance, under 5 minutes."""
    summary = verify_many(ModelConfig.toy(), n_seeds=1000)
    assert summary.total == 1000
    assert summary.ok, f"first failure: {summary.first_failure}"
    assert summary.elapsed_s < 300.0
    announce(
        capsys,
        f"ACCEPTANCE 2 PASS — 1000 toy instances bit-exact "
        f"in {summary.elapsed_s:.1f}s",
    )


# --------------------------------------------------------------------------
# criterion 3: module oracles, ≥500 random cases each, < 2 minutes total
# --------------------------------------------------------------------------

def test_acceptance_3_module_oracles(capsys):
    rng = np.random.default_rng(3)
    started = time.perf_counter()

    # 3a: sparse maxpool vs window-scanning dense maxpool
    for _ in range(500):
        in_h, in_w = int(rng.integers(2, 10)), int(rng.integers(2, 10))
        kh = int(rng.integers(1, min(3, in_h) + 1))
        kw = int(rng.integers(1, min(3, in_w) + 1))
        spec = PoolSpec(in_h=in_h, in_w=in_w, kernel_h=kh, kernel_w=kw,
                        stride_h=int(rng.integers(1, kh + 1)),
                        stride_w=int(rng.integers(1, kw + 1)))
        frames = (rng.random((2, 3, in_h, in_w)) < rng.random()).astype(np.uint8)
        sparse = decode(spike_maxpool(encode(frames.reshape(2, 3, -1)), spec))
        dense = dense_maxpool(frames, spec).reshape(2, 3, -1)
        assert (sparse == dense).all()

    # 3b: two-pointer intersection vs binary dot product
    for _ in range(500):
        tokens = int(rng.integers(1, 80))
        a = np.flatnonzero(rng.random(tokens) < rng.random()).astype(np.int32)
        b = np.flatnonzero(rng.random(tokens) < rng.random()).astype(np.int32)
        count, steps = intersect_count(a, b)
        va = np.zeros(tokens, dtype=np.int64)
        vb = np.zeros(tokens, dtype=np.int64)
        va[a] = 1
        vb[b] = 1
        assert count == int(va @ vb)
        assert steps <= a.size + b.size

    # 3c: address-domain attention mask vs dense mask pipeline
    for _ in range(500):
        t, c, tokens = (int(rng.integers(1, 4)), int(rng.integers(1, 6)),
                        int(rng.integers(1, 40)))
        qf, kf, vf = (
            (rng.random((t, c, tokens)) < rng.random()).astype(np.uint8)
            for _ in range(3)
        )
        threshold = int(rng.integers(0, 4))
        sparse = decode(sdsa(encode(qf), encode(kf), encode(vf), threshold))
        assert (sparse == dense_sdsa(qf, kf, vf, threshold)).all()

    # 3d: gather-accumulate linear vs dense matmul
    for _ in range(500):
        t, c_in, c_out, tokens = (int(rng.integers(1, 4)), int(rng.integers(1, 8)),
                                  int(rng.integers(1, 8)), int(rng.integers(1, 30)))
        spikes = (rng.random((t, c_in, tokens)) < rng.random()).astype(np.uint8)
        w = FixedTensor(
            data=rng.integers(-400, 400, size=(c_out, c_in)).astype(np.int64),
            fmt=FixedFormat(width=10, scale_exp=-9),
        )
        bias = rng.integers(-1000, 1000, size=c_out).astype(np.int64)
        lw = LinearWeights(weights=w, bias=bias)
        out_fmt = FixedFormat(width=12, scale_exp=-9)  # same scale: pure clip
        got = spike_linear(encode(spikes), lw, out_fmt)
        acc = np.einsum("oc,tcl->tol", w.data, spikes.astype(np.int64),
                        dtype=np.int64) + bias[None, :, None]
        assert (got.data == np.clip(acc, out_fmt.min_int, out_fmt.max_int)).all()

    # 3e: encode/decode round trips
    for _ in range(500):
        t, c, tokens = (int(rng.integers(1, 4)), int(rng.integers(1, 6)),
                        int(rng.integers(1, 256)))
        frames = (rng.random((t, c, tokens)) < rng.random()).astype(np.uint8)
        assert (decode(encode(frames)) == frames).all()

    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    announce(
        capsys,
        f"ACCEPTANCE 3 PASS — 5 module oracles × 500 cases bit-exact "
        f"in {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# criterion 4: neuron property suite
# --------------------------------------------------------------------------

def _oracle_neuron(charges, params, mem_lo, mem_hi):
    """Independent scalar replay returning (spikes, membranes, temps)."""
    temp = 0
    spikes, mems, temps = [], [], []
    for spa in charges:
        mem = min(max(int(spa) + temp, mem_lo), mem_hi)
        fired = mem >= params.v_th
        if fired:
            temp = params.v_reset
        else:
            prod = params.gamma_num * mem
            half = 1 << (params.gamma_shift - 1) if params.gamma_shift else 0
            if prod >= 0:
                temp = (prod + half) >> params.gamma_shift
            else:
                temp = -((-prod + half) >> params.gamma_shift)
        spikes.append(1 if fired else 0)
        mems.append(mem)
        temps.append(temp)
    return spikes, mems, temps


def test_acceptance_4_neuron_properties(capsys):
    params = LifParams.from_real(v_th=0.5, v_reset=0.0, gamma=0.5, fmt=ACT_FMT)
    lo, hi = ACT_FMT.min_int, ACT_FMT.max_int
    started = time.perf_counter()

    # exhaustive three-step grid, 0.1 real resolution over [-1.5, 1.5]
    grid = np.array([quantize(0.1 * k, ACT_FMT) for k in range(-15, 16)],
                    dtype=np.int64)
    seqs = np.stack(np.meshgrid(grid, grid, grid, indexing="ij"), axis=0)
    seqs = seqs.reshape(3, 1, -1)  # [T=3, C=1, L=31^3]
    spikes = lif_run(FixedTensor(data=seqs, fmt=ACT_FMT), params)
    n = seqs.shape[2]
    assert n == 31 ** 3
    for i in range(n):
        charges = seqs[:, 0, i]
        want_spikes, mems, temps = _oracle_neuron(charges, params, lo, hi)
        assert spikes[:, 0, i].tolist() == want_spikes
        # threshold-equality firing and reset-to-v_reset, from the replay
        for t in range(3):
            assert want_spikes[t] == (1 if mems[t] >= params.v_th else 0)
            if want_spikes[t]:
                assert temps[t] == params.v_reset

    # the exact-threshold point itself must fire
    at_th = FixedTensor(data=np.full((1, 1, 1), params.v_th, dtype=np.int64),
                        fmt=ACT_FMT)
    assert lif_run(at_th, params)[0, 0, 0] == 1
    below = FixedTensor(data=np.full((1, 1, 1), params.v_th - 1, dtype=np.int64),
                        fmt=ACT_FMT)
    assert lif_run(below, params)[0, 0, 0] == 0

    # no fire under zero input
    zero = FixedTensor(data=np.zeros((3, 1, 64), dtype=np.int64), fmt=ACT_FMT)
    assert lif_run(zero, params).sum() == 0

    # 10^4 random sequences vs the scalar replay
    rng = np.random.default_rng(4)
    t_steps = 6
    rand = rng.integers(lo, hi + 1, size=(t_steps, 1, 10_000)).astype(np.int64)
    got = lif_run(FixedTensor(data=rand, fmt=ACT_FMT), params)
    for i in range(10_000):
        want, _, _ = _oracle_neuron(rand[:, 0, i], params, lo, hi)
        assert got[:, 0, i].tolist() == want

    # gamma = 0: memoryless — each step behaves as if run alone
    memless = LifParams(v_th=params.v_th, v_reset=params.v_reset,
                        gamma_num=0, gamma_shift=1)
    seq = rand[:, :, :2000]
    joint = lif_run(FixedTensor(data=seq, fmt=ACT_FMT), memless)
    for t in range(t_steps):
        alone = lif_run(FixedTensor(data=seq[t:t + 1], fmt=ACT_FMT), memless)
        assert (joint[t] == alone[0]).all()

    # monotone in the charge at a perturbed step
    base = rand[:, :, :2000]
    for t in (0, 3, t_steps - 1):
        bumped = base.copy()
        bumped[t] = np.minimum(bumped[t] + rng.integers(1, 60), hi)
        s_base = lif_run(FixedTensor(data=base, fmt=ACT_FMT), params)
        s_bump = lif_run(FixedTensor(data=bumped, fmt=ACT_FMT), params)
        assert (s_bump[t] >= s_base[t]).all()

    elapsed = time.perf_counter() - started
    announce(
        capsys,
        f"ACCEPTANCE 4 PASS — neuron properties: 29791-point exhaustive grid "
        f"+ 10^4 random sequences in {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# criterion 5: work scales with spikes, not tensor size
# --------------------------------------------------------------------------

def _linear_accumulates(spikes, c_out):
    layer = PerfCounters().layer("slu", "linear")
    t, c_in, tokens = spikes.shape
    w = FixedTensor(data=np.ones((c_out, c_in), dtype=np.int64),
                    fmt=FixedFormat(width=10, scale_exp=-9))
    lw = LinearWeights(weights=w, bias=None)
    spike_linear(encode(spikes), lw, FixedFormat(width=16, scale_exp=-9),
                 counters=layer)
    return layer


def test_acceptance_5_sparsity_exploitation(capsys):
    rng = np.random.default_rng(5)
    t, c_in, tokens, c_out = 4, 16, 64, 24

    # exact accumulate-count formula at several sparsity levels
    for rate in (0.0, 0.05, 0.25, 0.5, 1.0):
        spikes = (rng.random((t, c_in, tokens)) < rate).astype(np.uint8)
        layer = _linear_accumulates(spikes, c_out)
        nnz = int(spikes.sum())
        slots = t * c_in * tokens
        s = 1.0 - nnz / slots
        assert layer.accumulates == nnz * c_out  # == (1-s)·T·C_in·L·C_out
        assert layer.accumulates == round((1.0 - s) * slots * c_out)
        assert layer.dense_op_count == slots * c_out

    # a 10x spike reduction must cut accumulates by ≥ 9x
    dense_spikes = (rng.random((t, c_in, tokens)) < 0.5).astype(np.uint8)
    keep = np.flatnonzero(dense_spikes.ravel())
    drop = rng.choice(keep, size=keep.size - keep.size // 10, replace=False)
    thin = dense_spikes.copy().ravel()
    thin[drop] = 0
    thin = thin.reshape(dense_spikes.shape)
    assert dense_spikes.sum() >= 10 * thin.sum() > 0
    acc_dense = _linear_accumulates(dense_spikes, c_out).accumulates
    acc_thin = _linear_accumulates(thin, c_out).accumulates
    assert acc_dense >= 9 * acc_thin

    # maxpool marking work: same spikes on a 16x larger plane, no more work
    spots = [(1, 3), (5, 9), (10, 2), (14, 14), (7, 7)]
    small = np.zeros((1, 1, 16, 16), dtype=np.uint8)
    big = np.zeros((1, 1, 64, 64), dtype=np.uint8)
    for r, c in spots:
        small[0, 0, r, c] = 1
        big[0, 0, r, c] = 1
    work = {}
    for name, frames, side in (("small", small, 16), ("big", big, 64)):
        layer = PerfCounters().layer("smu", "pool")
        spec = PoolSpec(in_h=side, in_w=side, kernel_h=2, kernel_w=2,
                        stride_h=2, stride_w=2)
        spike_maxpool(encode(frames.reshape(1, 1, -1), pos_width=16), spec,
                      counters=layer)
        work[name] = layer
    assert work["big"].sop_count == work["small"].sop_count
    assert work["big"].dense_op_count == 16 * work["small"].dense_op_count

    # attention comparator work: same spikes among 16x more tokens, no more
    positions = np.array([3, 17, 40, 55], dtype=np.int32)
    step_counts = {}
    for tokens_n in (64, 1024):
        frames = np.zeros((1, 1, tokens_n), dtype=np.uint8)
        frames[0, 0, positions] = 1
        layer = PerfCounters().layer("smam", "sdsa")
        m = encode(frames, pos_width=16)
        sdsa(m, m, m, 1, counters=layer)
        step_counts[tokens_n] = layer
    assert step_counts[1024].comparator_steps == step_counts[64].comparator_steps
    assert step_counts[1024].dense_op_count == 16 * step_counts[64].dense_op_count

    announce(
        capsys,
        "ACCEPTANCE 5 PASS — accumulates == (1-s)·T·C_in·L·C_out exactly; "
        "10x fewer spikes ⇒ ≥9x fewer accumulates; pool/attention work "
        "independent of tensor size",
    )


# --------------------------------------------------------------------------
# criterion 6: figures that need silicon or trained weights
# --------------------------------------------------------------------------

def test_acceptance_6_desk_scale_statement(capsys):
    announce(
        capsys,
        "ACCEPTANCE 6 PASS — stated: 94.87% CIFAR-10 accuracy needs trained "
        "weights that are not published; 25.6 GSOP/W and the resource-"
        "utilization rows need physical hardware; all are replaced here by "
        "criteria 1-5",
    )
    # the package must not pretend otherwise anywhere in its public surface
    import spikedrive

    assert not hasattr(spikedrive, "cifar10_accuracy")
    assert not hasattr(spikedrive, "measured_power")
