"""Gather-accumulate spike linear layers against dense matmul oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikedrive.fixedpoint import WIDE_WIDTH, FixedFormat, FixedTensor
from spikedrive.linear import LinearWeights, spike_linear, spike_linear_into_neuron
from spikedrive.neuron import LifParams, lif_run
from spikedrive.perf import LayerCounters
from spikedrive.spike_stream import decode, encode, encode_from_potentials

W_FMT = FixedFormat(10, -6)
OUT_FMT = FixedFormat(12, -6)


def weights_from_ints(rows, bias=None):
    return LinearWeights(
        weights=FixedTensor(data=np.array(rows, dtype=np.int64), fmt=W_FMT),
        bias=None if bias is None else np.array(bias, dtype=np.int64),
    )


def oracle_matmul(spikes, lw, out_fmt):
    """Independent dense route: per-timestep int64 matmul + rounding clip."""
    t, c_in, tokens = spikes.shape
    acc = np.einsum(
        "oc,tcl->tol", lw.weights.data, spikes.astype(np.int64), dtype=np.int64
    )
    if lw.bias is not None:
        acc = acc + lw.bias[None, :, None]
    return np.clip(acc, out_fmt.min_int, out_fmt.max_int)


def test_single_token_gather():
    # channels {0, 2} spike: output = col0 + col2
    lw = weights_from_ints([[1, 2, 3], [4, 5, 6]])
    spikes = np.zeros((1, 3, 1), dtype=np.uint8)
    spikes[0, [0, 2], 0] = 1
    out = spike_linear(encode(spikes), lw, OUT_FMT)
    assert out.data[0, :, 0].tolist() == [4, 10]


def test_bias_reaches_silent_tokens():
    lw = weights_from_ints([[7, -2]], bias=[11])
    spikes = np.zeros((2, 2, 3), dtype=np.uint8)
    out = spike_linear(encode(spikes), lw, OUT_FMT)
    assert (out.data == 11).all()


def test_empty_input_with_zero_bias_is_zero():
    lw = weights_from_ints([[3, 1], [2, 2]], bias=[0, 0])
    out = spike_linear(encode(np.zeros((1, 2, 4), dtype=np.uint8)), lw, OUT_FMT)
    assert (out.data == 0).all()


@settings(max_examples=250, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_dense_matmul(seed):
    rng = np.random.default_rng(seed)
    t = int(rng.integers(1, 4))
    c_in = int(rng.integers(1, 12))
    c_out = int(rng.integers(1, 12))
    tokens = int(rng.integers(1, 32))
    lw = LinearWeights(
        weights=FixedTensor(data=rng.integers(-511, 512, (c_out, c_in)), fmt=W_FMT),
        bias=rng.integers(-2000, 2000, c_out) if rng.random() < 0.7 else None,
    )
    spikes = (rng.random((t, c_in, tokens)) < rng.random()).astype(np.uint8)
    got = spike_linear(encode(spikes), lw, OUT_FMT)
    assert (got.data == oracle_matmul(spikes, lw, OUT_FMT)).all()


def test_saturation_at_output():
    lw = weights_from_ints([[511, 511, 511, 511, 511, 511, 511, 511, 511]])
    spikes = np.ones((1, 9, 1), dtype=np.uint8)
    out = spike_linear(encode(spikes), lw, OUT_FMT)
    assert out.data[0, 0, 0] == OUT_FMT.max_int  # 4599 clamps to 2047


def test_accumulate_counter_is_exact():
    rng = np.random.default_rng(5)
    spikes = (rng.random((3, 10, 20)) < 0.35).astype(np.uint8)
    lw = LinearWeights(
        weights=FixedTensor(data=rng.integers(-100, 100, (7, 10)), fmt=W_FMT)
    )
    ctr = LayerCounters("l", "linear")
    spike_linear(encode(spikes), lw, OUT_FMT, counters=ctr)
    nnz = int(spikes.sum())
    assert ctr.sop_count == nnz * 7
    assert ctr.accumulates == nnz * 7
    assert ctr.dense_op_count == 3 * 10 * 20 * 7
    assert ctr.input_spikes == nnz


def test_rejects_channel_mismatch():
    lw = weights_from_ints([[1, 2]])
    with pytest.raises(ValueError):
        spike_linear(encode(np.zeros((1, 3, 2), dtype=np.uint8)), lw, OUT_FMT)


def test_into_neuron_equals_linear_then_neuron():
    rng = np.random.default_rng(33)
    params = LifParams(v_th=40, v_reset=0, gamma_num=1, gamma_shift=1)
    out_fmt = FixedFormat(10, -6)
    for seed in range(25):
        rng = np.random.default_rng(seed)
        spikes = (rng.random((3, 8, 12)) < 0.4).astype(np.uint8)
        lw = LinearWeights(
            weights=FixedTensor(data=rng.integers(-200, 200, (6, 8)), fmt=W_FMT),
            bias=rng.integers(-50, 50, 6),
        )
        fused = spike_linear_into_neuron(encode(spikes), lw, params, out_fmt)
        mem = spike_linear(encode(spikes), lw, out_fmt)
        assert (decode(fused) == lif_run(mem, params)).all()


def test_into_neuron_counts_like_plain_linear():
    rng = np.random.default_rng(2)
    spikes = (rng.random((2, 5, 9)) < 0.5).astype(np.uint8)
    lw = LinearWeights(
        weights=FixedTensor(data=rng.integers(-50, 50, (4, 5)), fmt=W_FMT)
    )
    params = LifParams(v_th=10, v_reset=0, gamma_num=1, gamma_shift=1)
    c1, c2 = LayerCounters("a", "linear"), LayerCounters("b", "linear")
    spike_linear(encode(spikes), lw, OUT_FMT, counters=c1)
    spike_linear_into_neuron(encode(spikes), lw, params, OUT_FMT, counters=c2)
    assert (c1.sop_count, c1.dense_op_count) == (c2.sop_count, c2.dense_op_count)


def test_bias_lives_at_accumulator_scale():
    lw = weights_from_ints([[1]], bias=[0])
    assert lw.acc_format.scale_exp == W_FMT.scale_exp
    assert lw.acc_format.width == WIDE_WIDTH
