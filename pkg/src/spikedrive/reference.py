"""Dense fixed-point reference model.

Runs the exact same arithmetic as the sparse engine — same quantization,
same saturation points, same neuron dynamics — but over plain dense
tensors from start to finish: binary spikes stay materialized as 0/1
arrays, linear layers are matrix products, attention is an explicit
Hadamard-sum-threshold pipeline, and the neuron is the step-by-step fold
from the neuron module. No encoded spike map, address list, or sparse
kernel is ever touched, which makes this the ground truth the engine is
differentially tested against, bit for bit.
"""

from __future__ import annotations

import numpy as np

from .dense_ops import conv2d, exact_matmul
from .fixedpoint import (
    SPIKE_FORMAT,
    FixedFormat,
    FixedTensor,
    add_elementwise,
    quantize,
    sat_narrow,
)
from .linear import LinearWeights
from .model import ModelConfig, ModelWeights, RunTrace, classifier_logits
from .neuron import lif_run
from .pooling import PoolSpec, dense_maxpool


def dense_linear(spikes: np.ndarray, lw: LinearWeights, out_fmt: FixedFormat) -> FixedTensor:
    """Plain matmul over binary inputs: ``acc[t] = W @ spikes[t] + bias``,
    narrowed once."""
    t_steps, c_in, tokens = spikes.shape
    if c_in != lw.c_in:
        raise ValueError(f"spikes have {c_in} channels, weights expect {lw.c_in}")
    w = lw.weights.data
    bound = c_in * max(abs(lw.weights.fmt.min_int), lw.weights.fmt.max_int)
    flat = spikes.astype(np.int64).transpose(1, 0, 2).reshape(c_in, t_steps * tokens)
    acc = exact_matmul(w, flat, bound).reshape(lw.c_out, t_steps, tokens)
    acc = np.ascontiguousarray(acc.transpose(1, 0, 2))  # [T, c_out, L]
    if lw.bias is not None:
        acc = acc + lw.bias[None, :, None]
    data = sat_narrow(acc, out_fmt, from_scale_exp=lw.weights.fmt.scale_exp)
    return FixedTensor(data=data, fmt=out_fmt)


def dense_sdsa(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, v_th_attn: int
) -> np.ndarray:
    """Hadamard product of binary Q and K, summed over tokens, thresholded
    into a per-(timestep, channel) mask applied to V."""
    scores = (q.astype(np.int64) * k.astype(np.int64)).sum(axis=2)
    mask = (scores >= v_th_attn).astype(np.uint8)
    return (v * mask[:, :, None]).astype(np.uint8)


def _as_membrane(spikes: np.ndarray, fmt: FixedFormat) -> FixedTensor:
    one = quantize(1.0, fmt)
    return FixedTensor(data=spikes.astype(np.int64) * one, fmt=fmt)


def run_reference(
    x: FixedTensor,
    config: ModelConfig,
    weights: ModelWeights,
    trace: RunTrace | None = None,
) -> FixedTensor:
    """Full dense forward pass; trace keys mirror the sparse engine's."""
    weights.check(config)
    params = config.lif_params
    fmt = config.act_fmt

    h = x
    spikes = None
    for i, (st, cw) in enumerate(zip(config.sps_stages, weights.sps)):
        mem = conv2d(h, cw, fmt)
        if st.residual:
            shortcut = h if h.fmt == fmt else _as_membrane(h.data, fmt)
            mem = add_elementwise(mem, shortcut)
        spikes = lif_run(mem, params)  # uint8 [T, C, oh, ow]
        if st.pooled:
            spec = PoolSpec(
                in_h=spikes.shape[2], in_w=spikes.shape[3],
                kernel_h=st.pool_kernel, kernel_w=st.pool_kernel,
                stride_h=st.pool_stride, stride_w=st.pool_stride,
            )
            spikes = dense_maxpool(spikes, spec)
        if trace is not None:
            t, c, oh, ow = spikes.shape
            trace.record(f"sps{i}", spikes.reshape(t, c, oh * ow))
        h = FixedTensor(data=spikes.astype(np.int64), fmt=SPIKE_FORMAT)

    t_steps = config.t_steps
    tokens = spikes.reshape(t_steps, config.embed_dim, -1)

    for b, bw in enumerate(weights.blocks):
        name = f"block{b}"
        q = lif_run(dense_linear(tokens, bw.q, fmt), params)
        k = lif_run(dense_linear(tokens, bw.k, fmt), params)
        v = lif_run(dense_linear(tokens, bw.v, fmt), params)
        attn = dense_sdsa(q, k, v, config.v_th_attn)
        attn_mem = dense_linear(attn, bw.attn_out, fmt)
        res = add_elementwise(attn_mem, _as_membrane(tokens, fmt))
        mid = lif_run(res, params)
        hidden = lif_run(dense_linear(mid, bw.mlp_up, fmt), params)
        mlp_mem = dense_linear(hidden, bw.mlp_down, fmt)
        res2 = add_elementwise(mlp_mem, _as_membrane(mid, fmt))
        out = lif_run(res2, params)
        if trace is not None:
            trace.record(f"{name}.q", q)
            trace.record(f"{name}.k", k)
            trace.record(f"{name}.v", v)
            trace.record(f"{name}.attn", attn)
            trace.record(f"{name}.mid", mid)
            trace.record(f"{name}.hidden", hidden)
            trace.record(f"{name}.out", out)
        tokens = out

    feature = tokens.astype(np.int64).sum(axis=(0, 2))
    logits = classifier_logits(
        feature, weights.classifier, t_steps, tokens.shape[2]
    )
    if trace is not None:
        trace.points["logits"] = logits.data.copy()
    return logits
