"""Toy spiking transformer: convolutional patch front end, attention blocks
driven entirely by encoded spikes, and a rate-readout classifier.

The graph alternates between two domains. Dense fixed-point tensors carry
membrane potentials (convolution outputs, linear-layer accumulations,
residual sums); encoded spike maps carry everything the neurons emit.
Every hop from potentials to spikes goes through the fused
neuron-and-encode step, and residual shortcuts are added in the membrane
domain right before that hop.

Intermediate planes may hold more positions than the configured address
width covers; those encodes widen the address just enough to fit (capped
at the 16-bit hardware maximum) while the final token map must fit the
configured width.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attention import sdsa
from .dense_ops import (
    ConvWeights,
    conv2d,
    quantize_conv,
    quantize_linear_weights,
    residual_add,
)
from .fixedpoint import SPIKE_FORMAT, FixedFormat, FixedTensor, quantize
from .linear import LinearWeights, spike_linear, spike_linear_into_neuron
from .neuron import LifParams
from .perf import LayerCounters, PerfCounters
from .pooling import PoolSpec, spike_maxpool
from .spike_stream import (
    MAX_POS_WIDTH,
    CapacityError,
    EncodedSpikeMap,
    decode,
    encode_from_potentials,
)


def width_for_tokens(tokens: int, minimum: int) -> int:
    """Smallest address width that can hold ``tokens`` positions, at least
    ``minimum`` bits wide."""
    needed = max(minimum, (tokens - 1).bit_length() if tokens > 1 else 1)
    if needed > MAX_POS_WIDTH:
        raise CapacityError(
            f"{tokens} positions need {needed}-bit addresses; "
            f"hardware maximum is {MAX_POS_WIDTH}"
        )
    return needed


@dataclass(frozen=True)
class SpsStage:
    """One patch-splitting stage: convolution, optional identity shortcut,
    neuron, optional spike-domain pooling (``pool_kernel`` 0 disables it)."""

    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1
    pool_kernel: int = 0
    pool_stride: int = 0
    residual: bool = False

    def __post_init__(self):
        if self.out_channels < 1:
            raise ValueError("out_channels must be >= 1")
        if self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise ValueError("bad convolution geometry")
        if self.pool_kernel < 0 or self.pool_stride < 0:
            raise ValueError("bad pool geometry")
        if bool(self.pool_kernel) != bool(self.pool_stride):
            raise ValueError("pool_kernel and pool_stride must be set together")

    @property
    def pooled(self) -> bool:
        return self.pool_kernel > 0


@dataclass(frozen=True)
class ModelConfig:
    """Everything that fixes the network's structure and arithmetic."""

    t_steps: int = 4
    in_channels: int = 3
    in_h: int = 32
    in_w: int = 32
    sps_stages: tuple[SpsStage, ...] = (
        SpsStage(out_channels=32, pool_kernel=2, pool_stride=2),
        SpsStage(out_channels=64, pool_kernel=2, pool_stride=2),
        SpsStage(out_channels=64, residual=True),
    )
    embed_dim: int = 64
    n_blocks: int = 2
    n_heads: int = 8
    mlp_ratio: int = 4
    v_th_attn: int = 1
    gamma: float = 0.5
    v_th: float = 0.5
    v_reset: float = 0.0
    act_width: int = 10
    act_scale_exp: int = -6
    weight_width: int = 10
    pos_width: int = 8
    n_classes: int = 10

    def __post_init__(self):
        if self.t_steps < 1:
            raise ValueError("t_steps must be >= 1")
        if min(self.in_channels, self.in_h, self.in_w) < 1:
            raise ValueError("input dims must be >= 1")
        if not self.sps_stages:
            raise ValueError("at least one patch-splitting stage is required")
        if self.n_blocks < 0:
            raise ValueError("n_blocks must be >= 0")
        if self.n_heads < 1 or self.embed_dim % self.n_heads:
            raise ValueError("embed_dim must be divisible by n_heads")
        if self.mlp_ratio < 1:
            raise ValueError("mlp_ratio must be >= 1")
        if self.v_th_attn < 0:
            raise ValueError("v_th_attn must be >= 0")
        if self.n_classes < 1:
            raise ValueError("n_classes must be >= 1")
        if not 2 <= self.weight_width <= 16:
            raise ValueError("weight_width must be in [2, 16]")
        if self.sps_stages[-1].out_channels != self.embed_dim:
            raise ValueError("final stage out_channels must equal embed_dim")
        # Walking the planes validates shortcut shapes and address capacity.
        planes = self.stage_planes()
        tokens = planes[-1][1] * planes[-1][2]
        if tokens > (1 << self.pos_width):
            raise ValueError(
                f"{tokens} tokens exceed the configured {self.pos_width}-bit "
                "address capacity"
            )
        self.lif_params  # validates v_th/v_reset/gamma against act format

    @property
    def act_fmt(self) -> FixedFormat:
        return FixedFormat(width=self.act_width, scale_exp=self.act_scale_exp)

    @property
    def lif_params(self) -> LifParams:
        return LifParams.from_real(self.v_th, self.v_reset, self.gamma, self.act_fmt)

    @property
    def mlp_hidden(self) -> int:
        return self.embed_dim * self.mlp_ratio

    def stage_planes(self) -> list[tuple[int, int, int]]:
        """(channels, h, w) after each stage, validating geometry on the way."""
        c, h, w = self.in_channels, self.in_h, self.in_w
        planes = []
        for i, st in enumerate(self.sps_stages):
            conv_h = (h + 2 * st.padding - st.kernel) // st.stride + 1
            conv_w = (w + 2 * st.padding - st.kernel) // st.stride + 1
            if conv_h < 1 or conv_w < 1:
                raise ValueError(f"stage {i} convolution output plane is empty")
            if st.residual and (st.out_channels, conv_h, conv_w) != (c, h, w):
                raise ValueError(
                    f"stage {i} shortcut requires shape-preserving convolution"
                )
            width_for_tokens(conv_h * conv_w, self.pos_width)
            h, w, c = conv_h, conv_w, st.out_channels
            if st.pooled:
                spec = PoolSpec(
                    in_h=h, in_w=w,
                    kernel_h=st.pool_kernel, kernel_w=st.pool_kernel,
                    stride_h=st.pool_stride, stride_w=st.pool_stride,
                )
                h, w = spec.out_h, spec.out_w
            planes.append((c, h, w))
        return planes

    @property
    def tokens(self) -> int:
        c, h, w = self.stage_planes()[-1]
        return h * w

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        """The default desk-scale network: 3×32×32 frames down to 64
        channels × 64 tokens over 4 timesteps, two attention blocks."""
        return cls(**overrides)


@dataclass(frozen=True)
class BlockWeights:
    """Learnable parameters of one attention block."""

    q: LinearWeights
    k: LinearWeights
    v: LinearWeights
    attn_out: LinearWeights
    mlp_up: LinearWeights
    mlp_down: LinearWeights


@dataclass(frozen=True)
class ModelWeights:
    """All learnable parameters, shape-checkable against a config."""

    sps: tuple[ConvWeights, ...]
    blocks: tuple[BlockWeights, ...]
    classifier: LinearWeights

    def check(self, config: ModelConfig) -> None:
        if len(self.sps) != len(config.sps_stages):
            raise ValueError("stage count mismatch between weights and config")
        c_in = config.in_channels
        for i, (st, cw) in enumerate(zip(config.sps_stages, self.sps)):
            expect = (st.out_channels, c_in, st.kernel, st.kernel)
            if cw.weights.dims != expect:
                raise ValueError(f"sps{i} weights {cw.weights.dims} != {expect}")
            if (cw.stride, cw.padding) != (st.stride, st.padding):
                raise ValueError(f"sps{i} stride/padding mismatch")
            c_in = st.out_channels
        if len(self.blocks) != config.n_blocks:
            raise ValueError("block count mismatch between weights and config")
        d, hidden = config.embed_dim, config.mlp_hidden
        for b, bw in enumerate(self.blocks):
            for name, lw, shape in (
                ("q", bw.q, (d, d)),
                ("k", bw.k, (d, d)),
                ("v", bw.v, (d, d)),
                ("attn_out", bw.attn_out, (d, d)),
                ("mlp_up", bw.mlp_up, (hidden, d)),
                ("mlp_down", bw.mlp_down, (d, hidden)),
            ):
                if lw.weights.dims != shape:
                    raise ValueError(
                        f"block{b}.{name} weights {lw.weights.dims} != {shape}"
                    )
        if self.classifier.weights.dims != (config.n_classes, config.embed_dim):
            raise ValueError("classifier weight shape mismatch")


def random_weights(config: ModelConfig, seed: int = 0) -> ModelWeights:
    """Reproducible random parameters, scaled by fan-in so that spikes
    neither die out nor saturate at desk scale."""
    rng = np.random.default_rng([seed, 0])

    def conv_stage(st: SpsStage, c_in: int) -> ConvWeights:
        fan_in = c_in * st.kernel * st.kernel
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, (st.out_channels, c_in, st.kernel, st.kernel))
        b = rng.uniform(-0.1, 0.1, st.out_channels)
        in_scale = config.act_scale_exp if c_in == config.in_channels else 0
        return quantize_conv(
            w, b, config.weight_width, in_scale, stride=st.stride, padding=st.padding
        )

    def lin(c_out: int, c_in: int) -> LinearWeights:
        bound = 1.0 / np.sqrt(c_in)
        w = rng.uniform(-bound, bound, (c_out, c_in))
        b = rng.uniform(-0.1, 0.1, c_out)
        return quantize_linear_weights(w, b, config.weight_width)

    sps = []
    c_in = config.in_channels
    for st in config.sps_stages:
        sps.append(conv_stage(st, c_in))
        c_in = st.out_channels
    d, hidden = config.embed_dim, config.mlp_hidden
    blocks = tuple(
        BlockWeights(
            q=lin(d, d), k=lin(d, d), v=lin(d, d), attn_out=lin(d, d),
            mlp_up=lin(hidden, d), mlp_down=lin(d, hidden),
        )
        for _ in range(config.n_blocks)
    )
    classifier = lin(config.n_classes, d)
    weights = ModelWeights(sps=tuple(sps), blocks=blocks, classifier=classifier)
    weights.check(config)
    return weights


def random_input(config: ModelConfig, seed: int = 0) -> FixedTensor:
    """A random static frame in [-1, 1], repeated across timesteps."""
    rng = np.random.default_rng([seed, 1])
    frame = rng.uniform(-1.0, 1.0, (config.in_channels, config.in_h, config.in_w))
    one_step = FixedTensor.from_real(frame, config.act_fmt)
    data = np.broadcast_to(
        one_step.data, (config.t_steps,) + one_step.data.shape
    )
    return FixedTensor(data=np.ascontiguousarray(data), fmt=config.act_fmt)


@dataclass
class RunTrace:
    """Named intermediate spike tensors (decoded binary) for differential
    comparison against the dense reference."""

    points: dict[str, np.ndarray] = field(default_factory=dict)

    def record(self, name: str, spikes: np.ndarray) -> None:
        self.points[name] = np.asarray(spikes, dtype=np.uint8)


def _spikes_as_membrane(
    spikes: np.ndarray, fmt: FixedFormat
) -> FixedTensor:
    """Binary spikes reinterpreted as membrane contributions of value 1.0."""
    one = quantize(1.0, fmt)
    return FixedTensor(data=spikes.astype(np.int64) * one, fmt=fmt)


def run_sps(
    x: FixedTensor,
    config: ModelConfig,
    weights: ModelWeights,
    counters: PerfCounters | None = None,
    trace: RunTrace | None = None,
) -> EncodedSpikeMap:
    """Patch-splitting front end: frames in, token spike map out."""
    if x.dims != (config.t_steps, config.in_channels, config.in_h, config.in_w):
        raise ValueError(f"input dims {x.dims} do not match the config")
    if x.fmt != config.act_fmt:
        raise ValueError("input format does not match the config")
    params = config.lif_params
    h_dense = x
    spike_map = None
    for i, (st, cw) in enumerate(zip(config.sps_stages, weights.sps)):
        ctr = counters.layer(f"sps{i}.conv", "conv") if counters else None
        mem = conv2d(h_dense, cw, config.act_fmt)
        if ctr is not None:
            t, c_out, oh, ow = mem.dims
            ops = t * c_out * oh * ow * cw.c_in * cw.kernel[0] * cw.kernel[1]
            ctr.sop_count += ops
            ctr.dense_op_count += ops
        if st.residual:
            if h_dense.fmt == config.act_fmt:
                shortcut = h_dense
            else:  # previous stage's binary spikes, lifted to membrane value 1.0
                shortcut = _spikes_as_membrane(h_dense.data, config.act_fmt)
            mem = residual_add(mem, shortcut)
        t, c_out, oh, ow = mem.dims
        pw = width_for_tokens(oh * ow, config.pos_width)
        spike_map = encode_from_potentials(
            mem.reshape((t, c_out, oh * ow)), params, pos_width=pw
        )
        if st.pooled:
            spec = PoolSpec(
                in_h=oh, in_w=ow,
                kernel_h=st.pool_kernel, kernel_w=st.pool_kernel,
                stride_h=st.pool_stride, stride_w=st.pool_stride,
            )
            pool_ctr = counters.layer(f"sps{i}.pool", "pool") if counters else None
            spike_map = spike_maxpool(spike_map, spec, counters=pool_ctr)
            oh, ow = spec.out_h, spec.out_w
        if trace is not None:
            trace.record(f"sps{i}", decode(spike_map))
        if i + 1 < len(config.sps_stages):
            frames = decode(spike_map).reshape(t, c_out, oh, ow)
            h_dense = FixedTensor(
                data=frames.astype(np.int64), fmt=SPIKE_FORMAT
            )
    return spike_map


def run_sdeb(
    tokens: EncodedSpikeMap,
    bw: BlockWeights,
    config: ModelConfig,
    counters: PerfCounters | None = None,
    trace: RunTrace | None = None,
    block_idx: int = 0,
) -> EncodedSpikeMap:
    """One encoder block: spike attention, then the spike MLP, each with a
    membrane-domain shortcut from its input tokens."""
    params = config.lif_params
    fmt = config.act_fmt
    name = f"block{block_idx}"

    def ctr(suffix: str, kind: str) -> LayerCounters | None:
        return counters.layer(f"{name}.{suffix}", kind) if counters else None

    q = spike_linear_into_neuron(tokens, bw.q, params, fmt, counters=ctr("q", "linear"))
    k = spike_linear_into_neuron(tokens, bw.k, params, fmt, counters=ctr("k", "linear"))
    v = spike_linear_into_neuron(tokens, bw.v, params, fmt, counters=ctr("v", "linear"))
    attn = sdsa(q, k, v, config.v_th_attn, counters=ctr("sdsa", "sdsa"))
    attn_mem = spike_linear(attn, bw.attn_out, fmt, counters=ctr("attn_out", "linear"))
    res = residual_add(attn_mem, _spikes_as_membrane(decode(tokens), fmt))
    mid = encode_from_potentials(res, params, pos_width=tokens.pos_width)

    hidden = spike_linear_into_neuron(
        mid, bw.mlp_up, params, fmt, counters=ctr("mlp_up", "linear")
    )
    mlp_mem = spike_linear(hidden, bw.mlp_down, fmt, counters=ctr("mlp_down", "linear"))
    res2 = residual_add(mlp_mem, _spikes_as_membrane(decode(mid), fmt))
    out = encode_from_potentials(res2, params, pos_width=tokens.pos_width)

    if trace is not None:
        trace.record(f"{name}.q", decode(q))
        trace.record(f"{name}.k", decode(k))
        trace.record(f"{name}.v", decode(v))
        trace.record(f"{name}.attn", decode(attn))
        trace.record(f"{name}.mid", decode(mid))
        trace.record(f"{name}.hidden", decode(hidden))
        trace.record(f"{name}.out", decode(out))
    return out


def classifier_logits(
    feature: np.ndarray,
    lw: LinearWeights,
    t_steps: int,
    tokens: int,
) -> FixedTensor:
    """Rate readout: spike totals per channel, averaged over timesteps and
    tokens, through the classifier weights — computed exactly in integers
    with a single rounded division."""
    feature = np.ascontiguousarray(feature, dtype=np.int64)
    acc = lw.weights.data @ feature  # [n_classes], exact in int64
    denom = t_steps * tokens
    # Round-half-away division keeps the average exact in integer space.
    magnitude = (np.abs(acc) + denom // 2) // denom
    averaged = np.sign(acc) * magnitude
    if lw.bias is not None:
        averaged = averaged + lw.bias
    out_fmt = FixedFormat(width=16, scale_exp=lw.weights.fmt.scale_exp)
    clipped = np.clip(averaged, out_fmt.min_int, out_fmt.max_int)
    return FixedTensor(data=clipped, fmt=out_fmt)


def readout(
    spike_map: EncodedSpikeMap,
    lw: LinearWeights,
    counters: PerfCounters | None = None,
) -> FixedTensor:
    """Classifier head over the final token map's firing counts."""
    counts = spike_map.segment_lengths().reshape(
        spike_map.t_steps, spike_map.channels
    )
    feature = counts.sum(axis=0)
    logits = classifier_logits(
        feature, lw, spike_map.t_steps, spike_map.tokens
    )
    if counters is not None:
        ctr = counters.layer("classifier", "linear")
        ctr.note_input(spike_map)
        ctr.sop_count += spike_map.nnz * lw.c_out
        ctr.dense_op_count += spike_map.slot_count * lw.c_out
        ctr.accumulates += spike_map.nnz * lw.c_out
    return logits


def run_model(
    x: FixedTensor,
    config: ModelConfig,
    weights: ModelWeights,
    counters: PerfCounters | None = None,
    trace: RunTrace | None = None,
) -> FixedTensor:
    """Full forward pass on the encoded-sparse engine."""
    weights.check(config)
    tokens = run_sps(x, config, weights, counters=counters, trace=trace)
    for b, bw in enumerate(weights.blocks):
        tokens = run_sdeb(
            tokens, bw, config, counters=counters, trace=trace, block_idx=b
        )
    logits = readout(tokens, weights.classifier, counters=counters)
    if trace is not None:
        trace.points["logits"] = logits.data.copy()
    return logits
