"""spikedrive: inference engine and performance model for a sparse
spiking-transformer accelerator.

Spikes travel as position-encoded address lists instead of dense binary
tensors, so every kernel — pooling, attention, linear — does work
proportional to the spikes that actually fired. A dense fixed-point
reference implementation of identical arithmetic ships alongside for
bit-exact differential verification, and per-layer operation counters
feed a simple lanes-times-frequency throughput model.
"""

from . import _kernels
from ._kernels import active_backend, available_backends, set_backend, use_backend
from .attention import ChannelMask, apply_mask, intersect_count, sdsa, sdsa_mask
from .dense_ops import ConvWeights, conv2d, exact_matmul, fold_bn, residual_add
from .fixedpoint import (
    SPIKE_FORMAT,
    FixedFormat,
    FixedTensor,
    add_elementwise,
    choose_scale_exp,
    quantize,
    sat_narrow,
    shift_round,
)
from .linear import LinearWeights, spike_linear, spike_linear_into_neuron
from .model import (
    BlockWeights,
    ModelConfig,
    ModelWeights,
    RunTrace,
    SpsStage,
    random_input,
    random_weights,
    run_model,
    run_sdeb,
    run_sps,
)
from .neuron import LifParams, LifState, lif_run, lif_step
from .perf import (
    HardwareModel,
    LayerCounters,
    PerfCounters,
    PerfReport,
    count_sops_linear,
    peak_throughput,
    report,
)
from .pooling import PoolSpec, dense_maxpool, spike_maxpool
from .reference import run_reference
from .spike_stream import (
    CapacityError,
    EncodedSpikeMap,
    decode,
    encode,
    encode_from_potentials,
    sparsity,
)
from .verify import FaultSpec, run_instance, verify_many

__version__ = "0.1.0"

__all__ = [
    "ChannelMask", "apply_mask", "intersect_count", "sdsa", "sdsa_mask",
    "ConvWeights", "conv2d", "exact_matmul", "fold_bn", "residual_add",
    "SPIKE_FORMAT", "FixedFormat", "FixedTensor", "add_elementwise",
    "choose_scale_exp", "quantize", "sat_narrow", "shift_round",
    "LinearWeights", "spike_linear", "spike_linear_into_neuron",
    "BlockWeights", "ModelConfig", "ModelWeights", "RunTrace", "SpsStage",
    "random_input", "random_weights", "run_model", "run_sdeb", "run_sps",
    "LifParams", "LifState", "lif_run", "lif_step",
    "HardwareModel", "LayerCounters", "PerfCounters", "PerfReport",
    "count_sops_linear", "peak_throughput", "report",
    "PoolSpec", "dense_maxpool", "spike_maxpool",
    "run_reference",
    "CapacityError", "EncodedSpikeMap", "decode", "encode",
    "encode_from_potentials", "sparsity",
    "FaultSpec", "run_instance", "verify_many",
    "active_backend", "available_backends", "set_backend", "use_backend",
    "__version__",
]
