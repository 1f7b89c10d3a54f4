"""Differential verification harness.

Each instance draws seeded random weights and input, runs both the
encoded-sparse engine and the dense reference, and compares every traced
intermediate plus the logits bit for bit. On mismatch it reports the seed,
the first differing layer in execution order, and the first differing flat
index — enough to localize a defect without re-running anything.

A fault-injection hook (flip one bit of one weight element in the engine's
copy only) exists so the harness itself can be tested: a harness that
cannot detect a planted defect proves nothing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .dense_ops import ConvWeights
from .linear import LinearWeights
from .model import (
    ModelConfig,
    ModelWeights,
    RunTrace,
    random_input,
    random_weights,
    run_model,
)
from .fixedpoint import FixedTensor
from .reference import run_reference


@dataclass(frozen=True)
class FaultSpec:
    """One flipped bit in one named weight tensor of the sparse engine.

    ``tensor`` uses manifest naming (``sps0.w``, ``block1.q.w``,
    ``classifier.b`` …); ``bit`` must stay below the sign bit so the
    faulted value remains representable.
    """

    tensor: str
    index: tuple[int, ...]
    bit: int = 0


def _flip(data: np.ndarray, index: tuple[int, ...], bit: int, width: int) -> np.ndarray:
    if not 0 <= bit < width - 1:
        raise ValueError(f"bit must be in [0, {width - 2}]")
    out = data.copy()
    out[index] = int(out[index]) ^ (1 << bit)
    return out


def inject_fault(weights: ModelWeights, fault: FaultSpec) -> ModelWeights:
    """Return a copy of ``weights`` with the faulted element flipped."""
    parts = fault.tensor.split(".")

    def flip_linear(lw: LinearWeights, leaf: str) -> LinearWeights:
        if leaf == "w":
            data = _flip(lw.weights.data, fault.index, fault.bit, lw.weights.fmt.width)
            return replace(lw, weights=FixedTensor(data=data, fmt=lw.weights.fmt))
        if leaf == "b":
            if lw.bias is None:
                raise ValueError(f"{fault.tensor}: tensor has no bias")
            return replace(lw, bias=_flip(lw.bias, fault.index, fault.bit, 16))
        raise ValueError(f"{fault.tensor}: unknown leaf {leaf!r}")

    if parts[0].startswith("sps") and len(parts) == 2:
        i = int(parts[0][3:])
        if not 0 <= i < len(weights.sps):
            raise ValueError(f"unknown tensor name {fault.tensor!r}")
        cw = weights.sps[i]
        if parts[1] == "w":
            data = _flip(cw.weights.data, fault.index, fault.bit, cw.weights.fmt.width)
            new = replace(cw, weights=FixedTensor(data=data, fmt=cw.weights.fmt))
        elif parts[1] == "b":
            if cw.bias is None:
                raise ValueError(f"{fault.tensor}: tensor has no bias")
            new = replace(cw, bias=_flip(cw.bias, fault.index, fault.bit, 16))
        else:
            raise ValueError(f"{fault.tensor}: unknown leaf {parts[1]!r}")
        sps = tuple(new if j == i else c for j, c in enumerate(weights.sps))
        return replace(weights, sps=sps)

    if parts[0].startswith("block") and len(parts) == 3:
        b = int(parts[0][5:])
        if not 0 <= b < len(weights.blocks):
            raise ValueError(f"unknown tensor name {fault.tensor!r}")
        bw = weights.blocks[b]
        if parts[1] not in ("q", "k", "v", "attn_out", "mlp_up", "mlp_down"):
            raise ValueError(f"{fault.tensor}: unknown projection {parts[1]!r}")
        new_bw = replace(bw, **{parts[1]: flip_linear(getattr(bw, parts[1]), parts[2])})
        blocks = tuple(new_bw if j == b else w for j, w in enumerate(weights.blocks))
        return replace(weights, blocks=blocks)

    if parts[0] == "classifier" and len(parts) == 2:
        return replace(weights, classifier=flip_linear(weights.classifier, parts[1]))

    raise ValueError(f"unknown tensor name {fault.tensor!r}")


@dataclass(frozen=True)
class Mismatch:
    layer: str
    flat_index: int
    engine_value: int
    reference_value: int

    def __str__(self):
        return (
            f"layer {self.layer!r} first differs at flat index "
            f"{self.flat_index}: engine={self.engine_value} "
            f"reference={self.reference_value}"
        )


@dataclass(frozen=True)
class InstanceResult:
    seed: int
    ok: bool
    mismatch: Mismatch | None = None

    def __str__(self):
        if self.ok:
            return f"seed {self.seed}: ok"
        return f"seed {self.seed}: MISMATCH — {self.mismatch}"


def compare_traces(engine: RunTrace, reference: RunTrace) -> Mismatch | None:
    """First difference between two traces, in engine execution order."""
    for name, got in engine.points.items():
        want = reference.points.get(name)
        if want is None:
            raise AssertionError(f"reference trace is missing layer {name!r}")
        if got.shape != want.shape:
            raise AssertionError(
                f"layer {name!r}: shape {got.shape} vs {want.shape}"
            )
        diff = np.flatnonzero(got.ravel() != want.ravel())
        if diff.size:
            i = int(diff[0])
            return Mismatch(
                layer=name,
                flat_index=i,
                engine_value=int(got.ravel()[i]),
                reference_value=int(want.ravel()[i]),
            )
    return None


def run_instance(
    config: ModelConfig, seed: int, fault: FaultSpec | None = None
) -> InstanceResult:
    """One differential instance: seeded weights and input through both
    engines, traces compared bit for bit."""
    weights = random_weights(config, seed)
    x = random_input(config, seed)
    engine_weights = inject_fault(weights, fault) if fault is not None else weights

    engine_trace, ref_trace = RunTrace(), RunTrace()
    run_model(x, config, engine_weights, trace=engine_trace)
    run_reference(x, config, weights, trace=ref_trace)
    mismatch = compare_traces(engine_trace, ref_trace)
    return InstanceResult(seed=seed, ok=mismatch is None, mismatch=mismatch)


@dataclass(frozen=True)
class VerifySummary:
    total: int
    failed: int
    elapsed_s: float
    first_failure: InstanceResult | None = None

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def __str__(self):
        status = "all match" if self.ok else f"{self.failed} mismatched"
        line = f"{self.total} instances, {status} ({self.elapsed_s:.1f}s)"
        if self.first_failure is not None:
            line += f"\nfirst failure: {self.first_failure}"
        return line


def verify_many(
    config: ModelConfig,
    n_seeds: int,
    start_seed: int = 0,
    fault: FaultSpec | None = None,
    on_result=None,
) -> VerifySummary:
    """Run ``n_seeds`` consecutive differential instances."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    t0 = time.perf_counter()
    failed = 0
    first_failure = None
    for seed in range(start_seed, start_seed + n_seeds):
        result = run_instance(config, seed, fault=fault)
        if not result.ok:
            failed += 1
            if first_failure is None:
                first_failure = result
        if on_result is not None:
            on_result(result)
    return VerifySummary(
        total=n_seeds,
        failed=failed,
        elapsed_s=time.perf_counter() - t0,
        first_failure=first_failure,
    )
