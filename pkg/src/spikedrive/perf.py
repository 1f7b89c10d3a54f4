"""Operation accounting and the peak-throughput model.

Every sparse operation reports how much work it actually did (synaptic
operations, comparator steps, accumulates) next to what a dense engine
would have done for the same layer, so skipped work and per-layer sparsity
fall out by conservation: executed + skipped = dense count, always.

A synaptic operation (SOP) is one spike traversing one unique synapse;
peak throughput of the modeled hardware is simply parallel lanes times
clock frequency in SOP/s.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from .spike_stream import EncodedSpikeMap

LAYER_KINDS = ("conv", "pool", "sdsa", "linear")


@dataclass
class LayerCounters:
    """Work counters for one layer invocation."""

    name: str
    kind: str
    sop_count: int = 0
    dense_op_count: int = 0
    comparator_steps: int = 0
    accumulates: int = 0
    input_spikes: int = 0
    input_slots: int = 0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    @property
    def skipped(self) -> int:
        return self.dense_op_count - self.sop_count

    @property
    def sparsity(self) -> float:
        if self.input_slots == 0:
            return 0.0
        return 1.0 - self.input_spikes / self.input_slots

    def note_input(self, spike_map: EncodedSpikeMap) -> None:
        self.input_spikes += spike_map.nnz
        self.input_slots += spike_map.slot_count

    def check_conservation(self) -> None:
        if self.sop_count < 0 or self.sop_count > self.dense_op_count:
            raise AssertionError(
                f"layer {self.name}: executed {self.sop_count} outside "
                f"[0, {self.dense_op_count}]"
            )


class PerfCounters:
    """Ordered collection of per-layer counters for one model run."""

    def __init__(self):
        self.layers: list[LayerCounters] = []

    def layer(self, name: str, kind: str) -> LayerCounters:
        ctr = LayerCounters(name=name, kind=kind)
        self.layers.append(ctr)
        return ctr

    def total_sops(self) -> int:
        return sum(c.sop_count for c in self.layers)

    def total_dense_ops(self) -> int:
        return sum(c.dense_op_count for c in self.layers)


@dataclass(frozen=True)
class HardwareModel:
    """Parallel neuron lanes and clock frequency of the modeled accelerator."""

    lanes: int = 1536
    freq_hz: float = 200e6

    def __post_init__(self):
        if self.lanes < 1:
            raise ValueError("lanes must be >= 1")
        if self.freq_hz <= 0:
            raise ValueError("freq_hz must be positive")


def peak_throughput(hw: HardwareModel) -> float:
    """Peak SOP/s: every lane retires one synaptic operation per cycle."""
    return hw.lanes * hw.freq_hz


def count_sops_linear(spike_map: EncodedSpikeMap, c_out: int) -> int:
    """SOPs of a linear layer: each spike traverses one synapse per output."""
    return spike_map.nnz * c_out


@dataclass
class PerfReport:
    """Aggregated run accounting plus derived throughput figures."""

    layers: list[dict] = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    sparsity_by_kind: dict = field(default_factory=dict)
    hardware: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "layers": self.layers,
                "totals": self.totals,
                "sparsity_by_kind": self.sparsity_by_kind,
                "hardware": self.hardware,
            },
            indent=2,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = [
            "name", "kind", "sop_count", "dense_op_count", "skipped",
            "sparsity", "comparator_steps", "accumulates",
        ]
        writer = csv.DictWriter(buf, fieldnames=fields)
        writer.writeheader()
        for row in self.layers:
            writer.writerow({k: row[k] for k in fields})
        return buf.getvalue()


def report(
    counters: PerfCounters,
    hw: HardwareModel | None = None,
    power_watts: float | None = None,
) -> PerfReport:
    """Aggregate a run's counters into a report.

    Energy efficiency (SOP/W) appears only when a measured power figure is
    supplied; the engine never estimates power itself.
    """
    rows = []
    for ctr in counters.layers:
        ctr.check_conservation()
        rows.append(
            {
                "name": ctr.name,
                "kind": ctr.kind,
                "sop_count": ctr.sop_count,
                "dense_op_count": ctr.dense_op_count,
                "skipped": ctr.skipped,
                "sparsity": ctr.sparsity,
                "comparator_steps": ctr.comparator_steps,
                "accumulates": ctr.accumulates,
            }
        )

    by_kind: dict[str, list[float]] = {}
    for ctr in counters.layers:
        if ctr.input_slots:
            by_kind.setdefault(ctr.kind, []).append(ctr.sparsity)
    sparsity_by_kind = {k: sum(v) / len(v) for k, v in sorted(by_kind.items())}

    total_sops = counters.total_sops()
    total_dense = counters.total_dense_ops()
    totals = {
        "sop_count": total_sops,
        "dense_op_count": total_dense,
        "skipped": total_dense - total_sops,
    }

    hardware: dict = {}
    if hw is not None:
        peak = peak_throughput(hw)
        hardware = {
            "lanes": hw.lanes,
            "freq_hz": hw.freq_hz,
            "peak_sops_per_s": peak,
            "peak_gsops_per_s": peak / 1e9,
            "ideal_runtime_s": total_sops / peak,
        }
        if power_watts is not None:
            if power_watts <= 0:
                raise ValueError("power_watts must be positive")
            hardware["gsop_per_watt"] = peak / 1e9 / power_watts

    return PerfReport(
        layers=rows,
        totals=totals,
        sparsity_by_kind=sparsity_by_kind,
        hardware=hardware,
    )
