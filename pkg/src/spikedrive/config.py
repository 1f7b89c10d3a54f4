"""Plain-text run configuration: ``key = value`` lines.

The file fixes everything a run needs — model dimensions, timesteps,
neuron constants, quantization widths, address width — plus optional
hardware-model and measurement figures. Per-stage values of the patch
front end are comma-separated lists of equal length (a pool kernel of 0
means the stage has no pooling). Unknown keys, duplicate keys, and missing
required keys are all hard errors: a typo must never silently change the
model.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import ModelConfig, SpsStage
from .perf import HardwareModel


class ConfigError(ValueError):
    pass


_INT_KEYS = (
    "t_steps", "in_channels", "in_h", "in_w",
    "embed_dim", "n_blocks", "n_heads", "mlp_ratio", "v_th_attn",
    "act_width", "act_scale_exp", "weight_width", "pos_width", "n_classes",
)
_FLOAT_KEYS = ("gamma", "v_th", "v_reset")
_STAGE_KEYS = (
    "sps_out_channels", "sps_kernel", "sps_stride", "sps_padding",
    "sps_pool_kernel", "sps_pool_stride", "sps_residual",
)
REQUIRED_KEYS = frozenset(_INT_KEYS + _FLOAT_KEYS + _STAGE_KEYS)
OPTIONAL_KEYS = frozenset({"seed", "power_watts", "hw_lanes", "hw_freq_mhz"})


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: the model plus run-level extras."""

    model: ModelConfig
    seed: int = 0
    power_watts: float | None = None
    hw_lanes: int = 1536
    hw_freq_mhz: float = 200.0

    @property
    def hardware(self) -> HardwareModel:
        return HardwareModel(lanes=self.hw_lanes, freq_hz=self.hw_freq_mhz * 1e6)


def _parse_scalar(key: str, raw: str, kind: type):
    try:
        if kind is int:
            return int(raw, 0)
        return float(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {kind.__name__}")


def _parse_int_list(key: str, raw: str) -> list[int]:
    try:
        return [int(part.strip(), 0) for part in raw.split(",")]
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as a list of ints")


def parse_config(text: str) -> RunConfig:
    """Parse config text; reject unknown, duplicate, or missing keys."""
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: key {key!r} has no value")
        pairs[key] = value

    missing = sorted(REQUIRED_KEYS - pairs.keys())
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    ints = {k: _parse_scalar(k, pairs[k], int) for k in _INT_KEYS}
    floats = {k: _parse_scalar(k, pairs[k], float) for k in _FLOAT_KEYS}
    stage_lists = {k: _parse_int_list(k, pairs[k]) for k in _STAGE_KEYS}

    n_stages = len(stage_lists["sps_out_channels"])
    for key, values in stage_lists.items():
        if len(values) != n_stages:
            raise ConfigError(
                f"key {key!r}: expected {n_stages} per-stage values, "
                f"got {len(values)}"
            )
    for flag in stage_lists["sps_residual"]:
        if flag not in (0, 1):
            raise ConfigError("key 'sps_residual': values must be 0 or 1")

    stages = tuple(
        SpsStage(
            out_channels=stage_lists["sps_out_channels"][i],
            kernel=stage_lists["sps_kernel"][i],
            stride=stage_lists["sps_stride"][i],
            padding=stage_lists["sps_padding"][i],
            pool_kernel=stage_lists["sps_pool_kernel"][i],
            pool_stride=stage_lists["sps_pool_stride"][i],
            residual=bool(stage_lists["sps_residual"][i]),
        )
        for i in range(n_stages)
    )
    try:
        model = ModelConfig(sps_stages=stages, **ints, **floats)
    except ValueError as exc:
        raise ConfigError(str(exc))

    extras: dict = {}
    if "seed" in pairs:
        extras["seed"] = _parse_scalar("seed", pairs["seed"], int)
    if "power_watts" in pairs:
        extras["power_watts"] = _parse_scalar("power_watts", pairs["power_watts"], float)
    if "hw_lanes" in pairs:
        extras["hw_lanes"] = _parse_scalar("hw_lanes", pairs["hw_lanes"], int)
    if "hw_freq_mhz" in pairs:
        extras["hw_freq_mhz"] = _parse_scalar("hw_freq_mhz", pairs["hw_freq_mhz"], float)
    try:
        return RunConfig(model=model, **extras)
    except ValueError as exc:
        raise ConfigError(str(exc))


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg: RunConfig) -> str:
    """Render a RunConfig back to parseable text (stable key order)."""
    m = cfg.model
    lines = [
        f"t_steps = {m.t_steps}",
        f"in_channels = {m.in_channels}",
        f"in_h = {m.in_h}",
        f"in_w = {m.in_w}",
        "sps_out_channels = " + ",".join(str(s.out_channels) for s in m.sps_stages),
        "sps_kernel = " + ",".join(str(s.kernel) for s in m.sps_stages),
        "sps_stride = " + ",".join(str(s.stride) for s in m.sps_stages),
        "sps_padding = " + ",".join(str(s.padding) for s in m.sps_stages),
        "sps_pool_kernel = " + ",".join(str(s.pool_kernel) for s in m.sps_stages),
        "sps_pool_stride = " + ",".join(str(s.pool_stride) for s in m.sps_stages),
        "sps_residual = " + ",".join(str(int(s.residual)) for s in m.sps_stages),
        f"embed_dim = {m.embed_dim}",
        f"n_blocks = {m.n_blocks}",
        f"n_heads = {m.n_heads}",
        f"mlp_ratio = {m.mlp_ratio}",
        f"v_th_attn = {m.v_th_attn}",
        f"gamma = {m.gamma}",
        f"v_th = {m.v_th}",
        f"v_reset = {m.v_reset}",
        f"act_width = {m.act_width}",
        f"act_scale_exp = {m.act_scale_exp}",
        f"weight_width = {m.weight_width}",
        f"pos_width = {m.pos_width}",
        f"n_classes = {m.n_classes}",
        f"seed = {cfg.seed}",
        f"hw_lanes = {cfg.hw_lanes}",
        f"hw_freq_mhz = {cfg.hw_freq_mhz:g}",
    ]
    if cfg.power_watts is not None:
        lines.append(f"power_watts = {cfg.power_watts:g}")
    return "\n".join(lines) + "\n"
