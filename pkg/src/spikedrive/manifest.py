"""Binary tensor container for weights and inputs.

Layout, all little-endian:

    magic            4 bytes  b"SDTW"
    format version   uint16
    tensor count     uint32
    per tensor:
        name length  uint16, then UTF-8 name
        rank         uint8
        dims         uint32 × rank
        element width in bits, uint8
        scale exponent, int8
        elements     int16 × prod(dims), row-major

Elements are stored as signed 16-bit regardless of the declared width —
byte-aligned and lossless for every format this engine uses — so the
declared width acts as a range contract that reads and writes both
enforce. Readers reject anything malformed: bad magic or version, names
that do not decode, elements outside the declared width, and files whose
length disagrees with their own declared sizes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .dense_ops import ConvWeights
from .fixedpoint import FixedFormat, FixedTensor
from .linear import LinearWeights
from .model import BlockWeights, ModelConfig, ModelWeights

MAGIC = b"SDTW"
VERSION = 1
_BIAS_WIDTH = 16


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class TensorRecord:
    """One named integer tensor with its fixed-point metadata."""

    name: str
    width: int
    scale_exp: int
    data: np.ndarray  # int64, any shape

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.int64)
        object.__setattr__(self, "data", data)
        if not 2 <= self.width <= 16:
            raise ManifestError(
                f"tensor {self.name!r}: width {self.width} not storable in 16 bits"
            )
        if not -128 <= self.scale_exp <= 127:
            raise ManifestError(f"tensor {self.name!r}: scale_exp out of int8 range")
        lo, hi = -(1 << (self.width - 1)), (1 << (self.width - 1)) - 1
        if data.size and (data.min() < lo or data.max() > hi):
            raise ManifestError(
                f"tensor {self.name!r}: elements exceed the declared "
                f"{self.width}-bit range"
            )
        if data.ndim < 1 or data.ndim > 255:
            raise ManifestError(f"tensor {self.name!r}: unsupported rank {data.ndim}")


def write_manifest(path, records: list[TensorRecord]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<HI", VERSION, len(records))
    for rec in records:
        name_bytes = rec.name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise ManifestError(f"tensor name too long: {rec.name[:32]!r}…")
        blob += struct.pack("<H", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<B", rec.data.ndim)
        blob += struct.pack(f"<{rec.data.ndim}I", *rec.data.shape)
        blob += struct.pack("<Bb", rec.width, rec.scale_exp)
        blob += rec.data.astype("<i2").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def read_manifest(path) -> list[TensorRecord]:
    with open(path, "rb") as fh:
        blob = fh.read()
    offset = 0

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise ManifestError(f"truncated manifest: ran out of bytes reading {what}")
        chunk = blob[offset: offset + n]
        offset += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise ManifestError("bad magic: not a weight manifest")
    version, count = struct.unpack("<HI", take(6, "header"))
    if version != VERSION:
        raise ManifestError(f"unsupported manifest version {version}")

    records = []
    for i in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        try:
            name = take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise ManifestError(f"tensor {i}: name is not valid UTF-8")
        (rank,) = struct.unpack("<B", take(1, "rank"))
        if rank < 1:
            raise ManifestError(f"tensor {name!r}: rank must be >= 1")
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        if any(d < 1 for d in dims):
            raise ManifestError(f"tensor {name!r}: zero-sized dimension")
        width, scale_exp = struct.unpack("<Bb", take(2, "format"))
        n_elem = int(np.prod(dims, dtype=np.int64))
        raw = take(2 * n_elem, f"elements of {name!r}")
        data = np.frombuffer(raw, dtype="<i2").astype(np.int64).reshape(dims)
        records.append(
            TensorRecord(name=name, width=width, scale_exp=scale_exp, data=data)
        )
    if offset != len(blob):
        raise ManifestError(
            f"manifest has {len(blob) - offset} trailing bytes past the "
            "declared contents"
        )
    return records


# --- mapping between the model's weight tree and flat named records ---


def _linear_records(name: str, lw: LinearWeights) -> list[TensorRecord]:
    recs = [
        TensorRecord(
            name=f"{name}.w",
            width=lw.weights.fmt.width,
            scale_exp=lw.weights.fmt.scale_exp,
            data=lw.weights.data,
        )
    ]
    if lw.bias is not None:
        recs.append(
            TensorRecord(
                name=f"{name}.b",
                width=_BIAS_WIDTH,
                scale_exp=lw.acc_format.scale_exp,
                data=lw.bias,
            )
        )
    return recs


def weights_to_records(config: ModelConfig, weights: ModelWeights) -> list[TensorRecord]:
    weights.check(config)
    records: list[TensorRecord] = []
    in_scale = config.act_scale_exp
    for i, cw in enumerate(weights.sps):
        records.append(
            TensorRecord(
                name=f"sps{i}.w",
                width=cw.weights.fmt.width,
                scale_exp=cw.weights.fmt.scale_exp,
                data=cw.weights.data,
            )
        )
        if cw.bias is not None:
            records.append(
                TensorRecord(
                    name=f"sps{i}.b",
                    width=_BIAS_WIDTH,
                    scale_exp=in_scale + cw.weights.fmt.scale_exp,
                    data=cw.bias,
                )
            )
        in_scale = 0  # later stages see unit spikes
    for b, bw in enumerate(weights.blocks):
        for leaf in ("q", "k", "v", "attn_out", "mlp_up", "mlp_down"):
            records.extend(_linear_records(f"block{b}.{leaf}", getattr(bw, leaf)))
    records.extend(_linear_records("classifier", weights.classifier))
    return records


def _records_by_name(records: list[TensorRecord]) -> dict[str, TensorRecord]:
    by_name: dict[str, TensorRecord] = {}
    for rec in records:
        if rec.name in by_name:
            raise ManifestError(f"duplicate tensor {rec.name!r}")
        by_name[rec.name] = rec
    return by_name


def _take_linear(
    by_name: dict[str, TensorRecord], name: str, shape: tuple[int, int]
) -> LinearWeights:
    wrec = by_name.pop(f"{name}.w", None)
    if wrec is None:
        raise ManifestError(f"manifest is missing tensor {name + '.w'!r}")
    if wrec.data.shape != shape:
        raise ManifestError(
            f"tensor {wrec.name!r}: shape {wrec.data.shape} != expected {shape}"
        )
    fmt = FixedFormat(width=wrec.width, scale_exp=wrec.scale_exp)
    brec = by_name.pop(f"{name}.b", None)
    bias = None
    if brec is not None:
        if brec.data.shape != (shape[0],):
            raise ManifestError(f"tensor {brec.name!r}: bad bias shape")
        if brec.scale_exp != wrec.scale_exp:
            raise ManifestError(
                f"tensor {brec.name!r}: bias scale must match the accumulator"
            )
        bias = brec.data
    return LinearWeights(weights=FixedTensor(data=wrec.data, fmt=fmt), bias=bias)


def records_to_weights(config: ModelConfig, records: list[TensorRecord]) -> ModelWeights:
    by_name = _records_by_name(records)
    sps = []
    c_in = config.in_channels
    in_scale = config.act_scale_exp
    for i, st in enumerate(config.sps_stages):
        wrec = by_name.pop(f"sps{i}.w", None)
        if wrec is None:
            raise ManifestError(f"manifest is missing tensor 'sps{i}.w'")
        expect = (st.out_channels, c_in, st.kernel, st.kernel)
        if wrec.data.shape != expect:
            raise ManifestError(
                f"tensor {wrec.name!r}: shape {wrec.data.shape} != expected {expect}"
            )
        fmt = FixedFormat(width=wrec.width, scale_exp=wrec.scale_exp)
        brec = by_name.pop(f"sps{i}.b", None)
        bias = None
        if brec is not None:
            if brec.data.shape != (st.out_channels,):
                raise ManifestError(f"tensor {brec.name!r}: bad bias shape")
            if brec.scale_exp != in_scale + wrec.scale_exp:
                raise ManifestError(
                    f"tensor {brec.name!r}: bias scale must match the accumulator"
                )
            bias = brec.data
        sps.append(
            ConvWeights(
                weights=FixedTensor(data=wrec.data, fmt=fmt),
                bias=bias,
                stride=st.stride,
                padding=st.padding,
            )
        )
        c_in = st.out_channels
        in_scale = 0
    d, hidden = config.embed_dim, config.mlp_hidden
    blocks = []
    for b in range(config.n_blocks):
        blocks.append(
            BlockWeights(
                q=_take_linear(by_name, f"block{b}.q", (d, d)),
                k=_take_linear(by_name, f"block{b}.k", (d, d)),
                v=_take_linear(by_name, f"block{b}.v", (d, d)),
                attn_out=_take_linear(by_name, f"block{b}.attn_out", (d, d)),
                mlp_up=_take_linear(by_name, f"block{b}.mlp_up", (hidden, d)),
                mlp_down=_take_linear(by_name, f"block{b}.mlp_down", (d, hidden)),
            )
        )
    classifier = _take_linear(by_name, "classifier", (config.n_classes, d))
    if by_name:
        raise ManifestError(
            f"manifest has unexpected tensors: {', '.join(sorted(by_name))}"
        )
    weights = ModelWeights(sps=tuple(sps), blocks=tuple(blocks), classifier=classifier)
    weights.check(config)
    return weights


def input_to_record(x: FixedTensor) -> TensorRecord:
    return TensorRecord(
        name="input", width=x.fmt.width, scale_exp=x.fmt.scale_exp, data=x.data
    )


def records_to_input(config: ModelConfig, records: list[TensorRecord]) -> FixedTensor:
    by_name = _records_by_name(records)
    rec = by_name.pop("input", None)
    if rec is None:
        raise ManifestError("manifest is missing tensor 'input'")
    if by_name:
        raise ManifestError(
            f"input manifest has unexpected tensors: {', '.join(sorted(by_name))}"
        )
    expect = (config.t_steps, config.in_channels, config.in_h, config.in_w)
    if rec.data.shape != expect:
        raise ManifestError(
            f"input shape {rec.data.shape} does not match the config {expect}"
        )
    fmt = FixedFormat(width=rec.width, scale_exp=rec.scale_exp)
    if fmt != config.act_fmt:
        raise ManifestError(
            f"input format ({rec.width}, {rec.scale_exp}) does not match the "
            f"config ({config.act_width}, {config.act_scale_exp})"
        )
    return FixedTensor(data=rec.data, fmt=fmt)
