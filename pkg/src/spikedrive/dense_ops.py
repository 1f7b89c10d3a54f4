"""Dense fixed-point operators for the frame-facing front end.

The first stage of the model sees multi-bit frames, not spikes, so its
convolutions run dense: wide integer accumulation, bias at accumulator
scale, one saturating narrow at the end. Batch-norm parameters are folded
into the convolution before quantization, which is how the modeled
hardware avoids a separate normalization stage at inference time.

Integer matmuls are routed through float64 BLAS whenever the worst-case
partial sum fits in the 53-bit mantissa — every intermediate is then exact
and order-independent — and fall back to int64 otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fixedpoint import (
    WIDE_WIDTH,
    FixedFormat,
    FixedTensor,
    add_elementwise,
    choose_scale_exp,
    quantize,
    sat_narrow,
)

_EXACT_F64_BOUND = 1 << 52


def exact_matmul(a: np.ndarray, b: np.ndarray, max_abs_product_sum: int) -> np.ndarray:
    """Integer matmul that is exact by construction.

    ``max_abs_product_sum`` bounds ``sum_k |a[i,k]*b[k,j]|`` for the worst
    row/column pair; when it fits in float64's mantissa the product is
    computed by BLAS with zero rounding error.
    """
    if max_abs_product_sum < _EXACT_F64_BOUND:
        out = a.astype(np.float64) @ b.astype(np.float64)
        return out.astype(np.int64)
    return a.astype(np.int64) @ b.astype(np.int64)


@dataclass(frozen=True)
class ConvWeights:
    """Quantized 2-D convolution kernel ``[c_out, c_in, kh, kw]``.

    ``bias`` is stored at the accumulator scale (input scale + weight
    scale) so it joins the sum before the single narrowing step.
    """

    weights: FixedTensor
    bias: np.ndarray | None = None  # int64 [c_out]
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if len(self.weights.dims) != 4:
            raise ValueError("conv weights must be [c_out, c_in, kh, kw]")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.padding < 0:
            raise ValueError("padding must be >= 0")
        if self.bias is not None:
            bias = np.ascontiguousarray(self.bias, dtype=np.int64)
            if bias.shape != (self.weights.dims[0],):
                raise ValueError("bias must be [c_out]")
            object.__setattr__(self, "bias", bias)

    @property
    def c_out(self) -> int:
        return self.weights.dims[0]

    @property
    def c_in(self) -> int:
        return self.weights.dims[1]

    @property
    def kernel(self) -> tuple[int, int]:
        return self.weights.dims[2], self.weights.dims[3]

    def out_plane(self, in_h: int, in_w: int) -> tuple[int, int]:
        kh, kw = self.kernel
        out_h = (in_h + 2 * self.padding - kh) // self.stride + 1
        out_w = (in_w + 2 * self.padding - kw) // self.stride + 1
        if out_h < 1 or out_w < 1:
            raise ValueError("convolution output plane is empty")
        return out_h, out_w


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    """[T, C, H, W] -> [T, out_h*out_w, C*kh*kw] patch matrix."""
    t_steps, c_in, in_h, in_w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out_h = (in_h + 2 * padding - kh) // stride + 1
    out_w = (in_w + 2 * padding - kw) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]  # [T, C, out_h, out_w, kh, kw]
    patches = windows.transpose(0, 2, 3, 1, 4, 5).reshape(
        t_steps, out_h * out_w, c_in * kh * kw
    )
    return np.ascontiguousarray(patches)


def conv2d(x: FixedTensor, cw: ConvWeights, out_fmt: FixedFormat) -> FixedTensor:
    """Dense 2-D convolution: wide accumulate, bias, one saturation."""
    if len(x.dims) != 4:
        raise ValueError("conv input must be [T, C, H, W]")
    t_steps, c_in, in_h, in_w = x.dims
    if c_in != cw.c_in:
        raise ValueError(f"input has {c_in} channels, weights expect {cw.c_in}")
    kh, kw = cw.kernel
    out_h, out_w = cw.out_plane(in_h, in_w)

    patches = _im2col(x.data, kh, kw, cw.stride, cw.padding)
    w_mat = cw.weights.data.reshape(cw.c_out, c_in * kh * kw).T  # [K, c_out]
    bound = (
        c_in * kh * kw
        * max(abs(x.fmt.min_int), x.fmt.max_int)
        * max(abs(cw.weights.fmt.min_int), cw.weights.fmt.max_int)
    )
    acc = exact_matmul(patches.reshape(-1, patches.shape[-1]), w_mat, bound)
    acc = acc.reshape(t_steps, out_h * out_w, cw.c_out)
    if cw.bias is not None:
        acc = acc + cw.bias
    acc = acc.transpose(0, 2, 1).reshape(t_steps, cw.c_out, out_h, out_w)

    acc_scale = x.fmt.scale_exp + cw.weights.fmt.scale_exp
    acc = np.clip(
        acc,
        FixedFormat(width=WIDE_WIDTH, scale_exp=acc_scale).min_int,
        FixedFormat(width=WIDE_WIDTH, scale_exp=acc_scale).max_int,
    )
    data = sat_narrow(acc, out_fmt, from_scale_exp=acc_scale)
    return FixedTensor(data=np.ascontiguousarray(data), fmt=out_fmt)


def fold_bn(
    weights: np.ndarray,
    bias: np.ndarray,
    bn_gamma: np.ndarray,
    bn_beta: np.ndarray,
    bn_mean: np.ndarray,
    bn_var: np.ndarray,
    eps: float = 1e-5,
) -> tuple[np.ndarray, np.ndarray]:
    """Fold batch-norm statistics into float conv weights and bias.

    Returns the adjusted float ``(weights, bias)``; quantization happens
    after folding, never before.
    """
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    scale = np.asarray(bn_gamma, dtype=np.float64) / np.sqrt(
        np.asarray(bn_var, dtype=np.float64) + eps
    )
    shape = (-1,) + (1,) * (weights.ndim - 1)
    folded_w = weights * scale.reshape(shape)
    folded_b = (bias - np.asarray(bn_mean, dtype=np.float64)) * scale + np.asarray(
        bn_beta, dtype=np.float64
    )
    return folded_w, folded_b


def quantize_conv(
    weights: np.ndarray,
    bias: np.ndarray | None,
    weight_width: int,
    in_scale_exp: int,
    stride: int = 1,
    padding: int = 0,
) -> ConvWeights:
    """Quantize float conv parameters: per-tensor weight scale chosen from
    the magnitude range, bias quantized straight to the accumulator scale."""
    weights = np.asarray(weights, dtype=np.float64)
    scale_exp = choose_scale_exp(float(np.max(np.abs(weights))), weight_width)
    w_fmt = FixedFormat(width=weight_width, scale_exp=scale_exp)
    wq = FixedTensor.from_real(weights, w_fmt)
    bq = None
    if bias is not None:
        acc_fmt = FixedFormat(width=WIDE_WIDTH, scale_exp=in_scale_exp + scale_exp)
        bq = np.array([quantize(float(v), acc_fmt) for v in np.asarray(bias)],
                      dtype=np.int64)
    return ConvWeights(weights=wq, bias=bq, stride=stride, padding=padding)


def quantize_linear_weights(weights: np.ndarray, bias, weight_width: int):
    """Quantize float linear parameters; bias lands at the weight scale
    because unit spikes leave the accumulator scale equal to it."""
    from .linear import LinearWeights

    weights = np.asarray(weights, dtype=np.float64)
    scale_exp = choose_scale_exp(float(np.max(np.abs(weights))), weight_width)
    w_fmt = FixedFormat(width=weight_width, scale_exp=scale_exp)
    wq = FixedTensor.from_real(weights, w_fmt)
    bq = None
    if bias is not None:
        acc_fmt = FixedFormat(width=WIDE_WIDTH, scale_exp=scale_exp)
        bq = np.array([quantize(float(v), acc_fmt) for v in np.asarray(bias)],
                      dtype=np.int64)
    return LinearWeights(weights=wq, bias=bq)


def residual_add(a: FixedTensor, b: FixedTensor) -> FixedTensor:
    """Membrane-domain shortcut: elementwise saturating add of two tensors
    that already share a format."""
    return add_elementwise(a, b)
