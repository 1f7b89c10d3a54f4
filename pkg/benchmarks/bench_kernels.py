"""Compare the pure-Python and compiled kernel backends on hot paths.

Run as ``python3 benchmarks/bench_kernels.py``.  Each workload is timed
under both backends (best of ``--repeat`` runs) and the table reports the
compiled speedup.  Exits with a notice if the compiled extension is not
built.
"""

import argparse
import time

import numpy as np

from spikedrive import _kernels
from spikedrive._kernels import has_compiled, use_backend
from spikedrive.fixedpoint import FixedFormat, FixedTensor
from spikedrive.linear import LinearWeights, spike_linear
from spikedrive.model import ModelConfig, random_input, random_weights, run_model
from spikedrive.pooling import PoolSpec, spike_maxpool
from spikedrive.attention import sdsa
from spikedrive.spike_stream import encode


def random_map(rng, t, c, tokens, rate, pos_width=16):
    frames = (rng.random((t, c, tokens)) < rate).astype(np.uint8)
    return encode(frames, pos_width=pos_width)


def bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def workloads():
    rng = np.random.default_rng(0)

    m_big = random_map(rng, 4, 64, 1024, 0.15)
    yield "sdsa 4x64x1024 @15%", lambda: sdsa(m_big, m_big, m_big, 1)

    m_lin = random_map(rng, 4, 256, 1024, 0.15)
    lw = LinearWeights(
        weights=FixedTensor(
            data=rng.integers(-400, 400, size=(256, 256)).astype(np.int64),
            fmt=FixedFormat(width=10, scale_exp=-9),
        ),
        bias=rng.integers(-100, 100, size=256).astype(np.int64),
    )
    out_fmt = FixedFormat(width=16, scale_exp=-6)
    yield "linear 256->256 over 4x1024 @15%", lambda: spike_linear(m_lin, lw, out_fmt)

    m_pool = random_map(rng, 4, 64, 64 * 64, 0.15)
    spec = PoolSpec(in_h=64, in_w=64, kernel_h=2, kernel_w=2,
                    stride_h=2, stride_w=2)
    yield "maxpool 64x64 k2s2 over 4x64 @15%", lambda: spike_maxpool(m_pool, spec)

    spa = rng.integers(-256, 256, size=(4, 64, 4096)).astype(np.int64)
    temp0 = np.zeros((64, 4096), dtype=np.int64)
    yield "neuron encode 4x64x4096", lambda: _kernels.lif_encode(
        spa, 1, 1, 32, 0, -512, 511, temp0)

    config = ModelConfig.toy()
    weights = random_weights(config, 0)
    x = random_input(config, 0)
    yield "full toy model", lambda: run_model(x, config, weights)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3,
                        help="timing repeats per cell (best is kept)")
    args = parser.parse_args()

    if not has_compiled():
        print("compiled backend not built; nothing to compare")
        return

    rows = []
    for name, fn in workloads():
        with use_backend("pure"):
            fn()  # warm
            t_pure = bench(fn, args.repeat)
        with use_backend("compiled"):
            fn()
            t_comp = bench(fn, args.repeat)
        rows.append((name, t_pure, t_comp))

    width = max(len(r[0]) for r in rows)
    print(f"{'workload':<{width}}  {'pure':>10}  {'compiled':>10}  {'speedup':>8}")
    for name, t_pure, t_comp in rows:
        print(f"{name:<{width}}  {t_pure * 1e3:>8.2f}ms  {t_comp * 1e3:>8.2f}ms"
              f"  {t_pure / t_comp:>7.1f}x")


if __name__ == "__main__":
    main()
