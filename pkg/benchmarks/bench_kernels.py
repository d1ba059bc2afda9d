#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage:
    PYTHONPATH=src python3 benchmarks/bench_kernels.py [--repeats N]

Covers the per-call hot kernels (convolution lowering, pooling, RGBE
run-length coding) and one macro case: a full generator forward +
backward step, which is where the kernels actually live.
"""

import argparse
import sys
import time

import numpy as np

from hdrgan import _kernels as K
from hdrgan import autodiff as ad
from hdrgan.autodiff import Tensor
from hdrgan.nets import Generator


def _time(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _kernel_cases():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 1, (4, 32, 64, 64)).astype(np.float32)
    cols = K.im2col(x, 3, 3, 1, 1)
    gcols = rng.normal(0, 1, cols.shape).astype(np.float32)
    pooled, idx = K.maxpool2_forward(x)
    gpool = rng.normal(0, 1, pooled.shape).astype(np.float32)
    rgbe = rng.integers(0, 256, (512, 768, 4), dtype=np.uint8)
    rgbe[:, 100:400] = 37  # embed long runs
    payload = K.rgbe_encode_scanlines(rgbe, True)
    return [
        ("im2col 4x32x64x64 k3", lambda: K.im2col(x, 3, 3, 1, 1)),
        ("col2im 4x32x64x64 k3",
         lambda: K.col2im(gcols, 4, 32, 64, 64, 3, 3, 1, 1)),
        ("maxpool2 fwd 4x32x64x64", lambda: K.maxpool2_forward(x)),
        ("maxpool2 bwd 4x32x64x64",
         lambda: K.maxpool2_backward(gpool, idx, 64, 64)),
        ("rgbe encode 512x768", lambda: K.rgbe_encode_scanlines(rgbe, True)),
        ("rgbe decode 512x768",
         lambda: K.rgbe_decode_scanlines(payload, 768, 512)),
    ]


def _train_step_case():
    rng = np.random.default_rng(1)
    gen = Generator(seed=0)
    batch = rng.uniform(0, 1, (2, 1, 64, 64)).astype(np.float32)

    def step():
        out = gen(Tensor(batch))
        loss = ad.sum_(ad.pow_const(out, 2))
        for p in gen.parameters().values():
            p.grad = None
        loss.backward()

    return ("generator fwd+bwd 2x1x64x64", step)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)

    backends = K.available_backends()
    if "native" not in backends:
        print("note: compiled kernels not built "
              "(python3 setup.py build_ext --inplace); "
              "timing the pure backend only")

    cases = _kernel_cases() + [_train_step_case()]
    results = {}
    for backend in backends:
        K.use_backend(backend)
        for name, fn in cases:
            results.setdefault(name, {})[backend] = _time(fn, args.repeats)
    K.use_backend(backends[0])

    width = max(len(n) for n in results) + 2
    header = f"{'kernel':<{width}}" + "".join(
        f"{b + ' (ms)':>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, times in results.items():
        row = f"{name:<{width}}"
        for b in backends:
            row += f"{times[b] * 1e3:>14.3f}"
        if len(backends) == 2:
            row += f"{times['pure'] / times['native']:>9.2f}x"
        print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
