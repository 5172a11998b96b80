"""Benchmark the compiled kernel backend against the pure-numpy one.

Runs every kernel on representative shapes (the full-size map backbone,
per-actor crops, pooling), checks numerical agreement, and reports the
speedup. Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import importlib
import time

import numpy as np

from lanesim.kernels import numpy_backend


def _compiled():
    try:
        return importlib.import_module("lanesim.kernels._ckernels")
    except ImportError:
        return None


CASES = []


def case(name):
    def deco(fn):
        CASES.append((name, fn))
        return fn

    return deco


RNG = np.random.default_rng(0)

# full-config backbone layer on the 140 m x 80 m region at 0.8 m
XP_BIG = RNG.normal(size=(1, 15, 102, 177))
W_BIG = RNG.normal(size=(8, 15, 3, 3))
GO_BIG = RNG.normal(size=(1, 8, 100, 175))
# per-actor crop stack (8 actors)
XP_CROP = RNG.normal(size=(8, 32, 27, 52))
W_CROP = RNG.normal(size=(32, 32, 3, 3))
GO_CROP = RNG.normal(size=(8, 32, 25, 50))
POOL_X = RNG.normal(size=(1, 64, 100, 176))
FEAT = RNG.normal(size=(64, 100, 175))
COORDS_R = RNG.uniform(0, 99, size=10000)
COORDS_C = RNG.uniform(0, 174, size=10000)
GVALS = RNG.normal(size=(64, 10000))


@case("conv2d_forward (backbone)")
def _(k):
    return k.conv2d_forward(XP_BIG, W_BIG, 1)


@case("conv2d_forward (crops)")
def _(k):
    return k.conv2d_forward(XP_CROP, W_CROP, 1)


@case("conv2d_backward_input")
def _(k):
    return k.conv2d_backward_input(GO_CROP, W_CROP, 27, 52, 1)


@case("conv2d_backward_weight")
def _(k):
    return k.conv2d_backward_weight(GO_CROP, XP_CROP, 3, 3, 1)


@case("maxpool2d_forward")
def _(k):
    return k.maxpool2d_forward(POOL_X, 2, 2)[0]


@case("avgpool2d_forward")
def _(k):
    return k.avgpool2d_forward(POOL_X, 2, 2)


@case("bilinear_gather")
def _(k):
    return k.bilinear_gather(FEAT, COORDS_R, COORDS_C)[0]


@case("bilinear_scatter")
def _(k):
    return k.bilinear_scatter(GVALS, COORDS_R, COORDS_C, 100, 175)


def bench(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    compiled = _compiled()
    if compiled is None:
        print("compiled backend unavailable; build with `pip install -e .`")
        return 1
    print(f"{'kernel':30s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}  agree")
    for name, fn in CASES:
        t_np, out_np = bench(lambda: fn(numpy_backend), args.repeat)
        t_cy, out_cy = bench(lambda: fn(compiled), args.repeat)
        agree = np.allclose(out_np, out_cy, rtol=1e-10, atol=1e-10)
        print(f"{name:30s} {t_np * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms {t_np / t_cy:7.2f}x  {agree}")
        if not agree:
            raise SystemExit(f"backend disagreement in {name}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
