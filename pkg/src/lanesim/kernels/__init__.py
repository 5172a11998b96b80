"""Array kernel backend selection.

Selection is per kernel: convolution stays on the numpy im2col path in
both modes because its inner product maps onto BLAS (the benchmark in
benchmarks/bench_kernels.py shows the naive compiled loops losing at
every relevant size), while the gather/scatter-style kernels (pooling,
bilinear sampling) run 4-8x faster as compiled loops and use the
extension when it imports cleanly. Set LANESIM_PURE=1 to force the pure
numpy implementations everywhere.
"""

import os

from . import numpy_backend

if os.environ.get("LANESIM_PURE") == "1":
    impl = numpy_backend
else:
    try:
        from . import _ckernels as impl  # type: ignore[no-redef]
    except ImportError:
        impl = numpy_backend

BACKEND = impl.NAME

# BLAS-bound: numpy wins regardless of backend choice
conv2d_forward = numpy_backend.conv2d_forward
conv2d_backward_input = numpy_backend.conv2d_backward_input
conv2d_backward_weight = numpy_backend.conv2d_backward_weight

# loop-bound: compiled implementation when available
maxpool2d_forward = impl.maxpool2d_forward
maxpool2d_backward = impl.maxpool2d_backward
avgpool2d_forward = impl.avgpool2d_forward
avgpool2d_backward = impl.avgpool2d_backward
bilinear_gather = impl.bilinear_gather
bilinear_scatter = impl.bilinear_scatter
bilinear_coord_grads = impl.bilinear_coord_grads
