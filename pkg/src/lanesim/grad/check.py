"""Finite-difference checking harness for recorded gradients."""

from __future__ import annotations

import numpy as np

from .value import Value


def grad_check(fn, inputs, eps=1e-5):
    """Compare analytic gradients of a scalar-valued fn to central
    differences, coordinate by coordinate.

    `inputs` are ndarrays; fn receives them wrapped as Values and must
    return a scalar Value. Returns the worst relative error over all
    coordinates of all inputs.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps out of the supported [1e-7, 1e-3] range")
    vals = [Value(np.array(x, dtype=np.float64)) for x in inputs]
    out = fn(*vals)
    if out.data.size != 1:
        raise ValueError("grad_check requires a scalar-valued function")
    out.backward()
    worst = 0.0
    for i, v in enumerate(vals):
        analytic = np.zeros_like(v.data) if v.grad is None else v.grad
        flat = v.data.reshape(-1)
        numeric = np.zeros(flat.size)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            hi = float(fn(*vals).data)
            flat[j] = orig - eps
            lo = float(fn(*vals).data)
            flat[j] = orig
            numeric[j] = (hi - lo) / (2.0 * eps)
        a = analytic.reshape(-1)
        # scale-aware floor: coordinates carrying a negligible share of
        # this input's gradient are judged against the input's scale,
        # not against their own vanishing magnitude
        scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(numeric), initial=0.0))
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), max(1e-2 * scale, 1e-6))
        worst = max(worst, float(np.max(np.abs(a - numeric) / denom, initial=0.0)))
    return worst
