"""Pure-numpy implementations of the hot array kernels.

Used as the fallback backend when the compiled extension is unavailable
(or explicitly disabled via LANESIM_PURE=1). Every function here must be
numerically identical to its compiled counterpart; the benchmark suite
compares both backends on the same inputs.

Conventions: float64 C-contiguous arrays; conv inputs are pre-padded by
the caller; coordinates for bilinear sampling are float (row, col) cell
positions, clamped to the border when out of range.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "numpy"


def _conv_windows(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d_forward(xp, w, stride):
    """Cross-correlate padded input (N,C,Hp,Wp) with kernel (O,C,KH,KW)."""
    win = _conv_windows(xp, w.shape[2], w.shape[3], stride)
    return np.einsum("nchwij,ocij->nohw", win, w, optimize=True)


def conv2d_backward_weight(go, xp, kh, kw, stride):
    win = _conv_windows(xp, kh, kw, stride)
    return np.einsum("nohw,nchwij->ocij", go, win, optimize=True)


def conv2d_backward_input(go, w, hp, wp, stride):
    n, o, oh, ow = go.shape
    _, c, kh, kw = w.shape
    if stride > 1:
        gz = np.zeros((n, o, (oh - 1) * stride + 1, (ow - 1) * stride + 1))
        gz[:, :, ::stride, ::stride] = go
    else:
        gz = go
    gp = np.pad(gz, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    win = sliding_window_view(gp, (kh, kw), axis=(2, 3))
    gflip = np.einsum("nohwij,ocij->nchw", win, w[:, :, ::-1, ::-1], optimize=True)
    gxp = np.zeros((n, c, hp, wp))
    gxp[:, :, : gflip.shape[2], : gflip.shape[3]] = gflip
    return gxp


def maxpool2d_forward(x, k, stride):
    """Returns (out, idx) with idx the flat H*W argmax position per cell."""
    n, c, h, w = x.shape
    win = _conv_windows(x, k, k, stride)
    n_, c_, oh, ow = win.shape[:4]
    flat = win.reshape(n, c, oh, ow, k * k)
    arg = flat.argmax(axis=4)
    out = np.take_along_axis(flat, arg[..., None], axis=4)[..., 0]
    di, dj = arg // k, arg % k
    oi = np.arange(oh)[:, None] * stride
    oj = np.arange(ow)[None, :] * stride
    idx = (oi[None, None] + di) * w + (oj[None, None] + dj)
    return out, idx.astype(np.int64)


def maxpool2d_backward(go, idx, h, w):
    n, c, oh, ow = go.shape
    gx = np.zeros((n, c, h * w))
    np.add.at(gx, (np.arange(n)[:, None, None, None], np.arange(c)[None, :, None, None], idx), go)
    return gx.reshape(n, c, h, w)


def avgpool2d_forward(x, k, stride):
    win = _conv_windows(x, k, k, stride)
    return win.mean(axis=(4, 5))


def avgpool2d_backward(go, h, w, k, stride):
    n, c, oh, ow = go.shape
    gx = np.zeros((n, c, h, w))
    share = go / (k * k)
    for di in range(k):
        for dj in range(k):
            gx[:, :, di : di + oh * stride : stride, dj : dj + ow * stride : stride] += share
    return gx


def _corner_setup(rows, cols, h, w):
    oob = int(np.count_nonzero((rows < 0) | (rows > h - 1) | (cols < 0) | (cols > w - 1)))
    r = np.clip(rows, 0.0, h - 1.0)
    c = np.clip(cols, 0.0, w - 1.0)
    r0 = np.minimum(np.floor(r), h - 2 if h > 1 else 0).astype(np.int64)
    c0 = np.minimum(np.floor(c), w - 2 if w > 1 else 0).astype(np.int64)
    r0 = np.maximum(r0, 0)
    c0 = np.maximum(c0, 0)
    fr = r - r0
    fc = c - c0
    return r0, c0, fr, fc, oob


def bilinear_gather(feat, rows, cols):
    """Sample feat (C,H,W) at float (row,col) points; border-clamped.

    Returns (vals (C,P), oob_count).
    """
    c_, h, w = feat.shape
    r0, c0, fr, fc, oob = _corner_setup(rows, cols, h, w)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    v00 = feat[:, r0, c0]
    v01 = feat[:, r0, c1]
    v10 = feat[:, r1, c0]
    v11 = feat[:, r1, c1]
    # corner-weight association matches the compiled kernel
    out = (1 - fr) * (1 - fc) * v00 + (1 - fr) * fc * v01 + fr * (1 - fc) * v10 + fr * fc * v11
    return out, oob


def bilinear_scatter(gvals, rows, cols, h, w):
    c = gvals.shape[0]
    r0, c0, fr, fc, _ = _corner_setup(rows, cols, h, w)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    gfeat = np.zeros((c, h * w))
    sl = slice(None)
    np.add.at(gfeat, (sl, r0 * w + c0), gvals * ((1 - fr) * (1 - fc)))
    np.add.at(gfeat, (sl, r0 * w + c1), gvals * ((1 - fr) * fc))
    np.add.at(gfeat, (sl, r1 * w + c0), gvals * (fr * (1 - fc)))
    np.add.at(gfeat, (sl, r1 * w + c1), gvals * (fr * fc))
    return gfeat.reshape(c, h, w)


def bilinear_coord_grads(feat, rows, cols, gvals):
    c_, h, w = feat.shape
    r0, c0, fr, fc, _ = _corner_setup(rows, cols, h, w)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    v00 = feat[:, r0, c0]
    v01 = feat[:, r0, c1]
    v10 = feat[:, r1, c0]
    v11 = feat[:, r1, c1]
    dr = (v10 - v00) * (1 - fc) + (v11 - v01) * fc
    dc = (v01 - v00) * (1 - fr) + (v11 - v10) * fr
    # clamped points are insensitive to coordinate perturbations
    rin = (rows > 0) & (rows < h - 1)
    cin = (cols > 0) & (cols < w - 1)
    grow = (dr * gvals).sum(axis=0) * rin
    gcol = (dc * gvals).sum(axis=0) * cin
    return grow, gcol
