"""Differentiable primitives over Value arrays.

Elementwise ops broadcast like numpy and un-broadcast gradients on the
way back. Dense kernels (conv, pooling, bilinear sampling) delegate to
the selected kernel backend.
"""

from __future__ import annotations

import numpy as np

from .. import diagnostics
from .. import kernels as K
from .value import ShapeError, Value, data_of, make


def _unb(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------- arithmetic


def add(a, b):
    ad, bd = data_of(a), data_of(b)
    return make(ad + bd, (a, lambda g: _unb(g, ad.shape)), (b, lambda g: _unb(g, bd.shape)))


def sub(a, b):
    ad, bd = data_of(a), data_of(b)
    return make(ad - bd, (a, lambda g: _unb(g, ad.shape)), (b, lambda g: _unb(-g, bd.shape)))


def mul(a, b):
    ad, bd = data_of(a), data_of(b)
    return make(ad * bd, (a, lambda g: _unb(g * bd, ad.shape)), (b, lambda g: _unb(g * ad, bd.shape)))


def div(a, b):
    ad, bd = data_of(a), data_of(b)
    return make(
        ad / bd,
        (a, lambda g: _unb(g / bd, ad.shape)),
        (b, lambda g: _unb(-g * ad / (bd * bd), bd.shape)),
    )


def neg(a):
    return make(-data_of(a), (a, lambda g: -g))


def power(a, p):
    if not np.isscalar(p):
        raise ShapeError("power supports scalar exponents only")
    ad = data_of(a)
    y = ad**p
    return make(y, (a, lambda g: g * p * ad ** (p - 1)))


def sqrt(a):
    ad = data_of(a)
    y = np.sqrt(ad)
    return make(y, (a, lambda g: g / (2.0 * y)))


def matmul(a, b):
    ad, bd = data_of(a), data_of(b)
    if ad.ndim != 2 or bd.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {ad.shape} @ {bd.shape}")
    if ad.shape[1] != bd.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {ad.shape} @ {bd.shape}")
    return make(ad @ bd, (a, lambda g: g @ bd.T), (b, lambda g: ad.T @ g))


# --------------------------------------------------------------- elementwise


def exp(a):
    y = np.exp(data_of(a))
    return make(y, (a, lambda g: g * y))


def log(a):
    ad = data_of(a)
    return make(np.log(ad), (a, lambda g: g / ad))


def tanh(a):
    y = np.tanh(data_of(a))
    return make(y, (a, lambda g: g * (1.0 - y * y)))


def cos(a):
    ad = data_of(a)
    return make(np.cos(ad), (a, lambda g: -g * np.sin(ad)))


def sin(a):
    ad = data_of(a)
    return make(np.sin(ad), (a, lambda g: g * np.cos(ad)))


def sigmoid(a):
    ad = data_of(a)
    y = 1.0 / (1.0 + np.exp(-ad))
    return make(y, (a, lambda g: g * y * (1.0 - y)))


def softplus(a):
    ad = data_of(a)
    y = np.logaddexp(0.0, ad)
    return make(y, (a, lambda g: g / (1.0 + np.exp(-ad))))


def relu(a):
    ad = data_of(a)
    return make(np.maximum(ad, 0.0), (a, lambda g: g * (ad > 0)))


def absolute(a):
    ad = data_of(a)
    return make(np.abs(ad), (a, lambda g: g * np.sign(ad)))


def atan2(y, x):
    yd, xd = data_of(y), data_of(x)
    denom = xd * xd + yd * yd
    return make(
        np.arctan2(yd, xd),
        (y, lambda g: _unb(g * xd / denom, yd.shape)),
        (x, lambda g: _unb(-g * yd / denom, xd.shape)),
    )


def clamp(a, lo, hi):
    ad = data_of(a)
    inside = (ad >= lo) & (ad <= hi)
    return make(np.clip(ad, lo, hi), (a, lambda g: g * inside))


def where(cond, a, b):
    """Select elementwise by a boolean ndarray (cond carries no gradient)."""
    c = np.asarray(cond, dtype=bool)
    ad, bd = data_of(a), data_of(b)
    return make(
        np.where(c, ad, bd),
        (a, lambda g: _unb(g * c, ad.shape)),
        (b, lambda g: _unb(g * ~c, bd.shape)),
    )


def maximum(a, b):
    ad, bd = data_of(a), data_of(b)
    pick_a = ad >= bd  # ties route to the first operand
    return make(
        np.maximum(ad, bd),
        (a, lambda g: _unb(g * pick_a, ad.shape)),
        (b, lambda g: _unb(g * ~pick_a, bd.shape)),
    )


def minimum(a, b):
    ad, bd = data_of(a), data_of(b)
    pick_a = ad <= bd
    return make(
        np.minimum(ad, bd),
        (a, lambda g: _unb(g * pick_a, ad.shape)),
        (b, lambda g: _unb(g * ~pick_a, bd.shape)),
    )


def huber(a, delta):
    """Elementwise Huber penalty: quadratic inside |r|<=delta, linear beyond."""
    if delta <= 0:
        raise ValueError("huber delta must be positive")
    ad = data_of(a)
    absr = np.abs(ad)
    y = np.where(absr <= delta, 0.5 * ad * ad, delta * (absr - 0.5 * delta))
    return make(y, (a, lambda g: g * np.clip(ad, -delta, delta)))


# ------------------------------------------------------------ shape plumbing


def reshape(a, shape):
    ad = data_of(a)
    return make(ad.reshape(shape), (a, lambda g: g.reshape(ad.shape)))


def transpose(a, axes=None):
    ad = data_of(a)
    if axes is None:
        inv = None
    else:
        inv = tuple(np.argsort(axes))
    return make(np.transpose(ad, axes), (a, lambda g: np.transpose(g, inv)))


def _idx_has_repeats(idx):
    if isinstance(idx, tuple):
        return any(_idx_has_repeats(i) for i in idx)
    return isinstance(idx, np.ndarray) and idx.dtype != bool


def getitem(a, idx):
    ad = data_of(a)
    y = ad[idx]
    if _idx_has_repeats(idx):

        def back(g):
            full = np.zeros_like(ad)
            np.add.at(full, idx, g)
            return full

    else:
        # basic indexing selects disjoint cells; plain assignment suffices
        def back(g):
            full = np.zeros_like(ad)
            full[idx] = g
            return full

    return make(np.array(y, copy=True), (a, back))


def concat(parts, axis=0):
    datas = [data_of(p) for p in parts]
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def slicer(i):
        def back(g):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offsets[i], offsets[i + 1])
            return g[tuple(sl)]

        return back

    return make(np.concatenate(datas, axis=axis), *[(p, slicer(i)) for i, p in enumerate(parts)])


def stack(parts, axis=0):
    datas = [data_of(p) for p in parts]

    def slicer(i):
        return lambda g: np.take(g, i, axis=axis)

    return make(np.stack(datas, axis=axis), *[(p, slicer(i)) for i, p in enumerate(parts)])


# ----------------------------------------------------------------- reductions


def sum_(a, axis=None, keepdims=False):
    ad = data_of(a)

    def back(g):
        if axis is None:
            return np.broadcast_to(g, ad.shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, ad.shape).copy()

    return make(ad.sum(axis=axis, keepdims=keepdims), (a, back))


def mean(a, axis=None, keepdims=False):
    ad = data_of(a)
    n = ad.size if axis is None else ad.shape[axis]

    def back(g):
        if axis is None:
            return np.broadcast_to(g / n, ad.shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg / n, ad.shape).copy()

    return make(ad.mean(axis=axis, keepdims=keepdims), (a, back))


def _reduce_pick(ad, axis, arg):
    """One-hot mask of the reduction winner (first index on ties)."""
    mask = np.zeros_like(ad, dtype=bool)
    if axis is None:
        np.put(mask, arg, True)
    else:
        np.put_along_axis(mask, np.expand_dims(arg, axis), True, axis=axis)
    return mask


def max_(a, axis=None, keepdims=False):
    ad = data_of(a)
    arg = ad.argmax(axis=axis)
    mask = _reduce_pick(ad, axis, arg)

    def back(g):
        gg = g if (axis is None or keepdims) else np.expand_dims(g, axis)
        return mask * gg

    return make(ad.max(axis=axis, keepdims=keepdims), (a, back))


def min_(a, axis=None, keepdims=False):
    ad = data_of(a)
    arg = ad.argmin(axis=axis)
    mask = _reduce_pick(ad, axis, arg)

    def back(g):
        gg = g if (axis is None or keepdims) else np.expand_dims(g, axis)
        return mask * gg

    return make(ad.min(axis=axis, keepdims=keepdims), (a, back))


def cumsum(a, axis):
    ad = data_of(a)
    return make(np.cumsum(ad, axis=axis), (a, lambda g: np.flip(np.cumsum(np.flip(g, axis), axis=axis), axis)))


def set_max(values, group, n_groups):
    """Feature-wise max of (E, F) rows grouped by `group`; empty groups
    yield zero vectors (the neutral element used for isolated actors)."""
    vd = data_of(values)
    e, f = vd.shape
    group = np.asarray(group, dtype=np.int64)
    out = np.full((n_groups, f), -np.inf)
    np.maximum.at(out, group, vd)
    present = np.zeros(n_groups, dtype=bool)
    present[group] = True
    out[~present] = 0.0

    order = np.argsort(group, kind="stable")

    def back(g):
        gv = np.zeros_like(vd)
        start = 0
        gs = group[order]
        while start < e:
            stop = start
            while stop < e and gs[stop] == gs[start]:
                stop += 1
            rows = order[start:stop]
            block = vd[rows]
            win = block.argmax(axis=0)
            gv[rows[win], np.arange(f)] += g[gs[start]]
            start = stop
        return gv

    return make(out, (values, back))


def gru_gates(gx, gh, h):
    """Fused GRU gate math: inputs are the pre-activation projections
    gx = x@Wx + bx and gh = h@Wh + bh (both (B,3H), gate order z|r|n)
    and the previous hidden state. One recorded node instead of a dozen."""
    gxd, ghd, hd = data_of(gx), data_of(gh), data_of(h)
    nh = hd.shape[1]
    if gxd.shape[1] != 3 * nh or ghd.shape[1] != 3 * nh:
        raise ShapeError(f"gru_gates expects (B,{3 * nh}) projections, got {gxd.shape}, {ghd.shape}")
    z = 1.0 / (1.0 + np.exp(-(gxd[:, :nh] + ghd[:, :nh])))
    r = 1.0 / (1.0 + np.exp(-(gxd[:, nh : 2 * nh] + ghd[:, nh : 2 * nh])))
    ghn = ghd[:, 2 * nh :]
    n = np.tanh(gxd[:, 2 * nh :] + r * ghn)
    out = z * hd + (1.0 - z) * n

    memo = [None, None]  # one vjp call feeds both projection grads

    def back_common(g):
        if memo[0] is not g:
            dn = g * (1.0 - z)
            dan = dn * (1.0 - n * n)
            dr = dan * ghn
            dar = dr * r * (1.0 - r)
            dz = g * (hd - n)
            daz = dz * z * (1.0 - z)
            memo[0] = g
            memo[1] = (daz, dar, dan)
        return memo[1]

    def back_gx(g):
        daz, dar, dan = back_common(g)
        return np.concatenate([daz, dar, dan], axis=1)

    def back_gh(g):
        daz, dar, dan = back_common(g)
        return np.concatenate([daz, dar, dan * r], axis=1)

    return make(out, (gx, back_gx), (gh, back_gh), (h, lambda g: g * z))


# -------------------------------------------------------------- dense kernels


def conv2d(x, w, b=None, stride=1, padding=0):
    """Cross-correlation of (N,C,H,W) with (O,C,KH,KW), zero padding."""
    xd, wd = data_of(x), data_of(w)
    if xd.ndim != 4 or wd.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input/kernel, got {xd.shape}, {wd.shape}")
    if xd.shape[1] != wd.shape[1]:
        raise ShapeError(f"conv2d channel mismatch: input {xd.shape} vs kernel {wd.shape}")
    kh, kw = wd.shape[2], wd.shape[3]
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xd
    hp, wp = xp.shape[2], xp.shape[3]
    if hp < kh or wp < kw:
        raise ShapeError(f"conv2d kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    y = K.conv2d_forward(xp, wd, stride)

    def back_x(g):
        gxp = K.conv2d_backward_input(np.ascontiguousarray(g), wd, hp, wp, stride)
        if padding:
            return gxp[:, :, padding:-padding, padding:-padding]
        return gxp

    def back_w(g):
        return K.conv2d_backward_weight(np.ascontiguousarray(g), xp, kh, kw, stride)

    pairs = [(x, back_x), (w, back_w)]
    if b is not None:
        bd = data_of(b)
        y = y + bd[None, :, None, None]
        pairs.append((b, lambda g: g.sum(axis=(0, 2, 3))))
    return make(y, *pairs)


def max_pool2d(x, k=2, stride=None):
    stride = stride or k
    xd = data_of(x)
    h, w = xd.shape[2], xd.shape[3]
    y, idx = K.maxpool2d_forward(xd, k, stride)
    return make(y, (x, lambda g: K.maxpool2d_backward(np.ascontiguousarray(g), idx, h, w)))


def avg_pool2d(x, k=2, stride=None):
    stride = stride or k
    xd = data_of(x)
    h, w = xd.shape[2], xd.shape[3]
    y = K.avgpool2d_forward(xd, k, stride)
    return make(y, (x, lambda g: K.avgpool2d_backward(np.ascontiguousarray(g), h, w, k, stride)))


def bilinear_sample(feat, coords):
    """Sample (C,H,W) features at (P,2) float (row,col) points.

    Out-of-range points clamp to the border and are tallied in the
    sampling diagnostics. Gradients reach the feature grid always and
    the coordinates when they are a recorded Value.
    """
    fd = data_of(feat)
    cd = data_of(coords)
    if fd.ndim != 3 or cd.ndim != 2 or cd.shape[1] != 2:
        raise ShapeError(f"bilinear_sample expects (C,H,W) and (P,2), got {fd.shape}, {cd.shape}")
    c, h, w = fd.shape
    rows = np.ascontiguousarray(cd[:, 0])
    cols = np.ascontiguousarray(cd[:, 1])
    vals, oob = K.bilinear_gather(fd, rows, cols)
    if oob:
        diagnostics.COUNTERS["oob_samples"] += oob

    def back_feat(g):
        return K.bilinear_scatter(np.ascontiguousarray(g), rows, cols, h, w)

    def back_coords(g):
        gr, gc = K.bilinear_coord_grads(fd, rows, cols, np.ascontiguousarray(g))
        return np.stack([gr, gc], axis=1)

    return make(vals, (feat, back_feat), (coords, back_coords))


def resize_bilinear(x, out_hw):
    """Resize (N,C,H,W) to (N,C,oh,ow); endpoints map to endpoints so the
    sampling grid never leaves the source extent."""
    xd = data_of(x)
    n, c, h, w = xd.shape
    oh, ow = out_hw
    rr = np.arange(oh) * ((h - 1) / (oh - 1)) if oh > 1 else np.zeros(1)
    cc = np.arange(ow) * ((w - 1) / (ow - 1)) if ow > 1 else np.zeros(1)
    grid = np.stack(np.meshgrid(rr, cc, indexing="ij"), axis=-1).reshape(-1, 2)
    flat = reshape(x, (n * c, h, w))
    out = bilinear_sample(flat, grid)  # (n*c, oh*ow)
    return reshape(out, (n, c, oh, ow))
