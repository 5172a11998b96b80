# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled array kernels (drop-in replacement for numpy_backend).

Same contracts as lanesim.kernels.numpy_backend; the benchmark suite
checks numerical agreement between the two backends.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "cython"


def conv2d_forward(cnp.ndarray[double, ndim=4] xp, cnp.ndarray[double, ndim=4] w, int stride):
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1], hp = xp.shape[2], wp = xp.shape[3]
    cdef Py_ssize_t o = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (hp - kh) // stride + 1, ow = (wp - kw) // stride + 1
    out_arr = np.zeros((n, o, oh, ow))
    cdef double[:, :, :, :] out = out_arr
    cdef double[:, :, :, :] x = xp
    cdef double[:, :, :, :] wt = w
    cdef Py_ssize_t b, oc, ic, i, j, di, dj
    cdef double acc, wv
    for b in range(n):
        for oc in range(o):
            for ic in range(c):
                for di in range(kh):
                    for dj in range(kw):
                        wv = wt[oc, ic, di, dj]
                        if wv == 0.0:
                            continue
                        for i in range(oh):
                            for j in range(ow):
                                out[b, oc, i, j] += wv * x[b, ic, i * stride + di, j * stride + dj]
    return out_arr


def conv2d_backward_weight(cnp.ndarray[double, ndim=4] go, cnp.ndarray[double, ndim=4] xp,
                           int kh, int kw, int stride):
    cdef Py_ssize_t n = go.shape[0], o = go.shape[1], oh = go.shape[2], ow = go.shape[3]
    cdef Py_ssize_t c = xp.shape[1]
    gw_arr = np.zeros((o, c, kh, kw))
    cdef double[:, :, :, :] gw = gw_arr
    cdef double[:, :, :, :] g = go
    cdef double[:, :, :, :] x = xp
    cdef Py_ssize_t b, oc, ic, i, j, di, dj
    cdef double acc
    for oc in range(o):
        for ic in range(c):
            for di in range(kh):
                for dj in range(kw):
                    acc = 0.0
                    for b in range(n):
                        for i in range(oh):
                            for j in range(ow):
                                acc += g[b, oc, i, j] * x[b, ic, i * stride + di, j * stride + dj]
                    gw[oc, ic, di, dj] = acc
    return gw_arr


def conv2d_backward_input(cnp.ndarray[double, ndim=4] go, cnp.ndarray[double, ndim=4] w,
                          Py_ssize_t hp, Py_ssize_t wp, int stride):
    cdef Py_ssize_t n = go.shape[0], o = go.shape[1], oh = go.shape[2], ow = go.shape[3]
    cdef Py_ssize_t c = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    gx_arr = np.zeros((n, c, hp, wp))
    cdef double[:, :, :, :] gx = gx_arr
    cdef double[:, :, :, :] g = go
    cdef double[:, :, :, :] wt = w
    cdef Py_ssize_t b, oc, ic, i, j, di, dj
    cdef double gv
    for b in range(n):
        for oc in range(o):
            for i in range(oh):
                for j in range(ow):
                    gv = g[b, oc, i, j]
                    if gv == 0.0:
                        continue
                    for ic in range(c):
                        for di in range(kh):
                            for dj in range(kw):
                                gx[b, ic, i * stride + di, j * stride + dj] += gv * wt[oc, ic, di, dj]
    return gx_arr


def maxpool2d_forward(cnp.ndarray[double, ndim=4] x, int k, int stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h - k) // stride + 1, ow = (w - k) // stride + 1
    out_arr = np.empty((n, c, oh, ow))
    idx_arr = np.empty((n, c, oh, ow), dtype=np.int64)
    cdef double[:, :, :, :] out = out_arr
    cdef long long[:, :, :, :] idx = idx_arr
    cdef double[:, :, :, :] xv = x
    cdef Py_ssize_t b, ic, i, j, di, dj, bi, bj
    cdef double best, v
    for b in range(n):
        for ic in range(c):
            for i in range(oh):
                for j in range(ow):
                    best = xv[b, ic, i * stride, j * stride]
                    bi = i * stride
                    bj = j * stride
                    for di in range(k):
                        for dj in range(k):
                            v = xv[b, ic, i * stride + di, j * stride + dj]
                            if v > best:
                                best = v
                                bi = i * stride + di
                                bj = j * stride + dj
                    out[b, ic, i, j] = best
                    idx[b, ic, i, j] = bi * w + bj
    return out_arr, idx_arr


def maxpool2d_backward(cnp.ndarray[double, ndim=4] go, cnp.ndarray[long long, ndim=4] idx,
                       Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t n = go.shape[0], c = go.shape[1], oh = go.shape[2], ow = go.shape[3]
    gx_arr = np.zeros((n, c, h * w))
    cdef double[:, :, :] gx = gx_arr
    cdef double[:, :, :, :] g = go
    cdef long long[:, :, :, :] iv = idx
    cdef Py_ssize_t b, ic, i, j
    for b in range(n):
        for ic in range(c):
            for i in range(oh):
                for j in range(ow):
                    gx[b, ic, iv[b, ic, i, j]] += g[b, ic, i, j]
    return gx_arr.reshape(n, c, h, w)


def avgpool2d_forward(cnp.ndarray[double, ndim=4] x, int k, int stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h - k) // stride + 1, ow = (w - k) // stride + 1
    out_arr = np.zeros((n, c, oh, ow))
    cdef double[:, :, :, :] out = out_arr
    cdef double[:, :, :, :] xv = x
    cdef double inv = 1.0 / (k * k)
    cdef Py_ssize_t b, ic, i, j, di, dj
    cdef double acc
    for b in range(n):
        for ic in range(c):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for di in range(k):
                        for dj in range(k):
                            acc += xv[b, ic, i * stride + di, j * stride + dj]
                    out[b, ic, i, j] = acc * inv
    return out_arr


def avgpool2d_backward(cnp.ndarray[double, ndim=4] go, Py_ssize_t h, Py_ssize_t w, int k, int stride):
    cdef Py_ssize_t n = go.shape[0], c = go.shape[1], oh = go.shape[2], ow = go.shape[3]
    gx_arr = np.zeros((n, c, h, w))
    cdef double[:, :, :, :] gx = gx_arr
    cdef double[:, :, :, :] g = go
    cdef double inv = 1.0 / (k * k)
    cdef Py_ssize_t b, ic, i, j, di, dj
    cdef double share
    for b in range(n):
        for ic in range(c):
            for i in range(oh):
                for j in range(ow):
                    share = g[b, ic, i, j] * inv
                    for di in range(k):
                        for dj in range(k):
                            gx[b, ic, i * stride + di, j * stride + dj] += share
    return gx_arr


cdef inline void _corner(double r, double c, Py_ssize_t h, Py_ssize_t w,
                         Py_ssize_t* r0, Py_ssize_t* c0, double* fr, double* fc) nogil:
    cdef double rr = r
    cdef double cc = c
    if rr < 0:
        rr = 0
    elif rr > h - 1:
        rr = h - 1
    if cc < 0:
        cc = 0
    elif cc > w - 1:
        cc = w - 1
    r0[0] = <Py_ssize_t> rr
    if r0[0] > h - 2:
        r0[0] = h - 2 if h > 1 else 0
    c0[0] = <Py_ssize_t> cc
    if c0[0] > w - 2:
        c0[0] = w - 2 if w > 1 else 0
    fr[0] = rr - r0[0]
    fc[0] = cc - c0[0]


def bilinear_gather(cnp.ndarray[double, ndim=3] feat, cnp.ndarray[double, ndim=1] rows,
                    cnp.ndarray[double, ndim=1] cols):
    cdef Py_ssize_t c = feat.shape[0], h = feat.shape[1], w = feat.shape[2], p = rows.shape[0]
    vals_arr = np.empty((c, p))
    cdef double[:, :] vals = vals_arr
    cdef double[:, :, :] f = feat
    cdef double[:] rv = rows
    cdef double[:] cv = cols
    cdef Py_ssize_t i, ch, r0, c0, r1, c1
    cdef double fr, fc, w00, w01, w10, w11
    cdef long long oob = 0
    for i in range(p):
        if rv[i] < 0 or rv[i] > h - 1 or cv[i] < 0 or cv[i] > w - 1:
            oob += 1
        _corner(rv[i], cv[i], h, w, &r0, &c0, &fr, &fc)
        r1 = r0 + 1 if r0 + 1 < h else h - 1
        c1 = c0 + 1 if c0 + 1 < w else w - 1
        w00 = (1 - fr) * (1 - fc)
        w01 = (1 - fr) * fc
        w10 = fr * (1 - fc)
        w11 = fr * fc
        for ch in range(c):
            vals[ch, i] = (w00 * f[ch, r0, c0] + w01 * f[ch, r0, c1]
                           + w10 * f[ch, r1, c0] + w11 * f[ch, r1, c1])
    return vals_arr, int(oob)


def bilinear_scatter(cnp.ndarray[double, ndim=2] gvals, cnp.ndarray[double, ndim=1] rows,
                     cnp.ndarray[double, ndim=1] cols, Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t c = gvals.shape[0], p = gvals.shape[1]
    gfeat_arr = np.zeros((c, h, w))
    cdef double[:, :, :] gf = gfeat_arr
    cdef double[:, :] g = gvals
    cdef double[:] rv = rows
    cdef double[:] cv = cols
    cdef Py_ssize_t i, ch, r0, c0, r1, c1
    cdef double fr, fc, w00, w01, w10, w11
    for i in range(p):
        _corner(rv[i], cv[i], h, w, &r0, &c0, &fr, &fc)
        r1 = r0 + 1 if r0 + 1 < h else h - 1
        c1 = c0 + 1 if c0 + 1 < w else w - 1
        w00 = (1 - fr) * (1 - fc)
        w01 = (1 - fr) * fc
        w10 = fr * (1 - fc)
        w11 = fr * fc
        for ch in range(c):
            gf[ch, r0, c0] += w00 * g[ch, i]
            gf[ch, r0, c1] += w01 * g[ch, i]
            gf[ch, r1, c0] += w10 * g[ch, i]
            gf[ch, r1, c1] += w11 * g[ch, i]
    return gfeat_arr


def bilinear_coord_grads(cnp.ndarray[double, ndim=3] feat, cnp.ndarray[double, ndim=1] rows,
                         cnp.ndarray[double, ndim=1] cols, cnp.ndarray[double, ndim=2] gvals):
    cdef Py_ssize_t c = feat.shape[0], h = feat.shape[1], w = feat.shape[2], p = rows.shape[0]
    grow_arr = np.zeros(p)
    gcol_arr = np.zeros(p)
    cdef double[:] grow = grow_arr
    cdef double[:] gcol = gcol_arr
    cdef double[:, :, :] f = feat
    cdef double[:, :] g = gvals
    cdef double[:] rv = rows
    cdef double[:] cv = cols
    cdef Py_ssize_t i, ch, r0, c0, r1, c1
    cdef double fr, fc, dr, dc
    for i in range(p):
        _corner(rv[i], cv[i], h, w, &r0, &c0, &fr, &fc)
        r1 = r0 + 1 if r0 + 1 < h else h - 1
        c1 = c0 + 1 if c0 + 1 < w else w - 1
        dr = 0.0
        dc = 0.0
        for ch in range(c):
            dr += ((f[ch, r1, c0] - f[ch, r0, c0]) * (1 - fc)
                   + (f[ch, r1, c1] - f[ch, r0, c1]) * fc) * g[ch, i]
            dc += ((f[ch, r0, c1] - f[ch, r0, c0]) * (1 - fr)
                   + (f[ch, r1, c1] - f[ch, r1, c0]) * fr) * g[ch, i]
        if rv[i] <= 0 or rv[i] >= h - 1:
            dr = 0.0
        if cv[i] <= 0 or cv[i] >= w - 1:
            dc = 0.0
        grow[i] = dr
        gcol[i] = dc
    return grow_arr, gcol_arr
