# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels (OpenMP over the leading axis).

Arithmetic mirrors ``_pykernels`` operation for operation; offsets are
visited in lexicographic (dc, dr, dv) order in both.
"""
import numpy as np

from cython.parallel cimport prange, parallel
from libc.math cimport exp, sqrt, fabs, floor
from libc.stdlib cimport malloc, free

NAME = "cython"


def local_moments(x_in, h, int nthreads=1):
    cdef const double[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t C = x.shape[0], R = x.shape[1], V = x.shape[2]
    cdef Py_ssize_t hc = h[0], hr = h[1], hv = h[2]
    mean_arr = np.empty((C, R, V))
    std_arr = np.empty((C, R, V))
    cdef double[:, :, ::1] mean = mean_arr
    cdef double[:, :, ::1] std = std_arr
    cdef Py_ssize_t c, r, v, dc, dr, dv
    cdef double xi, d, s, s2, n, var
    for c in prange(C, nogil=True, num_threads=nthreads, schedule="static"):
        for r in range(R):
            for v in range(V):
                xi = x[c, r, v]
                s = 0.0
                s2 = 0.0
                n = 0.0
                for dc in range(-hc, hc + 1):
                    if c + dc < 0 or c + dc >= C:
                        continue
                    for dr in range(-hr, hr + 1):
                        if r + dr < 0 or r + dr >= R:
                            continue
                        for dv in range(-hv, hv + 1):
                            if v + dv < 0 or v + dv >= V:
                                continue
                            d = x[c + dc, r + dr, v + dv] - xi
                            s = s + d
                            s2 = s2 + d * d
                            n = n + 1.0
                mean[c, r, v] = xi + s / n
                if n > 1.0:
                    var = (s2 - s * s / n) / (n - 1.0)
                    if var < 0.0:
                        var = 0.0
                else:
                    var = 0.0
                std[c, r, v] = sqrt(var)
    return mean_arr, std_arr


def bilateral(x_in, sd_in, sr_in, h, int nthreads=1):
    cdef const double[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const double[:, :, ::1] sd = np.ascontiguousarray(sd_in, dtype=np.float64)
    cdef const double[:, :, ::1] sr = np.ascontiguousarray(sr_in, dtype=np.float64)
    cdef Py_ssize_t C = x.shape[0], R = x.shape[1], V = x.shape[2]
    cdef Py_ssize_t hc = h[0], hr = h[1], hv = h[2]
    out_arr = np.empty((C, R, V))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t c, r, v, dc, dr, dv, lo, hi
    cdef double w, dist
    cdef const double* xr
    cdef const double* xs
    cdef const double* sdr
    cdef const double* srr
    cdef double* num
    cdef double* den
    # Offsets outer, views inner: the view loop is contiguous and the
    # per-cell accumulation order is still lexicographic in (dc, dr, dv).
    with nogil, parallel(num_threads=nthreads):
        num = <double*> malloc(V * sizeof(double))
        den = <double*> malloc(V * sizeof(double))
        for c in prange(C, schedule="static"):
            for r in range(R):
                for v in range(V):
                    num[v] = 0.0
                    den[v] = 0.0
                xr = &x[c, r, 0]
                sdr = &sd[c, r, 0]
                srr = &sr[c, r, 0]
                for dc in range(-hc, hc + 1):
                    if c + dc < 0 or c + dc >= C:
                        continue
                    for dr in range(-hr, hr + 1):
                        if r + dr < 0 or r + dr >= R:
                            continue
                        xs = &x[c + dc, r + dr, 0]
                        for dv in range(-hv, hv + 1):
                            dist = sqrt(<double>(dc * dc + dr * dr + dv * dv))
                            lo = 0
                            hi = V
                            if dv < 0:
                                lo = -dv
                            elif dv > 0:
                                hi = V - dv
                            for v in range(lo, hi):
                                w = exp(-(dist / sdr[v]) - fabs(xr[v] - xs[v + dv]) / srr[v])
                                num[v] = num[v] + w * xs[v + dv]
                                den[v] = den[v] + w
                for v in range(V):
                    out[c, r, v] = num[v] / den[v]
        free(num)
        free(den)
    return out_arr


cdef void _insertion_sort(double* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j = j - 1
        a[j + 1] = key


def window_median(x_in, h, mask_in, int nthreads=1):
    cdef const double[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const unsigned char[:, :, ::1] mask = np.ascontiguousarray(mask_in, dtype=np.uint8)
    cdef Py_ssize_t C = x.shape[0], R = x.shape[1], V = x.shape[2]
    cdef Py_ssize_t hc = h[0], hr = h[1], hv = h[2]
    cdef Py_ssize_t cap = (2 * hc + 1) * (2 * hr + 1) * (2 * hv + 1)
    out_arr = np.array(x, copy=True)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t c, r, v, dc, dr, dv, n
    cdef double* buf
    with nogil, parallel(num_threads=nthreads):
        buf = <double*> malloc(cap * sizeof(double))
        for c in prange(C, schedule="static"):
            for r in range(R):
                for v in range(V):
                    if not mask[c, r, v]:
                        continue
                    n = 0
                    for dc in range(-hc, hc + 1):
                        if c + dc < 0 or c + dc >= C:
                            continue
                        for dr in range(-hr, hr + 1):
                            if r + dr < 0 or r + dr >= R:
                                continue
                            for dv in range(-hv, hv + 1):
                                if v + dv < 0 or v + dv >= V:
                                    continue
                                buf[n] = x[c + dc, r + dr, v + dv]
                                n = n + 1
                    _insertion_sort(buf, n)
                    if n % 2 == 1:
                        out[c, r, v] = buf[n // 2]
                    else:
                        out[c, r, v] = (buf[n // 2 - 1] + buf[n // 2]) / 2.0
        free(buf)
    return out_arr


def backproject(q_in, cos_in, sin_in, xs_in, ys_in, double tau, int nthreads=1):
    cdef const double[:, ::1] q = np.ascontiguousarray(q_in, dtype=np.float64)
    cdef const double[::1] ct = np.ascontiguousarray(cos_in, dtype=np.float64)
    cdef const double[::1] st = np.ascontiguousarray(sin_in, dtype=np.float64)
    cdef const double[::1] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef const double[::1] ys = np.ascontiguousarray(ys_in, dtype=np.float64)
    cdef Py_ssize_t nviews = q.shape[0], nch = q.shape[1]
    cdef Py_ssize_t ny = ys.shape[0], nx = xs.shape[0]
    cdef double half = (nch - 1) / 2.0
    cdef double top = <double>(nch - 1)
    img_arr = np.zeros((ny, nx))
    cdef double[:, ::1] img = img_arr
    cdef Py_ssize_t iy, ix, v, i0
    cdef double pos, frac, acc, fl
    for iy in prange(ny, nogil=True, num_threads=nthreads, schedule="static"):
        for ix in range(nx):
            acc = 0.0
            for v in range(nviews):
                pos = (xs[ix] * ct[v] + ys[iy] * st[v]) / tau + half
                if pos >= 0.0 and pos <= top:
                    fl = floor(pos)
                    if fl > nch - 2:
                        fl = nch - 2
                    i0 = <Py_ssize_t> fl
                    frac = pos - fl
                    acc = acc + (q[v, i0] * (1.0 - frac) + q[v, i0 + 1] * frac)
            img[iy, ix] = acc
    return img_arr
