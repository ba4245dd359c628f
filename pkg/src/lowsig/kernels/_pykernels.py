"""NumPy implementation of the hot kernels.

Every kernel loops over window offsets and vectorises over cells, summing the
offsets in the same lexicographic order as the compiled kernels so the two
backends agree to within the rounding of ``exp``.
"""
import itertools
import math

import numpy as np

NAME = "python"


def _shift(n, d):
    """Target/source slices along one axis so that ``src = tgt + d`` stays in bounds."""
    if d >= 0:
        return slice(0, n - d), slice(d, n)
    return slice(-d, n), slice(0, n + d)


def _offset_slices(shape, h):
    for off in itertools.product(*(range(-k, k + 1) for k in h)):
        if any(abs(d) >= n for d, n in zip(off, shape)):
            continue
        pairs = [_shift(n, d) for n, d in zip(shape, off)]
        tgt = tuple(p[0] for p in pairs)
        src = tuple(p[1] for p in pairs)
        yield off, tgt, src


def local_moments(x, h, nthreads=1):
    x = np.ascontiguousarray(x, dtype=np.float64)
    s = np.zeros_like(x)
    s2 = np.zeros_like(x)
    n = np.zeros_like(x)
    for _, tgt, src in _offset_slices(x.shape, h):
        d = x[src] - x[tgt]
        s[tgt] += d
        s2[tgt] += d * d
        n[tgt] += 1.0
    mean = x + s / n
    var = np.zeros_like(x)
    many = n > 1.0
    var[many] = (s2[many] - s[many] * s[many] / n[many]) / (n[many] - 1.0)
    np.maximum(var, 0.0, out=var)
    return mean, np.sqrt(var)


def bilateral(x, sigma_d, sigma_r, h, nthreads=1):
    x = np.ascontiguousarray(x, dtype=np.float64)
    sigma_d = np.ascontiguousarray(sigma_d, dtype=np.float64)
    sigma_r = np.ascontiguousarray(sigma_r, dtype=np.float64)
    num = np.zeros_like(x)
    den = np.zeros_like(x)
    for off, tgt, src in _offset_slices(x.shape, h):
        dist = math.sqrt(float(off[0] * off[0] + off[1] * off[1] + off[2] * off[2]))
        xt = x[tgt]
        xs = x[src]
        w = np.exp(-(dist / sigma_d[tgt]) - np.abs(xt - xs) / sigma_r[tgt])
        num[tgt] += w * xs
        den[tgt] += w
    return num / den


def window_median(x, h, mask, nthreads=1, chunk=1 << 16):
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = x.copy()
    cells = np.argwhere(mask)
    offsets = np.array(list(itertools.product(*(range(-k, k + 1) for k in h))))
    shape = np.array(x.shape)
    for start in range(0, len(cells), chunk):
        block = cells[start:start + chunk]
        nb = block[:, None, :] + offsets[None, :, :]
        inside = np.all((nb >= 0) & (nb < shape), axis=2)
        nb = np.where(inside[:, :, None], nb, 0)
        vals = np.where(inside, x[nb[..., 0], nb[..., 1], nb[..., 2]], np.nan)
        out[block[:, 0], block[:, 1], block[:, 2]] = np.nanmedian(vals, axis=1)
    return out


def backproject(q, cos_t, sin_t, xs, ys, tau, nthreads=1):
    q = np.ascontiguousarray(q, dtype=np.float64)
    nviews, nch = q.shape
    half = (nch - 1) / 2.0
    img = np.zeros((len(ys), len(xs)))
    xg = np.asarray(xs, dtype=np.float64)[None, :]
    yg = np.asarray(ys, dtype=np.float64)[:, None]
    for v in range(nviews):
        pos = (xg * cos_t[v] + yg * sin_t[v]) / tau + half
        valid = (pos >= 0.0) & (pos <= nch - 1)
        i0 = np.clip(np.floor(pos), 0, nch - 2).astype(np.intp)
        frac = pos - i0
        row = q[v]
        val = row[i0] * (1.0 - frac) + row[i0 + 1] * frac
        img += np.where(valid, val, 0.0)
    return img
