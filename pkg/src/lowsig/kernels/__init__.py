"""Hot kernels with a compiled backend and a NumPy fallback.

The Cython extension ``_ckernels`` is used when it was built; otherwise the
NumPy module ``_pykernels`` is selected at import.  Setting
``LOWSIG_BACKEND=python`` forces the fallback.  ``LOWSIG_THREADS`` caps the
number of OpenMP threads used by the compiled kernels.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

if os.environ.get("LOWSIG_BACKEND", "").lower() == "python" or _ckernels is None:
    _impl = _pykernels
else:
    _impl = _ckernels

BACKEND = _impl.NAME


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None


def num_threads():
    env = os.environ.get("LOWSIG_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def local_moments(x, h):
    return _impl.local_moments(x, tuple(int(k) for k in h), num_threads())


def bilateral(x, sigma_d, sigma_r, h):
    return _impl.bilateral(x, sigma_d, sigma_r, tuple(int(k) for k in h), num_threads())


def window_median(x, h, mask):
    return _impl.window_median(x, tuple(int(k) for k in h), mask, num_threads())


def backproject(q, cos_t, sin_t, xs, ys, tau):
    return _impl.backproject(q, cos_t, sin_t, xs, ys, float(tau), num_threads())
