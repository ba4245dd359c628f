"""Counter-based random numbers: every draw is a pure function of (seed, counter).

A stream is derived per cell by hashing the seed together with the flat cell
index through the SplitMix64 finaliser, so results do not depend on the order
in which cells are visited.
"""
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 1.0 / (1 << 53)


def mix64(z):
    """SplitMix64 finaliser applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniform(seed: int, counter, stream: int = 0) -> np.ndarray:
    """Uniform doubles in the open interval (0, 1), one per counter value."""
    counter = np.asarray(counter, dtype=np.uint64)
    mask = 0xFFFFFFFFFFFFFFFF
    stream_key = mix64(np.uint64(((stream + 1) * 0x9E3779B97F4A7C15) & mask))
    key = mix64(np.uint64(seed & mask) ^ stream_key)
    with np.errstate(over="ignore"):
        z = mix64(key + (counter + np.uint64(1)) * _GOLDEN)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def normal(seed: int, counter, stream: int = 0) -> np.ndarray:
    """Standard normal deviates by Box-Muller on two independent uniform streams."""
    u1 = uniform(seed, counter, 2 * stream + 1)
    u2 = uniform(seed, counter, 2 * stream + 2)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


POISSON_INVERSION_MAX = 30.0


def poisson(lam, u, z):
    """Poisson deviates from pre-drawn uniforms ``u`` and normals ``z``.

    Means below 30 use exact CDF inversion of ``u``; larger means use
    ``round(lam + sqrt(lam) * z)`` with ``z`` clipped to +-6 and the result
    kept non-negative.
    """
    lam = np.asarray(lam, dtype=np.float64)
    out = np.empty_like(lam)
    small = lam < POISSON_INVERSION_MAX
    if small.any():
        out[small] = _poisson_inversion(lam[small], np.asarray(u)[small])
    big = ~small
    if big.any():
        lb = lam[big]
        zz = np.clip(np.asarray(z)[big], -6.0, 6.0)
        out[big] = np.maximum(np.rint(lb + np.sqrt(lb) * zz), 0.0)
    return out


def _poisson_inversion(lam, u, kmax=200):
    k = np.zeros_like(lam)
    p = np.exp(-lam)
    cdf = p.copy()
    active = u > cdf
    for i in range(1, kmax + 1):
        if not active.any():
            break
        p = p * lam / i
        cdf = cdf + p
        k[active] = i
        active &= u > cdf
    return k
