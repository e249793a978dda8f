"""Array kernels on the hot paths: config enumeration, per-config table sums,
and counter-based noise hashing.

``gather_sum`` dominates exhaustive scans (up to the 1e6-config cap) and
carries a numba-compiled variant; the numpy fallback accumulates columns in
the same left-to-right order so both backends return bit-identical results.
Noise hashing is pure vectorized numpy on purpose: it keeps the synthetic
oracle's output independent of the kernel backend.
"""

import numpy as np

from .backend import USE_NUMBA, maybe_njit

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_STREAM2 = _U64(0x6A09E667F3BCC909)


def config_strides(radices) -> np.ndarray:
    """Lexicographic strides: index(cfg) = sum(cfg[i] * stride[i])."""
    radices = np.asarray(radices, dtype=np.int64)
    strides = np.ones(len(radices), dtype=np.int64)
    for i in range(len(radices) - 2, -1, -1):
        strides[i] = strides[i + 1] * radices[i + 1]
    return strides


def enumerate_configs(radices, start: int = 0, stop: int | None = None) -> np.ndarray:
    """All choice vectors in lexicographic order, as an (N, m) int64 array.

    ``start``/``stop`` select a contiguous index range for chunked scans.
    """
    radices = np.asarray(radices, dtype=np.int64)
    total = int(np.prod(radices, dtype=object))
    if stop is None:
        stop = total
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(idx), len(radices)), dtype=np.int64)
    strides = config_strides(radices)
    for i, (r, s) in enumerate(zip(radices, strides)):
        out[:, i] = (idx // s) % r
    return out


def _gather_sum_numpy(values: np.ndarray, configs: np.ndarray) -> np.ndarray:
    acc = np.zeros(configs.shape[0], dtype=np.float64)
    for k in range(configs.shape[1]):
        acc += values[k, configs[:, k]]
    return acc


@maybe_njit
def _gather_sum_numba(values, configs):  # pragma: no cover - numba path
    n, m = configs.shape
    out = np.empty(n, dtype=np.float64)
    for r in range(n):
        s = 0.0
        for k in range(m):
            s += values[k, configs[r, k]]
        out[r] = s
    return out


def gather_sum(values: np.ndarray, configs: np.ndarray) -> np.ndarray:
    """Per-config sum of one table entry per node.

    values: (m, n_max) float64, padded entries never indexed.
    configs: (N, m) integer choice matrix.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    configs = np.ascontiguousarray(configs, dtype=np.int64)
    if USE_NUMBA:
        return _gather_sum_numba(values, configs)
    return _gather_sum_numpy(values, configs)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """One splitmix64 mixing step over a uint64 array."""
    x = (x + _GOLDEN).astype(_U64, copy=False)
    x = (x ^ (x >> _U64(30))) * _MIX1
    x = (x ^ (x >> _U64(27))) * _MIX2
    return x ^ (x >> _U64(31))


def fold_configs_u64(seed64: int, configs: np.ndarray) -> np.ndarray:
    """Stable per-config 64-bit hash, independent of query order."""
    configs = np.asarray(configs, dtype=np.int64)
    h = np.full(configs.shape[0], _U64(seed64 & 0xFFFFFFFFFFFFFFFF))
    for k in range(configs.shape[1]):
        col = configs[:, k].astype(_U64)
        h = splitmix64(h ^ (col + _GOLDEN * _U64(k + 1)))
    return h


def normals_for_configs(seed64: int, configs: np.ndarray) -> np.ndarray:
    """One standard-normal draw per config via hashed Box-Muller.

    Identical (seed, config) always yields the identical value, so oracle
    noise does not depend on evaluation order or batching.
    """
    h1 = fold_configs_u64(seed64, configs)
    h2 = splitmix64(h1 ^ _STREAM2)
    # 53-bit mantissa uniforms in (0, 1); offset keeps u1 away from exact 0
    u1 = (h1 >> _U64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54
    u2 = (h2 >> _U64(11)).astype(np.float64) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
