"""Counter-based driver noise (U_n, V_n).

Every path owns a 64-bit Philox4x32-10 key.  The pair for step n is one
Philox block evaluated at counter (n_lo, n_hi, 0, 0): words (0, 1) form the
64-bit source of U_n and words (2, 3) the source of V_n.  Because the block
depends only on (key, n), a path can be replayed from any step, and paths
simulated in any order or on any worker see the same numbers.

Uniforms are mapped to the open interval (0, 1) as ((w >> 11) + 1/2) * 2^-53,
so U_n never equals 0 or 1 and the boundary states stay absorbing.

Per-path keys are derived from ``(master_seed, path_index)`` by one Philox
block under the master key with a distinct counter tag.
"""

from __future__ import annotations

import numba as nb
import numpy as np

from ._validation import check_int, check_seed

_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_TWO_M53 = 1.0 / 9007199254740992.0
_KEY_TAG = np.uint64(0x6B657973)  # counter word 2 used only for key derivation


@nb.njit(inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox4x32 rounds; all arguments are uint64 holding 32-bit words."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (p1 >> _S32) ^ c1 ^ k0, p1 & _MASK32, (p0 >> _S32) ^ c3 ^ k1, p0 & _MASK32
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


@nb.njit(inline="always")
def words_to_open_unit(hi, lo):
    return ((((hi << _S32) | lo) >> _S11) + 0.5) * _TWO_M53


@nb.njit(inline="always")
def uv_pair(n, k0, k1):
    c = np.uint64(n)
    w0, w1, w2, w3 = philox4x32(c & _MASK32, c >> _S32, np.uint64(0), np.uint64(0), k0, k1)
    return words_to_open_unit(w0, w1), words_to_open_unit(w2, w3)


@nb.njit(cache=True)
def _derive_keys(seed_lo, seed_hi, first, count):
    k0 = np.empty(count, np.uint64)
    k1 = np.empty(count, np.uint64)
    for i in range(count):
        idx = np.uint64(first + i)
        w0, w1, _, _ = philox4x32(idx & _MASK32, idx >> _S32, _KEY_TAG, np.uint64(0), seed_lo, seed_hi)
        k0[i] = w0
        k1[i] = w1
    return k0, k1


@nb.njit(cache=True)
def _fill_uv(k0, k1, first, count, out):
    for i in range(count):
        u, v = uv_pair(first + i, k0, k1)
        out[i, 0] = u
        out[i, 1] = v


def split_seed(seed: int) -> tuple[np.uint64, np.uint64]:
    seed = check_seed(seed)
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


def path_keys(master_seed: int, first: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Philox keys (k0, k1) for paths ``first .. first + count - 1``."""
    lo, hi = split_seed(master_seed)
    first = check_int(first, "first")
    count = check_int(count, "count")
    return _derive_keys(lo, hi, first, count)


def path_seed(master_seed: int, path_index: int) -> int:
    """The 64-bit per-path seed, i.e. hash(master_seed, path_index)."""
    k0, k1 = path_keys(master_seed, path_index, 1)
    return int(k0[0]) | (int(k1[0]) << 32)


class DriverNoise:
    """The i.i.d. uniform pairs (U_n, V_n), n >= 1, of one path.

    >>> noise = DriverNoise(42)
    >>> u, v = noise.pair(1)
    >>> 0.0 < u < 1.0 and 0.0 < v < 1.0
    True
    """

    def __init__(self, seed: int):
        self.seed = check_seed(seed)
        self.k0, self.k1 = split_seed(self.seed)

    @classmethod
    def for_path(cls, master_seed: int, path_index: int) -> "DriverNoise":
        return cls(path_seed(master_seed, path_index))

    def pair(self, n: int) -> tuple[float, float]:
        n = check_int(n, "n", minimum=1)
        out = np.empty((1, 2))
        _fill_uv(self.k0, self.k1, n, 1, out)
        return float(out[0, 0]), float(out[0, 1])

    def pairs(self, n_max: int, first: int = 1) -> np.ndarray:
        """Array of shape (n_max, 2) holding (U_n, V_n) for n = first .. first + n_max - 1."""
        n_max = check_int(n_max, "n_max")
        first = check_int(first, "first", minimum=1)
        out = np.empty((n_max, 2))
        _fill_uv(self.k0, self.k1, first, n_max, out)
        return out

    def __repr__(self):
        return f"DriverNoise(seed={self.seed})"
