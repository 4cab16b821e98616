"""Counter-free pseudo-random streams usable from both kernel backends.

The generator is xoshiro256++ seeded through splitmix64.  It is implemented
on ``numpy.uint64`` scalars so the identical source runs compiled (numba) or
interpreted, producing the same stream either way.

Stream seeds are derived from a master seed and a label path with SHA-256,
so sibling trials, experiments, and channels get collision-resistant,
reproducible, documented seeds: ``seed = first 8 little-endian bytes of
SHA256(master_seed_le8 || '/' label_0 || '/' label_1 || ...)``.
"""

import hashlib
import math
import struct

import numpy as np

from ._backend import jit_inline

_MASK64 = (1 << 64) - 1

U64 = np.uint64

_K23 = U64(23)
_K17 = U64(17)
_K45 = U64(45)
_K64 = U64(64)
_K11 = U64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def derive_seed(master_seed, *labels):
    """Derive a 64-bit stream seed from a master seed and a label path."""
    h = hashlib.sha256()
    h.update(struct.pack("<Q", int(master_seed) & _MASK64))
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def make_state(seed):
    """Expand a 64-bit seed into a 4-word xoshiro256++ state array."""
    out = np.empty(4, dtype=np.uint64)
    z = int(seed) & _MASK64
    for i in range(4):
        z = (z + 0x9E3779B97F4A7C15) & _MASK64
        w = z
        w = ((w ^ (w >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        w = ((w ^ (w >> 27)) * 0x94D049BB133111EB) & _MASK64
        w = w ^ (w >> 31)
        out[i] = w
    if not out.any():
        out[0] = U64(1)
    return out


@jit_inline
def _rotl(x, k):
    return (x << k) | (x >> (_K64 - k))


@jit_inline
def next_u64(state):
    """Advance the state in place and return the next 64-bit word."""
    result = _rotl(state[0] + state[3], _K23) + state[0]
    t = state[1] << _K17
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], _K45)
    return result


@jit_inline
def next_unit(state):
    """Uniform double in [0, 1)."""
    return float(next_u64(state) >> _K11) * _INV53


@jit_inline
def next_exp(state, rate):
    """Exponential waiting time with the given rate.

    math.log1p (not np.log1p) so the compiled and interpreted paths hit the
    same libm symbol and stay bit-identical.
    """
    return -math.log1p(-next_unit(state)) / rate


@jit_inline
def next_below(state, n):
    """Uniform integer in [0, n)."""
    k = int(next_unit(state) * n)
    if k >= n:
        k = n - 1
    return k
