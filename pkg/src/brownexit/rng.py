"""Counter-based random streams.

Every random number drawn anywhere in the package is a pure function of
``(seed, stream, index, step)``: Philox4x32-10 is applied to the counter
``(index_lo, index_hi, step, stream)`` under the 64-bit key ``seed``.
Samples therefore do not depend on batch layout or worker count.
"""
from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)

# Stream tags keep unrelated consumers of the same seed apart.
STREAM_WOS = 1
STREAM_EULER = 2
STREAM_BOOTSTRAP = 3
STREAM_GLUE = 4
STREAM_IMAGE = 5
STREAM_CLOUD = 6


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 block function, vectorised over the leading axis.

    ``counter`` is a sequence of four arrays of 32-bit words, ``key`` a pair.
    Returns four ``uint64`` arrays holding 32-bit outputs.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    k0, k1 = (np.asarray(k, dtype=np.uint64) & _MASK for k in key)
    for i in range(rounds):
        if i:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def _split_seed(seed: int):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


def uniform_pair(seed: int, stream: int, index, step):
    """Two independent U(0,1) doubles per (index, step), 53-bit resolution.

    Values lie strictly inside (0, 1), so logs and inverse CDFs are safe.
    """
    index, step = np.broadcast_arrays(np.asarray(index, dtype=np.uint64), np.asarray(step, dtype=np.uint64))
    ctr = (index & _MASK, index >> _SHIFT, step & _MASK,
           np.full(index.shape, stream, dtype=np.uint64))
    w0, w1, w2, w3 = philox4x32(ctr, _split_seed(seed))
    scale = 1.0 / 9007199254740992.0  # 2**-53
    a = ((w0 << np.uint64(21)) ^ (w1 >> np.uint64(11))) & np.uint64((1 << 53) - 1)
    b = ((w2 << np.uint64(21)) ^ (w3 >> np.uint64(11))) & np.uint64((1 << 53) - 1)
    u = (a.astype(np.float64) + 0.5) * scale
    v = (b.astype(np.float64) + 0.5) * scale
    return u, v


def normal_pair(seed: int, stream: int, index, step):
    """Two independent standard normals per (index, step) via Box-Muller."""
    u, v = uniform_pair(seed, stream, index, step)
    rad = np.sqrt(-2.0 * np.log(u))
    ang = 2.0 * np.pi * v
    return rad * np.cos(ang), rad * np.sin(ang)


class Stream:
    """A (seed, stream) pair handed to samplers in place of a stateful RNG.

    ``offset`` shifts the step counter so that successive phases of one
    logical path (e.g. the alternating exits of the gluing construction)
    draw from disjoint counter ranges.
    """

    __slots__ = ("seed", "stream", "offset")

    def __init__(self, seed: int, stream: int = STREAM_WOS, offset: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.offset = int(offset)

    def uniforms(self, index, step):
        return uniform_pair(self.seed, self.stream, index, np.asarray(step, dtype=np.uint64) + np.uint64(self.offset))

    def normals(self, index, step):
        return normal_pair(self.seed, self.stream, index, np.asarray(step, dtype=np.uint64) + np.uint64(self.offset))

    def child(self, stream: int | None = None, offset: int = 0) -> "Stream":
        return Stream(self.seed, self.stream if stream is None else stream, self.offset + offset)

    def __repr__(self):
        return f"Stream(seed={self.seed}, stream={self.stream}, offset={self.offset})"


def as_stream(rng, stream: int = STREAM_WOS) -> Stream:
    """Accept a Stream, an int seed, or None (seed 0)."""
    if isinstance(rng, Stream):
        return rng
    return Stream(0 if rng is None else int(rng), stream)
