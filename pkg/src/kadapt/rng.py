"""Deterministic 64-bit RNG used by the instance generators.

The generator is pinned by its update equations so that any implementation,
in any language, reproduces the same instance bytes from the same seed:

splitmix64 (seeding / stream derivation), state ``s``::

    s     = (s + 0x9E3779B97F4A7C15) mod 2^64
    z     = s
    z     = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z     = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    out   = z XOR (z >> 31)

xoshiro256** (the main sequence), state ``(s0, s1, s2, s3)``::

    out = rotl64(s1 * 5, 7) * 9
    t   = (s1 << 17) mod 2^64
    s2 ^= s0;  s3 ^= s1;  s1 ^= s2;  s0 ^= s3
    s2 ^= t
    s3  = rotl64(s3, 45)

The four state words are the first four splitmix64 outputs seeded with the
64-bit seed. Substream ``j`` of seed ``s`` reseeds with the first splitmix64
output of ``(s + j * 0xD1B54A32D192ED03) mod 2^64``; substream 0 is the seed
itself. Uniform doubles are ``(out >> 11) * 2^-53``, i.e. in [0, 1).
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM = 0xD1B54A32D192ED03


def _splitmix64(state: int):
    state = (state + _GOLDEN) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, (z ^ (z >> 31)) & _MASK


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


def derive_seed(seed: int, stream: int) -> int:
    """Seed of substream `stream`; stream 0 is the seed itself."""
    if stream == 0:
        return seed & _MASK
    _, out = _splitmix64((seed + stream * _STREAM) & _MASK)
    return out


class Xoshiro256:
    """xoshiro256** sequence, splitmix64-seeded."""

    def __init__(self, seed: int, stream: int = 0):
        s = derive_seed(seed, stream)
        state = []
        for _ in range(4):
            s, out = _splitmix64(s)
            state.append(out)
        self._s = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        out = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return out

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection on the top multiple."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (_MASK + 1) - ((_MASK + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def simplex_point(self, dim: int):
        """Uniform point on the unit simplex via sorted-uniform gaps."""
        cuts = sorted(self.uniform() for _ in range(dim - 1))
        prev = 0.0
        gaps = []
        for c in cuts:
            gaps.append(c - prev)
            prev = c
        gaps.append(1.0 - prev)
        return gaps
