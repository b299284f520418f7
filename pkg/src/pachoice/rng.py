"""Seedable 64-bit RNG used everywhere in the package.

The generator is SplitMix64 (Steele/Lea/Flood's splittable-stream mixer):
state advances by the golden-ratio increment and each output is the
variant-13 finalizer of the state.  Bounded integers come from plain modulo
rejection: draw 64-bit words until one lands at or above ``2**64 % bound``,
then reduce mod ``bound``.  Both pieces are implemented twice, here in pure
Python and in :mod:`pachoice.kernels` for the jitted hot loops; the two must
produce identical streams, which the test suite checks word for word.

Every run stamps :data:`RNG_ALGORITHM_ID` into its output metadata so that
archived results record exactly which stream produced them.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1

# SplitMix64 constants (state increment and the two finalizer multipliers).
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX_MULT_1 = 0xBF58476D1CE4E5B9
_MIX_MULT_2 = 0x94D049BB133111EB

RNG_ALGORITHM_ID = "splitmix64+mod-rejection/v1"


def _finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX_MULT_1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX_MULT_2) & _MASK
    return z ^ (z >> 31)


def mix_seed(base_seed: int, index: int) -> int:
    """Derive the stream seed for replica ``index`` from ``base_seed``.

    Defined as the SplitMix64 finalizer of ``base ^ ((index+1) * gamma)``,
    all in 64-bit wrapping arithmetic.  Distinct indices give decorrelated
    streams; the same (base, index) pair always gives the same seed.
    """
    if index < 0:
        raise ValueError("replica index must be >= 0")
    z = (base_seed ^ ((index + 1) * GOLDEN_GAMMA)) & _MASK
    return _finalize(z)


class SplitMix64:
    """Pure-Python SplitMix64 stream.

    Reference implementation for the jitted kernels and the generator used
    by all non-hot-loop sampling.  ``bounded(n)`` is exact: every value in
    ``[0, n)`` has probability exactly ``1/n``.
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    @property
    def state(self) -> int:
        return self._state

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN_GAMMA) & _MASK
        return _finalize(self._state)

    def bounded(self, n: int) -> int:
        """Unbiased integer in ``[0, n)`` via modulo rejection."""
        if n <= 0:
            raise ValueError("bound must be positive")
        threshold = (1 << 64) % n
        while True:
            x = self.next_u64()
            if x >= threshold:
                return x % n

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53
