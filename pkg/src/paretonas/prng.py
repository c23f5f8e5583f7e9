"""Pinned, language-neutral PRNG recipe for seeded score tables.

The quality and interaction tables that drive the built-in evaluators must be
reproducible bit-for-bit by external workers written in any language, without
sharing a library. They are therefore derived from SplitMix64, a widely
implemented 64-bit generator with exact integer semantics, instead of from the
engine's general-purpose RNG.

Recipe (normative, mirrored by reference workers):

  state' = (state + 0x9E3779B97F4A7C15) mod 2^64
  z = state'
  z = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
  z = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
  output = z XOR (z >> 31)

  unit double in [0, 1):  (output >> 11) * 2^-53

Independent streams are obtained by XOR-ing the user seed with a stream tag
before seeding. All downstream float arithmetic is IEEE-754 double precision
evaluated in the documented order.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Stream tags ("quality", "interact" in ASCII). Arbitrary but frozen: changing
# them silently breaks every externally implemented worker.
QUALITY_TAG = 0x7175616C697479
INTERACTION_TAG = 0x696E746572616374


def stream_seed(seed: int, tag: int) -> int:
    """Derive the 64-bit initial state for a tagged stream."""
    return (seed ^ tag) & _MASK64


class SplitMix64:
    """Minimal SplitMix64 stream with the exact transition above."""

    def __init__(self, state: int):
        self.state = state & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        """Uniform double in [0, 1) with 53 significant bits."""
        return (self.next_u64() >> 11) * 2.0**-53
