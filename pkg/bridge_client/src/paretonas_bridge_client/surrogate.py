"""Standalone reimplementation of the engine's seeded accuracy surrogate.

This module deliberately shares no code with the engine: it derives the
score tables from the documented recipe alone, proving that an external
trainer written against the published formula reproduces the engine's
values bit-for-bit. Everything below is normative.

PRNG: SplitMix64.

  state' = (state + 0x9E3779B97F4A7C15) mod 2^64
  z = state'
  z = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
  z = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
  output = z XOR (z >> 31)
  unit double in [0,1): (output >> 11) * 2^-53

Streams: the quality stream starts at (seed XOR 0x7175616C697479), the
interaction stream at (seed XOR 0x696E746572616374), both masked to 64 bits.

Quality table (20 layers x 6 choices, drawn layer-major, choice-minor):

  q = 1.0 * (expansion / 8 - 0.6) + 0.7 * (kernel / 7 - 0.75) + 0.5 * (2u - 1)

where (expansion, kernel) come from the canonical per-layer menu: every layer
orders its choices (3,3),(3,5),(3,7),(6,3),(6,5),(6,7) except layer 17 with
(3,5),(3,7),(6,5),(6,7),(8,5),(8,7). Gene g selects entry g-1.

Interaction table (19 x 6 x 6, drawn layer-major then row-major):

  I = 0.12 * (2u - 1)

Accuracy for genes g1..g20 (all sums accumulate left to right in IEEE-754
float64):

  total = sum_{l=1..20} q[l][g_l] + sum_{l=1..19} I[l][g_l][g_{l+1}]
  accuracy = 1 / (1 + exp(-total))
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

QUALITY_TAG = 0x7175616C697479
INTERACTION_TAG = 0x696E746572616374

NUM_LAYERS = 20
NUM_CHOICES = 6

_NORMAL_MENU = tuple((e, k) for e in (3, 6) for k in (3, 5, 7))
_LAYER17_MENU = tuple((e, k) for e in (3, 6, 8) for k in (5, 7))
MENUS = tuple(_LAYER17_MENU if layer == 17 else _NORMAL_MENU
              for layer in range(1, NUM_LAYERS + 1))

EXPANSION_WEIGHT = 1.0
KERNEL_WEIGHT = 0.7
CELL_NOISE = 0.5
EXPANSION_PIVOT = 0.6
KERNEL_PIVOT = 0.75
INTERACTION_SCALE = 0.12


class SplitMix64:
    def __init__(self, state: int):
        self.state = state & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53


def _quality_table(seed: int) -> list[list[float]]:
    stream = SplitMix64((seed ^ QUALITY_TAG) & _MASK64)
    table = []
    for menu in MENUS:
        row = []
        for expansion, kernel in menu:
            u = stream.next_unit()
            row.append(EXPANSION_WEIGHT * (expansion / 8.0 - EXPANSION_PIVOT)
                       + KERNEL_WEIGHT * (kernel / 7.0 - KERNEL_PIVOT)
                       + CELL_NOISE * (2.0 * u - 1.0))
        table.append(row)
    return table


def _interaction_table(seed: int) -> list[list[list[float]]]:
    stream = SplitMix64((seed ^ INTERACTION_TAG) & _MASK64)
    table = []
    for _ in range(NUM_LAYERS - 1):
        block = []
        for _ in range(NUM_CHOICES):
            row = []
            for _ in range(NUM_CHOICES):
                row.append(INTERACTION_SCALE * (2.0 * stream.next_unit() - 1.0))
            block.append(row)
        table.append(block)
    return table


class Surrogate:
    """Seeded accuracy function over 20-gene chromosomes."""

    def __init__(self, seed: int):
        self.seed = seed
        self._quality = _quality_table(seed)
        self._interaction = _interaction_table(seed)

    def accuracy(self, genes: list[int]) -> float:
        if len(genes) != NUM_LAYERS:
            raise ValueError(f"chromosome must have {NUM_LAYERS} genes, got {len(genes)}")
        for position, gene in enumerate(genes, start=1):
            if not isinstance(gene, int) or isinstance(gene, bool) \
                    or not 1 <= gene <= NUM_CHOICES:
                raise ValueError(f"gene at layer {position} out of range 1..6: {gene!r}")
        total = 0.0
        for l, gene in enumerate(genes):
            total += self._quality[l][gene - 1]
        for l in range(NUM_LAYERS - 1):
            total += self._interaction[l][genes[l] - 1][genes[l + 1] - 1]
        return 1.0 / (1.0 + math.exp(-total))
