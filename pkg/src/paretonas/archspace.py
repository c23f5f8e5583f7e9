"""Search space: fixed skeleton, per-layer block menus, chromosome codec.

The backbone is a spectrogram classifier: a 7x7 stem, 20 inverted-bottleneck
blocks whose depthwise convolutions are unidirectional (k x 1 along frequency
or 1 x k along time), a global frequency-collapsing convolution, a two-level
recurrent unit, and two dense layers. Strides, output filters, and block
orientation are frozen; only each block's expansion rate and kernel length are
searchable, 6 variants per layer, giving 6^20 candidate architectures.

A candidate is encoded as a 20-gene chromosome, one gene in 1..6 per layer.
The gene -> choice mapping is lexicographic over (expansion, kernel) with
expansions ordered (3, 6) and kernels (3, 5, 7) - layer 17 orders
(3, 6, 8) x (5, 7) the same way. This ordering is a convention of this
artifact (nothing upstream fixes one); external chromosome producers must use
the same table or their genes will be misread.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .errors import ChromosomeError, NotInSpaceError, PresetError

ARCH_SCHEMA_VERSION = 1

INPUT_SHAPE = (40, 501, 1)  # (freq, time, channels)

STEM_KERNEL = (7, 7)
STEM_STRIDE = (1, 1)
STEM_FILTERS = 24

GLOBAL_CONV_KERNEL = (5, 1)  # VALID over the full frequency extent
GLOBAL_CONV_FILTERS = 128
RECURRENT_LEVELS = 2
RECURRENT_HIDDEN = 256
FEATURE_POOL = 4  # max-pool factor on the recurrent feature axis
DENSE_HIDDEN = 512
NUM_CLASSES = 9

NUM_LAYERS = 20
CHOICES_PER_LAYER = 6

# Per-layer frozen skeleton: (orientation, stride, out_filters).
_FREQ_DOWN = (2, 1)
_TIME_DOWN = (1, 2)
_UNIT = (1, 1)


class Orientation(enum.Enum):
    """Axis the depthwise kernel runs along: k x 1 (FREQ) or 1 x k (TIME)."""

    FREQ = "freq"
    TIME = "time"


@dataclass(frozen=True)
class ChoiceSpec:
    """One searchable block variant: channel expansion rate and kernel taps."""

    expansion_rate: int
    kernel_length: int


@dataclass(frozen=True)
class LayerTemplate:
    """Frozen per-layer skeleton plus the ordered menu of 6 block variants."""

    index: int  # 1-based
    orientation: Orientation
    stride: tuple[int, int]  # (freq, time)
    out_filters: int
    choices: tuple[ChoiceSpec, ...]


@dataclass(frozen=True)
class SearchSpace:
    layers: tuple[LayerTemplate, ...]


@dataclass(frozen=True)
class Chromosome:
    """Integer gene vector, one gene per searchable layer, each in 1..6."""

    genes: tuple[int, ...]

    def __post_init__(self):
        for position, gene in enumerate(self.genes, start=1):
            if not isinstance(gene, int) or isinstance(gene, bool):
                raise ChromosomeError(f"gene at layer {position} is not an integer: {gene!r}")
            if not 1 <= gene <= CHOICES_PER_LAYER:
                raise ChromosomeError(
                    f"gene at layer {position} out of range 1..{CHOICES_PER_LAYER}: {gene}"
                )

    def __len__(self) -> int:
        return len(self.genes)


@dataclass(frozen=True)
class BlockSpec:
    """A fully resolved bottleneck block: expand 1x1 -> depthwise -> project 1x1."""

    index: int
    orientation: Orientation
    kernel_length: int
    stride: tuple[int, int]
    expansion_rate: int
    in_channels: int
    out_channels: int

    @property
    def has_residual(self) -> bool:
        return self.stride == (1, 1) and self.in_channels == self.out_channels


@dataclass(frozen=True)
class ArchDescriptor:
    """A concrete architecture ready for cost analysis or export.

    Stem and head are fixed; `blocks` is the resolved searchable stack
    (20 blocks for the canonical space; shorter stacks are accepted so that
    reduced descriptors can be cost-checked in isolation).
    """

    blocks: tuple[BlockSpec, ...]
    input_shape: tuple[int, int, int] = INPUT_SHAPE

    def __post_init__(self):
        if not self.blocks:
            raise NotInSpaceError("descriptor needs at least one block")
        in_ch = STEM_FILTERS
        for block in self.blocks:
            if block.in_channels != in_ch:
                raise NotInSpaceError(
                    f"block {block.index} expects in_channels {block.in_channels}, "
                    f"previous stage provides {in_ch}"
                )
            in_ch = block.out_channels


_OUT_FILTERS = (32, 32, 32, 48, 48, 48, 64, 64, 64, 80,
                80, 80, 96, 96, 96, 96, 112, 112, 112, 112)

_ORIENTATION_RUNS = (
    (range(1, 4), Orientation.FREQ),
    (range(4, 7), Orientation.TIME),
    (range(7, 10), Orientation.FREQ),
    (range(10, 13), Orientation.TIME),
    (range(13, 17), Orientation.FREQ),
    (range(17, 21), Orientation.TIME),
)

_STRIDES = {1: _FREQ_DOWN, 4: _TIME_DOWN, 7: _FREQ_DOWN,
            10: _TIME_DOWN, 13: _FREQ_DOWN, 17: (1, 4)}

# Ordered menus; position in the tuple is (gene - 1).
_NORMAL_CHOICES = tuple(
    ChoiceSpec(e, k) for e in (3, 6) for k in (3, 5, 7)
)
_LAYER17_CHOICES = tuple(
    ChoiceSpec(e, k) for e in (3, 6, 8) for k in (5, 7)
)


def build_search_space() -> SearchSpace:
    """Construct the canonical 20-layer space with its frozen skeleton."""
    orientation_by_index = {}
    for indices, orientation in _ORIENTATION_RUNS:
        for index in indices:
            orientation_by_index[index] = orientation

    layers = []
    for index in range(1, NUM_LAYERS + 1):
        layers.append(LayerTemplate(
            index=index,
            orientation=orientation_by_index[index],
            stride=_STRIDES.get(index, _UNIT),
            out_filters=_OUT_FILTERS[index - 1],
            choices=_LAYER17_CHOICES if index == 17 else _NORMAL_CHOICES,
        ))
    return SearchSpace(layers=tuple(layers))


def space_size(space: SearchSpace) -> int:
    """Exact number of candidate architectures (integer product, no floats)."""
    size = 1
    for layer in space.layers:
        size *= len(layer.choices)
    return size


def _check_genes(chromosome: Chromosome, space: SearchSpace) -> None:
    if len(chromosome.genes) != len(space.layers):
        raise ChromosomeError(
            f"chromosome has {len(chromosome.genes)} genes, space has {len(space.layers)} layers"
        )
    for layer, gene in zip(space.layers, chromosome.genes):
        if not 1 <= gene <= len(layer.choices):
            raise ChromosomeError(
                f"gene at layer {layer.index} out of range 1..{len(layer.choices)}: {gene}"
            )


def decode(chromosome: Chromosome, space: SearchSpace) -> ArchDescriptor:
    """Resolve a chromosome into a concrete architecture (injective)."""
    _check_genes(chromosome, space)
    blocks = []
    in_ch = STEM_FILTERS
    for layer, gene in zip(space.layers, chromosome.genes):
        choice = layer.choices[gene - 1]
        blocks.append(BlockSpec(
            index=layer.index,
            orientation=layer.orientation,
            kernel_length=choice.kernel_length,
            stride=layer.stride,
            expansion_rate=choice.expansion_rate,
            in_channels=in_ch,
            out_channels=layer.out_filters,
        ))
        in_ch = layer.out_filters
    return ArchDescriptor(blocks=tuple(blocks))


def encode(arch: ArchDescriptor, space: SearchSpace) -> Chromosome:
    """Inverse of decode; every block must match some menu entry."""
    if len(arch.blocks) != len(space.layers):
        raise NotInSpaceError(
            f"architecture has {len(arch.blocks)} blocks, space has {len(space.layers)} layers"
        )
    genes = []
    for layer, block in zip(space.layers, arch.blocks):
        choice = ChoiceSpec(block.expansion_rate, block.kernel_length)
        if (block.orientation != layer.orientation or block.stride != layer.stride
                or block.out_channels != layer.out_filters):
            raise NotInSpaceError(
                f"block at layer {layer.index} does not match the layer skeleton"
            )
        try:
            genes.append(layer.choices.index(choice) + 1)
        except ValueError:
            raise NotInSpaceError(
                f"block (E{choice.expansion_rate}, K{choice.kernel_length}) "
                f"not in space at layer {layer.index}"
            ) from None
    return Chromosome(genes=tuple(genes))


def random_chromosome(space: SearchSpace, rng: np.random.Generator) -> Chromosome:
    """Uniform gene per layer, independent across layers."""
    genes = tuple(
        int(rng.integers(1, len(layer.choices) + 1)) for layer in space.layers
    )
    return Chromosome(genes=genes)


# Named fixtures addressable from the CLI. "baseline" is the hand-designed
# all-E6/K3 stack (K5 at the heavily strided layer 17); "nasc-net" is the
# searched reference architecture.
PRESETS: dict[str, tuple[int, ...]] = {
    "baseline": tuple(3 if index == 17 else 4 for index in range(1, NUM_LAYERS + 1)),
    "nasc-net": (5, 6, 2, 6, 5, 1, 2, 3, 1, 1, 4, 2, 2, 2, 1, 4, 5, 1, 6, 5),
}


def preset_chromosome(name: str) -> Chromosome:
    try:
        return Chromosome(genes=PRESETS[name])
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise PresetError(f"unknown preset {name!r} (known: {known})") from None


def arch_to_json(arch: ArchDescriptor) -> dict:
    """Stable JSON document; field names are part of the external interface."""
    return {
        "schema_version": ARCH_SCHEMA_VERSION,
        "input_shape": list(arch.input_shape),
        "stem": {
            "kernel": list(STEM_KERNEL),
            "stride": list(STEM_STRIDE),
            "filters": STEM_FILTERS,
        },
        "blocks": [
            {
                "index": block.index,
                "orientation": block.orientation.value,
                "kernel": block.kernel_length,
                "stride": list(block.stride),
                "expansion": block.expansion_rate,
                "in_ch": block.in_channels,
                "out_ch": block.out_channels,
            }
            for block in arch.blocks
        ],
        "head": {
            "global_conv": {
                "kernel": list(GLOBAL_CONV_KERNEL),
                "stride": [1, 1],
                "filters": GLOBAL_CONV_FILTERS,
            },
            "recurrent": {"levels": RECURRENT_LEVELS, "hidden": RECURRENT_HIDDEN},
            "feature_pool": {"kernel": [1, FEATURE_POOL], "stride": [1, FEATURE_POOL]},
            "dense": [DENSE_HIDDEN, NUM_CLASSES],
        },
    }


def arch_from_json(document: dict) -> ArchDescriptor:
    blocks = tuple(
        BlockSpec(
            index=entry["index"],
            orientation=Orientation(entry["orientation"]),
            kernel_length=entry["kernel"],
            stride=tuple(entry["stride"]),
            expansion_rate=entry["expansion"],
            in_channels=entry["in_ch"],
            out_channels=entry["out_ch"],
        )
        for entry in document["blocks"]
    )
    return ArchDescriptor(blocks=blocks, input_shape=tuple(document["input_shape"]))


def dump_arch(arch: ArchDescriptor) -> str:
    return json.dumps(arch_to_json(arch), indent=2)
