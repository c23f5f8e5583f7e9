"""Shape propagation and parameter / multiply-accumulate counting.

Counting conventions (fixed for this artifact, stated here once):

* One MAC = one multiply-add; reported "FLOPs" equal MACs. A doubled figure
  for cross-convention comparison is available via `flops_factor`.
* Convolutions are bias-free; each conv is followed by batch-norm contributing
  2 parameters per channel and zero MACs at inference.
* SAME padding with ceil-division on strided convs; the global frequency conv
  is VALID over its full 5-tap extent and collapses the frequency axis to 1.
* A bottleneck block is expand 1x1 -> depthwise (stride here) -> project 1x1;
  the residual add (stride 1x1, matching channels) is elementwise and free.
* Recurrent levels use 3 gates: per level 3*(in*hidden + hidden*hidden)
  weights plus 2 bias vectors per gate, and 3*(in*hidden + hidden*hidden)
  MACs per timestep.
* Activations, pooling, and other elementwise work contribute zero MACs.

MAC formulas: standard conv Kf*Kt*Cin*Cout*Fout*Tout; depthwise conv
Kf*Kt*C*Fout*Tout; dense in*out.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

from .archspace import (
    DENSE_HIDDEN,
    FEATURE_POOL,
    GLOBAL_CONV_FILTERS,
    GLOBAL_CONV_KERNEL,
    NUM_CLASSES,
    RECURRENT_HIDDEN,
    RECURRENT_LEVELS,
    STEM_FILTERS,
    STEM_KERNEL,
    ArchDescriptor,
    Chromosome,
    SearchSpace,
    decode,
)
from .errors import ShapeError


@dataclass(frozen=True)
class TensorShape:
    freq: int
    time: int
    channels: int

    def __post_init__(self):
        if self.freq < 1 or self.time < 1 or self.channels < 1:
            raise ShapeError(f"non-positive tensor dimension: {self}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.freq, self.time, self.channels)


@dataclass(frozen=True)
class LayerCost:
    name: str
    params: int
    macs: int
    out_shape: TensorShape


@dataclass(frozen=True)
class CostReport:
    params: int
    macs: int
    per_layer: tuple[LayerCost, ...]

    def to_json(self) -> dict:
        return {
            "params": self.params,
            "macs": self.macs,
            "per_layer": [
                {
                    "name": row.name,
                    "params": row.params,
                    "macs": row.macs,
                    "out_shape": list(row.out_shape.as_tuple()),
                }
                for row in self.per_layer
            ],
        }


def _ceil_div(value: int, stride: int) -> int:
    return -(-value // stride)


def _shape_after_stride(name: str, shape: TensorShape, stride, channels) -> TensorShape:
    freq = _ceil_div(shape.freq, stride[0])
    time = _ceil_div(shape.time, stride[1])
    try:
        return TensorShape(freq, time, channels)
    except ShapeError:
        raise ShapeError(f"layer {name!r} produced a non-positive dimension "
                         f"({freq} x {time} x {channels})") from None


def _walk(arch: ArchDescriptor):
    """Yield (name, params, macs, out_shape) for every counted stage."""
    shape = TensorShape(*arch.input_shape)

    # Stem: SAME conv, preserves the spatial grid.
    out = TensorShape(shape.freq, shape.time, STEM_FILTERS)
    kf, kt = STEM_KERNEL
    params = kf * kt * shape.channels * STEM_FILTERS + 2 * STEM_FILTERS
    macs = kf * kt * shape.channels * STEM_FILTERS * out.freq * out.time
    yield LayerCost("stem", params, macs, out)
    shape = out

    for block in arch.blocks:
        expanded = block.expansion_rate * block.in_channels
        out = _shape_after_stride(f"block_{block.index:02d}", shape,
                                  block.stride, block.out_channels)
        spatial_in = shape.freq * shape.time
        spatial_out = out.freq * out.time

        params = (
            block.in_channels * expanded + 2 * expanded          # expand + BN
            + block.kernel_length * expanded + 2 * expanded      # depthwise + BN
            + expanded * block.out_channels + 2 * block.out_channels  # project + BN
        )
        macs = (
            block.in_channels * expanded * spatial_in
            + block.kernel_length * expanded * spatial_out
            + expanded * block.out_channels * spatial_out
        )
        yield LayerCost(f"block_{block.index:02d}", params, macs, out)
        shape = out

    # Global conv: VALID over the whole frequency extent.
    kf, kt = GLOBAL_CONV_KERNEL
    if shape.freq != kf:
        raise ShapeError(
            f"layer 'global_conv' needs frequency extent {kf}, got {shape.freq}"
        )
    out = TensorShape(1, shape.time, GLOBAL_CONV_FILTERS)
    params = kf * kt * shape.channels * GLOBAL_CONV_FILTERS + 2 * GLOBAL_CONV_FILTERS
    macs = kf * kt * shape.channels * GLOBAL_CONV_FILTERS * out.freq * out.time
    yield LayerCost("global_conv", params, macs, out)
    shape = out

    # Recurrent stack over the time axis; channels act as per-step features.
    timesteps = shape.time
    features = shape.channels
    for level in range(1, RECURRENT_LEVELS + 1):
        hidden = RECURRENT_HIDDEN
        weight_terms = 3 * (features * hidden + hidden * hidden)
        params = weight_terms + 3 * 2 * hidden
        macs = weight_terms * timesteps
        out = TensorShape(1, timesteps, hidden)
        yield LayerCost(f"recurrent_l{level}", params, macs, out)
        features = hidden
        shape = out

    # Max-pool along the feature axis: free, shrinks features.
    pooled = shape.channels // FEATURE_POOL
    out = TensorShape(1, timesteps, pooled)
    yield LayerCost("feature_pool", 0, 0, out)
    shape = out

    flat = shape.time * shape.channels
    yield LayerCost("dense_hidden", flat * DENSE_HIDDEN + DENSE_HIDDEN,
                    flat * DENSE_HIDDEN, TensorShape(1, 1, DENSE_HIDDEN))
    yield LayerCost("dense_out", DENSE_HIDDEN * NUM_CLASSES + NUM_CLASSES,
                    DENSE_HIDDEN * NUM_CLASSES, TensorShape(1, 1, NUM_CLASSES))


def propagate_shapes(arch: ArchDescriptor) -> list[TensorShape]:
    """Output shape of every counted stage, stem through final dense layer."""
    return [row.out_shape for row in _walk(arch)]


def count_cost(arch: ArchDescriptor) -> CostReport:
    rows = tuple(_walk(arch))
    return CostReport(
        params=sum(row.params for row in rows),
        macs=sum(row.macs for row in rows),
        per_layer=rows,
    )


@functools.lru_cache(maxsize=None)
def _macs_for(genes: tuple[int, ...], space: SearchSpace) -> int:
    return count_cost(decode(Chromosome(genes=genes), space)).macs


def flops_objective(chromosome: Chromosome, space: SearchSpace) -> int:
    """MAC count for a chromosome; memoized so repeated queries are O(1)."""
    return _macs_for(chromosome.genes, space)


def format_report_table(report: CostReport, *, flops_factor: int = 1) -> str:
    """Human-readable table: params in millions, MACs in billions (2 dp)."""
    lines = [f"{'layer':<14} {'params':>12} {'macs':>16} {'out shape':>16}"]
    for row in report.per_layer:
        shape = "x".join(str(d) for d in row.out_shape.as_tuple())
        lines.append(f"{row.name:<14} {row.params:>12,} {row.macs * flops_factor:>16,} {shape:>16}")
    lines.append("-" * len(lines[0]))
    lines.append(f"{'total':<14} {report.params:>12,} {report.macs * flops_factor:>16,}")
    lines.append(f"params: {report.params / 1e6:.2f}M   "
                 f"macs: {report.macs * flops_factor / 1e9:.2f}G")
    return "\n".join(lines)


def macs_g(macs: int) -> float:
    return macs / 1e9


def params_m(params: int) -> float:
    return params / 1e6
