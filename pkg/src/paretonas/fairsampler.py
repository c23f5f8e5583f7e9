"""Strict-fairness sampling plans and a tabular supernet simulation.

A sampling plan covers one mini-batch step: 6 disjoint models such that, per
layer, the six genes form a permutation of 1..6 - every choice block is
visited exactly once per step, so after N steps all 120 (layer, choice) cells
have identical visit counts.

The simulation replaces GPU supernet training. Each (layer, choice) cell has
a hidden latent quality q and a learned score s; every visit nudges s toward
q with learning rate `lr` plus Gaussian noise. Candidate scoring squashes the
sum of learned scores along a chromosome through a logistic, so a converged
noise-free table ranks candidates exactly as the latent truth does. Real
training attaches through the evaluator bridge instead of this module.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .archspace import Chromosome, SearchSpace
from .prng import QUALITY_TAG, SplitMix64, stream_seed

# Latent-quality recipe constants (frozen; mirrored by external workers).
# Mean quality rises mildly with expansion rate and kernel length so that
# accuracy correlates positively with compute cost, plus bounded per-cell
# noise so the trade-off front is not degenerate.
EXPANSION_WEIGHT = 1.0
KERNEL_WEIGHT = 0.7
CELL_NOISE = 0.5
EXPANSION_PIVOT = 0.6
KERNEL_PIVOT = 0.75
EXPANSION_NORM = 8.0
KERNEL_NORM = 7.0

DEFAULT_LR = 0.1
DEFAULT_NOISE_SCALE = 0.05
DEFAULT_TAU_THRESHOLD = 0.7  # artifact convention, not an upstream claim


def quality_cell(expansion_rate: int, kernel_length: int, unit: float) -> float:
    """Latent quality of one choice cell from its menu entry and one
    uniform draw. Evaluation order is fixed; see the recipe in `prng`."""
    return (EXPANSION_WEIGHT * (expansion_rate / EXPANSION_NORM - EXPANSION_PIVOT)
            + KERNEL_WEIGHT * (kernel_length / KERNEL_NORM - KERNEL_PIVOT)
            + CELL_NOISE * (2.0 * unit - 1.0))


def latent_quality_table(space: SearchSpace, seed: int) -> np.ndarray:
    """(layers x 6) latent-quality table, drawn layer-major, choice-minor."""
    stream = SplitMix64(stream_seed(seed, QUALITY_TAG))
    table = np.empty((len(space.layers), len(space.layers[0].choices)))
    for l, layer in enumerate(space.layers):
        for c, choice in enumerate(layer.choices):
            table[l, c] = quality_cell(choice.expansion_rate,
                                       choice.kernel_length,
                                       stream.next_unit())
    return table


def logistic(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


@dataclass(frozen=True)
class SamplingPlan:
    """Six chromosomes for one step; per layer their genes are a permutation."""

    step_models: tuple[Chromosome, ...]


def sample_plan(space: SearchSpace, rng: np.random.Generator) -> SamplingPlan:
    """Uniform per-layer permutations: model c takes the c-th element of each
    layer's shuffled menu, so no two models share a block."""
    n_choices = len(space.layers[0].choices)
    for layer in space.layers:
        if len(layer.choices) != n_choices:
            raise ValueError("sampling plans need equal-size menus in every layer")
    columns = [rng.permutation(n_choices) + 1 for _ in space.layers]
    models = tuple(
        Chromosome(genes=tuple(int(column[c]) for column in columns))
        for c in range(n_choices)
    )
    return SamplingPlan(step_models=models)


@dataclass
class SimConfig:
    lr: float = DEFAULT_LR
    noise_scale: float = DEFAULT_NOISE_SCALE
    seed: int = 0


@dataclass
class SupernetSim:
    """Tabular supernet state; training is sequential per instance."""

    space: SearchSpace
    config: SimConfig
    latent_quality: np.ndarray
    learned_score: np.ndarray
    visit_count: np.ndarray
    rng: np.random.Generator = field(repr=False)
    steps_trained: int = 0

    @classmethod
    def create(cls, space: SearchSpace, seed: int = 0,
               lr: float = DEFAULT_LR,
               noise_scale: float = DEFAULT_NOISE_SCALE) -> "SupernetSim":
        shape = (len(space.layers), len(space.layers[0].choices))
        return cls(
            space=space,
            config=SimConfig(lr=lr, noise_scale=noise_scale, seed=seed),
            latent_quality=latent_quality_table(space, seed),
            learned_score=np.zeros(shape),
            visit_count=np.zeros(shape, dtype=np.int64),
            rng=np.random.default_rng(seed),
        )

    def to_json(self) -> dict:
        return {
            "config": {"lr": self.config.lr, "noise_scale": self.config.noise_scale,
                       "seed": self.config.seed},
            "steps_trained": self.steps_trained,
            "latent_quality": self.latent_quality.tolist(),
            "learned_score": self.learned_score.tolist(),
            "visit_count": self.visit_count.tolist(),
            "rng_state": _jsonify_rng_state(self.rng.bit_generator.state),
        }

    @classmethod
    def from_json(cls, document: dict, space: SearchSpace) -> "SupernetSim":
        config = SimConfig(**document["config"])
        rng = np.random.default_rng(config.seed)
        rng.bit_generator.state = document["rng_state"]
        return cls(
            space=space,
            config=config,
            latent_quality=np.asarray(document["latent_quality"]),
            learned_score=np.asarray(document["learned_score"]),
            visit_count=np.asarray(document["visit_count"], dtype=np.int64),
            rng=rng,
            steps_trained=document["steps_trained"],
        )


def _jsonify_rng_state(state):
    # PCG64 state holds plain ints/strings; json handles Python's big ints.
    return json.loads(json.dumps(state))


def train_supernet_sim(sim: SupernetSim, space: SearchSpace, steps: int) -> SupernetSim:
    """Run `steps` mini-batch groups of fair updates; mutates and returns sim.

    Per step: one sampling plan, then each of its 6 models updates the cells
    it owns, model-major / layer-minor, with
    s <- s + lr * (q - s) + noise,  noise ~ N(0, noise_scale).
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    lr = sim.config.lr
    noise_scale = sim.config.noise_scale
    for _ in range(steps):
        plan = sample_plan(space, sim.rng)
        noise = sim.rng.normal(0.0, noise_scale, size=(len(plan.step_models),
                                                       len(space.layers)))
        for m, model in enumerate(plan.step_models):
            for l, gene in enumerate(model.genes):
                c = gene - 1
                current = sim.learned_score[l, c]
                sim.learned_score[l, c] = (
                    current + lr * (sim.latent_quality[l, c] - current) + noise[m, l]
                )
                sim.visit_count[l, c] += 1
        sim.steps_trained += 1
    return sim


def supernet_evaluate(sim: SupernetSim, chromosome: Chromosome) -> float:
    """Logistic squash of the summed learned scores along the chromosome."""
    if len(chromosome.genes) != len(sim.space.layers):
        raise ValueError(
            f"chromosome has {len(chromosome.genes)} genes, "
            f"sim expects {len(sim.space.layers)}"
        )
    total = 0.0
    for l, gene in enumerate(chromosome.genes):
        total += float(sim.learned_score[l, gene - 1])
    return logistic(total)


def latent_truth(sim: SupernetSim, chromosome: Chromosome) -> float:
    """Ground-truth analogue of supernet_evaluate on the latent table."""
    total = 0.0
    for l, gene in enumerate(chromosome.genes):
        total += float(sim.latent_quality[l, gene - 1])
    return logistic(total)


def ranking_consistency(sim: SupernetSim, space: SearchSpace,
                        n_samples: int, rng: np.random.Generator) -> float:
    """Kendall tau between simulated scores and latent truth over random
    chromosomes. Degenerate (constant) score vectors yield 0 with a warning."""
    if n_samples < 10:
        raise ValueError(f"n_samples must be >= 10, got {n_samples}")
    from .archspace import random_chromosome

    samples = [random_chromosome(space, rng) for _ in range(n_samples)]
    scores = [supernet_evaluate(sim, chromosome) for chromosome in samples]
    truths = [latent_truth(sim, chromosome) for chromosome in samples]
    if len(set(scores)) == 1 or len(set(truths)) == 1:
        warnings.warn("degenerate score vector; ranking consistency undefined, "
                      "reporting 0.0", RuntimeWarning, stacklevel=2)
        return 0.0
    tau = stats.kendalltau(truths, scores).statistic
    if math.isnan(tau):
        warnings.warn("Kendall tau undefined for these scores, reporting 0.0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    return float(tau)
