"""Adapted NSGA-II search loop with an exploration -> exploitation schedule.

Two objectives: maximize validation accuracy, minimize multiply-accumulates.
Each iteration creates P candidates - a scheduled mix of uniform-random
chromosomes and mutated crossover offspring of archive champions - evaluates
them (deduplicated against a session cache), merges them with the archive,
and keeps the top P by non-dominated sorting and crowding distance.

The exploitation ratio is 0 before iteration 15 and grows linearly as
(i - 15) / 68.75 afterwards, reaching 0.8 at iteration 70 (clamped to [0, 1]
beyond). The randomly created share of each generation is round((1 - a) * P).

All randomness flows from one seeded generator consumed in a fixed order, so
a run is reproducible from its seed and resumable from a checkpoint holding
the generator state.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .archspace import Chromosome, SearchSpace, decode, random_chromosome
from .costmodel import count_cost, flops_objective
from .errors import CheckpointError, EvaluatorError

SCHEDULE_ONSET = 15
SCHEDULE_SLOPE = 68.75

FRONT_CSV_COLUMNS = ("chromosome", "accuracy", "macs", "params", "rank", "crowding")
SCATTER_CSV_COLUMNS = ("iteration", "accuracy", "macs", "chromosome")
CHECKPOINT_SCHEMA_VERSION = 1


def exploitation_ratio(i: int) -> float:
    """Share of a generation bred by crossover+mutation at iteration i."""
    if i < 1:
        raise ValueError(f"iteration must be >= 1, got {i}")
    if i < SCHEDULE_ONSET:
        return 0.0
    return min(1.0, (i - SCHEDULE_ONSET) / SCHEDULE_SLOPE)


@dataclass
class Individual:
    chromosome: Chromosome
    accuracy: float
    macs: int
    rank: int | None = None
    crowding: float | None = None


@dataclass(frozen=True)
class SearchConfig:
    population_size: int = 64
    iterations: int = 70
    tournament_size: int = 2
    mutation_spots: tuple[int, int] = (1, 4)
    crossover_spots: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError(f"population_size must be >= 4, got {self.population_size}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.tournament_size < 1:
            raise ValueError(f"tournament_size must be >= 1, got {self.tournament_size}")

    def to_json(self) -> dict:
        return {
            "population_size": self.population_size,
            "iterations": self.iterations,
            "tournament_size": self.tournament_size,
            "mutation_spots": list(self.mutation_spots),
            "crossover_spots": self.crossover_spots,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, document: dict) -> "SearchConfig":
        document = dict(document)
        if "mutation_spots" in document:
            document["mutation_spots"] = tuple(document["mutation_spots"])
        return cls(**document)


@dataclass
class ParetoArchive:
    members: list[Individual]
    capacity: int


def dominates(a: Individual, b: Individual) -> bool:
    """a is no worse on both objectives and strictly better on one."""
    return (a.accuracy >= b.accuracy and a.macs <= b.macs
            and (a.accuracy > b.accuracy or a.macs < b.macs))


def fast_nondominated_sort(pop: list[Individual]) -> list[list[Individual]]:
    """Deb's front-peeling sort; front 0 is exactly the non-dominated set."""
    n = len(pop)
    if n == 0:
        return []
    acc = np.array([ind.accuracy for ind in pop])
    macs = np.array([ind.macs for ind in pop], dtype=np.int64)
    # dom[i, j]: i dominates j.
    no_worse = (acc[:, None] >= acc[None, :]) & (macs[:, None] <= macs[None, :])
    strictly = (acc[:, None] > acc[None, :]) | (macs[:, None] < macs[None, :])
    dom = no_worse & strictly

    dominated_by = dom.sum(axis=0)
    fronts: list[list[int]] = []
    current = np.flatnonzero(dominated_by == 0)
    assigned = np.zeros(n, dtype=bool)
    while current.size:
        fronts.append(current.tolist())
        assigned[current] = True
        dominated_by = dominated_by - dom[current].sum(axis=0)
        current = np.flatnonzero((dominated_by == 0) & ~assigned)

    result = []
    for rank, front in enumerate(fronts):
        members = [pop[i] for i in front]
        for ind in members:
            ind.rank = rank
        result.append(members)
    return result


def crowding_distance(front: list[Individual]) -> list[float]:
    """Per-objective normalized neighbor gaps; boundaries get +inf.

    A zero objective range contributes nothing. Values are assigned onto the
    individuals and returned aligned with the input order.
    """
    if not front:
        raise ValueError("crowding distance needs a non-empty front")
    n = len(front)
    distance = [0.0] * n
    for key in (lambda ind: ind.accuracy, lambda ind: ind.macs):
        order = sorted(range(n), key=lambda i: key(front[i]))
        low, high = key(front[order[0]]), key(front[order[-1]])
        distance[order[0]] = math.inf
        distance[order[-1]] = math.inf
        span = high - low
        if span == 0:
            continue
        for position in range(1, n - 1):
            i = order[position]
            if math.isinf(distance[i]):
                continue
            gap = key(front[order[position + 1]]) - key(front[order[position - 1]])
            distance[i] += gap / span
    for ind, value in zip(front, distance):
        ind.crowding = value
    return distance


def tournament_select(archive: ParetoArchive, rng: np.random.Generator,
                      tournament_size: int = 2) -> Individual:
    """Crowded-comparison tournament: lower rank, then larger crowding,
    then a uniform pick among full ties."""
    members = archive.members
    if not members:
        raise RuntimeError("tournament selection on an empty archive")
    replace = len(members) < tournament_size
    entrants = [members[i] for i in rng.choice(len(members), size=tournament_size,
                                               replace=replace)]
    best_key = min((e.rank, -e.crowding) for e in entrants)
    tied = [e for e in entrants if (e.rank, -e.crowding) == best_key]
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(0, len(tied)))]


def crossover(a: Chromosome, b: Chromosome, rng: np.random.Generator,
              n_spots: int = 2) -> tuple[Chromosome, Chromosome]:
    """Swap genes at n_spots distinct random positions between copies of a, b."""
    n = len(a.genes)
    spots = rng.choice(n, size=n_spots, replace=False)
    genes_a = list(a.genes)
    genes_b = list(b.genes)
    for spot in spots:
        genes_a[spot], genes_b[spot] = genes_b[spot], genes_a[spot]
    return Chromosome(genes=tuple(genes_a)), Chromosome(genes=tuple(genes_b))


def mutate(g: Chromosome, rng: np.random.Generator,
           spots: tuple[int, int] = (1, 4)) -> Chromosome:
    """Resample k (uniform in `spots`) distinct genes, each to a value
    different from its current one; the result differs in exactly k spots."""
    n = len(g.genes)
    k = int(rng.integers(spots[0], spots[1] + 1))
    positions = rng.choice(n, size=k, replace=False)
    genes = list(g.genes)
    for position in positions:
        current = genes[position]
        draw = int(rng.integers(1, 6))  # uniform over the 5 other values
        genes[position] = draw if draw < current else draw + 1
    return Chromosome(genes=tuple(genes))


def _environmental_selection(pop: list[Individual], capacity: int) -> list[Individual]:
    """Non-dominated sorting then crowding truncation down to capacity."""
    fronts = fast_nondominated_sort(pop)
    selected: list[Individual] = []
    for front in fronts:
        crowding_distance(front)
        if len(selected) + len(front) <= capacity:
            selected.extend(front)
        else:
            order = sorted(range(len(front)),
                           key=lambda i: -front[i].crowding)
            selected.extend(front[i] for i in order[:capacity - len(selected)])
            break
    return selected


@dataclass
class EvalRecord:
    iteration: int
    chromosome: Chromosome
    accuracy: float
    macs: int


@dataclass
class IterationStats:
    iteration: int
    n_random: int
    n_children: int
    evaluator_calls: int


@dataclass
class SearchResult:
    config: SearchConfig
    archive: ParetoArchive
    log: list[EvalRecord]
    stats: list[IterationStats]
    evaluator_calls: int

    def front(self) -> list[Individual]:
        return [ind for ind in self.archive.members if ind.rank == 0]


@dataclass
class RunState:
    """Everything needed to continue a run as if it had never stopped."""

    iteration: int
    archive: list[Individual]
    rng_state: dict
    cache: dict[tuple[int, ...], float] = field(default_factory=dict)


def _evaluate_batch(candidates: list[Chromosome], evaluator,
                    cache: dict[tuple[int, ...], float], workers: int) -> int:
    """Evaluate cache misses (each chromosome at most once per session)."""
    misses: list[Chromosome] = []
    seen = set()
    for candidate in candidates:
        if candidate.genes not in cache and candidate.genes not in seen:
            seen.add(candidate.genes)
            misses.append(candidate)
    if not misses:
        return 0
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(evaluator, misses))
    else:
        values = [evaluator(candidate) for candidate in misses]
    for candidate, value in zip(misses, values):
        if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
            raise EvaluatorError(
                f"evaluator returned accuracy outside [0, 1]: {value!r}",
                chromosome=candidate)
        cache[candidate.genes] = float(value)
    return len(misses)


def run_search(config: SearchConfig, space: SearchSpace, evaluator, *,
               workers: int = 1, observer=None,
               resume: RunState | None = None) -> SearchResult:
    """Full evolutionary search; deterministic per seed for a pure evaluator.

    `observer(iteration, archive, new_records, rng_state)` fires after each
    completed iteration (checkpointing hook). `resume` continues a run from a
    previously observed state and reproduces the uninterrupted run exactly.
    """
    population_size = config.population_size
    rng = np.random.default_rng(config.seed)
    if resume is not None:
        rng.bit_generator.state = resume.rng_state
        archive = ParetoArchive(members=list(resume.archive), capacity=population_size)
        cache = dict(resume.cache)
        start_iteration = resume.iteration + 1
    else:
        archive = ParetoArchive(members=[], capacity=population_size)
        cache = {}
        start_iteration = 1

    log: list[EvalRecord] = []
    stats: list[IterationStats] = []
    total_calls = 0

    for iteration in range(start_iteration, config.iterations + 1):
        alpha = exploitation_ratio(iteration)
        n_random = int((1.0 - alpha) * population_size + 0.5)
        if not archive.members:
            n_random = population_size
        n_children = population_size - n_random

        candidates = [random_chromosome(space, rng) for _ in range(n_random)]
        while len(candidates) < population_size:
            first = tournament_select(archive, rng, config.tournament_size)
            second = tournament_select(archive, rng, config.tournament_size)
            child_a, child_b = crossover(first.chromosome, second.chromosome,
                                         rng, config.crossover_spots)
            candidates.append(mutate(child_a, rng, config.mutation_spots))
            if len(candidates) < population_size:
                candidates.append(mutate(child_b, rng, config.mutation_spots))

        calls = _evaluate_batch(candidates, evaluator, cache, workers)
        total_calls += calls

        population = [
            Individual(chromosome=candidate,
                       accuracy=cache[candidate.genes],
                       macs=flops_objective(candidate, space))
            for candidate in candidates
        ]
        records = [EvalRecord(iteration, ind.chromosome, ind.accuracy, ind.macs)
                   for ind in population]
        log.extend(records)
        stats.append(IterationStats(iteration, n_random, n_children, calls))

        merged = archive.members + population
        archive = ParetoArchive(
            members=_environmental_selection(merged, population_size),
            capacity=population_size,
        )
        if observer is not None:
            observer(iteration, archive, records, rng.bit_generator.state)

    return SearchResult(config=config, archive=archive, log=log, stats=stats,
                        evaluator_calls=total_calls)


def pareto_front_of(points: list[Individual]) -> list[Individual]:
    """Non-dominated subset via a macs-ascending skyline sweep (O(n log n))."""
    if not points:
        return []
    order = sorted(range(len(points)),
                   key=lambda i: (points[i].macs, -points[i].accuracy))
    front = []
    best_accuracy = -math.inf
    group_macs = None
    group_accuracy = None
    for i in order:
        point = points[i]
        if point.macs != group_macs:
            group_macs = point.macs
            group_accuracy = point.accuracy  # max accuracy within this macs value
        if point.accuracy < group_accuracy:
            continue  # dominated within its own macs group
        if point.accuracy > best_accuracy:
            front.append(point)
            best_accuracy = point.accuracy
        elif point.accuracy == best_accuracy and point.macs == front[-1].macs:
            front.append(point)  # exact duplicate of a front point: keep
    return front


def random_search(budget: int, space: SearchSpace, evaluator,
                  rng: np.random.Generator, *, workers: int = 1) -> SearchResult:
    """Uniform-random baseline at a matched evaluation budget."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    cache: dict[tuple[int, ...], float] = {}
    candidates = [random_chromosome(space, rng) for _ in range(budget)]
    calls = _evaluate_batch(candidates, evaluator, cache, workers)
    points = [
        Individual(chromosome=candidate, accuracy=cache[candidate.genes],
                   macs=flops_objective(candidate, space))
        for candidate in candidates
    ]
    log = [EvalRecord(1, ind.chromosome, ind.accuracy, ind.macs) for ind in points]
    front = pareto_front_of(points)
    for ind in front:
        ind.rank = 0
    crowding_distance(front)
    config = SearchConfig(population_size=max(4, len(front)), iterations=1)
    return SearchResult(
        config=config,
        archive=ParetoArchive(members=front, capacity=len(front)),
        log=log,
        stats=[IterationStats(1, budget, 0, calls)],
        evaluator_calls=calls,
    )


def hypervolume(front: list[Individual],
                reference: tuple[float, float]) -> float:
    """2-D dominated area against (accuracy_ref, macs_ref).

    Accuracy is used as-is (already on a unit scale); macs are normalized by
    the reference macs. Order-invariant; dominated or duplicate points add 0.
    """
    accuracy_ref, macs_ref = reference
    if macs_ref <= 0:
        raise ValueError(f"reference macs must be positive, got {macs_ref}")
    if not front:
        return 0.0
    points = []
    for ind in front:
        if ind.accuracy < accuracy_ref or ind.macs > macs_ref:
            raise ValueError(
                f"point (accuracy={ind.accuracy}, macs={ind.macs}) lies outside "
                f"the reference box (accuracy_ref={accuracy_ref}, macs_ref={macs_ref})")
        points.append((ind.accuracy - accuracy_ref, (macs_ref - ind.macs) / macs_ref))
    points.sort(key=lambda p: (-p[0], -p[1]))
    area = 0.0
    best_y = 0.0
    for x, y in points:
        if y > best_y:
            area += x * (y - best_y)
            best_y = y
    return area


# ---------------------------------------------------------------------------
# Artifact formats: front CSV, scatter CSV, checkpoint JSON.


def _format_float(value: float) -> str:
    return repr(float(value))


def front_csv_text(members: list[Individual], space: SearchSpace) -> str:
    """Front CSV with a stable row order (macs, -accuracy, genes)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(FRONT_CSV_COLUMNS)
    ordered = sorted(members, key=lambda ind: (ind.macs, -ind.accuracy,
                                               ind.chromosome.genes))
    for ind in ordered:
        params = count_cost(decode(ind.chromosome, space)).params
        writer.writerow([
            "-".join(str(g) for g in ind.chromosome.genes),
            _format_float(ind.accuracy),
            ind.macs,
            params,
            ind.rank if ind.rank is not None else "",
            _format_float(ind.crowding) if ind.crowding is not None else "",
        ])
    return buffer.getvalue()


def read_front_csv(path: str) -> list[Individual]:
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        rows = list(reader)
    if not rows:
        raise ValueError(f"no points in front CSV {path!r}")
    members = []
    for row in rows:
        genes = tuple(int(g) for g in row["chromosome"].replace(",", "-").split("-"))
        members.append(Individual(
            chromosome=Chromosome(genes=genes),
            accuracy=float(row["accuracy"]),
            macs=int(row["macs"]),
            rank=int(row["rank"]) if row.get("rank") else None,
            crowding=float(row["crowding"]) if row.get("crowding") else None,
        ))
    return members


def scatter_rows(records: list[EvalRecord]) -> list[str]:
    return [
        f"{record.iteration},{_format_float(record.accuracy)},{record.macs},"
        + "-".join(str(g) for g in record.chromosome.genes)
        for record in records
    ]


def scatter_header() -> str:
    return ",".join(SCATTER_CSV_COLUMNS)


def parse_scatter_line(line: str) -> EvalRecord:
    iteration, accuracy, macs, genes = line.split(",")
    return EvalRecord(
        iteration=int(iteration),
        chromosome=Chromosome(genes=tuple(int(g) for g in genes.split("-"))),
        accuracy=float(accuracy),
        macs=int(macs),
    )


def digest_lines(lines: list[str]) -> str:
    payload = "\n".join(lines).encode()
    return hashlib.sha256(payload).hexdigest()


def _archive_to_json(members: list[Individual]) -> list[dict]:
    entries = []
    for ind in members:
        entries.append({
            "chromosome": list(ind.chromosome.genes),
            "accuracy": ind.accuracy,
            "macs": ind.macs,
            "rank": ind.rank,
            "crowding": "inf" if ind.crowding == math.inf else ind.crowding,
        })
    return entries


def _archive_from_json(entries: list[dict]) -> list[Individual]:
    members = []
    for entry in entries:
        crowding = entry["crowding"]
        members.append(Individual(
            chromosome=Chromosome(genes=tuple(entry["chromosome"])),
            accuracy=entry["accuracy"],
            macs=entry["macs"],
            rank=entry["rank"],
            crowding=math.inf if crowding == "inf" else crowding,
        ))
    return members


def save_checkpoint(path: str, *, config: SearchConfig, evaluator_tag: dict,
                    iteration: int, archive: list[Individual], rng_state: dict,
                    log_lines: list[str]) -> None:
    """Atomically write a resumable checkpoint for a completed iteration."""
    document = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "config": config.to_json(),
        "evaluator": evaluator_tag,
        "iteration": iteration,
        "archive": _archive_to_json(archive),
        "rng_state": json.loads(json.dumps(rng_state)),
        "eval_log": {"rows": len(log_lines), "sha256": digest_lines(log_lines)},
    }
    tmp_path = path + ".tmp"
    with open(tmp_path, "w") as handle:
        json.dump(document, handle, indent=2)
        handle.write("\n")
    os.replace(tmp_path, path)


def load_checkpoint(path: str, *, config: SearchConfig, evaluator_tag: dict,
                    log_lines: list[str]) -> tuple[RunState, list[str]]:
    """Validate a checkpoint against the run being resumed and rebuild state.

    `log_lines` are all scatter rows recovered from disk. Rows belonging to
    iterations after the checkpoint (a kill can land between the log append
    and the checkpoint write) are discarded; the survivors must match the
    checkpoint digest. Returns the run state and the kept lines.
    """
    with open(path) as handle:
        document = json.load(handle)
    if document.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise CheckpointError(f"unsupported checkpoint schema: "
                              f"{document.get('schema_version')!r}")
    if document["config"] != config.to_json():
        raise CheckpointError("checkpoint config does not match the requested run")
    if document["evaluator"] != evaluator_tag:
        raise CheckpointError("checkpoint evaluator does not match the requested run")
    iteration = document["iteration"]
    kept = []
    cache = {}
    for line in log_lines:
        try:
            record = parse_scatter_line(line)
        except (ValueError, IndexError):
            break  # a kill mid-append leaves at most one partial tail line
        if record.iteration > iteration:
            continue
        kept.append(line)
        cache[record.chromosome.genes] = record.accuracy
    expected = document["eval_log"]
    if expected["rows"] != len(kept) or expected["sha256"] != digest_lines(kept):
        raise CheckpointError("evaluation log on disk does not match the checkpoint digest")
    state = RunState(
        iteration=iteration,
        archive=_archive_from_json(document["archive"]),
        rng_state=document["rng_state"],
        cache=cache,
    )
    return state, kept
