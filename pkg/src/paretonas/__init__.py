"""Multi-objective evolutionary architecture search engine.

Core pieces: a fixed-skeleton search space over 6^20 block configurations
(`archspace`), an exact parameter/MAC cost model (`costmodel`), strict-fair
supernet sampling plans with a tabular training simulation (`fairsampler`),
an adapted two-objective NSGA-II loop with an exploration -> exploitation
schedule (`search`), and pluggable accuracy evaluators including a process
bridge for external trainers (`evaluators`).
"""

__version__ = "0.1.0"

from .archspace import (
    ArchDescriptor,
    Chromosome,
    ChoiceSpec,
    LayerTemplate,
    Orientation,
    PRESETS,
    SearchSpace,
    arch_from_json,
    arch_to_json,
    build_search_space,
    decode,
    encode,
    preset_chromosome,
    random_chromosome,
    space_size,
)
from .costmodel import (
    CostReport,
    TensorShape,
    count_cost,
    flops_objective,
    propagate_shapes,
)
from .evaluators import (
    BridgeEvaluator,
    CachingEvaluator,
    EvalRequest,
    EvalResponse,
    SurrogateEvaluator,
    bridge_evaluator,
    supernet_evaluator,
    surrogate_accuracy,
)
from .fairsampler import (
    SamplingPlan,
    SupernetSim,
    latent_quality_table,
    ranking_consistency,
    sample_plan,
    supernet_evaluate,
    train_supernet_sim,
)
from .search import (
    Individual,
    ParetoArchive,
    SearchConfig,
    SearchResult,
    crossover,
    crowding_distance,
    exploitation_ratio,
    fast_nondominated_sort,
    hypervolume,
    mutate,
    random_search,
    run_search,
    tournament_select,
)

__all__ = [name for name in dir() if not name.startswith("_")]
