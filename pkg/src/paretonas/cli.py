"""Command-line entry point.

Subcommands: cost, export-arch, sample-plan, simulate-supernet, search,
compare. All outputs are plain JSON/CSV. Exit codes: 0 success, 1 runtime
failure, 2 usage or input error. Every search run writes a manifest pairing
its artifacts with the exact configuration and seed that produced them.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .archspace import (
    ArchDescriptor,
    Chromosome,
    PRESETS,
    SearchSpace,
    arch_from_json,
    arch_to_json,
    build_search_space,
    decode,
    preset_chromosome,
)
from .costmodel import count_cost, flops_objective, format_report_table
from .errors import (
    ChromosomeError,
    CheckpointError,
    EvaluatorError,
    NotInSpaceError,
    ParetonasError,
    PresetError,
    ShapeError,
)
from .evaluators import SurrogateEvaluator, bridge_evaluator, supernet_evaluator
from .fairsampler import (
    DEFAULT_LR,
    DEFAULT_NOISE_SCALE,
    SupernetSim,
    ranking_consistency,
    sample_plan,
    train_supernet_sim,
)
from .search import (
    RunState,
    SearchConfig,
    front_csv_text,
    hypervolume,
    load_checkpoint,
    pareto_front_of,
    random_search,
    read_front_csv,
    run_search,
    save_checkpoint,
    scatter_header,
    scatter_rows,
)

OUT_DIR_ENV = "PARETONAS_OUT_DIR"

FRONT_CSV = "front.csv"
SCATTER_CSV = "scatter.csv"
CHECKPOINT_JSON = "checkpoint.json"
MANIFEST_JSON = "manifest.json"

_USAGE_ERRORS = (PresetError, ChromosomeError, NotInSpaceError, ShapeError,
                 CheckpointError, FileNotFoundError, json.JSONDecodeError,
                 ValueError, KeyError)


class _StopRequested(Exception):
    pass


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _resolve_arch(ref: str, space: SearchSpace) -> tuple[ArchDescriptor, str]:
    """Resolve a preset name, gene string (e.g. 4-4-...-4), or JSON path."""
    if ref in PRESETS:
        return decode(preset_chromosome(ref), space), ref
    tokens = ref.replace(",", "-").split("-")
    if len(tokens) > 1 and all(token.isdigit() for token in tokens):
        return decode(Chromosome(genes=tuple(int(t) for t in tokens)), space), ref
    if not os.path.exists(ref):
        raise FileNotFoundError(f"file not found: {ref}")
    with open(ref) as handle:
        return arch_from_json(json.load(handle)), ref


def cmd_cost(args: argparse.Namespace) -> int:
    space = build_search_space()
    arch, _ = _resolve_arch(args.arch, space)
    report = count_cost(arch)
    if args.json:
        document = report.to_json()
        if args.flops_factor != 1:
            document["flops_factor"] = args.flops_factor
            document["flops"] = report.macs * args.flops_factor
        print(json.dumps(document, indent=2))
    else:
        print(format_report_table(report, flops_factor=args.flops_factor))
    return 0


def cmd_export_arch(args: argparse.Namespace) -> int:
    space = build_search_space()
    arch, _ = _resolve_arch(args.arch, space)
    text = json.dumps(arch_to_json(arch), indent=2)
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def cmd_sample_plan(args: argparse.Namespace) -> int:
    space = build_search_space()
    rng = np.random.default_rng(args.seed)
    plan = sample_plan(space, rng)
    print(json.dumps({
        "seed": args.seed,
        "step_models": [list(model.genes) for model in plan.step_models],
    }, indent=2))
    return 0


def cmd_simulate_supernet(args: argparse.Namespace) -> int:
    space = build_search_space()
    sim = SupernetSim.create(space, seed=args.seed, lr=args.lr,
                             noise_scale=args.noise)
    train_supernet_sim(sim, space, args.steps)
    counts = sim.visit_count
    eval_seed = args.eval_seed if args.eval_seed is not None else args.seed + 1
    tau = ranking_consistency(sim, space, args.samples,
                              np.random.default_rng(eval_seed))
    print(f"steps trained: {sim.steps_trained}")
    print(f"visit counts: min={int(counts.min())} max={int(counts.max())} "
          f"(strictly fair: {counts.min() == counts.max()})")
    print(f"ranking consistency (kendall tau, n={args.samples}): {tau:.4f}")
    if args.out:
        with open(args.out, "w") as handle:
            json.dump(sim.to_json(), handle)
            handle.write("\n")
        print(f"wrote {args.out}")
    return 0


def _load_search_config(args: argparse.Namespace) -> SearchConfig:
    values = SearchConfig().to_json()
    if args.config:
        with open(args.config) as handle:
            file_values = json.load(handle)
        unknown = set(file_values) - set(values)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(file_values)
    overrides = {
        "population_size": args.population,
        "iterations": args.iterations,
        "tournament_size": args.tournament_size,
        "seed": args.seed,
    }
    values.update({key: value for key, value in overrides.items() if value is not None})
    return SearchConfig.from_json(values)


def _make_evaluator(args: argparse.Namespace, space: SearchSpace):
    """Build (evaluator, tag, closer). The tag pins checkpoint identity."""
    if args.evaluator == "surrogate":
        seed = args.surrogate_seed
        return SurrogateEvaluator(space, seed), {"kind": "surrogate", "seed": seed}, None
    if args.evaluator == "supernet-sim":
        sim = SupernetSim.create(space, seed=args.sim_seed, lr=args.sim_lr,
                                 noise_scale=args.sim_noise)
        train_supernet_sim(sim, space, args.sim_steps)
        tag = {"kind": "supernet-sim", "seed": args.sim_seed,
               "steps": args.sim_steps, "lr": args.sim_lr, "noise": args.sim_noise}
        return supernet_evaluator(sim), tag, None
    if args.evaluator == "bridge":
        if not args.bridge_cmd:
            raise ValueError("--bridge-cmd is required with --evaluator bridge")
        bridge = bridge_evaluator(args.bridge_cmd, timeout=args.bridge_timeout)
        return bridge, {"kind": "bridge", "command": args.bridge_cmd}, bridge.close
    raise ValueError(f"unknown evaluator {args.evaluator!r}")


def _write_manifest(out_dir: str, *, command: str, config: dict, evaluator: dict,
                    status: str, outputs: dict, inputs: dict) -> None:
    manifest = {
        "tool": "paretonas",
        "version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "command": command,
        "config": config,
        "evaluator": evaluator,
        "status": status,
        "inputs": inputs,
        "outputs": outputs,
    }
    with open(os.path.join(out_dir, MANIFEST_JSON), "w") as handle:
        json.dump(manifest, handle, indent=2)
        handle.write("\n")


def cmd_search(args: argparse.Namespace) -> int:
    space = build_search_space()
    config = _load_search_config(args)
    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or "paretonas-out"
    os.makedirs(out_dir, exist_ok=True)
    front_path = os.path.join(out_dir, FRONT_CSV)
    scatter_path = os.path.join(out_dir, SCATTER_CSV)
    checkpoint_path = os.path.join(out_dir, CHECKPOINT_JSON)

    evaluator, evaluator_tag, closer = _make_evaluator(args, space)
    inputs = {"config_file": args.config}

    try:
        if args.baseline == "random":
            if args.resume:
                raise ValueError("--resume is not supported with --baseline random")
            budget = config.population_size * config.iterations
            rng = np.random.default_rng(config.seed)
            result = random_search(budget, space, evaluator, rng,
                                   workers=args.workers)
            with open(scatter_path, "w") as handle:
                handle.write(scatter_header() + "\n")
                handle.write("\n".join(scatter_rows(result.log)) + "\n")
            with open(front_path, "w") as handle:
                handle.write(front_csv_text(result.archive.members, space))
            _write_manifest(out_dir, command="search --baseline random",
                            config={**config.to_json(), "budget": budget},
                            evaluator=evaluator_tag, status="complete",
                            outputs={"front_csv": front_path,
                                     "scatter_csv": scatter_path},
                            inputs=inputs)
            print(f"random search: {len(result.log)} evaluations, "
                  f"front size {len(result.archive.members)}")
            print(f"wrote {front_path}")
            return 0

        log_lines: list[str] = []
        resume_state: RunState | None = None
        if args.resume:
            if not os.path.exists(checkpoint_path):
                raise CheckpointError(f"no checkpoint to resume in {out_dir!r}")
            with open(scatter_path) as handle:
                disk_lines = handle.read().splitlines()[1:]  # drop header
            resume_state, log_lines = load_checkpoint(
                checkpoint_path, config=config, evaluator_tag=evaluator_tag,
                log_lines=disk_lines)
            # Rewrite the log in case rows past the checkpoint survived a kill.
            with open(scatter_path, "w") as handle:
                handle.write(scatter_header() + "\n")
                if log_lines:
                    handle.write("\n".join(log_lines) + "\n")
            if resume_state.iteration >= config.iterations:
                print(f"run already complete at iteration {resume_state.iteration}")
                return 0
        else:
            with open(scatter_path, "w") as handle:
                handle.write(scatter_header() + "\n")

        def observer(iteration, archive, records, rng_state):
            new_lines = scatter_rows(records)
            log_lines.extend(new_lines)
            with open(scatter_path, "a") as handle:
                handle.write("\n".join(new_lines) + "\n")
            save_checkpoint(checkpoint_path, config=config,
                            evaluator_tag=evaluator_tag, iteration=iteration,
                            archive=archive.members, rng_state=rng_state,
                            log_lines=log_lines)
            if args.stop_after is not None and iteration >= args.stop_after:
                raise _StopRequested

        try:
            result = run_search(config, space, evaluator, workers=args.workers,
                                observer=observer, resume=resume_state)
        except _StopRequested:
            _write_manifest(out_dir, command="search",
                            config=config.to_json(), evaluator=evaluator_tag,
                            status="stopped",
                            outputs={"scatter_csv": scatter_path,
                                     "checkpoint": checkpoint_path},
                            inputs=inputs)
            print(f"stopped after iteration {args.stop_after}; "
                  f"resume with --resume")
            return 0

        with open(front_path, "w") as handle:
            handle.write(front_csv_text(result.archive.members, space))
        _write_manifest(out_dir, command="search",
                        config=config.to_json(), evaluator=evaluator_tag,
                        status="complete",
                        outputs={"front_csv": front_path,
                                 "scatter_csv": scatter_path,
                                 "checkpoint": checkpoint_path},
                        inputs=inputs)
        print(f"search complete: {len(log_lines)} evaluations logged, "
              f"archive size {len(result.archive.members)}")
        print(f"wrote {front_path}")
        return 0
    finally:
        if closer is not None:
            closer()


def cmd_compare(args: argparse.Namespace) -> int:
    space = build_search_space()
    members_a = pareto_front_of(read_front_csv(args.front_a))
    members_b = pareto_front_of(read_front_csv(args.front_b))
    max_macs = flops_objective(Chromosome(genes=(6,) * len(space.layers)), space)
    reference = (0.0, max_macs)
    hv_a = hypervolume(members_a, reference)
    hv_b = hypervolume(members_b, reference)

    def dominated_count(points, others):
        from .search import dominates
        return sum(
            1 for p in points if any(dominates(q, p) for q in others)
        )

    a_dominated = dominated_count(members_a, members_b)
    b_dominated = dominated_count(members_b, members_a)
    report = {
        "front_a": {"path": args.front_a, "size": len(members_a),
                    "hypervolume": hv_a, "points_dominated_by_other": a_dominated},
        "front_b": {"path": args.front_b, "size": len(members_b),
                    "hypervolume": hv_b, "points_dominated_by_other": b_dominated},
        "reference": {"accuracy": 0.0, "macs": max_macs},
    }
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"front A: {args.front_a}  size={len(members_a)}  "
              f"hypervolume={hv_a:.6f}  dominated_points={a_dominated}")
        print(f"front B: {args.front_b}  size={len(members_b)}  "
              f"hypervolume={hv_b:.6f}  dominated_points={b_dominated}")
        if hv_a > hv_b:
            print("front A has the larger hypervolume")
        elif hv_b > hv_a:
            print("front B has the larger hypervolume")
        else:
            print("hypervolumes are equal")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paretonas",
        description="Multi-objective evolutionary architecture search engine.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_cost = sub.add_parser("cost", help="parameter and MAC report for an architecture")
    p_cost.add_argument("arch", help="preset name, gene string (e.g. 4-4-...), or arch JSON path")
    p_cost.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    p_cost.add_argument("--flops-factor", type=int, default=1, choices=(1, 2),
                        help="multiply reported MACs (2 = count multiply and add separately)")
    p_cost.set_defaults(func=cmd_cost)

    p_export = sub.add_parser("export-arch", help="emit the architecture JSON document")
    p_export.add_argument("arch", help="preset name, gene string, or arch JSON path")
    p_export.add_argument("--out", help="write to a file instead of stdout")
    p_export.set_defaults(func=cmd_export_arch)

    p_plan = sub.add_parser("sample-plan",
                            help="emit one fair sampling plan (6 disjoint models)")
    p_plan.add_argument("--seed", type=int, default=0)
    p_plan.set_defaults(func=cmd_sample_plan)

    p_sim = sub.add_parser("simulate-supernet",
                           help="train the tabular supernet simulation and report "
                                "fairness and ranking consistency")
    p_sim.add_argument("--steps", type=int, default=2000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--lr", type=float, default=DEFAULT_LR)
    p_sim.add_argument("--noise", type=float, default=DEFAULT_NOISE_SCALE)
    p_sim.add_argument("--samples", type=int, default=200,
                       help="chromosomes sampled for the consistency estimate")
    p_sim.add_argument("--eval-seed", type=int, default=None,
                       help="seed for the consistency sample (default: seed + 1)")
    p_sim.add_argument("--out", help="write the simulation state JSON here")
    p_sim.set_defaults(func=cmd_simulate_supernet)

    p_search = sub.add_parser("search", help="run the evolutionary search")
    p_search.add_argument("--config", help="JSON config file (flags override it)")
    p_search.add_argument("--out-dir",
                          help=f"artifact directory (default ${OUT_DIR_ENV} or ./paretonas-out)")
    p_search.add_argument("--seed", type=int, default=None)
    p_search.add_argument("--population", type=int, default=None)
    p_search.add_argument("--iterations", type=int, default=None)
    p_search.add_argument("--tournament-size", type=int, default=None)
    p_search.add_argument("--evaluator", choices=("surrogate", "supernet-sim", "bridge"),
                          default="surrogate")
    p_search.add_argument("--surrogate-seed", type=int, default=7)
    p_search.add_argument("--sim-steps", type=int, default=2000)
    p_search.add_argument("--sim-seed", type=int, default=0)
    p_search.add_argument("--sim-lr", type=float, default=DEFAULT_LR)
    p_search.add_argument("--sim-noise", type=float, default=DEFAULT_NOISE_SCALE)
    p_search.add_argument("--bridge-cmd", help="worker command line for --evaluator bridge")
    p_search.add_argument("--bridge-timeout", type=float, default=30.0)
    p_search.add_argument("--baseline", choices=("random",),
                          help="run the matched-budget random-search baseline instead")
    p_search.add_argument("--resume", action="store_true",
                          help="continue from the checkpoint in --out-dir")
    p_search.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                          help="intra-iteration evaluation parallelism")
    p_search.add_argument("--stop-after", type=int, default=None,
                          help="checkpoint and stop after this iteration")
    p_search.set_defaults(func=cmd_search)

    p_compare = sub.add_parser("compare", help="compare two front CSVs")
    p_compare.add_argument("front_a")
    p_compare.add_argument("front_b")
    p_compare.add_argument("--json", action="store_true")
    p_compare.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        return _fail(str(exc), 2)
    except (EvaluatorError, ParetonasError, OSError) as exc:
        return _fail(str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
