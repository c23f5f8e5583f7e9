"""Acceptance gate: every release criterion, each printing one PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as they
complete. Reference figures for the two shipped presets: baseline 3.31M
parameters / 2.03G MACs, nasc-net 3.01M / 1.53G, a 25% MAC saving and a 9%
parameter saving.
"""

import json
import subprocess
import sys
import time

import numpy as np

from paretonas import (
    Chromosome,
    SearchConfig,
    SupernetSim,
    SurrogateEvaluator,
    bridge_evaluator,
    count_cost,
    decode,
    exploitation_ratio,
    fast_nondominated_sort,
    flops_objective,
    hypervolume,
    preset_chromosome,
    random_search,
    ranking_consistency,
    run_search,
    sample_plan,
    space_size,
    train_supernet_sim,
)
from paretonas.errors import BridgeProtocolError
from paretonas.search import Individual, front_csv_text

CLI = [sys.executable, "-m", "paretonas.cli"]


def report(name: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


def within(value, target, tolerance):
    return abs(value - target) <= tolerance * target


# --- cost-model reproduction -------------------------------------------------

def test_criterion_cost_model_reproduction(space):
    start = time.monotonic()
    base = count_cost(decode(preset_chromosome("baseline"), space))
    nasc = count_cost(decode(preset_chromosome("nasc-net"), space))
    elapsed = time.monotonic() - start
    ok = (within(base.params, 3.31e6, 0.05) and within(base.macs, 2.03e9, 0.10)
          and within(nasc.params, 3.01e6, 0.05) and within(nasc.macs, 1.53e9, 0.10)
          and elapsed < 1.0)
    report("cost-model reproduction (baseline 3.31M/2.03G, nasc-net 3.01M/1.53G)",
           ok, f"baseline {base.params/1e6:.2f}M/{base.macs/1e9:.2f}G, "
               f"nasc-net {nasc.params/1e6:.2f}M/{nasc.macs/1e9:.2f}G, {elapsed:.3f}s")


def test_criterion_savings_ratios(space):
    base = count_cost(decode(preset_chromosome("baseline"), space))
    nasc = count_cost(decode(preset_chromosome("nasc-net"), space))
    macs_ratio = nasc.macs / base.macs
    params_saving = 1.0 - nasc.params / base.params
    ok = abs(macs_ratio - 0.75) <= 0.03 and abs(params_saving - 0.09) <= 0.02
    report("savings ratios (macs 0.75 +/- 0.03, params savings 9% +/- 2pp)",
           ok, f"macs ratio {macs_ratio:.4f}, params saving {params_saving:.4f}")


def test_criterion_space_size(space):
    ok = space_size(space) == 3_656_158_440_062_976 == 6**20
    report("space size exactly 6^20 = 3,656,158,440,062,976", ok)


def test_criterion_schedule():
    values = [exploitation_ratio(i) for i in range(1, 71)]
    ok = (exploitation_ratio(10) == 0.0 and exploitation_ratio(15) == 0.0
          and exploitation_ratio(70) == 0.8
          and all(b >= a for a, b in zip(values, values[1:])))
    report("schedule: ratio(10)=0, ratio(15)=0, ratio(70)=0.8, monotone on 1..70", ok)


# --- fairness ------------------------------------------------------------------

def test_criterion_fairness(space):
    sim = SupernetSim.create(space, seed=0)
    train_supernet_sim(sim, space, 100)
    counts_ok = sim.visit_count.shape == (20, 6) and bool(np.all(sim.visit_count == 100))

    plans_ok = True
    for seed in range(1000):
        plan = sample_plan(space, np.random.default_rng(seed))
        for layer in range(20):
            if sorted(model.genes[layer] for model in plan.step_models) != [1, 2, 3, 4, 5, 6]:
                plans_ok = False
    report("fairness: 100 steps -> all 120 visit counts exactly 100; "
           "1,000 seeded plans pass the per-layer permutation check",
           counts_ok and plans_ok)


# --- sorting oracle --------------------------------------------------------------

def _brute_force_fronts(pop):
    def dominated(p, others):
        return any(q.accuracy >= p.accuracy and q.macs <= p.macs
                   and (q.accuracy > p.accuracy or q.macs < p.macs)
                   for q in others if q is not p)

    remaining = list(pop)
    fronts = []
    while remaining:
        front = [p for p in remaining if not dominated(p, remaining)]
        fronts.append(front)
        remaining = [p for p in remaining if p not in front]
    return fronts


def test_criterion_sorting_oracle():
    rng = np.random.default_rng(99)
    genes = Chromosome(genes=(1,) * 20)
    ok = True
    for _ in range(200):
        n = int(rng.integers(1, 33))
        pop = [Individual(chromosome=genes,
                          accuracy=float(rng.integers(0, 12)) / 12,
                          macs=int(rng.integers(1, 9)))
               for _ in range(n)]
        fast = [set(map(id, front)) for front in fast_nondominated_sort(pop)]
        brute = [set(map(id, front)) for front in _brute_force_fronts(pop)]
        if fast != brute:
            ok = False
            break
    report("sorting oracle: fast sort matches brute force on 200 random "
           "populations (n <= 32), exact front membership", ok)


# --- search efficacy --------------------------------------------------------------

def test_criterion_search_efficacy(space):
    evaluator = SurrogateEvaluator(space, 7)
    reference = (0.0, flops_objective(Chromosome(genes=(6,) * 20), space))
    wins = 0
    slowest = 0.0
    for seed in range(10):
        start = time.monotonic()
        nsga = run_search(SearchConfig(seed=seed), space, evaluator)
        rs = random_search(64 * 70, space, evaluator, np.random.default_rng(seed))
        elapsed = time.monotonic() - start
        slowest = max(slowest, elapsed)
        hv_nsga = hypervolume(nsga.front(), reference)
        hv_rs = hypervolume(rs.archive.members, reference)
        if hv_nsga > hv_rs:
            wins += 1
    ok = wins >= 8 and slowest < 60.0
    report("search efficacy: NSGA-II front hypervolume beats random search "
           "in >= 8 of 10 seeds at matched 4,480-evaluation budget",
           ok, f"wins {wins}/10, slowest pair {slowest:.1f}s")


def test_criterion_evaluation_budget(space):
    result = run_search(SearchConfig(seed=0), space, SurrogateEvaluator(space, 7))
    ok = len(result.log) == 4480 and result.stats[0].n_random == 64
    report("default budget: 64 x 70 = 4,480 candidate evaluations logged; "
           "iteration 1 fully random", ok, f"logged {len(result.log)}")


# --- ranking consistency ------------------------------------------------------------

def test_criterion_ranking_consistency(space):
    sim = SupernetSim.create(space, seed=0)
    train_supernet_sim(sim, space, 2000)
    tau = ranking_consistency(sim, space, 200, np.random.default_rng(0))
    ok = tau >= 0.7
    report("ranking consistency: default simulation, 2,000 steps -> "
           "Kendall tau >= 0.7 over 200 chromosomes", ok, f"tau {tau:.3f}")


# --- determinism ----------------------------------------------------------------------

def _run_cli(*argv, check=True):
    return subprocess.run(CLI + list(argv), check=check,
                          stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)


def test_criterion_determinism_byte_identical_fronts(tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for out_dir in dirs:
        _run_cli("search", "--out-dir", str(out_dir), "--workers", "1")
    front_a = (dirs[0] / "front.csv").read_bytes()
    front_b = (dirs[1] / "front.csv").read_bytes()
    scatter_a = (dirs[0] / "scatter.csv").read_bytes()
    scatter_b = (dirs[1] / "scatter.csv").read_bytes()
    ok = front_a == front_b and scatter_a == scatter_b
    report("determinism: two identical-seed searches produce byte-identical "
           "front CSVs", ok)


def test_criterion_kill_and_resume(tmp_path):
    reference_dir = tmp_path / "uninterrupted"
    _run_cli("search", "--out-dir", str(reference_dir), "--workers", "1")

    kill_dir = tmp_path / "killed"
    process = subprocess.Popen(
        CLI + ["search", "--out-dir", str(kill_dir), "--workers", "1"],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    checkpoint_path = kill_dir / "checkpoint.json"
    killed_at = None
    deadline = time.monotonic() + 120
    while time.monotonic() < deadline:
        if checkpoint_path.exists():
            try:
                iteration = json.loads(checkpoint_path.read_text())["iteration"]
            except (json.JSONDecodeError, KeyError):
                iteration = 0
            if iteration >= 20:
                process.kill()
                killed_at = iteration
                break
        time.sleep(0.002)
    process.wait()
    assert killed_at is not None and killed_at < 70, \
        f"kill landed at iteration {killed_at}; run finished too fast to interrupt"

    _run_cli("search", "--out-dir", str(kill_dir), "--resume", "--workers", "1")
    ok = ((kill_dir / "front.csv").read_bytes()
          == (reference_dir / "front.csv").read_bytes()
          and (kill_dir / "scatter.csv").read_bytes()
          == (reference_dir / "scatter.csv").read_bytes())
    report("determinism: kill-and-resume reproduces the uninterrupted run",
           ok, f"killed around iteration {killed_at}")


# --- secondary: bridge equivalence ----------------------------------------------------

def test_criterion_bridge_equivalence(space, bridge_env):
    config = SearchConfig(seed=5)
    native = run_search(config, space, SurrogateEvaluator(space, 7))
    with bridge_evaluator(bridge_env + " --seed 7", timeout=30.0) as remote:
        bridged = run_search(config, space, remote)
    native_csv = front_csv_text(native.archive.members, space)
    bridged_csv = front_csv_text(bridged.archive.members, space)
    ok = native_csv.encode() == bridged_csv.encode()
    report("bridge equivalence: full search through the reference worker is "
           "byte-identical to the native surrogate run", ok)


def test_criterion_bridge_fault_injection(space, baseline, bridge_env, tmp_path):
    # Engine side: an out-of-range accuracy is a protocol error naming the id.
    bad_script = tmp_path / "bad_worker.py"
    bad_script.write_text(
        "import sys, json\n"
        "print('{\"protocol\":\"paretonas-eval\",\"version\":1}', flush=True)\n"
        "for line in sys.stdin:\n"
        "    req = json.loads(line)\n"
        "    print(json.dumps({'id': req['id'], 'accuracy': 1.2}), flush=True)\n")
    range_ok = False
    with bridge_evaluator(f"{sys.executable} {bad_script}", timeout=10.0) as evaluator:
        try:
            evaluator(baseline)
        except BridgeProtocolError as exc:
            range_ok = "id 1" in str(exc)

    # Worker side: a malformed line gets an error object, the worker survives,
    # and a clean stdin close exits 0.
    process = subprocess.Popen(
        bridge_env.split() + ["--seed", "7"], text=True, bufsize=1,
        stdin=subprocess.PIPE, stdout=subprocess.PIPE)
    handshake = json.loads(process.stdout.readline())
    process.stdin.write("this is { not json\n")
    process.stdin.flush()
    error_reply = json.loads(process.stdout.readline())
    process.stdin.write(json.dumps({"id": 1, "chromosome": [4] * 20}) + "\n")
    process.stdin.flush()
    good_reply = json.loads(process.stdout.readline())
    process.stdin.close()
    exit_code = process.wait(timeout=10)

    worker_ok = (handshake == {"protocol": "paretonas-eval", "version": 1}
                 and error_reply.get("id") is None and "error" in error_reply
                 and good_reply.get("id") == 1
                 and 0.0 <= good_reply.get("accuracy", -1) <= 1.0
                 and exit_code == 0)
    ok = range_ok and worker_ok
    report("bridge fault injection: malformed line and out-of-range accuracy "
           "produce the specified errors without deadlock", ok)
