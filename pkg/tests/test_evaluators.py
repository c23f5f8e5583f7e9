import json
import sys

import numpy as np
import pytest

from paretonas import (
    CachingEvaluator,
    Chromosome,
    SearchConfig,
    SupernetSim,
    SurrogateEvaluator,
    bridge_evaluator,
    flops_objective,
    random_chromosome,
    run_search,
    supernet_evaluator,
    surrogate_accuracy,
    train_supernet_sim,
)
from paretonas.errors import (
    BridgeExitError,
    BridgeProtocolError,
    BridgeTimeoutError,
    EvaluatorError,
)
from paretonas.fairsampler import supernet_evaluate

HANDSHAKE = 'print(\'{"protocol":"paretonas-eval","version":1}\', flush=True)'

ECHO_HALF_BODY = (
    "for line in sys.stdin:\n"
    "    req = json.loads(line)\n"
    "    print(json.dumps({'id': req['id'], 'accuracy': 0.5}), flush=True)\n"
)


@pytest.fixture
def make_worker(tmp_path):
    """Write a tiny stdin/stdout worker script and return its command line."""

    def factory(body: str, handshake: str = HANDSHAKE) -> str:
        script = tmp_path / f"worker_{len(list(tmp_path.iterdir()))}.py"
        script.write_text("import sys, json\n" + handshake + "\n" + body)
        return f"{sys.executable} {script}"

    return factory


# --- surrogate ---------------------------------------------------------------

def test_surrogate_deterministic(space):
    rng = np.random.default_rng(0)
    chromosome = random_chromosome(space, rng)
    assert surrogate_accuracy(chromosome, 7, space) == surrogate_accuracy(chromosome, 7, space)
    evaluator = SurrogateEvaluator(space, 7)
    assert evaluator(chromosome) == surrogate_accuracy(chromosome, 7, space)


def test_surrogate_range(space):
    rng = np.random.default_rng(1)
    evaluator = SurrogateEvaluator(space, 3)
    for _ in range(200):
        value = evaluator(random_chromosome(space, rng))
        assert 0.0 < value < 1.0


def test_surrogate_differs_across_seeds(space, baseline):
    assert surrogate_accuracy(baseline, 1, space) != surrogate_accuracy(baseline, 2, space)


def test_surrogate_correlates_with_cost(space):
    rng = np.random.default_rng(123)
    evaluator = SurrogateEvaluator(space, 7)
    chromosomes = [random_chromosome(space, rng) for _ in range(1000)]
    accuracy = np.array([evaluator(c) for c in chromosomes])
    macs = np.array([flops_objective(c, space) for c in chromosomes], dtype=float)
    assert np.corrcoef(accuracy, macs)[0, 1] > 0.2


# --- supernet adapter --------------------------------------------------------

def test_adapter_delegates(space):
    sim = train_supernet_sim(SupernetSim.create(space, seed=5), space, 50)
    evaluate = supernet_evaluator(sim)
    rng = np.random.default_rng(5)
    for _ in range(20):
        chromosome = random_chromosome(space, rng)
        assert evaluate(chromosome) == supernet_evaluate(sim, chromosome)


def test_untrained_sim_front_is_cost_only(space):
    sim = SupernetSim.create(space, seed=0)
    config = SearchConfig(population_size=8, iterations=3, seed=0)
    result = run_search(config, space, supernet_evaluator(sim))
    assert all(record.accuracy == 0.5 for record in result.log)
    front = [m for m in result.archive.members if m.rank == 0]
    assert len(front) == 1
    assert front[0].macs == min(record.macs for record in result.log)


def test_converged_sim_search_front_equals_latent_truth_front(space):
    import dataclasses

    from paretonas.fairsampler import latent_truth

    # Three downsampling layers keep the frequency path valid: 40->20->10->5.
    toy = dataclasses.replace(
        space, layers=(space.layers[0], space.layers[6], space.layers[12]))
    sim = train_supernet_sim(
        SupernetSim.create(toy, seed=2, lr=1.0, noise_scale=0.0), toy, 1)
    config = SearchConfig(population_size=12, iterations=6, seed=4)
    via_sim = run_search(config, toy, supernet_evaluator(sim))
    via_truth = run_search(config, toy, lambda c: latent_truth(sim, c))
    assert [(m.chromosome.genes, m.accuracy, m.macs) for m in via_sim.archive.members] \
        == [(m.chromosome.genes, m.accuracy, m.macs) for m in via_truth.archive.members]


# --- protocol messages ---------------------------------------------------------

def test_request_round_trip(space):
    from paretonas import EvalRequest
    from paretonas.archspace import arch_to_json, decode, preset_chromosome

    plain = EvalRequest(id=3, chromosome=(4,) * 20)
    assert EvalRequest.from_json(json.loads(json.dumps(plain.to_json()))) == plain

    arch = arch_to_json(decode(preset_chromosome("baseline"), space))
    embedded = EvalRequest(id=4, chromosome=(4,) * 20, arch=arch)
    assert EvalRequest.from_json(json.loads(json.dumps(embedded.to_json()))) == embedded


def test_response_round_trip():
    from paretonas import EvalResponse

    plain = EvalResponse(id=3, accuracy=0.20956691760247284)
    assert EvalResponse.from_json(json.loads(json.dumps(plain.to_json()))) == plain

    with_metrics = EvalResponse(id=4, accuracy=0.5, metrics={"f1": 0.91})
    assert EvalResponse.from_json(
        json.loads(json.dumps(with_metrics.to_json()))) == with_metrics


def test_bridge_can_embed_architecture(space, baseline, make_worker):
    worker = make_worker(
        "for line in sys.stdin:\n"
        "    req = json.loads(line)\n"
        "    blocks = len(req.get('arch', {}).get('blocks', []))\n"
        "    print(json.dumps({'id': req['id'], 'accuracy': blocks / 100}), flush=True)\n"
    )
    with bridge_evaluator(worker, timeout=10.0, space=space,
                          include_arch=True) as evaluator:
        assert evaluator(baseline) == 0.20  # 20 blocks seen by the worker


# --- caching wrapper ---------------------------------------------------------

def test_caching_evaluator_pins_first_result(space, baseline):
    values = iter([0.4, 0.9])
    wrapped = CachingEvaluator(lambda chromosome: next(values))
    assert wrapped(baseline) == 0.4
    assert wrapped(baseline) == 0.4  # second underlying value never consumed
    assert wrapped.calls == 1


def test_caching_evaluator_rejects_bad_range(space, baseline):
    wrapped = CachingEvaluator(lambda chromosome: 1.5)
    with pytest.raises(EvaluatorError):
        wrapped(baseline)


# --- bridge ------------------------------------------------------------------

def test_bridge_echo_worker_search_completes(space, make_worker):
    config = SearchConfig(population_size=8, iterations=3, seed=1)
    with bridge_evaluator(make_worker(ECHO_HALF_BODY), timeout=10.0) as evaluator:
        result = run_search(config, space, evaluator)
    assert all(record.accuracy == 0.5 for record in result.log)


def test_bridge_matches_reference_worker_bitwise(space, bridge_env):
    rng = np.random.default_rng(9)
    chromosomes = [random_chromosome(space, rng) for _ in range(50)]
    native = SurrogateEvaluator(space, 7)
    with bridge_evaluator(bridge_env + " --seed 7", timeout=10.0) as evaluator:
        for chromosome in chromosomes:
            assert evaluator(chromosome) == native(chromosome)


def test_bridge_pipelines_out_of_order_responses(space, make_worker):
    worker = make_worker(
        "buffered = []\n"
        "for line in sys.stdin:\n"
        "    buffered.append(json.loads(line))\n"
        "    if len(buffered) == 2:\n"
        "        for req in reversed(buffered):\n"
        "            print(json.dumps({'id': req['id'], 'accuracy': req['id'] / 100}), flush=True)\n"
        "        buffered = []\n"
    )
    from concurrent.futures import ThreadPoolExecutor

    with bridge_evaluator(worker, timeout=10.0) as evaluator:
        a = Chromosome(genes=(1,) * 20)
        b = Chromosome(genes=(2,) * 20)
        with ThreadPoolExecutor(max_workers=2) as pool:
            futures = [pool.submit(evaluator, a), pool.submit(evaluator, b)]
            values = [f.result(timeout=10) for f in futures]
    assert sorted(values) == [0.01, 0.02]


def test_bridge_out_of_range_accuracy_names_id(space, baseline, make_worker):
    worker = make_worker(
        "for line in sys.stdin:\n"
        "    req = json.loads(line)\n"
        "    print(json.dumps({'id': req['id'], 'accuracy': 1.2}), flush=True)\n"
    )
    with bridge_evaluator(worker, timeout=10.0) as evaluator:
        with pytest.raises(BridgeProtocolError, match="id 1"):
            evaluator(baseline)


def test_bridge_malformed_response_line(space, baseline, make_worker):
    worker = make_worker(
        "for line in sys.stdin:\n"
        "    print('this is not json', flush=True)\n"
    )
    with bridge_evaluator(worker, timeout=10.0) as evaluator:
        with pytest.raises(BridgeProtocolError, match="malformed"):
            evaluator(baseline)


def test_bridge_worker_error_response(space, baseline, make_worker):
    worker = make_worker(
        "for line in sys.stdin:\n"
        "    req = json.loads(line)\n"
        "    print(json.dumps({'id': req['id'], 'error': 'no can do'}), flush=True)\n"
    )
    with bridge_evaluator(worker, timeout=10.0) as evaluator:
        with pytest.raises(EvaluatorError, match="no can do"):
            evaluator(baseline)


def test_bridge_timeout(space, baseline, make_worker):
    worker = make_worker(
        "import time\n"
        "for line in sys.stdin:\n"
        "    time.sleep(30)\n"
    )
    with bridge_evaluator(worker, timeout=0.5) as evaluator:
        with pytest.raises(BridgeTimeoutError, match="id 1"):
            evaluator(baseline)


def test_bridge_worker_exit_mid_request(space, baseline, make_worker):
    worker = make_worker(
        "for line in sys.stdin:\n"
        "    sys.exit(3)\n"
    )
    with bridge_evaluator(worker, timeout=5.0) as evaluator:
        with pytest.raises((BridgeExitError, BridgeTimeoutError)):
            evaluator(baseline)


def test_bridge_bad_handshake(make_worker):
    command = make_worker("import time\ntime.sleep(5)\n",
                          handshake='print(\'{"protocol":"other","version":9}\', flush=True)')
    with pytest.raises(BridgeProtocolError, match="handshake"):
        bridge_evaluator(command, timeout=5.0)


def test_bridge_no_handshake_process_gone():
    command = f"{sys.executable} -c pass"
    with pytest.raises(BridgeExitError):
        bridge_evaluator(command, timeout=5.0)
