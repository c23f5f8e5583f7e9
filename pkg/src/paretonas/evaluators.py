"""Accuracy evaluators: the contract, a seeded surrogate, a supernet-sim
adapter, and a newline-delimited-JSON bridge to external worker processes.

An accuracy evaluator is any callable `Chromosome -> float in [0, 1]` that is
pure within a session (same chromosome, same value). The engine enforces
purity by caching; workers that cannot promise determinism are effectively
pinned to their first result.

Wire protocol (process pipes, one JSON object per line):

  worker -> {"protocol": "paretonas-eval", "version": 1}        handshake
  engine -> {"id": N, "chromosome": [g1, ..., g20]}             request
            (optional "arch": <architecture JSON> when asked for)
  worker -> {"id": N, "accuracy": 0.53...}                      response
  worker -> {"id": N, "error": "message"}                       per-request failure

Responses may arrive out of order; accuracy is decimal text (shortest
round-trip, <= 17 significant digits) so cross-language bit-equality is
well-defined.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import threading
from dataclasses import dataclass

import numpy as np

from .archspace import Chromosome, SearchSpace, arch_to_json, decode
from .errors import (
    BridgeExitError,
    BridgeProtocolError,
    BridgeTimeoutError,
    EvaluatorError,
)
from .fairsampler import latent_quality_table, logistic
from .prng import INTERACTION_TAG, SplitMix64, stream_seed

PROTOCOL_NAME = "paretonas-eval"
PROTOCOL_VERSION = 1

# Adjacent-layer interaction scale; keeps the landscape non-separable without
# drowning the additive cost-correlated signal.
INTERACTION_SCALE = 0.12


@dataclass(frozen=True)
class EvalRequest:
    """One wire request; ids are unique and increasing within a session."""

    id: int
    chromosome: tuple[int, ...]
    arch: dict | None = None  # embedded architecture JSON, on request

    def to_json(self) -> dict:
        message: dict = {"id": self.id, "chromosome": list(self.chromosome)}
        if self.arch is not None:
            message["arch"] = self.arch
        return message

    @classmethod
    def from_json(cls, message: dict) -> "EvalRequest":
        return cls(id=message["id"],
                   chromosome=tuple(message["chromosome"]),
                   arch=message.get("arch"))


@dataclass(frozen=True)
class EvalResponse:
    """One wire response; `id` echoes the request it answers."""

    id: int
    accuracy: float
    metrics: dict | None = None

    def to_json(self) -> dict:
        message: dict = {"id": self.id, "accuracy": self.accuracy}
        if self.metrics is not None:
            message["metrics"] = self.metrics
        return message

    @classmethod
    def from_json(cls, message: dict) -> "EvalResponse":
        return cls(id=message["id"], accuracy=message["accuracy"],
                   metrics=message.get("metrics"))


def interaction_table(space: SearchSpace, seed: int) -> np.ndarray:
    """((layers-1) x 6 x 6) pairwise terms, drawn layer-major then row-major."""
    n_choices = len(space.layers[0].choices)
    stream = SplitMix64(stream_seed(seed, INTERACTION_TAG))
    table = np.empty((len(space.layers) - 1, n_choices, n_choices))
    for l in range(len(space.layers) - 1):
        for a in range(n_choices):
            for b in range(n_choices):
                table[l, a, b] = INTERACTION_SCALE * (2.0 * stream.next_unit() - 1.0)
    return table


class SurrogateEvaluator:
    """Deterministic seeded accuracy surrogate.

    Accuracy = logistic( sum_l q[l, g_l] + sum_l I[l, g_l, g_{l+1}] ), with the
    quality and interaction tables drawn once from the seed via the pinned
    SplitMix64 recipe. Sums accumulate left to right in float64, so any
    implementation following the recipe reproduces the value bit-for-bit.
    """

    def __init__(self, space: SearchSpace, seed: int):
        self.space = space
        self.seed = seed
        self._quality = latent_quality_table(space, seed)
        self._interaction = interaction_table(space, seed)

    def __call__(self, chromosome: Chromosome) -> float:
        genes = chromosome.genes
        if len(genes) != len(self.space.layers):
            raise EvaluatorError(
                f"chromosome has {len(genes)} genes, expected {len(self.space.layers)}",
                chromosome=chromosome,
            )
        total = 0.0
        for l, gene in enumerate(genes):
            total += float(self._quality[l, gene - 1])
        for l in range(len(genes) - 1):
            total += float(self._interaction[l, genes[l] - 1, genes[l + 1] - 1])
        return logistic(total)


def surrogate_accuracy(chromosome: Chromosome, seed: int,
                       space: SearchSpace | None = None) -> float:
    """One-shot convenience wrapper around SurrogateEvaluator."""
    from .archspace import build_search_space

    evaluator = SurrogateEvaluator(space or build_search_space(), seed)
    return evaluator(chromosome)


def supernet_evaluator(sim):
    """Expose a trained supernet simulation under the evaluator contract."""
    from .fairsampler import supernet_evaluate

    def evaluate(chromosome: Chromosome) -> float:
        return supernet_evaluate(sim, chromosome)

    return evaluate


class CachingEvaluator:
    """Purity-enforcing wrapper: each chromosome is sent to the underlying
    evaluator at most once; later calls replay the first result."""

    def __init__(self, evaluator):
        self._evaluator = evaluator
        self._cache: dict[tuple[int, ...], float] = {}
        self._lock = threading.Lock()
        self.calls = 0

    def __contains__(self, chromosome: Chromosome) -> bool:
        return chromosome.genes in self._cache

    def __call__(self, chromosome: Chromosome) -> float:
        with self._lock:
            if chromosome.genes in self._cache:
                return self._cache[chromosome.genes]
        value = self._evaluator(chromosome)
        if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
            raise EvaluatorError(f"evaluator returned accuracy outside [0, 1]: {value!r}",
                                 chromosome=chromosome)
        value = float(value)
        with self._lock:
            # First writer wins, keeping replays consistent under concurrency.
            value = self._cache.setdefault(chromosome.genes, value)
            self.calls += 1
        return value

    def preload(self, items: dict[tuple[int, ...], float]) -> None:
        with self._lock:
            for genes, value in items.items():
                self._cache.setdefault(genes, value)


@dataclass
class _Pending:
    event: threading.Event
    accuracy: float | None = None
    error: str | None = None


class BridgeEvaluator:
    """Evaluator backed by an external worker process over stdin/stdout.

    Writes are serialized, responses are demultiplexed by id, so concurrent
    callers pipeline naturally. A broken worker (malformed line, early exit)
    fails all outstanding and future requests with a descriptive error.
    """

    def __init__(self, command: str, timeout: float = 30.0, *,
                 space: SearchSpace | None = None, include_arch: bool = False):
        self.timeout = timeout
        self._include_arch = include_arch
        self._space = space
        self._pending: dict[int, _Pending] = {}
        self._broken: Exception | None = None
        self._next_id = 1
        self._lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._process = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        try:
            self._read_handshake()
        except Exception:
            self._shutdown_process()
            raise
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_handshake(self) -> None:
        line = self._process.stdout.readline()
        if not line:
            raise BridgeExitError("worker exited before sending a handshake")
        try:
            handshake = json.loads(line)
        except json.JSONDecodeError:
            raise BridgeProtocolError(f"malformed handshake line: {line!r}") from None
        if (handshake.get("protocol") != PROTOCOL_NAME
                or handshake.get("version") != PROTOCOL_VERSION):
            raise BridgeProtocolError(f"unexpected handshake: {handshake!r}")

    def _read_loop(self) -> None:
        for line in self._process.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                message = json.loads(line)
                request_id = message["id"]
            except (json.JSONDecodeError, TypeError, KeyError):
                self._break(BridgeProtocolError(f"malformed response line: {line!r}"))
                return
            with self._lock:
                pending = self._pending.get(request_id)
            if pending is None:
                self._break(BridgeProtocolError(
                    f"response for unknown id {request_id!r}", request_id=request_id))
                return
            if "error" in message:
                pending.error = str(message["error"])
            else:
                accuracy = message.get("accuracy")
                if not isinstance(accuracy, (int, float)) or not 0.0 <= accuracy <= 1.0:
                    self._break(BridgeProtocolError(
                        f"accuracy out of range for id {request_id}: {accuracy!r}",
                        request_id=request_id))
                    return
                pending.accuracy = float(accuracy)
            pending.event.set()
        exit_code = self._process.wait()
        with self._lock:
            outstanding = bool(self._pending)
        if outstanding:
            self._break(BridgeExitError(
                f"worker exited (code {exit_code}) with requests outstanding"))

    def _break(self, error: Exception) -> None:
        with self._lock:
            self._broken = error
            pending = list(self._pending.values())
        for entry in pending:
            entry.event.set()

    def __call__(self, chromosome: Chromosome) -> float:
        with self._lock:
            if self._broken is not None:
                raise self._broken
            request_id = self._next_id
            self._next_id += 1
            entry = _Pending(event=threading.Event())
            self._pending[request_id] = entry
        arch = None
        if self._include_arch and self._space is not None:
            arch = arch_to_json(decode(chromosome, self._space))
        request = EvalRequest(id=request_id, chromosome=chromosome.genes, arch=arch)
        try:
            with self._write_lock:
                self._process.stdin.write(json.dumps(request.to_json()) + "\n")
                self._process.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            with self._lock:
                self._pending.pop(request_id, None)
            raise BridgeExitError(f"worker pipe closed while sending id {request_id}",
                                  chromosome=chromosome,
                                  request_id=request_id) from exc
        try:
            if not entry.event.wait(self.timeout):
                raise BridgeTimeoutError(
                    f"no response for id {request_id} within {self.timeout}s",
                    chromosome=chromosome, request_id=request_id)
            if self._broken is not None:
                raise self._broken
            if entry.error is not None:
                raise EvaluatorError(f"worker failed request id {request_id}: {entry.error}",
                                     chromosome=chromosome, request_id=request_id)
            return entry.accuracy
        finally:
            with self._lock:
                self._pending.pop(request_id, None)

    def _shutdown_process(self, *, close_stdout: bool = True) -> None:
        try:
            self._process.stdin.close()
        except (BrokenPipeError, ValueError, OSError):
            pass
        if self._process.poll() is None:
            try:
                self._process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._process.kill()
                self._process.wait()
        if close_stdout and self._process.stdout is not None:
            self._process.stdout.close()

    def close(self) -> None:
        # Keep stdout open until the reader thread drains it to EOF.
        self._shutdown_process(close_stdout=False)
        if getattr(self, "_reader", None) is not None:
            self._reader.join(timeout=5)
        if self._process.stdout is not None:
            self._process.stdout.close()

    def __enter__(self) -> "BridgeEvaluator":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def bridge_evaluator(command: str, timeout: float = 30.0, **kwargs) -> BridgeEvaluator:
    """Spawn a worker process and return it as an accuracy evaluator."""
    return BridgeEvaluator(command, timeout, **kwargs)
