"""Reference evaluation worker speaking the paretonas-eval wire protocol.

Reads newline-delimited JSON requests on stdin, answers on stdout:

  out: {"protocol": "paretonas-eval", "version": 1}     once, at startup
  in:  {"id": N, "chromosome": [g1, ..., g20]}
  out: {"id": N, "accuracy": 0.53...}
  out: {"id": N, "error": "message"}                    per-request failure
  out: {"id": null, "error": "message"}                 unparseable line

Requests are answered in arrival order; a malformed line never kills the
worker. The accuracy is the documented seeded surrogate - swap `Surrogate`
for a real trainer to attach actual model evaluation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

from .surrogate import Surrogate

PROTOCOL_NAME = "paretonas-eval"
PROTOCOL_VERSION = 1


@dataclass
class WorkerState:
    seed: int
    protocol_version: int = PROTOCOL_VERSION
    requests_handled: int = 0
    surrogate: Surrogate = field(init=False, repr=False)

    def __post_init__(self):
        self.surrogate = Surrogate(self.seed)


def _emit(stream, message: dict) -> None:
    stream.write(json.dumps(message) + "\n")
    stream.flush()


def serve(seed: int, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    state = WorkerState(seed=seed)
    _emit(stdout, {"protocol": PROTOCOL_NAME, "version": state.protocol_version})
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            _emit(stdout, {"id": None, "error": f"malformed request line: {exc}"})
            continue
        if not isinstance(request, dict) or "id" not in request:
            _emit(stdout, {"id": None, "error": "request must be an object with an id"})
            continue
        request_id = request["id"]
        state.requests_handled += 1
        try:
            accuracy = state.surrogate.accuracy(request["chromosome"])
        except (KeyError, TypeError, ValueError) as exc:
            _emit(stdout, {"id": request_id, "error": str(exc)})
            continue
        _emit(stdout, {"id": request_id, "accuracy": accuracy})
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="paretonas-bridge-client",
        description="Reference worker for the paretonas-eval protocol.")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for the built-in surrogate accuracy function")
    args = parser.parse_args(argv)
    return serve(args.seed)


if __name__ == "__main__":
    sys.exit(main())
