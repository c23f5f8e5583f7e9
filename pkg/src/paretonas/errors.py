"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class ParetonasError(Exception):
    """Base class for engine errors."""


class ChromosomeError(ParetonasError, ValueError):
    """Chromosome fails validation (wrong length or gene out of range)."""


class NotInSpaceError(ParetonasError, ValueError):
    """Architecture block has no matching choice in its layer's menu."""


class ShapeError(ParetonasError, ValueError):
    """Shape propagation produced a non-positive dimension."""


class PresetError(ParetonasError, KeyError):
    """Unknown named architecture preset."""


class EvaluatorError(ParetonasError, RuntimeError):
    """An accuracy evaluator failed for a specific chromosome.

    Carries the chromosome (and request id, when one exists) so the caller
    can decide between retry and abort.
    """

    def __init__(self, message: str, *, chromosome=None, request_id=None):
        super().__init__(message)
        self.chromosome = chromosome
        self.request_id = request_id


class BridgeError(EvaluatorError):
    """Base class for external-worker failures."""


class BridgeTimeoutError(BridgeError):
    """Worker did not answer a request within the configured timeout."""


class BridgeProtocolError(BridgeError):
    """Worker violated the wire protocol (malformed line, bad handshake,
    accuracy out of range, unknown id)."""


class BridgeExitError(BridgeError):
    """Worker process exited while requests were outstanding."""


class CheckpointError(ParetonasError, ValueError):
    """Checkpoint file is inconsistent with the run being resumed."""
