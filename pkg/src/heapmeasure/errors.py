from __future__ import annotations

from typing import Iterable, Sequence


class HeapMeasureError(Exception):
    """Base exception for all errors in the heapmeasure package."""
    pass


class ModelError(HeapMeasureError):
    """Base exception for problems with a heap model definition."""
    pass


class ModelFileNotFoundError(ModelError):
    """Raised when a model file does not exist."""
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"Model file not found: {path}")


class ModelSyntaxError(ModelError):
    """Raised when a model file line cannot be parsed."""
    def __init__(self, path: str, line_number: int, reason: str):
        self.path = path
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{path}:{line_number}: {reason}")


class InvalidModelError(ModelError):
    """
    Raised when a model is well formed but semantically invalid
    (bad independence pair, bad weights, or an invalid Bernoulli measure).
    """
    def __init__(self, reasons: Iterable[str]):
        self.reasons = list(reasons)
        message = "Invalid model:\n" + "\n".join(f"  - {r}" for r in self.reasons)
        super().__init__(message)


class UnknownPieceError(ModelError):
    """Raised when a piece identifier is not part of the alphabet."""
    def __init__(self, piece: str, pieces: Sequence[str]):
        self.piece = piece
        self.pieces = tuple(pieces)
        super().__init__(
            f"Unknown piece {piece!r}. Known pieces are: {', '.join(self.pieces)}"
        )


class AlgebraError(HeapMeasureError):
    """Base exception for heap algebra failures."""
    pass


class NotASubHeapError(AlgebraError):
    """Raised when a residual y - x is requested but x is not a left divisor of y."""
    def __init__(self, x: object, y: object):
        self.x = x
        self.y = y
        super().__init__(f"{x} is not a sub-heap of {y}")


class AlphabetMismatchError(AlgebraError):
    """Raised when heaps built over different independence pairs are combined."""
    pass


class SimulationError(HeapMeasureError):
    """Base exception for numerical and sampling failures."""
    pass


class PullCapExceededError(SimulationError):
    """Raised when a stream pulls more cliques than its cap allows."""
    def __init__(self, cap: int, context: str):
        self.cap = cap
        self.context = context
        super().__init__(
            f"Pulled more than {cap} cliques while {context}. "
            "The model is pathological or the cap is too small."
        )


class ConvergenceError(SimulationError):
    """Raised when an iterative method hits its iteration cap."""
    def __init__(self, method: str, iterations: int):
        self.method = method
        self.iterations = iterations
        super().__init__(f"{method} did not converge after {iterations} iterations.")


class RootNotFoundError(SimulationError):
    """Raised when the Möbius polynomial shows no sign change on (0, 1)."""
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"No root of the Möbius polynomial found in (0, 1): {reason}")


class InvalidMeasureError(SimulationError):
    """Raised when a Markov chain of cliques is requested for an invalid Bernoulli spec."""
    def __init__(self, violations: Iterable[str]):
        self.violations = list(violations)
        super().__init__(
            "Weights do not define a Bernoulli measure:\n"
            + "\n".join(f"  - {v}" for v in self.violations)
        )
