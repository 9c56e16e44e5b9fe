"""Error families for betatherm.

Each family carries the CLI exit code used when it escapes a subcommand:

- 1 config / schema
- 2 admissibility
- 3 convergence and numerical consistency
- 4 hypothesis failure (non-unique maximizer)
- 5 I/O
"""

from __future__ import annotations

from typing import Sequence

from betatherm.symbolic import format_word


class BetaThermError(Exception):
    exit_code = 1


# Config


class ConfigError(BetaThermError):
    exit_code = 1


class SchemaError(ConfigError):
    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class InadmissibleTableKey(ConfigError):
    def __init__(self, word: Sequence[int]) -> None:
        super().__init__(f"potential table key {format_word(word)!r} is not admissible")
        self.word = tuple(word)


class DepthMismatch(ConfigError):
    def __init__(self, depth: int, potential_depth: int) -> None:
        super().__init__(f"cylinder depth {depth} is below potential depth {potential_depth}")
        self.depth = depth
        self.potential_depth = potential_depth


class ResourceCapExceeded(ConfigError):
    def __init__(self, what: str, size: int, cap: int) -> None:
        super().__init__(f"{what} has {size} entries (cap {cap})")
        self.size = size
        self.cap = cap


# Admissibility


class AdmissibilityError(BetaThermError):
    exit_code = 2


class NotQuasiGreedy(AdmissibilityError):
    pass


class UnknownAtDepth(AdmissibilityError):
    def __init__(self, depth: int, what: str = "comparison") -> None:
        super().__init__(f"{what} undecided: expansion of 1 only known to depth {depth}")
        self.depth = depth


class PrecisionBreach(AdmissibilityError):
    def __init__(self, position: int, distance: float) -> None:
        super().__init__(
            f"digit {position} is {distance:.3e} from a tie; raise the working precision"
        )
        self.position = position
        self.distance = distance


class NotBilateral(AdmissibilityError):
    def __init__(self, window: Sequence[int]) -> None:
        super().__init__(f"bilateral window {format_word(window)!r} is not admissible")
        self.window = tuple(window)


class NotAdmissible(AdmissibilityError):
    pass


# Convergence / numerical consistency


class ConvergenceError(BetaThermError):
    exit_code = 3


class NoConvergence(ConvergenceError):
    def __init__(self, residual: float, iterations: int, t: float | None = None) -> None:
        where = f" at t={t:g}" if t is not None else ""
        super().__init__(f"no convergence{where} after {iterations} iterations (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations
        self.t = t


class NonPrimitive(ConvergenceError):
    pass


class IllConditioned(ConvergenceError):
    def __init__(self, message: str, residual: float = float("nan")) -> None:
        super().__init__(message)
        self.residual = residual


class EigenMismatch(ConvergenceError):
    pass


class FillerDependence(ConvergenceError):
    pass


class EstimateDivergence(ConvergenceError):
    pass


class BoundaryDivergence(ConvergenceError):
    pass


class OracleMismatch(ConvergenceError):
    pass


# Hypothesis


class HypothesisError(BetaThermError):
    exit_code = 4


class NonUniqueMaximizer(HypothesisError):
    pass


# I/O


class OutputError(BetaThermError):
    exit_code = 5
