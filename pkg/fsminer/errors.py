from __future__ import annotations


class FsMinerError(Exception):
    """Base class for every error raised by fsminer."""


class GraphFormatError(FsMinerError):
    def __init__(self, message: str, line_no: int) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class InvalidGraphError(FsMinerError):
    """A transaction violates simple/connected/undirected graph invariants."""


class GraphTooSmallError(FsMinerError):
    pass


class CanonicalCodeError(FsMinerError):
    pass


class EmptyQueueError(FsMinerError):
    pass


class NoEligibleGraphError(FsMinerError):
    pass


class EnumerationCapError(FsMinerError):
    def __init__(self, estimate: float, cap: int) -> None:
        super().__init__(
            f"refusing enumeration: estimated {estimate:.3g} subgraph occurrences "
            f"exceeds cap {cap}"
        )
        self.estimate = estimate
        self.cap = cap


class UndefinedCorrelationError(FsMinerError):
    pass


class GeneratorParamError(FsMinerError):
    pass


class TruthSizeError(FsMinerError):
    pass


class MissingCountsError(FsMinerError):
    """The ground truth lacks the per-graph p-subgraph counts an operation needs."""
