"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class AtomicReasonerError(Exception):
    """Base class for all engine errors."""


# --- tree / model errors ----------------------------------------------------

class EmptyProblem(AtomicReasonerError):
    pass


class Terminated(AtomicReasonerError):
    """Mutation attempted on a terminated tree."""


class AlreadyTerminated(AtomicReasonerError):
    """set_termination called twice."""


class MissingHypothesis(AtomicReasonerError):
    """Verification appended with no hypothesis to verify."""


class NodeNotOnActivePath(AtomicReasonerError):
    pass


class UnknownAction(AtomicReasonerError):
    pass


# --- router errors ----------------------------------------------------------

class NoBacktrackCandidate(AtomicReasonerError):
    pass


# --- backend errors ---------------------------------------------------------

class BackendFailure(AtomicReasonerError):
    """Base class for completion-backend failures."""


class BackendTimeout(BackendFailure):
    pass


class RateLimited(BackendFailure):
    def __init__(self, message: str = "rate limited", retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class AuthError(BackendFailure):
    pass


class MalformedResponse(BackendFailure):
    def __init__(self, message: str, excerpt: str = ""):
        super().__init__(message)
        self.excerpt = excerpt


class ScriptExhausted(BackendFailure):
    pass


class EmptyCompletion(BackendFailure):
    """Backend returned a blank completion after retry."""


# --- parsing / io errors ----------------------------------------------------

class ParseError(AtomicReasonerError):
    def __init__(self, message: str, source: str = "", line: int | None = None):
        loc = f"{source or '<input>'}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}")
        self.source = source
        self.line = line


class MissingDefault(AtomicReasonerError):
    """SOP registry loaded without a default SOP."""


class EmptySuite(AtomicReasonerError):
    pass


# --- puzzle / metrics errors ------------------------------------------------

class GenerationExhausted(AtomicReasonerError):
    pass


class TooLarge(AtomicReasonerError):
    pass


class InvalidDistribution(AtomicReasonerError):
    pass


class DimensionMismatch(AtomicReasonerError):
    pass
