"""
Exception types shared by the solver stages and the command line.

Every error is a ValueError so library callers can keep catching the
familiar type; the command line maps each subclass to its exit code.
"""

from typing import Optional


class LogisticSteadyError(ValueError):
    """Base class for errors raised by the solver pipeline"""

    exit_code = 1


class ConfigError(LogisticSteadyError):
    """The problem configuration could not be parsed or is inconsistent"""

    exit_code = 2


class HypothesisError(LogisticSteadyError):
    """A standing hypothesis of the construction failed"""

    exit_code = 3

    def __init__(self, hypothesis: str, detail: Optional[str] = None):
        self.hypothesis = hypothesis
        self.detail = detail
        message = f"Hypothesis {hypothesis} failed"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class ConvergenceError(LogisticSteadyError):
    """An iterative stage did not reach its tolerance"""

    exit_code = 4


class CertificateError(LogisticSteadyError):
    """A run finished but one of its certificates does not hold"""

    exit_code = 1
