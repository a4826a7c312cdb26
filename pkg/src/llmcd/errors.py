"""Exception types shared across the package."""


class LlmcdError(Exception):
    """Base class for all package errors."""


class InvalidModel(LlmcdError):
    """A ModelSpec violates a structural invariant."""


class InvalidStrategy(LlmcdError):
    """A Strategy violates a divisibility or product invariant.

    The message names the violated constraint (e.g. "H mod tp").
    """


class Infeasible(LlmcdError):
    """A strategy does not fit the machine; carries the feasibility report."""

    def __init__(self, report):
        super().__init__(report.reason)
        self.report = report
