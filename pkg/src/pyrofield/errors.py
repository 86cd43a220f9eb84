"""Exception types shared across the engines.

Each exception carries a short machine-readable ``code`` used by the CLI when
it reports ``ERROR <code>: <detail>`` on standard error.
"""


class PyrofieldError(Exception):
    code = "error"


class ValidationError(PyrofieldError, ValueError):
    """Bad user input; the CLI maps this to exit status 2."""

    code = "invalid"


class ConstraintViolation(ValidationError):
    """A parameter triple breaks ``0 <= alpha, beta <= gamma <= min(1, alpha + beta)``."""

    code = "constraint_violation"

    def __init__(self, inequality, detail=""):
        self.inequality = inequality
        msg = f"violates {inequality}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


class CouplingOrderViolation(ValidationError):
    code = "coupling_order"


class ExactLimitExceeded(ValidationError):
    code = "exact_limit"


class EnumLimitExceeded(ValidationError):
    code = "enum_limit"


class DivergentMoments(ValidationError):
    code = "divergent_moments"


class InternalConsistencyError(PyrofieldError, RuntimeError):
    """An invariant that must hold by construction failed; exit status 1."""

    code = "internal"


class NormalizationError(InternalConsistencyError):
    code = "normalization"
