"""Exception hierarchy.  Each family maps to one CLI exit code."""


class LienardError(Exception):
    exit_code = 3


class InvalidSystem(LienardError):
    """Malformed input: wrong coefficient counts, non-finite numbers, bad JSON."""

    exit_code = 1


class AssumptionViolation(LienardError):
    exit_code = 2


class ChartMismatch(AssumptionViolation):
    pass


class AssumptionBrokenByTuning(AssumptionViolation):
    pass


class UnbalancedSystem(AssumptionViolation):
    pass


class NumericalFailure(LienardError):
    exit_code = 3


class NonConvergence(NumericalFailure):
    pass


class QuadratureFailure(NumericalFailure):
    pass


class ExtrapolationUnstable(NumericalFailure):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class NewtonDivergence(NumericalFailure):
    pass


class TargetOutOfRange(NumericalFailure):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class NotDivergent(NumericalFailure):
    """The orbit stopped moving.  The partial orbit is kept on ``.orbit``."""

    def __init__(self, msg, orbit=None):
        super().__init__(msg)
        self.orbit = orbit


class WindowTooNarrow(NumericalFailure):
    pass


class NotAsymptotic(NumericalFailure):
    pass


class CatalogMismatch(NumericalFailure):
    pass


class NoBalancedSystemInBracket(NumericalFailure):
    pass
