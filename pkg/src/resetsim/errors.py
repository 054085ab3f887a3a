"""Exception hierarchy."""


class ResetSimError(Exception):
    pass


class InvalidScenario(ResetSimError, ValueError):
    """A scenario or one of its parts violates a constraint."""


class NumericalDivergence(ResetSimError, RuntimeError):
    """A plant state became non-finite."""


class DegenerateInput(ResetSimError, ValueError):
    pass


class InvalidWindow(ResetSimError, ValueError):
    pass


class DeadlineViolation(ResetSimError, RuntimeError):
    """Effective compute latency exceeds the control period."""


class SnapshotIntegrityError(ResetSimError):
    pass


class CaptureUnsafeError(ResetSimError):
    pass


class FlashBusy(ResetSimError):
    pass


class FlashOrderViolation(ResetSimError):
    pass


class Stalled(ResetSimError):
    """The engine stalled, so a speed ratio is not defined."""

    def __init__(self, stall_time):
        super().__init__(f"engine stalled at t={stall_time:.4f}s")
        self.stall_time = stall_time


class ConfigError(ResetSimError, ValueError):
    pass


class SchemaViolation(ConfigError):
    pass


class RangeViolation(ConfigError):
    pass


class UnknownColumn(ResetSimError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown column"
