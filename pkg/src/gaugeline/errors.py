"""Exception hierarchy shared by every stage of the pipeline."""


class GaugelineError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(GaugelineError, ValueError):
    """Argument outside the region where a quantity is defined."""


class ConvergenceError(GaugelineError):
    """Root finder exhausted its iteration budget."""


class MultipleRootsError(GaugelineError):
    """More than one equilibrium inside the trap and the seed cannot choose."""


class ConfinementError(GaugelineError):
    """Spring constant is not positive at the equilibrium."""


class GridTooCoarseError(GaugelineError):
    """Spline derivatives change by more than the tolerance under refinement."""


class ResolutionError(GaugelineError):
    """Oscillatory quadrature fails its halving-consistency check."""


class WindowError(GaugelineError):
    """Spectral maximum sits on the boundary of the frequency grid."""


class DiscretizationError(GaugelineError):
    """Grid eigenvalues fail the Richardson-consistency check."""


class HalvingConsistencyError(GaugelineError):
    """Finite-difference result changes too much when the step is halved."""


class RecurrenceError(GaugelineError):
    """Integration window exceeds the allowed fraction of the bath recurrence time."""


class StepSizeError(GaugelineError):
    """Adaptive integrator failed (step-size underflow or similar)."""


class NonFiniteError(GaugelineError):
    """NaN or Inf produced by a pipeline stage."""

    def __init__(self, stage: str, detail: str = ""):
        self.stage = stage
        super().__init__(f"non-finite values in stage '{stage}'" + (f": {detail}" if detail else ""))


class ConfigError(GaugelineError, ValueError):
    """Malformed or invalid run configuration."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)
