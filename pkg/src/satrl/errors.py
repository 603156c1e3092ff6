"""Exception types shared across the package."""


class SatrlError(Exception):
    """Base class for all package errors."""


class ConfigError(SatrlError):
    """Invalid or inconsistent experiment configuration.

    The message names the offending field (e.g. ``cost.lambda``).
    """


class InputBoundError(SatrlError, ValueError):
    """An input component left the saturation domain |u_i| <= lambda."""

    def __init__(self, index: int, value: float, bound: float):
        self.index = index
        self.value = value
        self.bound = bound
        super().__init__(
            f"input component {index} = {value:g} outside saturation bound {bound:g}"
        )


class SimulationDiverged(SatrlError):
    """Trajectory escaped beyond recovery (reset budget exhausted)."""

    def __init__(self, time: float, state, message: str = ""):
        self.time = time
        self.state = state
        msg = message or f"simulation diverged at t={time:.4f} s, state={state}"
        super().__init__(msg)


class NumericError(SatrlError):
    """NaN or Inf appeared during integration or learning."""

    def __init__(self, time: float, message: str = ""):
        self.time = time
        super().__init__(message or f"non-finite value at t={time:.6f} s")


class OracleError(SatrlError):
    """Riccati solver failure (non-stabilizable plant or bad initial gain)."""
