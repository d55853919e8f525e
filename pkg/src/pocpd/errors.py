"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (schema, dimensions, ranges)."""


class NumericalError(RuntimeError):
    """A numerical routine failed (singular system, non-convergent iteration)."""


class CalibrationError(RuntimeError):
    """Control-limit search failed; carries the best threshold found so far."""

    def __init__(self, message: str, best_h: float | None = None):
        super().__init__(message)
        self.best_h = best_h
