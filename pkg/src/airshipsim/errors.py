"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Nonphysical or inconsistent configuration (bad hull, bad scenario)."""

    def __init__(self, message: str, fields: list[str] | None = None):
        super().__init__(message)
        self.fields = fields or []


class IntegrationFault(RuntimeError):
    """Dynamics produced a non-finite state; carries a diagnostic record."""

    def __init__(self, message: str, record: dict | None = None):
        super().__init__(message)
        self.record = record or {}


class NoGroundIntersection(ValueError):
    """Pixel ray points at or above the horizon."""
