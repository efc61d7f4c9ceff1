"""Exception hierarchy shared by every planning stage."""


class AgplanError(Exception):
    """Base class for all package errors."""


class ConfigError(AgplanError, ValueError):
    pass


class TerrainError(AgplanError):
    pass


class DemParseError(TerrainError, ValueError):
    """Malformed ASCII grid content (bad header key or non-numeric cell)."""


class DimensionError(TerrainError, ValueError):
    pass


class OutOfBoundsError(TerrainError, IndexError):
    pass


class NodataError(TerrainError, ValueError):
    pass


class ContractError(AgplanError, ValueError):
    """A caller broke an operation's precondition."""


class BatteryStateError(AgplanError):
    pass


class BatteryExhaustedError(BatteryStateError):
    def __init__(self, message, partial_path=None):
        super().__init__(message)
        self.partial_path = partial_path


class PlanningError(AgplanError):
    def __init__(self, message, partial_path=None):
        super().__init__(message)
        self.partial_path = partial_path


class NoPathError(PlanningError):
    pass


class IterationCapError(PlanningError):
    pass


class ConsistencyError(AgplanError):
    """Double-entry energy accounting disagreed with the incremental ledger."""
