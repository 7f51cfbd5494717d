"""
Exception Hierarchy

Every failure raised by husrelay derives from HusRelayError so callers can
catch the whole family at the CLI boundary.
"""

from typing import Optional


class HusRelayError(Exception):
    """Base class for all husrelay errors"""
    pass


class ConfigurationError(HusRelayError):
    """Raised when a configuration field is invalid"""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


class InfeasibleDecisionError(HusRelayError):
    """Raised when a decision breaks the charge cap or the battery bounds"""
    pass


class BatteryRangeError(InfeasibleDecisionError):
    """Raised when a battery transition leaves the level grid"""
    pass


class SolverError(HusRelayError):
    """Raised when the embedded objective is evaluated outside its box"""
    pass


class PlanSizeError(HusRelayError):
    """Raised when an enumeration or table would exceed its size guard"""

    def __init__(self, what: str, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(f"{what} needs {count} entries, limit is {limit}")


class TableMismatchError(HusRelayError):
    """Raised when a persisted policy table does not match the requested parameters"""

    def __init__(self, message: str, expected: Optional[str] = None, found: Optional[str] = None):
        self.expected = expected
        self.found = found
        super().__init__(message)
