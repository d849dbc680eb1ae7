"""Exceptions raised by the simulator."""


class AeronetError(Exception):
    """Base class for every error the simulator raises on purpose"""


class ConfigurationError(AeronetError):
    """Invalid scenario, parameter or precondition"""

    def __init__(self, message, key_path=None):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class DegenerateGeometryError(AeronetError):
    """Two positions coincide where a direction is needed"""


class SimulationError(AeronetError):
    """Engine reached a state it should never be in"""


class EmptySampleError(AeronetError):
    """A statistic was asked of an empty sample set"""
