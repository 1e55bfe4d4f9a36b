"""
Exception hierarchy for the controller library.
"""
from typing import List


class SitLmpcError(Exception):
    """Base class for every error raised by this package."""


class TrajectoryError(SitLmpcError, ValueError):
    pass


class InfeasibleRecordError(SitLmpcError, ValueError):
    pass


class EmptySafeSetError(SitLmpcError, ValueError):
    pass


class InputBoundsError(SitLmpcError, ValueError):
    pass


class DynamicsDivergedError(SitLmpcError, RuntimeError):
    pass


class OffTrackError(SitLmpcError, ValueError):
    pass


class NonFiniteCostError(SitLmpcError, ValueError):
    pass


class NoFiniteSamplesError(SitLmpcError, RuntimeError):
    pass


class TrainingError(SitLmpcError, RuntimeError):
    pass


class BootstrapError(SitLmpcError, RuntimeError):
    pass


class CheckpointError(SitLmpcError, ValueError):
    pass


class ConfigError(SitLmpcError, ValueError):
    """Invalid experiment config; ``problems`` lists every issue found."""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__('; '.join(self.problems) or 'invalid config')
