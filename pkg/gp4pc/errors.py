"""
Exceptions raised by the gp4pc solvers and file formats.
"""
from typing import Optional


class Gp4pcError(Exception):
    """Base exception for all gp4pc errors."""
    pass


class BehindCamera(Gp4pcError):
    """Raised when a point has non-positive depth in the camera frame."""
    pass


class DegenerateInput(Gp4pcError):
    """Raised when input points coincide (relative to the scene scale)."""
    pass


class ParallelLines(Gp4pcError):
    """Raised when the lines x1x2 and x3x4 have no unique closest-point pair."""
    pass


class UnknownPair(Gp4pcError):
    """Raised for an edge pair outside the five independent distance-ratio pairs."""
    pass


class SolverFailure(Gp4pcError):
    """Custom exception for polynomial solver backend failures."""
    pass


class SingularConfiguration(Gp4pcError):
    """Raised when the coplanar linear system cannot be inverted."""
    pass


class NoRealRoot(Gp4pcError):
    """Raised when the coplanar quadratic has a negative discriminant."""
    pass


class DegenerateConfiguration(Gp4pcError):
    """Raised when point pairs do not determine an alignment."""
    pass


class NoHypothesis(Gp4pcError):
    """Raised when a minimal sample yields no transform hypothesis."""

    def __init__(self, message: str, cause: Optional[Exception] = None):
        super().__init__(message)
        self.cause = cause


class EstimationFailure(Gp4pcError):
    """Raised when robust estimation cannot produce a transform."""
    pass


class SceneFormatError(Gp4pcError):
    """Custom exception for scene and result file errors."""
    pass
