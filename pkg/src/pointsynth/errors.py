"""Exception types raised by the synthesis and decoding pipeline.

Every error the package raises deliberately derives from PointsynthError so
callers (and the CLI) can separate engine failures from programming bugs.
"""

from __future__ import annotations


class PointsynthError(Exception):
    """Base class for all engine errors."""


class SceneFormatError(PointsynthError):
    """A scene directory or one of its four files is malformed."""


class NonPositiveDepth(PointsynthError):
    """A depth value that must be > 0 was zero or negative."""


class NoValidDepth(PointsynthError):
    """No valid depth pixel inside the sampled window."""


class UngroundableTarget(PointsynthError):
    """A candidate could not be grounded to a 3-D point within the retry budget."""


class InsufficientCandidates(PointsynthError):
    """The scene lacks enough eligible candidates for the requested task."""


class NoFeasibleDirection(PointsynthError):
    """No approach direction satisfied the feasibility checks within the budget."""


class DegenerateUp(PointsynthError):
    """Pointing direction is parallel to the up hint; orientation is undefined."""


class DegenerateRay(PointsynthError):
    """Keypoints too close together to define a pointing direction."""


class NoResolvableCandidate(PointsynthError):
    """No candidate had any cloud point at a non-negative ray parameter."""


class EmptyDataset(PointsynthError):
    """Dataset contains no samples."""


class InconsistentSample(PointsynthError):
    """A sample violates one of its structural invariants."""


class UnknownSample(PointsynthError):
    """A sample id was requested that the dataset does not contain."""


class UnknownTaskType(PointsynthError):
    """Task type id outside the instruction template table."""


class InvalidSchedule(PointsynthError):
    """Token schedule parameters out of range."""


class ManifestError(PointsynthError):
    """A manifest line failed to parse or violated manifest invariants."""
