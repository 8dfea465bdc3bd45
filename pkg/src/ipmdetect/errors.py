"""Exception types raised across the detection and planning pipeline."""


class PipelineError(Exception):
    """Base class for all pipeline-specific errors."""


class DegenerateProjection(PipelineError):
    """A homogeneous projection collapsed (pixel at or above the horizon)."""


class HorizonNotInFrame(PipelineError):
    """No image row maps within the requested ground distance; do not crop."""


class NotPSD(PipelineError):
    """Moment matrix has a negative eigenvalue below tolerance (upstream bug)."""


class UnknownLabel(PipelineError):
    """Requested region label does not exist in the label image."""


class NonMonotonicFrame(PipelineError):
    """Tracker fed a frame index that does not increase."""


class InvalidPose(PipelineError):
    """Lane pose heading out of the workable range (|theta| >= pi/2)."""


class FrameMismatch(PipelineError):
    """Prediction and ground-truth frame indices do not align."""


class ConfigError(PipelineError):
    """Configuration file is missing, malformed, or inconsistent."""
