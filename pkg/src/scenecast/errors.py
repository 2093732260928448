"""Exception types shared across the package."""


class ScenecastError(Exception):
    """Base class for all package-specific errors."""


class DegenerateHeading(ScenecastError):
    """Heading vector too close to zero to normalize."""


class InfeasibleScenario(ScenecastError):
    """Scenario generation could not place all entities."""


class HorizonOverrun(ScenecastError):
    """Requested future frames extend past the scenario duration."""


class NonContiguousFrame(ScenecastError):
    """Pushed frame index does not follow the newest stored index."""


class InsufficientHistory(ScenecastError):
    """Memory queue does not hold enough frames for the requested window."""


class ShapeMismatch(ScenecastError):
    """Slot counts, ids or tensor shapes disagree between inputs."""


class NaNLoss(ScenecastError):
    """Training loss became non-finite."""


class MissingCheckpoint(ScenecastError):
    """A command requiring trained weights was given no usable checkpoint."""


class EmptyGroundTruth(ScenecastError):
    """Metric computation received an empty ground-truth set."""
