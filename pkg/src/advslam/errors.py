class ConfigError(ValueError):
    """Invalid experiment or component configuration."""


class DataError(ValueError):
    """Unreadable or malformed input data."""


class TrackingLost(RuntimeError):
    """Raised when no tracked pose exists to fill untracked frames from."""


class StageError(RuntimeError):
    """A per-frame failure tagged with the frame index and pipeline stage."""

    def __init__(self, frame, stage, cause):
        super().__init__(f"frame {frame}, stage {stage}: {type(cause).__name__}: {cause}")
        self.frame = frame
        self.stage = stage
        self.cause = cause
