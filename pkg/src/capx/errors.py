"""Exception hierarchy shared by every capx module."""


class CapxError(Exception):
    """Base class for all capx errors."""


class FormatError(CapxError, ValueError):
    """An image or weight file could not be decoded."""


class ConfigError(CapxError, ValueError):
    """A configuration value is outside its documented range."""


class DimensionMismatch(CapxError, ValueError):
    """Two images (or an image and a model) disagree in size."""


class ShapeError(CapxError, ValueError):
    """A tensor does not have the shape a layer expects."""


class DomainError(CapxError, ValueError):
    """A numeric argument is outside the domain of a formula."""


class ShutdownError(CapxError, RuntimeError):
    """Work was submitted to an executor that has been shut down."""


class UnknownRef(CapxError, KeyError):
    """An object reference was not issued by this store."""


class TaskFailedError(CapxError, RuntimeError):
    """A task kept failing after every allowed retry."""

    def __init__(self, task_id, attempts, reason=""):
        super().__init__(task_id, attempts, reason)
        self.task_id = task_id
        self.attempts = attempts
        self.reason = reason

    def __str__(self):
        msg = f"task {self.task_id!r} failed after {self.attempts} attempt(s)"
        if self.reason:
            msg += f": {self.reason}"
        return msg


class FrameError(CapxError):
    """Wraps an error raised while analysing one frame."""

    def __init__(self, frame_id, message):
        super().__init__(frame_id, message)
        self.frame_id = frame_id
        self.message = message

    def __str__(self):
        return f"frame {self.frame_id!r}: {self.message}"


class BatchError(CapxError):
    """One or more frames of a batch exhausted their retries.

    ``results`` holds every frame that did succeed, ``failures`` maps
    frame id to the error string.
    """

    def __init__(self, failures, results, stats=None):
        super().__init__(failures)
        self.failures = dict(failures)
        self.results = list(results)
        self.stats = stats

    def __str__(self):
        ids = ", ".join(sorted(self.failures))
        return f"{len(self.failures)} frame(s) failed: {ids}"
