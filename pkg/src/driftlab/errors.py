"""Exception types shared across the package."""
from __future__ import annotations


class DriftlabError(RuntimeError):
    pass


class NumericError(DriftlabError):
    """A computation produced a non-finite value."""


class TrainingError(DriftlabError):
    """Training diverged; carries the last finite parameter snapshot."""

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class PipelineError(DriftlabError):
    """A harness stage failed; the run directory holds a failure marker."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
