"""Exception types raised across the scale-recovery pipeline."""


class DpScaleError(Exception):
    """Base class for all package-specific errors."""


class DegeneratePatchError(DpScaleError):
    """Patch carries no usable signal (constant or all-zero); caller must skip it."""


class RankDeficiencyError(DpScaleError):
    """The assembled linear system cannot pin down all unknowns."""

    def __init__(self, message, view_ids=None):
        super().__init__(message)
        self.view_ids = list(view_ids) if view_ids is not None else []


class InsufficientPatchesError(DpScaleError):
    """A view has fewer usable patches than the solve requires."""


class SolverError(DpScaleError):
    """Weighted least-squares iteration hit a singular or non-finite state."""


class CandidateError(DpScaleError):
    """Scale candidate set is empty or every candidate is unevaluable."""


class PipelineFailureError(DpScaleError):
    """No view survived selection.  Carries per-view exclusion reasons."""

    def __init__(self, message, exclusions=None):
        super().__init__(message)
        self.exclusions = dict(exclusions) if exclusions else {}


class ManifestError(DpScaleError):
    """Manifest file is missing, malformed, or fails validation."""


class DepthMapFormatError(DpScaleError):
    """Depth-map file violates the expected binary layout."""
