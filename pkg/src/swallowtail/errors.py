"""Exception hierarchy for the swallowtail Stokes-geometry package."""


class SwallowtailError(Exception):
    """Base class for all package-specific errors."""


class RootConditioning(SwallowtailError):
    """Two saddle roots are too close to separate reliably.

    Raised away from exact degenerate configurations; the caller is near a
    turning point and should switch to continuation-aware handling.
    """


class LabelAmbiguity(SwallowtailError):
    """Nearest-root matching failed to produce a stable bijection."""


class PathThroughTurningPoint(SwallowtailError):
    """A continuation path passed too close to a turning point."""


class ZeroX1(SwallowtailError):
    """Physical-variable rescaling requires x1 != 0."""


class SeedExhaustion(SwallowtailError):
    """Root search found fewer virtual turning points than expected."""


class CorrectorDivergence(SwallowtailError):
    """Newton corrector failed to restore the curve condition."""


class DegenerateTangent(SwallowtailError):
    """Curve tangent is undefined (tracer reached a turning point)."""


class PathTooCloseToCrossing(SwallowtailError):
    """A query path ran too close to a graph crossing or turning point."""


class LabelMismatch(SwallowtailError):
    """Branch data on a curve could not be matched to the path frame."""


class Unroutable(SwallowtailError):
    """No admissible transport path was found at the safety margin."""


class SaddleCollision(SwallowtailError):
    """A descent path ran into another saddle (exact Stokes configuration)."""


class ProbeAmbiguity(SwallowtailError):
    """Adjacency probes disagreed; decrease the probe offset."""


class QuadratureFailure(SwallowtailError):
    """Numerical integration of the integral representation failed."""


class LoopTooWide(SwallowtailError):
    """Late-term quadrature loop left the basin of its saddle."""


class NonConvergence(SwallowtailError):
    """Stokes-constant limit did not converge for the requested pair.

    Attributes
    ----------
    dominant_pair : tuple or None
        Branch pair whose singulant difference is closer and dominates
        the late terms, when identifiable.
    """

    def __init__(self, message, dominant_pair=None):
        super().__init__(message)
        self.dominant_pair = dominant_pair


class AnchorDegenerate(SwallowtailError):
    """Calibration anchor lacks a clearly dominant exponential."""
