"""Stokes geometry of the swallowtail integral.

Saddles, singulants, turning and virtual turning points, ordinary and
higher-order Stokes curves, and path transport of transseries data
(sigma vector and Stokes-constant matrix), validated by steepest-descent
and late-term quadrature oracles.
"""

from .errors import SwallowtailError
from .singulants import (
    PhaseParams,
    SingulantFrame,
    TurningPoint,
    REFERENCE_PARAMS,
    REFERENCE_POINT,
    coalescence_class,
    continue_frame,
    frame_at,
    from_physical,
    phase,
    saddle_roots,
    turning_points,
    virtual_turning_points,
)

__version__ = "0.1.0"
