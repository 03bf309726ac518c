"""Shared numerical helpers for the oracle-facing test modules."""

import cmath
import math

import numpy as np

from swallowtail import integrals as it
from swallowtail import singulants as sg
from swallowtail import transport as tp

P_REF = sg.REFERENCE_PARAMS
Z_REF = sg.REFERENCE_POINT

# six-line ordinary crossing on the positive real axis
B_CROSS = 5.176963

# far-field probes for the transseries evaluator: (z, waypoint route from
# z*), all with beta = (1,0,0,0); the routes pin the path homotopy class
WAYPOINT = complex(4.830553, 0.2)
TS_PROBES = [
    complex(7.0, 0.8),
    complex(8.0, 1.5),
    complex(6.5, 0.3),
    complex(9.0, 1.0),
    complex(8.5, 0.5),
    complex(7.5, 2.0),
    B_CROSS + 2.0 * cmath.exp(2.3j),
]
TS_ANCHOR = complex(8.0, 1.0)


def far_field_prediction(z, eps):
    """Leading saddle-point value of psi for a = b = 0 at large |z|.

    Valid on the arg z = -3 pi/4 ray, where the dominant saddle scales
    as alpha z^{1/4} with alpha = e^{3 i pi/4}; the fractional powers of
    z are continued along arg z = +5 pi/4 so the exponent decays.
    """
    r = abs(z)
    alpha = cmath.exp(0.75j * math.pi)
    z54 = r ** 1.25 * cmath.exp(1.25j * (1.25 * math.pi))
    z34 = r ** 0.75 * cmath.exp(0.75j * (1.25 * math.pi))
    amp = -1j * math.sqrt(math.pi) * eps ** 0.3 / cmath.sqrt(
        2 * 5 ** 0.25 * alpha ** 3 * z34
    )
    return amp * cmath.exp(-4 * alpha * z54 / (5 ** 1.25 * eps))


def transported_state(z, graph, waypoints=(WAYPOINT,)):
    """Base state carried from z* to z along the pinned waypoint chain."""
    path = [Z_REF, *waypoints, complex(z)]
    return tp.transport(tp.base_state(), path, graph)


def lateral_sum_1(z, p, eps):
    """Lateral Borel sum of the saddle-1 series (full C_1 contribution)."""
    ia = it._half_integral(1, z, p, eps, -1)
    ib = it._half_integral(1, z, p, eps, +1)
    frame = sg.frame_at(z, p)
    return (ib - ia) * cmath.exp(-frame.chi[0] / eps) / (1j * eps ** 0.2)


def subdominant_coefficient(z, p, eps, c_ls, c_ts):
    """sigma_2 measured from psi after removing the dominant lateral sum.

    c_ls calibrates the lateral sum against the quadrature oracle at an
    anchor deep in the sigma = (1,0,0,0) region; c_ts is the transseries
    normalization there.  The residual psi/c_ls - LS_1 is the saddle-2
    exponential times sigma_2, read off against the leading amplitude.
    """
    q, _ = it.integrate_swallowtail(z, p, eps)
    frame = sg.frame_at(z, p)
    term2 = frame.amp0[1] * cmath.exp(-frame.chi[1] / eps)
    return (q / c_ls - lateral_sum_1(z, p, eps)) / (c_ts * term2)


def jump_calibration(p, eps, anchor=TS_ANCHOR):
    """(c_ls, c_ts) at the anchor for subdominant_coefficient."""
    q, _ = it.integrate_swallowtail(anchor, p, eps)
    frame = sg.frame_at(anchor, p)
    term1 = frame.amp0[0] * cmath.exp(-frame.chi[0] / eps)
    return q / lateral_sum_1(anchor, p, eps), q / term1


def measure_sigma2_jump(p, eps=0.1):
    """Jump of sigma_2 across l_{1>2} near the six-line crossing.

    Probes sit adjacent to the anti-Stokes direction on both sides so
    the Berry smoothing of the switched exponential has saturated.
    Returns (m_before, m_after) with before on the base-region side.
    """
    c_ls, c_ts = jump_calibration(p, eps)
    z_before = B_CROSS + 1.5 * cmath.exp(2.30j)
    m_before = subdominant_coefficient(z_before, p, eps, c_ls, c_ts)
    after = []
    for r, phi in ((1.5, 1.95), (2.0, 1.90), (2.0, 1.84)):
        z = B_CROSS + r * cmath.exp(1j * phi)
        after.append(subdominant_coefficient(z, p, eps, c_ls, c_ts))
    return m_before, np.mean(after)
