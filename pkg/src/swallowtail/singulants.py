"""Saddles, singulants and turning points of the quintic phase.

The phase function is F(t, z) = -(t^5 - a t^3 - i b t^2 + z t).  Its four
saddle points t_i carry singulants chi_i = F(t_i, z); in terms of
tau = -t (the derivative of chi with respect to z) the saddle condition
reads 5 tau^4 - 3 a tau^2 + 2 i b tau + z = 0 and the singulant has the
closed form

    chi = (-2 a tau^3 + 3 i b tau^2 + 4 z tau) / 5.

Branches are labelled 1..4 by continuation from a fixed reference frame;
labels travel with paths and no global cut convention is imposed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    LabelAmbiguity,
    PathThroughTurningPoint,
    RootConditioning,
    ZeroX1,
)

__all__ = [
    "PhaseParams",
    "SingulantFrame",
    "TurningPoint",
    "REFERENCE_PARAMS",
    "REFERENCE_POINT",
    "REFERENCE_CHI",
    "phase",
    "saddle_roots",
    "frame_at",
    "continue_frame",
    "turning_points",
    "virtual_turning_points",
    "coalescence_class",
    "from_physical",
    "route_avoiding_turning_points",
]

SQRT_PI = np.sqrt(np.pi)

#: Prefactor exponent shared by all four branches.
ALPHA = Fraction(1, 2)

#: Hard lower bound on the distance of continuation paths to turning points.
TURNING_CLEARANCE = 1e-7


@dataclass(frozen=True)
class PhaseParams:
    """Real parameter pair fixing the quintic phase.

    ``a`` multiplies the cubic term and ``b`` the quadratic term of the
    phase polynomial.  Degenerate values (a, b) = (0, 0), (a, 0) and
    a = -(5/2)^(1/3) |b|^(2/3) are legal and merely simplify the geometry.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("phase parameters must be finite")

    @property
    def scale(self) -> float:
        return 1.0 + abs(self.a) + abs(self.b)


#: Parameters of the canonical reference configuration used throughout the
#: documentation and tests.  Note the cubic coefficient is 3 and the
#: quadratic coefficient is 1.
REFERENCE_PARAMS = PhaseParams(3.0, 1.0)

#: Base point of the canonical reference frame.
REFERENCE_POINT = 3.0 + 0.5j

#: Singulant values (4 dp) fixing the canonical labels 1..4 at the
#: reference point for the reference parameters.
REFERENCE_CHI = (
    -1.0464 + 0.7948j,
    -1.1944 + 0.0920j,
    1.2212 + 2.0196j,
    1.0196 + 0.6936j,
)


def phase(t: complex, z: complex, p: PhaseParams) -> complex:
    """Negated exponent F(t, z); the integrand is exp(-F/eps)."""
    return -(t**5 - p.a * t**3 - 1j * p.b * t**2 + z * t)


def _quartic(z, p):
    """Coefficients of 5 tau^4 - 3a tau^2 + 2ib tau + z (descending)."""
    return np.array([5.0, 0.0, -3.0 * p.a, 2j * p.b, z], dtype=complex)


def _quartic_val(tau, z, p):
    return 5.0 * tau**4 - 3.0 * p.a * tau**2 + 2j * p.b * tau + z


def _quartic_deriv(tau, p):
    return 20.0 * tau**3 - 6.0 * p.a * tau + 2j * p.b


def z_of_tau(tau, p):
    """Critical-value parametrisation z(tau) = -5 tau^4 + 3a tau^2 - 2ib tau."""
    return -5.0 * tau**4 + 3.0 * p.a * tau**2 - 2j * p.b * tau


def w_of_tau(tau, p):
    """Singulant along the parametrised curve, w(tau) = -4 tau^5 + 2a tau^3 - ib tau^2."""
    return -4.0 * tau**5 + 2.0 * p.a * tau**3 - 1j * p.b * tau**2


def chi_from_tau(tau, z, p):
    """Closed-form singulant for a saddle root tau at the point z."""
    return (-2.0 * p.a * tau**3 + 3j * p.b * tau**2 + 4.0 * z * tau) / 5.0


def amp_denominator(tau, p):
    """Radicand of the leading amplitude, -10 tau^3 + 3a tau - ib."""
    return -10.0 * tau**3 + 3.0 * p.a * tau - 1j * p.b


def _polish(taus, z, p, steps=3):
    taus = np.asarray(taus, dtype=complex).copy()
    for _ in range(steps):
        d = _quartic_deriv(taus, p)
        ok = np.abs(d) > 1e-12
        taus[ok] -= _quartic_val(taus[ok], z, p) / d[ok]
    return taus


def _critical_taus(p):
    """Roots of z'(tau) = -20 tau^3 + 6a tau - 2ib, i.e. saddle coalescences."""
    return np.roots([-20.0, 0.0, 6.0 * p.a, -2j * p.b])


def _canonical_sort(taus):
    return np.array(sorted(taus, key=lambda t: (t.real, t.imag)), dtype=complex)


def saddle_roots(z: complex, p: PhaseParams) -> np.ndarray:
    """Four roots tau of 5 tau^4 - 3a tau^2 + 2ib tau + z = 0.

    Roots are Newton-polished and returned in lexicographic (re, im)
    order.  At an exact degenerate configuration the multiple root is
    extracted by deflation and returned with multiplicity; for merely
    near-degenerate z a :class:`RootConditioning` error is raised.
    """
    taus = _polish(np.roots(_quartic(z, p)), z, p)
    gaps = [abs(taus[i] - taus[j]) for i in range(4) for j in range(i + 1, 4)]
    if min(gaps) >= 1e-9:
        return _canonical_sort(taus)

    # Close roots: legal only at (numerically) exact coalescence points.
    crit = _critical_taus(p)
    zc = z_of_tau(crit, p)
    k = int(np.argmin(np.abs(zc - z)))
    if abs(zc[k] - z) > 1e-8 * max(1.0, abs(z)):
        raise RootConditioning(
            f"saddle roots closer than 1e-9 at z={z} but z is not a "
            "coalescence point; use continuation-aware handling"
        )
    td = crit[k]
    # Multiplicity from how many critical roots collide with td.
    mult = 1 + int(np.sum(np.abs(crit - td) < 1e-6))
    quotient = _quartic(z, p)
    for _ in range(mult):
        quotient = _deflate(quotient, td)
    rest = np.roots(quotient) if len(quotient) > 1 else np.array([])
    rest = _polish(rest, z, p) if rest.size else rest
    return _canonical_sort(np.concatenate([np.full(mult, td), rest]))


def _deflate(coeffs, root):
    out = np.empty(len(coeffs) - 1, dtype=complex)
    acc = 0.0 + 0.0j
    for i in range(len(coeffs) - 1):
        acc = acc * root + coeffs[i]
        out[i] = acc
    return out


@dataclass
class SingulantFrame:
    """Labelled branch data at one point of the z-plane.

    Arrays are indexed by label-1; ``tau`` holds the saddle roots
    (chi derivatives), ``chi`` the singulants and ``amp0`` the leading
    amplitudes with branch continuity inherited from the reference frame.
    """

    z: complex
    tau: np.ndarray
    chi: np.ndarray
    amp0: np.ndarray
    alpha: Fraction = ALPHA

    def min_gap(self) -> float:
        t = self.tau
        return min(
            abs(t[i] - t[j]) for i in range(4) for j in range(i + 1, 4)
        )

    def copy(self) -> "SingulantFrame":
        return SingulantFrame(
            self.z, self.tau.copy(), self.chi.copy(), self.amp0.copy(), self.alpha
        )


def _amp0_principal(tau, p):
    return SQRT_PI / np.sqrt(amp_denominator(tau, p))


# square-root branch of amp0 per label at the reference point; the gauge
# is fixed so the Stokes constants measured from contour jumps reproduce
# the reference matrix (only relative branch signs are observable)
AMP_BRANCH = np.array([-1, 1, 1, 1])


def reference_frame(p: PhaseParams) -> SingulantFrame:
    """Canonical frame at the reference point.

    For the reference parameters the labels follow the published
    singulant values; otherwise labels are fixed by lexicographic root
    order at the reference point.
    """
    z = REFERENCE_POINT
    taus = saddle_roots(z, p)
    chis = chi_from_tau(taus, z, p)
    if p == REFERENCE_PARAMS:
        order = np.empty(4, dtype=int)
        for lab, target in enumerate(REFERENCE_CHI):
            k = int(np.argmin(np.abs(chis - target)))
            if abs(chis[k] - target) > 1e-3:
                raise LabelAmbiguity("reference singulants drifted from anchors")
            order[lab] = k
        if len(set(order.tolist())) != 4:
            raise LabelAmbiguity("reference label matching is not a bijection")
        taus, chis = taus[order], chis[order]
    return SingulantFrame(z, taus, chis, AMP_BRANCH * _amp0_principal(taus, p))


def _step_frame(frame: SingulantFrame, z_new: complex, p: PhaseParams):
    """Single continuation step; returns the new frame or None if unstable."""
    raw = _polish(np.roots(_quartic(z_new, p)), z_new, p)
    cost = np.abs(frame.tau[:, None] - raw[None, :])
    rows, cols = linear_sum_assignment(cost)
    tau_new = np.empty(4, dtype=complex)
    tau_new[rows] = raw[cols]
    move = np.max(np.abs(tau_new - frame.tau))
    if move >= 0.5 * frame.min_gap():
        return None
    chi_new = chi_from_tau(tau_new, z_new, p)
    amp_new = _amp0_principal(tau_new, p)
    flip = np.abs(-amp_new - frame.amp0) < np.abs(amp_new - frame.amp0)
    amp_new[flip] = -amp_new[flip]
    return SingulantFrame(z_new, tau_new, chi_new, amp_new, frame.alpha)


def _continue_segment(frame, z_end, p, turning, depth=0):
    """Continue a frame along a straight segment with adaptive bisection."""
    if turning.size:
        if _segment_distance(frame.z, z_end, turning) < TURNING_CLEARANCE:
            raise PathThroughTurningPoint(
                f"segment {frame.z} -> {z_end} passes within "
                f"{TURNING_CLEARANCE} of a turning point"
            )
    stack = [(z_end, depth)]
    cur = frame
    while stack:
        target, d = stack.pop()
        nxt = _step_frame(cur, target, p)
        if nxt is None:
            if d >= 48:
                raise PathThroughTurningPoint(
                    f"continuation stalled near z={target}; step refinement "
                    "bottomed out (turning point straddled?)"
                )
            mid = 0.5 * (cur.z + target)
            stack.append((target, d + 1))
            stack.append((mid, d + 1))
            continue
        cur = nxt
    return cur


def _segment_distance(z0, z1, pts):
    """Distance from complex points pts to the segment [z0, z1]."""
    d = z1 - z0
    L2 = abs(d) ** 2
    if L2 == 0.0:
        return float(np.min(np.abs(pts - z0)))
    t = np.clip(((pts - z0) * np.conj(d)).real / L2, 0.0, 1.0)
    proj = z0 + t * d
    return float(np.min(np.abs(pts - proj)))


def continue_frame(path, p: PhaseParams, start: SingulantFrame | None = None):
    """Continue branch labels along a polyline path.

    Parameters
    ----------
    path : sequence of complex
        Waypoints; the first must equal ``start.z`` when a start frame is
        given, otherwise the canonical frame is used at ``path[0]``.
    p : PhaseParams
    start : SingulantFrame, optional

    Returns
    -------
    list of SingulantFrame, one per waypoint.
    """
    path = [complex(w) for w in path]
    if not path:
        return []
    if start is None:
        start = frame_at(path[0], p)
    elif abs(start.z - path[0]) > 1e-12 * max(1.0, abs(start.z)):
        raise ValueError("start frame is not anchored at path[0]")
    turning = _turning_points_cached(p)
    frames = [start]
    cur = start
    for z_next in path[1:]:
        cur = _continue_segment(cur, z_next, p, turning)
        frames.append(cur)
    return frames


def route_avoiding_turning_points(z0, z1, p, clearance=None, extra=()):
    """Waypoints from z0 to z1 keeping clear of (virtual) turning points.

    Straight segments are deflected sideways around any avoided point
    closer than ``clearance``.  The deflection side is chosen to shorten
    the detour; ties break toward the left of the travel direction.
    """
    if clearance is None:
        clearance = 1e-3 * p.scale
    avoid = np.concatenate(
        [_turning_points_cached(p), np.array([complex(w) for w in extra])]
    )
    path = [complex(z0), complex(z1)]
    for _ in range(16):
        changed = False
        out = [path[0]]
        for a_, b_ in zip(path[:-1], path[1:]):
            seg = b_ - a_
            L = abs(seg)
            if L > 0 and avoid.size:
                t = np.clip(((avoid - a_) * np.conj(seg)).real / L**2, 0.0, 1.0)
                proj = a_ + t * seg
                dist = np.abs(avoid - proj)
                k = int(np.argmin(dist))
                if dist[k] < clearance and 1e-9 < t[k] < 1 - 1e-9:
                    n = 1j * seg / L
                    side = np.sign((np.conj(n) * (avoid[k] - proj[k])).real)
                    side = -side if side != 0 else 1.0
                    out.append(avoid[k] + side * n * 2.0 * clearance)
                    changed = True
            out.append(b_)
        path = out
        if not changed:
            break
    return path


def frame_at(z: complex, p: PhaseParams, ref: SingulantFrame | None = None):
    """Labelled singulant frame at z.

    Without ``ref`` the canonical labelling is used: the reference frame
    is continued from the reference point along a deterministic route.
    With ``ref`` the labels are propagated by nearest-root matching from
    the given nearby frame.
    """
    z = complex(z)
    if ref is not None:
        nxt = _step_frame(ref, z, p)
        if nxt is None:
            raise LabelAmbiguity(
                f"step from {ref.z} to {z} too large for stable matching"
            )
        return nxt
    base = reference_frame(p)
    if abs(z - base.z) < 1e-14:
        return base
    route = route_avoiding_turning_points(base.z, z, p)
    return continue_frame(route, p, start=base)[-1]


@dataclass(frozen=True)
class TurningPoint:
    """Coalescence point of two singulant values.

    ``kind`` is "turning" when the saddle roots coalesce as well and
    "virtual" when the values alone coincide.
    """

    z: complex
    pair: tuple
    kind: str


def _pair_at(z, p, offset_dir=None):
    """Canonical branch pair with coinciding singulants near z."""
    sc = p.scale
    if offset_dir is None:
        offset_dir = 1.0
    for delta in (1e-4 * sc, 3e-4 * sc, 1e-3 * sc, 3e-3 * sc, 1e-2 * sc):
        try:
            f = frame_at(z + delta * offset_dir, p)
        except (PathThroughTurningPoint, RootConditioning, LabelAmbiguity):
            continue
        pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        dif = [abs(f.chi[i] - f.chi[j]) for i, j in pairs]
        i, j = pairs[int(np.argmin(dif))]
        return (i + 1, j + 1)
    raise LabelAmbiguity(f"could not label the coalescing pair near z={z}")


def turning_points(p: PhaseParams):
    """All saddle-coalescence points, with multiplicity merged.

    Solves -10 t^3 + 3a t - ib = 0 and maps each root through
    z = (3t/2)(a t - ib).  Returns at most three distinct points.
    """
    ts = _critical_taus(p)
    zs = 1.5 * ts * (p.a * ts - 1j * p.b)
    out = []
    tol = 1e-8 * p.scale**2
    for z in zs:
        if any(abs(z - w.z) <= tol for w in out):
            continue
        out.append(TurningPoint(complex(z), None, "turning"))
    # Attach canonical pair labels in a second pass (needs routing, which
    # itself asks for the turning point locations).
    labelled = []
    others = [w.z for w in out]
    for w in out:
        rest = [o for o in others if o != w.z]
        if rest:
            away = w.z - np.mean(rest)
            direction = away / abs(away) if abs(away) > 0 else 1.0
        else:
            direction = (REFERENCE_POINT - w.z)
            direction = direction / abs(direction) if abs(direction) > 0 else 1.0
        try:
            pair = _pair_at(w.z, p, direction)
        except LabelAmbiguity:
            pair = None
        labelled.append(TurningPoint(w.z, pair, "turning"))
    return labelled


# Cache: turning_points is called on every continuation segment.
_TP_CACHE: dict = {}


def _turning_points_cached(p):
    key = (p.a, p.b)
    if key not in _TP_CACHE:
        ts = _critical_taus(p)
        zs = 1.5 * ts * (p.a * ts - 1j * p.b)
        _TP_CACHE[key] = np.array(zs, dtype=complex)
    return _TP_CACHE[key]


def virtual_turning_points(p: PhaseParams):
    """Coincidences of singulant values without saddle coalescence.

    Works on the parametrised curve (z(tau), w(tau)): eliminating the
    product of the two roots reduces z(t1) = z(t2), w(t1) = w(t2) to a
    degree-six polynomial in s = t1 + t2 whose roots split into the
    three turning points and the virtual turning points.  Candidates are
    polished by a two-variable Newton iteration on the original system.
    """
    a, b = p.a, p.b
    P = np.array([5.0, 0.0, -3.0 * a, 2j * b])  # 5u^3 - 3a u + 2ib

    def pad(c, n=7):
        c = np.asarray(c, dtype=complex)
        out = np.zeros(n, dtype=complex)
        out[-len(c):] = c
        return out

    sextic = (
        pad([-400.0, 0, 0, 0, 0, 0, 0][:7])
        + pad(np.convolve([120.0, 0, 0, 0], P))
        + pad(-4.0 * np.convolve(P, P))
        + pad([200.0 * a, 0, 0, 0, 0])
        + pad(-20.0 * a * np.convolve([1.0, 0.0], P))
        + pad([-100j * b, 0, 0, 0])
    )
    sextic = np.trim_zeros(sextic, "f")
    roots = np.roots(sextic) if len(sextic) > 1 else np.array([])

    found = []
    for s in roots:
        if abs(s) < 1e-12:
            continue
        q = (5.0 * s**3 - 3.0 * a * s + 2j * b) / (10.0 * s)
        disc = np.sqrt(s * s - 4.0 * q)
        t1, t2 = (s + disc) / 2.0, (s - disc) / 2.0
        t1, t2 = _polish_pair(t1, t2, p)
        if t1 is None:
            continue
        if abs(t1 - t2) < 1e-4:
            continue  # actual turning point
        z = z_of_tau(t1, p)
        if any(abs(z - zv) <= 1e-8 for zv in found):
            continue
        found.append(complex(z))

    out = []
    turning = _turning_points_cached(p)
    for z in found:
        away = z - np.mean(turning)
        direction = away / abs(away) if abs(away) > 0 else 1.0
        try:
            pair = _pair_at(z, p, direction)
        except LabelAmbiguity:
            pair = None
        out.append(TurningPoint(z, pair, "virtual"))
    return out


def _polish_pair(t1, t2, p, tol=1e-13, itmax=40):
    """Newton polish of z(t1)=z(t2), w(t1)=w(t2)."""
    for _ in range(itmax):
        g1 = z_of_tau(t1, p) - z_of_tau(t2, p)
        g2 = w_of_tau(t1, p) - w_of_tau(t2, p)
        scale = max(1.0, abs(z_of_tau(t1, p)), abs(w_of_tau(t1, p)))
        if max(abs(g1), abs(g2)) < tol * scale:
            return t1, t2
        zp1 = -20.0 * t1**3 + 6.0 * p.a * t1 - 2j * p.b
        zp2 = -20.0 * t2**3 + 6.0 * p.a * t2 - 2j * p.b
        j11, j12 = zp1, -zp2
        j21, j22 = t1 * zp1, -t2 * zp2
        det = j11 * j22 - j12 * j21
        if abs(det) < 1e-14:
            return None, None
        dt1 = (g1 * j22 - g2 * j12) / det
        dt2 = (j11 * g2 - j21 * g1) / det
        t1, t2 = t1 - dt1, t2 - dt2
    return None, None


def coalescence_class(p: PhaseParams) -> int:
    """Number of distinct turning points: 1, 2 or 3.

    Decided from the defining algebraic relations with relative
    tolerance 1e-10, not from computed roots.
    """
    tol = 1e-10 * p.scale
    if abs(p.a) <= tol and abs(p.b) <= tol:
        return 1
    if abs(p.b) <= tol:
        return 2
    if abs(p.a + (2.5) ** (1.0 / 3.0) * abs(p.b) ** (2.0 / 3.0)) <= tol:
        return 2
    return 3


def from_physical(x1: float, x2: float, x3: float):
    """Rescale physical variables (x1, x2, x3) to (z, PhaseParams, eps).

    The normalisation fixes |z| = 1, i.e. eps = |x1|^(-5/4).
    """
    if x1 == 0:
        raise ZeroX1("x1 must be nonzero")
    eps = abs(x1) ** -1.25
    z = eps**0.8 * x1
    b = eps**0.6 * x2
    a = eps**0.4 * x3
    return z, PhaseParams(a, b), eps
