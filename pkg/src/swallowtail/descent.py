"""Steepest-descent analysis in the t-plane.

Descent contours C_i(arg eps) of the phase F(t, z) through each saddle,
adjacency of saddles at the critical phases, and the base Stokes
constants assembled from contour-jump measurements.  Conventions: F is
the package phase (F(t_i) = chi_i), descent paths satisfy
(F - chi_i)/eps real and increasing, and contour orientations are
calibrated against the leading amplitude psi0, so no hand-set signs
enter the Stokes constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import singulants as sg
from .errors import ProbeAmbiguity, RootConditioning, SaddleCollision
from .transport import StokesMatrix

__all__ = [
    "DescentPath",
    "descent_path",
    "adjacency",
    "AdjacencyRecord",
    "base_stokes_constants",
    "saddle_points",
]

U_MAX = 1e4          # phase depth for ray classification
STEP_H = 0.02        # target spatial step along a half-path
DELTA_PROBE = 1e-3   # probe offset in arg eps around the critical phase
COLLISION_TOL = 1e-6


def _phase_d1(t, z, p):
    # F'(t) with F = -(t^5 - a t^3 - i b t^2 + z t)
    return -(5 * t**4 - 3 * p.a * t**2 - 2j * p.b * t + z)


def _phase_d2(t, p):
    return -(20 * t**3 - 6 * p.a * t - 2j * p.b)


def saddle_points(z, p):
    """Saddles of F in canonical label order (t_i paired with chi_i)."""
    return -np.asarray(sg.frame_at(z, p).tau)


def t_max(z, p):
    return 10.0 * (1 + abs(z) + abs(p.a) + abs(p.b)) ** 0.25


@dataclass
class DescentPath:
    """Two descent half-paths from saddle i at a given phase of eps."""

    saddle: int
    arg_eps: float
    halves: tuple          # two complex polylines, u-parametrized
    u_nodes: tuple
    orientation: int       # +1: chain rev(halves[0]) + halves[1] gives +psi0

    @property
    def chain(self):
        a, b = self.halves
        if self.orientation == 1:
            return np.concatenate([a[::-1], b])
        return np.concatenate([b[::-1], a])

    def endpoint_rays(self):
        """Decay-ray indices (mod 5) of the two half-path endpoints."""
        out = []
        for h in self.halves:
            k = (5 * np.angle(h[-1]) - np.pi - self.arg_eps) / (2 * np.pi)
            out.append(int(round(k)) % 5)
        return tuple(out)


def _trace_half(ti, chi, z, p, arg_eps, d0, u_max, h, saddles):
    """March one half of C_i by solving F(t) = chi + e^{i arg} u.

    d0 is the launch direction out of the saddle (a square root of
    2 e^{i arg}/F''); steps adapt to keep the spatial increment near h,
    so pinches at other saddles (where F' is small) stay resolved.
    """
    eps_hat = np.exp(1j * arg_eps)
    tmax = t_max(z, p)
    others = [tj for k, tj in enumerate(saddles) if abs(tj - ti) > 1e-12]
    # saddles sitting exactly on this phase ray pinch the path; the
    # discrete march would step over them, so flag them by depth
    pinches = []
    for tj in others:
        v = (sg.phase(tj, z, p) - chi) / eps_hat
        if v.real > 0 and abs(v.imag) < COLLISION_TOL * max(1.0, abs(v)):
            pinches.append((tj, v.real))

    def newton(t, target, clamp=False):
        for _ in range(60):
            fp = _phase_d1(t, z, p)
            if abs(fp) < 1e-14:
                break
            dt = (sg.phase(t, z, p) - target) / fp
            if clamp:
                # never step across the saddle: Newton cannot change branch
                lim = 0.4 * abs(t - ti)
                if abs(dt) > lim:
                    dt *= lim / abs(dt)
            t = t - dt
            if abs(dt) < 1e-13 * max(1.0, abs(t)):
                break
        return t

    pts, u_nodes = [], []
    # quadratic launch nodes in s = sqrt(u) out of the saddle
    ds = 0.25 * h / abs(d0)
    for m in range(1, 13):
        u = (m * ds) ** 2
        t = newton(ti + d0 * m * ds, chi + eps_hat * u, clamp=True)
        if m < 3 and ((t - ti) / d0).real < 0:
            raise RootConditioning(
                f"cannot hold descent branch at saddle {ti:.6f}"
            )
        pts.append(t)
        u_nodes.append(u)
    u = u_nodes[-1]
    while u < u_max and abs(t) < tmax:
        fp = _phase_d1(t, z, p)
        du = h * abs(fp)
        du = min(du, 0.5 * max(u, 1.0), 0.02 * u_max)
        u_new = min(u + du, u_max)
        t = newton(t + eps_hat * (u_new - u) / fp, chi + eps_hat * u_new)
        for tj, uj in pinches:
            if u < uj <= u_new and abs(t - tj) < 0.05 * (1 + abs(tj)):
                raise SaddleCollision(
                    f"descent path from saddle {ti:.6f} passes through "
                    f"saddle {tj:.6f} at this phase"
                )
        u = u_new
        for tj in others:
            if abs(t - tj) < COLLISION_TOL:
                raise SaddleCollision(
                    f"descent path from saddle {ti:.6f} hit saddle {tj:.6f}"
                )
        pts.append(t)
        u_nodes.append(u)
    return np.array(pts), np.array(u_nodes)


def _launch_direction(ti, p, arg_eps):
    return np.sqrt(2 * np.exp(1j * arg_eps) / _phase_d2(ti, p))


def _chain_value(halves, ti, chi, z, p, eps):
    """∫ exp(-(F-chi)/eps) dt over the raw chain rev(a) + saddle + b."""
    a, b = halves
    pts = np.concatenate([a[::-1], [ti], b])
    w = np.exp(-(sg.phase(pts, z, p) - chi) / eps)
    return (0.5 * (w[1:] + w[:-1]) * np.diff(pts)).sum()


def descent_path(i, z, p, arg_eps=0.0, u_max=U_MAX, h=STEP_H) -> DescentPath:
    """Trace C_i(arg eps) and calibrate its orientation against psi0."""
    saddles = saddle_points(z, p)
    frame = sg.frame_at(z, p)
    ti = saddles[i - 1]
    chi = frame.chi[i - 1]
    d0 = _launch_direction(ti, p, arg_eps)
    half_a, ua = _trace_half(ti, chi, z, p, arg_eps, -d0, u_max, h, saddles)
    half_b, ub = _trace_half(ti, chi, z, p, arg_eps, +d0, u_max, h, saddles)
    # the Gaussian along the chain rev(a)+b is +/- i eps^(1/2) psi0; the
    # +i branch defines positive orientation
    rho = 0.05 * max(1.0, abs(chi))
    eps = rho * np.exp(1j * arg_eps)
    val = _chain_value((half_a, half_b), ti, chi, z, p, eps)
    ref = np.sqrt(rho) * np.exp(0.5j * arg_eps) * 1j * frame.amp0[i - 1]
    orientation = 1 if np.real(val / ref) > 0 else -1
    return DescentPath(i, arg_eps, (half_a, half_b), (ua, ub), orientation)


@dataclass
class AdjacencyRecord:
    pair: tuple
    A: int
    gamma: int

    @property
    def stokes_constant(self):
        return 0 if self.A == 0 else (-1) ** self.gamma


def adjacency(i, j, z, p, delta=DELTA_PROBE) -> AdjacencyRecord:
    """A_ij and gamma_ij from the measured jump of the lateral sums.

    The contour integral over C_i, normalized by eps^(1/2), is sampled
    on both sides of the critical phase arg eps* = arg(chi_j - chi_i)
    and extrapolated to it; the difference is the Stokes jump, which is
    projected onto its predicted value e^{-chi_ji/eps} psi0_j.  The
    projection is 0 or +-1 up to asymptotic corrections in |eps|.
    """
    if i == j:
        raise IndexError("i and j must differ")
    saddles = saddle_points(z, p)
    frame = sg.frame_at(z, p)
    chi_ji = frame.chi[j - 1] - frame.chi[i - 1]
    theta = float(np.angle(chi_ji))
    ti = saddles[i - 1]
    chi = frame.chi[i - 1]
    rho = abs(chi_ji) / 5.0
    u_max = 60.0 * rho
    d0_ref = _launch_direction(ti, p, theta)

    def sample(th):
        # hold the launch branch fixed across the probe window
        d0 = _launch_direction(ti, p, th)
        if abs(d0 - d0_ref) > abs(d0 + d0_ref):
            d0 = -d0
        halves = tuple(
            _trace_half(ti, chi, z, p, th, s * d0, u_max, 0.008, saddles)[0]
            for s in (-1, 1)
        )
        eps = rho * np.exp(1j * th)
        val = _chain_value(halves, ti, chi, z, p, eps)
        return val / (np.sqrt(rho) * np.exp(0.5j * th))

    vals = {k: sample(theta + k * delta) for k in (1, 2, 3, -1, -2, -3)}
    up = 3 * vals[1] - 3 * vals[2] + vals[3]
    dn = 3 * vals[-1] - 3 * vals[-2] + vals[-3]
    # orientation of the sampled chain at theta against +i psi0_i
    rho_o = 0.05 * max(1.0, abs(chi))
    d0 = d0_ref
    halves_o = tuple(
        _trace_half(ti, chi, z, p, theta + 3 * delta, s * d0,
                    60.0 * rho_o, 0.01, saddles)[0]
        for s in (-1, 1)
    )
    eps_o = rho_o * np.exp(1j * theta)
    val_o = _chain_value(halves_o, ti, chi, z, p, eps_o)
    ref_o = np.sqrt(rho_o) * np.exp(0.5j * theta) * 1j * frame.amp0[i - 1]
    o_i = 1 if np.real(val_o / ref_o) > 0 else -1
    pred = np.exp(-chi_ji / (rho * np.exp(1j * theta))) * 1j * frame.amp0[j - 1]
    ratio = o_i * (up - dn) / pred
    if abs(ratio) < 0.15:
        return AdjacencyRecord((i, j), 0, 0)
    if abs(ratio) < 0.5 or abs(abs(ratio) - 1) > 0.35 or abs(ratio.imag) > 0.3:
        raise ProbeAmbiguity(
            f"Stokes jump projection for ({i},{j}) is {ratio:.3f}, "
            "neither 0 nor a clean sign"
        )
    return AdjacencyRecord((i, j), 1, 0 if ratio.real > 0 else 1)


def base_stokes_constants(z, p) -> StokesMatrix:
    """All Stokes constants at z from the contour-jump measurements."""
    entries = [[0] * 4 for _ in range(4)]
    for i in range(1, 5):
        for j in range(1, 5):
            if i == j:
                continue
            entries[i - 1][j - 1] = adjacency(i, j, z, p).stokes_constant
    return StokesMatrix(4, entries)
