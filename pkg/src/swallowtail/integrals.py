"""Numerical oracles: contour quadrature and late-term coefficients.

integrate_swallowtail evaluates the defining contour integral by
decomposing the contour into steepest-descent chains and applying
panelwise Gauss-Legendre quadrature in the square-root variable of the
phase depth.  late_term evaluates the loop representation of the
asymptotic coefficients psi_n on a level curve |F - chi_i| = r, which
is spectrally accurate and free of truncation tails.  Both feed the
Stokes-constant limit and the transseries evaluator.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from . import descent as dc
from . import singulants as sg
from .errors import (
    AnchorDegenerate,
    LoopTooWide,
    NonConvergence,
    QuadratureFailure,
)

__all__ = [
    "integrate_swallowtail",
    "late_term",
    "stokes_constant_limit",
    "transseries_eval",
    "gamma_half",
    "gamma_int",
]

SQRT_PI = math.sqrt(math.pi)


def gamma_half(n: int) -> float:
    """Gamma(n + 1/2) by recurrence from Gamma(1/2) = sqrt(pi)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    g = SQRT_PI
    for k in range(n):
        g *= k + 0.5
    return g


def gamma_int(n: int) -> float:
    """Gamma(n) for integer n >= 1 by recurrence."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = 1.0
    for k in range(1, n):
        g *= k
    return g


# ---------------------------------------------------------------------------
# contour quadrature


def _half_integral(i, z, p, eps, sign, n_panels=60, n_gl=8, trace_theta=None):
    """∫ exp(-(F-chi_i)/eps) dt over one half-path, outward from the saddle.

    Integrates in s = sqrt(u) where F = chi_i + e^{i theta} u; the
    integrand 2 s e^{i theta} / F'(t(s^2)) is analytic through s = 0.
    trace_theta tilts the path phase away from arg eps (the weight stays
    exact, so any nearby phase gives the same value).
    """
    frame = sg.frame_at(z, p)
    saddles = dc.saddle_points(z, p)
    ti = saddles[i - 1]
    chi = frame.chi[i - 1]
    rho, theta = abs(eps), cmath.phase(eps)
    if trace_theta is not None:
        theta = trace_theta
    eps_hat = cmath.exp(1j * theta)
    u_max = 45.0 * rho
    d0 = sign * dc._launch_direction(ti, p, theta) * math.sqrt(rho)
    # marching skeleton along the half with s measured in units of sqrt(rho)
    pts, u_nodes = dc._trace_half(
        ti, chi, z, p, theta, d0 / math.sqrt(rho), u_max, 0.01, saddles
    )
    s_skel = np.concatenate([[0.0], np.sqrt(u_nodes / rho)])
    t_skel = np.concatenate([[ti], pts])
    s_max = s_skel[-1]
    # panel boundaries follow the skeleton density (equal arc length)
    arc = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(t_skel)))])
    bounds = np.interp(
        np.linspace(0.0, arc[-1], n_panels + 1), arc, s_skel
    )
    x_gl, w_gl = np.polynomial.legendre.leggauss(n_gl)
    total = 0.0 + 0.0j
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b <= a:
            continue
        s_nodes = 0.5 * (b - a) * x_gl + 0.5 * (a + b)
        part = 0.0 + 0.0j
        for s, w in zip(s_nodes, w_gl):
            u = rho * s * s
            t = np.interp(s, s_skel, t_skel)
            target = chi + eps_hat * u
            for _ in range(50):
                fp = dc._phase_d1(t, z, p)
                dt = (sg.phase(t, z, p) - target) / fp
                t = t - dt
                if abs(dt) < 1e-14 * max(1.0, abs(t)):
                    break
            if s < 1e-9:
                g = 2 * rho * eps_hat / (dc._phase_d2(ti, p) * d0)
            else:
                g = 2 * s * rho * eps_hat / dc._phase_d1(t, z, p)
            part += w * cmath.exp(-u * eps_hat / eps) * g
        total += 0.5 * (b - a) * part
    return total


def _chain_decomposition(z, p, theta):
    """Edge path of descent chains joining the contour's end rays."""
    rays = {}
    for i in range(1, 5):
        c = dc.descent_path(i, z, p, theta, u_max=1e4, h=0.05)
        rays[i] = c.endpoint_rays()
    # BFS over decay rays; the defining contour runs ray 4 -> ray 0
    start, goal = 4, 0
    frontier = [(start, [])]
    seen = {start}
    while frontier:
        node, path = frontier.pop(0)
        if node == goal:
            return path
        for i, (ra, rb) in rays.items():
            for a, b, orient in ((ra, rb, 1), (rb, ra, -1)):
                if a == node and b not in seen:
                    seen.add(b)
                    frontier.append((b, path + [(i, orient)]))
    raise QuadratureFailure("no descent decomposition joins the end rays")


def integrate_swallowtail(z, p, eps, n_panels=60, probe_offset=0.0):
    """The contour integral psi(z; eps) with an error estimate.

    Returns (value, err) where err is the relative self-consistency
    estimate from panel refinement.  probe_offset tilts the phase used
    for the chain decomposition only; the value is invariant because the
    integrand is entire (any chain joining the end rays is admissible).
    """
    z = complex(z)
    eps = complex(eps)
    if eps == 0:
        raise ValueError("eps must be nonzero")
    theta = cmath.phase(eps)
    if abs(theta) >= 0.5 * math.pi:
        raise ValueError("arg eps must lie in (-pi/2, pi/2)")
    frame = sg.frame_at(z, p)
    edges = _chain_decomposition(z, p, theta + probe_offset)

    def value(npan):
        total = 0.0 + 0.0j
        for i, orient in edges:
            chi = frame.chi[i - 1]
            tt = theta + probe_offset if probe_offset else None
            ia = _half_integral(i, z, p, eps, -1, npan, trace_theta=tt)
            ib = _half_integral(i, z, p, eps, +1, npan, trace_theta=tt)
            total += orient * (ib - ia) * cmath.exp(-chi / eps)
        return total / (1j * eps ** 0.2)

    v1 = value(n_panels)
    v2 = value(int(1.5 * n_panels) + 1)
    err = abs(v1 - v2) / max(abs(v2), 1e-300)
    return v2, err


# ---------------------------------------------------------------------------
# late terms


_LOOP_CACHE = {}


def _level_loop(i, z, p, r, m):
    """Level curve F - chi_i = r e^{i phi}, phi in [0, 4 pi)."""
    key = (i, complex(z), p.a, p.b, float(r), int(m))
    if key in _LOOP_CACHE:
        return _LOOP_CACHE[key]
    frame = sg.frame_at(z, p)
    saddles = dc.saddle_points(z, p)
    ti = saddles[i - 1]
    chi = frame.chi[i - 1]
    gap = min(
        abs(tk - ti) for k, tk in enumerate(saddles) if k != i - 1
    )
    phis = np.linspace(0.0, 4 * math.pi, m, endpoint=False)
    dphi = phis[1] - phis[0]
    t = ti + cmath.sqrt(2 * r / dc._phase_d2(ti, p))
    pts = np.empty(m, dtype=complex)
    for k, phi in enumerate(phis):
        target = chi + r * cmath.exp(1j * phi)
        if k > 0:
            fp = dc._phase_d1(t, z, p)
            t = t + 1j * r * cmath.exp(1j * phis[k - 1]) * dphi / fp
        prev = t
        for _ in range(60):
            fp = dc._phase_d1(t, z, p)
            if abs(fp) < 1e-12:
                raise LoopTooWide(
                    f"level loop at r={r:.3g} pinches a saddle of F"
                )
            dt = (sg.phase(t, z, p) - target) / fp
            t = t - dt
            if abs(dt) < 1e-14 * max(1.0, abs(t)):
                break
        if k > 0 and abs(t - prev) > 0.5 * gap:
            raise LoopTooWide(
                f"level-loop continuation jumped branches at r={r:.3g}"
            )
        pts[k] = t
    # closure of the double cover
    target = chi + r
    t_close = pts[-1]
    fp = dc._phase_d1(t_close, z, p)
    t_close = t_close + 1j * r * cmath.exp(1j * phis[-1]) * dphi / fp
    for _ in range(60):
        fp = dc._phase_d1(t_close, z, p)
        dt = (sg.phase(t_close, z, p) - target) / fp
        t_close = t_close - dt
        if abs(dt) < 1e-14:
            break
    if abs(t_close - pts[0]) > 1e-6 * max(1.0, abs(pts[0])):
        raise LoopTooWide(f"level loop fails to close at r={r:.3g}")
    fprime = np.array([dc._phase_d1(t, z, p) for t in pts])
    _LOOP_CACHE[key] = (phis, pts, fprime, chi)
    return _LOOP_CACHE[key]


def late_term(n, i, z, p, r_frac=0.7, m=2048):
    """psi_n at saddle i from the loop representation.

    The loop is the level curve |F - chi_i| = r_frac * min_j |chi_ji|;
    the trapezoid rule on the double cover is spectrally accurate.  The
    overall square-root branch is tied to the frame gauge by matching
    psi_0 to the leading amplitude.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    frame = sg.frame_at(z, p)
    gaps = [
        abs(frame.chi[k] - frame.chi[i - 1]) for k in range(4) if k != i - 1
    ]
    r = r_frac * min(gaps)
    phis, pts, fprime, chi = _level_loop(i, z, p, r, m)
    dphi = phis[1] - phis[0]

    def raw(nn):
        kern = np.exp(-1j * (nn - 0.5) * phis) / fprime
        val = gamma_half(nn) / (2 * math.pi) * r ** (0.5 - nn) * dphi * kern.sum()
        # the loop integral realizes i * psi_n; undo the normal factor
        return val / 1j

    psi0 = raw(0)
    amp = frame.amp0[i - 1]
    branch = 1 if abs(psi0 - amp) < abs(psi0 + amp) else -1
    return branch * raw(int(n))


def _adjacent_sum(n, i, k, z, p, n_panels=40, n_gl=8):
    """Exact Borel sum of the saddle-k divergent series inside psi_n^(i).

    Sum_q psi_q^(k) Gamma(n-q) / chi_ki^(n-q) equals, by a Mellin
    transform of the lateral-sum representation,
    Gamma(n+1/2)/i * ∮_{C_k(arg chi_ki)} (F - chi_i)^(-n-1/2) dt with the
    chain positively oriented, so the subtraction carries no truncation
    floor -- only quadrature error.
    """
    frame = sg.frame_at(z, p)
    saddles = dc.saddle_points(z, p)
    tk = saddles[k - 1]
    chi_k = frame.chi[k - 1]
    chi_ki = chi_k - frame.chi[i - 1]
    v0, theta = abs(chi_ki), cmath.phase(chi_ki)
    # weight (1+u/v0)^(-n-1/2) ~ exp(-(n+1/2) u/v0); resolve it in
    # s = sqrt(u/rho) with rho matched to the decay scale
    rho = v0 / (n + 0.5)
    u_max = v0 * math.expm1(34.0 / (n + 0.5))
    d0 = dc._launch_direction(tk, p, theta)
    orient = dc.descent_path(k, z, p, theta, u_max=30.0 * v0, h=0.02).orientation
    halves = []
    for sign in (-1, +1):
        pts, u_nodes = dc._trace_half(
            tk, chi_k, z, p, theta, sign * d0, u_max, 0.01, saddles
        )
        s_skel = np.concatenate([[0.0], np.sqrt(u_nodes / rho)])
        t_skel = np.concatenate([[tk], pts])
        arc = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(t_skel)))])
        bounds = np.interp(
            np.linspace(0.0, arc[-1], n_panels + 1), arc, s_skel
        )
        x_gl, w_gl = np.polynomial.legendre.leggauss(n_gl)
        eps_hat = cmath.exp(1j * theta)
        total = 0.0 + 0.0j
        for a, b in zip(bounds[:-1], bounds[1:]):
            if b <= a:
                continue
            s_nodes = 0.5 * (b - a) * x_gl + 0.5 * (a + b)
            part = 0.0 + 0.0j
            for s, w in zip(s_nodes, w_gl):
                u = rho * s * s
                t = np.interp(s, s_skel, t_skel)
                target = chi_k + eps_hat * u
                for _ in range(50):
                    fp = dc._phase_d1(t, z, p)
                    dt = (sg.phase(t, z, p) - target) / fp
                    t = t - dt
                    if abs(dt) < 1e-14 * max(1.0, abs(t)):
                        break
                if s < 1e-9:
                    g = 2 * rho * eps_hat / (dc._phase_d2(tk, p) * d0 * sign)
                else:
                    g = 2 * s * rho * eps_hat / dc._phase_d1(t, z, p)
                part += w * (1.0 + u / v0) ** (-(n + 0.5)) * g
            total += 0.5 * (b - a) * part
        halves.append(total)
    chain = orient * (halves[1] - halves[0])
    return gamma_half(n) / 1j * chi_ki ** (-(n + 0.5)) * chain


def stokes_constant_limit(i, j, z, p, n_max=40):
    """S_ij from the large-order behaviour of psi_n at saddle i.

    Returns (value, err).  When (i, j) is not the dominant adjacent
    singulant the divergent series of closer adjacent saddles are
    subtracted (exactly, via their Borel sums) before extrapolating; if
    no clean limit emerges a NonConvergence carrying the dominant pair
    is raised.
    """
    if n_max < 20:
        raise ValueError("n_max must be >= 20")
    frame = sg.frame_at(z, p)
    chi_ji = frame.chi[j - 1] - frame.chi[i - 1]
    # adjacent saddles closer than j contaminate the limit
    closer = []
    for k in range(1, 5):
        if k in (i, j):
            continue
        chi_ki = frame.chi[k - 1] - frame.chi[i - 1]
        if abs(chi_ki) < abs(chi_ji) - 1e-12:
            rec = dc.adjacency(i, k, z, p)
            if rec.A:
                closer.append((k, chi_ki, rec.stokes_constant))
    if closer:
        # the subtracted residual amplifies FP noise by (|chi_ji|/|chi_ki|)^n;
        # keep the window where the noise floor stays below ~1e-3
        ratio = abs(chi_ji) / min(abs(c) for _, c, _ in closer)
        n_cap = max(14, int(18.0 / math.log(ratio)))
        ns = np.arange(8, min(n_max, n_cap) + 1)
    else:
        ns = np.arange(max(4, n_max - 14), n_max + 1)
    ests = []
    psi0_j = frame.amp0[j - 1]
    for n in ns:
        psi_n = late_term(int(n), i, z, p, r_frac=0.9)
        for k, chi_ki, s_ik in closer:
            psi_n -= s_ik / (2j * math.pi) * _adjacent_sum(int(n), i, k, z, p)
        ests.append(2j * math.pi * psi_n * chi_ji ** int(n) / (gamma_int(int(n)) * psi0_j))
    ests = np.array(ests)
    x = 1.0 / ns
    fit3 = np.polynomial.polynomial.polyfit(x, ests, 3)
    fit2 = np.polynomial.polynomial.polyfit(x, ests, 2)
    val = fit3[0]
    err = abs(fit3[0] - fit2[0]) + np.abs(
        ests - np.polynomial.polynomial.polyval(x, fit3)
    ).max()
    if closer:
        # FP cancellation noise in the subtracted residual, amplified by
        # the extrapolation
        err += 1.5e-11 * ratio ** ns[-1]
    if err > 0.2:
        dom = min(
            (
                (abs(frame.chi[k - 1] - frame.chi[i - 1]), k)
                for k in range(1, 5)
                if k != i
            )
        )[1]
        raise NonConvergence(
            f"late terms of saddle {i} do not resolve pair ({i},{j})",
            dominant_pair=(i, dom),
        )
    return val, float(err)


# ---------------------------------------------------------------------------
# transseries evaluation


def transseries_eval(state, z, p, eps, anchor=None, beta=(1, 0, 0, 0)):
    """Leading-order transseries value at z with anchored calibration.

    state carries the sigma forms valid in the region of z; the overall
    constant is calibrated against the quadrature oracle at the anchor
    (default: the reference point, sigma = beta there).
    """
    eps = complex(eps)
    if anchor is None:
        anchor = sg.REFERENCE_POINT
    sigma_anchor = np.asarray(beta, dtype=complex)
    fr_a = sg.frame_at(anchor, p)
    terms = sigma_anchor * fr_a.amp0 * np.exp(-fr_a.chi / eps)
    mags = np.abs(terms)
    order = np.argsort(mags)[::-1]
    if mags[order[1]] > 0 and mags[order[0]] / mags[order[1]] < math.exp(5.0):
        raise AnchorDegenerate(
            "no single exponential dominates by e^5 at the anchor"
        )
    psi_anchor, _ = integrate_swallowtail(anchor, p, eps)
    c = psi_anchor / terms[order[0]]
    sigma = np.asarray(state.sigma.instantiate(beta), dtype=complex)
    fr = sg.frame_at(z, p)
    return c * (sigma * fr.amp0 * np.exp(-fr.chi / eps)).sum()
