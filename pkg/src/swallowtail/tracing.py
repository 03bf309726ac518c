"""Tracing of ordinary and higher-order Stokes curves.

Ordinary curves l_{i>j} are the loci Im[chi_j - chi_i] = 0 with
Re[chi_j - chi_i] >= 0; higher-order curves h_{i>k;j} use the ratio
(chi_k - chi_j)/(chi_j - chi_i) instead.  Both are traced by an
arclength predictor-corrector: the predictor steps along 1/g'(z) (which
keeps g real to first order) and the corrector is a complex Newton
update dz = -i Im[g]/g' that removes the imaginary part while leaving
Re[g] fixed to first order.

Curves are seeded on small circles around turning points, virtual
turning points and ordinary-curve crossing points: every sign change of
Im[g] with Re[g] >= 0 on the circle starts one outward ray.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely import LineString, Point

from . import singulants as sg
from .errors import (
    CorrectorDivergence,
    DegenerateTangent,
    LabelMismatch,
    PathTooCloseToCrossing,
)
from .singulants import PhaseParams, SingulantFrame, TurningPoint

__all__ = [
    "Domain",
    "StokesCurve",
    "Crossing",
    "CrossingEvent",
    "StokesGraph",
    "trace_ordinary",
    "trace_higher",
    "build_graph",
    "path_crossings",
]

# Step-control constants.  The per-step turning angle below keeps the
# polyline sagitta under 1e-6 at the maximal step, which is what the
# refinement-stability contract requires.
STEP0 = 1e-3
MAX_STEP = 4e-3
MIN_STEP = 1e-6
SAG_TOL = 5e-7
MAX_CORRECTOR = 8
SEED_RADIUS = 1e-3
MAX_VERTICES = 60000


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle in the z-plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("empty domain rectangle")

    def contains(self, z: complex) -> bool:
        return (
            self.re_min <= z.real <= self.re_max
            and self.im_min <= z.imag <= self.im_max
        )

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.re_max - self.re_min, self.im_max - self.im_min))

    @property
    def center(self) -> complex:
        return complex(
            0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max)
        )

    def clip_segment(self, z0: complex, z1: complex) -> complex:
        """Point where the segment z0 -> z1 leaves the rectangle."""
        best = 1.0
        d = z1 - z0
        for lo, hi, c, dc in (
            (self.re_min, self.re_max, z0.real, d.real),
            (self.im_min, self.im_max, z0.imag, d.imag),
        ):
            if dc > 0 and c + dc > hi:
                best = min(best, (hi - c) / dc)
            elif dc < 0 and c + dc < lo:
                best = min(best, (lo - c) / dc)
        return z0 + best * d

    @staticmethod
    def default_for(p: PhaseParams, margin: float = 4.5) -> "Domain":
        pts = [tp.z for tp in sg.turning_points(p)]
        pts += [v.z for v in sg.virtual_turning_points(p)]
        pts = np.array(pts if pts else [0.0 + 0.0j])
        cre = 0.5 * (pts.real.min() + pts.real.max())
        cim = 0.5 * (pts.imag.min() + pts.imag.max())
        hre = max(0.5 * (pts.real.max() - pts.real.min()), 0.4 * p.scale)
        him = max(0.5 * (pts.imag.max() - pts.imag.min()), 0.4 * p.scale)
        return Domain(
            cre - margin * hre, cre + margin * hre,
            cim - margin * him, cim + margin * him,
        )


@dataclass
class StokesCurve:
    """One traced curve with per-vertex branch data.

    ``labels`` is (i, j) for an ordinary curve l_{i>j} and (i, k, j) for
    a higher-order curve h_{i>k;j}.  ``branch_tau`` has one column per
    involved branch in label order; ``forward_normal`` points in the
    direction of increasing Im[g].
    """

    kind: str
    labels: tuple
    source: dict
    points: np.ndarray
    branch_tau: np.ndarray
    forward_normal: np.ndarray

    def length(self) -> float:
        return float(np.sum(np.abs(np.diff(self.points))))

    def as_linestring(self) -> LineString:
        return LineString(np.column_stack([self.points.real, self.points.imag]))


@dataclass
class Crossing:
    point: complex
    curve_ids: tuple
    kind: str  # stokes-crossing | higher-crossing | mixed


@dataclass
class CrossingEvent:
    arclength: float
    curve_id: int
    labels: tuple
    kind: str
    direction: int


@dataclass
class StokesGraph:
    params: PhaseParams
    domain: Domain
    turning: list
    virtual: list
    curves: list
    crossings: list
    reference: SingulantFrame

    def special_points(self) -> np.ndarray:
        return np.array(
            [t.z for t in self.turning] + [v.z for v in self.virtual],
            dtype=complex,
        )


# ---------------------------------------------------------------------------
# local frame used inside the tracer: z plus the four polished roots


def _refresh(taus, z, p, steps=2):
    for _ in range(steps):
        taus = taus - sg._quartic_val(taus, z, p) / sg._quartic_deriv(taus, p)
    return taus


def _g_ordinary(taus, z, p, i, j):
    chi = sg.chi_from_tau(taus, z, p)
    g = chi[j - 1] - chi[i - 1]
    gp = taus[j - 1] - taus[i - 1]
    floor = 1e-15 * max(1.0, abs(chi[i - 1]), abs(chi[j - 1]))
    return g, gp, floor


def _g_higher(taus, z, p, i, k, j):
    chi = sg.chi_from_tau(taus, z, p)
    num = chi[k - 1] - chi[j - 1]
    den = chi[j - 1] - chi[i - 1]
    g = num / den
    dnum = taus[k - 1] - taus[j - 1]
    dden = taus[j - 1] - taus[i - 1]
    gp = (dnum * den - num * dden) / den**2
    # cancellation in num/den amplifies chi roundoff by 1/|den|
    scale = max(1.0, np.max(np.abs(chi)))
    floor = 1e-15 * scale * (1.0 + abs(g)) / max(abs(den), 1e-300)
    return g, gp, floor


def _g_func(labels, p):
    if len(labels) == 2:
        i, j = labels
        return lambda taus, z: _g_ordinary(taus, z, p, i, j)
    i, k, j = labels
    return lambda taus, z: _g_higher(taus, z, p, i, k, j)


def _involved(labels):
    # column order matches the label tuple
    return [lab - 1 for lab in labels]


def _min_gap(taus):
    return min(
        abs(taus[a] - taus[b]) for a in range(4) for b in range(a + 1, 4)
    )


def _degenerate_here(labels, taus, z, p, inv_gap):
    """True if the traced quantity degenerates (its own turning or
    virtual turning point) at this location."""
    if inv_gap < 0.05:
        return True
    # a traced branch colliding with *any* other branch also ends the
    # curve: the label swaps across such a turning point
    cols = _involved(labels)
    for c in cols:
        for d in range(4):
            if d != c and abs(taus[c] - taus[d]) < 0.05:
                return True
    chi = sg.chi_from_tau(taus, z, p)
    if len(labels) == 2:
        i, j = labels
        return abs(chi[j - 1] - chi[i - 1]) < 1e-3
    i, k, j = labels
    den = chi[j - 1] - chi[i - 1]
    num = chi[k - 1] - chi[j - 1]
    return abs(den) < 1e-3 or abs(num) < 1e-3


def _snap_special(z, stop_pts, tol=1e-2):
    if stop_pts.size:
        k = int(np.argmin(np.abs(stop_pts - z)))
        if abs(stop_pts[k] - z) < tol:
            return stop_pts[k]
    return z


def _trace(labels, z0, tau0, direction, p, domain, stop_pts, source,
           max_step=MAX_STEP):
    """Trace one ray outward from (z0, tau0) in the given direction."""
    gfun = _g_func(labels, p)
    cols = _involved(labels)
    z = complex(z0)
    taus = np.asarray(tau0, dtype=complex).copy()
    g, gp, _ = gfun(taus, z)
    if abs(gp) < 1e-10:
        raise DegenerateTangent(f"vanishing tangent for {labels} at z={z}")

    pts = [z]
    btau = [taus[cols].copy()]
    normals = [1j * np.conj(gp) / abs(gp)]
    tangent = direction / abs(direction)
    h = STEP0
    end = None

    while len(pts) < MAX_VERTICES:
        # cap the step near special points so the proximity window below
        # is always sampled (a 4e-3 step could jump the 1.5e-3 window)
        if stop_pts.size:
            dmin = float(np.min(np.abs(stop_pts - z)))
            h = min(h, max(0.5 * dmin, 0.7 * SEED_RADIUS))
        # predictor along 1/g' keeps g real to first order
        t_new = np.conj(gp) / abs(gp)
        if (t_new * np.conj(tangent)).real < 0:
            t_new = -t_new
        accepted = False
        while h >= MIN_STEP:
            z_try = z + h * t_new
            taus_try = _refresh(taus, z_try, p)
            ok = True
            for _ in range(MAX_CORRECTOR):
                g_try, gp_try, floor = gfun(taus_try, z_try)
                if abs(gp_try) < 1e-10:
                    ok = False
                    break
                im = g_try.imag
                if abs(im) <= max(1e-12 * max(1.0, abs(g_try)), 8 * floor):
                    break
                z_try = z_try - 1j * im / gp_try
                taus_try = _refresh(taus_try, z_try, p)
            else:
                ok = False
            if ok:
                g_try, gp_try, floor = gfun(taus_try, z_try)
                if abs(g_try.imag) > max(1e-11 * max(1.0, abs(g_try)), 30 * floor):
                    ok = False
            if ok:
                t_next = np.conj(gp_try) / abs(gp_try)
                if (t_next * np.conj(t_new)).real < 0:
                    t_next = -t_next
                turn = abs(np.angle(t_next / t_new))
                # sagitta bound keeps refinement-stability Hausdorff < 1e-6
                if (h * turn / 8 > SAG_TOL or turn > 0.3) and h > MIN_STEP:
                    ok = False
            if ok and abs(z_try - z) > 3 * h:
                ok = False  # corrector wandered
            if ok:
                accepted = True
                break
            h *= 0.5
        if not accepted:
            raise CorrectorDivergence(
                f"tracer stuck for {labels} near z={z} (step {h:.2e})"
            )

        # stop conditions -------------------------------------------------
        inv_gap = min(
            abs(taus_try[a] - taus_try[b])
            for ia, a in enumerate(cols)
            for b in cols[ia + 1:]
        )
        if inv_gap < 1e-5:
            end = ("turning", _snap_special(z_try, stop_pts))
            break
        if stop_pts.size:
            d = np.abs(stop_pts - z_try)
            kmin = int(np.argmin(d))
            # a freshly launched ray is still next to its seeding point
            # and receding from it; don't stop it there
            launching = (
                abs(z_try - pts[0]) < 2.5 * SEED_RADIUS
                and d[kmin] >= abs(stop_pts[kmin] - z)
            )
            if not launching and d[kmin] < 1.5 * SEED_RADIUS and _degenerate_here(
                labels, taus_try, z_try, p, inv_gap
            ):
                # the curve's own branches degenerate at this special
                # point; curves of unrelated pairs pass through
                end = ("special", stop_pts[kmin])
                break
        if not domain.contains(z_try):
            end = ("boundary", domain.clip_segment(z, z_try))
            break
        if g_try.real < -1e-9:
            # crossed the natural endpoint Re[g] = 0; trim by bisection
            lo, hi = z, z_try
            tlo = taus
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                tm = _refresh(tlo, mid, p)
                gm = gfun(tm, mid)[0]
                if gm.real >= 0:
                    lo, tlo = mid, tm
                else:
                    hi = mid
            end = ("endpoint", _snap_special(lo, stop_pts, tol=1e-4))
            break

        tangent = (z_try - z) / abs(z_try - z)
        z, taus, g, gp = z_try, taus_try, g_try, gp_try
        pts.append(z)
        btau.append(taus[cols].copy())
        normals.append(1j * np.conj(gp) / abs(gp))
        h = min(h * 1.4, max_step)

    if end is not None:
        z_end = end[1]
        taus_end = _refresh(taus, z_end, p, steps=4)
        if end[0] in ("boundary", "endpoint"):
            # clip/trim points sit on a chord; pull them back onto the curve
            z_end, taus_end = _snap_to_curve(labels, z_end, taus_end, p)
        pts.append(z_end)
        btau.append(taus_end[cols])
        ge, gpe, _ = gfun(taus_end, z_end)
        normals.append(
            1j * np.conj(gpe) / abs(gpe) if abs(gpe) > 1e-10 else normals[-1]
        )

    kind = "ordinary" if len(labels) == 2 else "higher"
    return StokesCurve(
        kind,
        tuple(labels),
        source,
        np.array(pts),
        np.array(btau),
        np.array(normals),
    )


# ---------------------------------------------------------------------------
# seeding


def _circle_frames(center, p, radius=SEED_RADIUS, n=720):
    """Continued root sets on a circle, labels carried from the canonical
    frame at a staging point outside the sensitive region."""
    stage_dist = max(0.05, 10 * radius)
    stage = center + stage_dist
    f = sg.frame_at(stage, p)
    # walk radially inward, then around the circle
    radial = np.linspace(stage_dist, radius, 40)
    taus = f.tau
    for r in radial[1:]:
        taus = _refresh(taus, center + r, p, steps=3)
    thetas = np.linspace(0.0, 2 * np.pi, n + 1)
    out = np.empty((n + 1, 4), dtype=complex)
    cur = taus
    for k, th in enumerate(thetas):
        zk = center + radius * np.exp(1j * th)
        cur = _refresh(cur, zk, p, steps=3)
        out[k] = cur
    return thetas, out


def _seed_rays(center, p, label_sets, radius=SEED_RADIUS):
    """Outward rays at sign changes of Im[g] with Re[g] >= 0."""
    thetas, taus = _circle_frames(center, p, radius)
    zs = center + radius * np.exp(1j * thetas)
    seeds = []
    for labels in label_sets:
        gfun = _g_func(labels, p)
        vals = np.array([gfun(taus[k], zs[k])[0] for k in range(len(zs))])
        if not np.all(np.isfinite(vals)):
            continue
        im = vals.imag
        for k in range(len(zs) - 1):
            if im[k] == 0.0:
                continue
            if im[k] * im[k + 1] < 0:
                # bisect the arc
                lo, hi = thetas[k], thetas[k + 1]
                tl = taus[k]
                for _ in range(50):
                    mid = 0.5 * (lo + hi)
                    zm = center + radius * np.exp(1j * mid)
                    tm = _refresh(tl, zm, p, steps=3)
                    gm = gfun(tm, zm)[0]
                    if gm.imag * im[k] > 0:
                        lo, tl = mid, tm
                    else:
                        hi = mid
                zm = center + radius * np.exp(1j * lo)
                tm = _refresh(tl, zm, p, steps=4)
                gm = gfun(tm, zm)[0]
                if gm.real < -1e-9 * max(1.0, abs(gm)):
                    continue
                seeds.append((tuple(labels), zm, tm, np.exp(1j * lo)))
    return seeds


_ORDERED_PAIRS = [(i, j) for i in range(1, 5) for j in range(1, 5) if i != j]
# one representative per coincident pair of higher curves (i,k;j) ~ (k,i;j)
_TRIPLES = [
    (i, k, j)
    for i in range(1, 5)
    for k in range(i + 1, 5)
    for j in range(1, 5)
    if j not in (i, k)
]


def trace_ordinary(i, j, seed, p, domain):
    """Trace the ordinary curve l_{i>j} from a seed point near the locus."""
    f = sg.frame_at(seed, p)
    z, taus = _snap_to_curve((i, j), complex(seed), f.tau, p)
    stop = _special_points(p)
    c1 = _trace((i, j), z, taus, _tangent_dir((i, j), taus, z, p), p, domain,
                stop, {"type": "seed", "z": complex(seed)})
    c2 = _trace((i, j), z, taus, -_tangent_dir((i, j), taus, z, p), p, domain,
                stop, {"type": "seed", "z": complex(seed)})
    pts = np.concatenate([c2.points[::-1], c1.points[1:]])
    btau = np.concatenate([c2.branch_tau[::-1], c1.branch_tau[1:]])
    nor = np.concatenate([c2.forward_normal[::-1], c1.forward_normal[1:]])
    return StokesCurve("ordinary", (i, j), c1.source, pts, btau, nor)


def trace_higher(i, k, j, seed, p, domain):
    """Trace the higher-order curve h_{i>k;j} from a nearby seed point."""
    f = sg.frame_at(seed, p)
    z, taus = _snap_to_curve((i, k, j), complex(seed), f.tau, p)
    stop = _special_points(p)
    d = _tangent_dir((i, k, j), taus, z, p)
    c1 = _trace((i, k, j), z, taus, d, p, domain, stop,
                {"type": "seed", "z": complex(seed)})
    c2 = _trace((i, k, j), z, taus, -d, p, domain, stop,
                {"type": "seed", "z": complex(seed)})
    pts = np.concatenate([c2.points[::-1], c1.points[1:]])
    btau = np.concatenate([c2.branch_tau[::-1], c1.branch_tau[1:]])
    nor = np.concatenate([c2.forward_normal[::-1], c1.forward_normal[1:]])
    return StokesCurve("higher", (i, k, j), c1.source, pts, btau, nor)


def _tangent_dir(labels, taus, z, p):
    gp = _g_func(labels, p)(taus, z)[1]
    if abs(gp) < 1e-10:
        raise DegenerateTangent(f"vanishing tangent for {labels} at z={z}")
    return np.conj(gp) / abs(gp)


def _snap_to_curve(labels, z, taus, p):
    gfun = _g_func(labels, p)
    for _ in range(50):
        g, gp, floor = gfun(taus, z)
        if abs(g.imag) <= max(1e-13 * max(1.0, abs(g)), 4 * floor):
            break
        z = z - 1j * g.imag / gp
        taus = _refresh(taus, z, p)
    return z, taus


def _special_points(p):
    return np.array(
        [t.z for t in sg.turning_points(p)]
        + [v.z for v in sg.virtual_turning_points(p)],
        dtype=complex,
    )


# ---------------------------------------------------------------------------
# graph assembly


def _stitch(c_back, c_fwd):
    """Join two opposite-direction traces from the same seed point."""
    pts = np.concatenate([c_back.points[::-1], c_fwd.points[1:]])
    btau = np.concatenate([c_back.branch_tau[::-1], c_fwd.branch_tau[1:]])
    nor = np.concatenate([c_back.forward_normal[::-1], c_fwd.forward_normal[1:]])
    return StokesCurve(c_fwd.kind, c_fwd.labels, c_fwd.source, pts, btau, nor)


def _trace_from_seeds(seeds, p, domain, stop, source):
    curves = []
    for labels, zm, tm, outward in seeds:
        try:
            fwd = _trace(labels, zm, tm, outward, p, domain, stop, dict(source))
            back = _trace(labels, zm, tm, -outward, p, domain, stop, dict(source))
        except (CorrectorDivergence, DegenerateTangent) as err:
            raise type(err)(f"{err} [seed {labels} at {zm}]") from err
        curves.append(_stitch(back, fwd))
    return curves


def _same_branches(c, c2):
    """Compare stored branch taus at interior sample points.

    Distinct Stokes lines can coincide as point sets (the real-axis
    lines do, by the z -> conj(z) symmetry), so geometric containment
    alone must not trigger deduplication.
    """
    n = len(c.points)
    votes = 0
    checks = 0
    for frac in (0.25, 0.4, 0.5, 0.6, 0.75):
        kv = int(frac * (n - 1))
        z = c.points[kv]
        k2 = int(np.argmin(np.abs(c2.points - z)))
        if abs(c2.points[k2] - z) > 2 * MAX_STEP:
            continue
        t1 = np.sort_complex(np.asarray(c.branch_tau[kv]))
        t2 = np.sort_complex(np.asarray(c2.branch_tau[k2]))
        if len(t1) != len(t2):
            return False
        checks += 1
        if np.max(np.abs(t1 - t2)) < 1e-2:
            votes += 1
    return checks > 0 and votes * 2 > checks


def _dedup_curves(curves):
    """Drop curves contained in an earlier, longer one with the same
    branch content."""
    order = sorted(range(len(curves)), key=lambda k: -curves[k].length())
    kept: list = []
    kept_ls: list = []
    for k in order:
        c = curves[k]
        sample = c.points[:: max(1, len(c.points) // 40)]
        dup = False
        for c2, ls in zip(kept, kept_ls):
            if c2.kind != c.kind:
                continue
            d = [ls.distance(Point(z.real, z.imag)) for z in sample]
            if max(d) < 1e-6 and _same_branches(c, c2):
                dup = True
                break
        if not dup:
            kept.append(c)
            kept_ls.append(c.as_linestring())
    kept.sort(key=lambda c: (c.kind, c.labels, c.points[0].real, c.points[0].imag))
    return kept


def _pairwise_crossings(curves, special, p, exclude_radius=5 * SEED_RADIUS):
    """Transversal intersection points between distinct curves."""
    raw = []
    lss = [c.as_linestring() for c in curves]
    tree = shapely.STRtree(lss)
    for a in range(len(curves)):
        for b in tree.query(lss[a]):
            b = int(b)
            if b <= a:
                continue
            inter = lss[a].intersection(lss[b])
            if inter.is_empty:
                continue
            geoms = getattr(inter, "geoms", [inter])
            for gobj in geoms:
                if gobj.geom_type != "Point":
                    continue
                z = complex(gobj.x, gobj.y)
                if special.size and np.min(np.abs(special - z)) < exclude_radius:
                    continue
                if not _transversal(curves[a], curves[b], z):
                    continue
                if _coincident_near(curves[a], lss[b], z):
                    continue
                z = _refine_crossing(z, curves[a], curves[b], p)
                raw.append((z, a, b))
    return raw


def _curve_label_roots(curve, z, taus):
    """Map the curve's stored branch taus at z to indices into taus."""
    kv = int(np.argmin(np.abs(curve.points - z)))
    idx = []
    for tau_c in curve.branch_tau[kv]:
        idx.append(int(np.argmin(np.abs(taus - tau_c))))
    return tuple(i + 1 for i in idx)


def _refine_crossing(z0, ca, cb, p):
    """Newton-polish an intersection point onto both exact loci."""
    z = complex(z0)
    taus = sg._polish(np.roots(sg._quartic(z, p)), z, p)
    la = _curve_label_roots(ca, z, taus)
    lb = _curve_label_roots(cb, z, taus)
    if len(set(la)) != len(la) or len(set(lb)) != len(lb):
        return z0
    ga, gb = _g_func(la, p), _g_func(lb, p)
    for _ in range(30):
        va, da, fa = ga(taus, z)
        vb, db, fb = gb(taus, z)
        if abs(va.imag) <= 10 * max(1e-14, fa) and abs(vb.imag) <= 10 * max(
            1e-14, fb
        ):
            return z
        # rows [Im g', Re g'] act on (dx, dy)
        det = da.imag * db.real - da.real * db.imag
        if abs(det) < 1e-14:
            return z0
        dx = (-va.imag * db.real + vb.imag * da.real) / det
        dy = (-da.imag * vb.imag + db.imag * va.imag) / det
        step = complex(dx, dy)
        if abs(step) > 0.1:
            return z0
        z = z + step
        taus = _refresh(taus, z, p, steps=3)
    return z


def _local_tangent(curve, z, win=0.01):
    """Chord direction over a fixed arclength window around z.

    The long baseline averages out sub-micron corrector jitter, so two
    coincident curves report parallel tangents even though their
    polylines zigzag across each other vertex by vertex.
    """
    pts = curve.points
    k = int(np.argmin(np.abs(pts - z)))
    k0 = k
    acc = 0.0
    while k0 > 0 and acc < win:
        acc += abs(pts[k0] - pts[k0 - 1])
        k0 -= 1
    k1 = k
    acc = 0.0
    while k1 < len(pts) - 1 and acc < win:
        acc += abs(pts[k1 + 1] - pts[k1])
        k1 += 1
    d = pts[k1] - pts[k0]
    return d / abs(d) if abs(d) > 0 else 1.0


def _walk_arclength(pts, k, target):
    """Vertex index reached by walking |target| arclength from vertex k
    (sign of target gives the direction)."""
    step = 1 if target > 0 else -1
    acc = 0.0
    while 0 < k < len(pts) - 1 or (k == 0 and step > 0) or (
        k == len(pts) - 1 and step < 0
    ):
        nxt = k + step
        if nxt < 0 or nxt >= len(pts):
            break
        acc += abs(pts[nxt] - pts[k])
        k = nxt
        if acc >= abs(target):
            break
    return k


def _coincident_near(ca, ls_b, z, w=0.05, sep_tol=1e-4):
    """True if ca runs along ls_b on both sides of z.

    Distinct Stokes loci can coincide exactly as point sets; their
    polylines then zigzag across each other at the jitter level and
    every apparent intersection is spurious.  A genuine transversal
    crossing separates linearly away from the hit point.
    """
    pts = ca.points
    k = int(np.argmin(np.abs(pts - z)))
    for tgt in (w, -w):
        k2 = _walk_arclength(pts, k, tgt)
        zk = pts[k2]
        if ls_b.distance(Point(zk.real, zk.imag)) > sep_tol:
            return False
    return True


def _transversal(ca, cb, z, min_sin=1e-3):
    """Reject grazing contacts between (near-)coincident polylines."""
    ta, tb = _local_tangent(ca, z), _local_tangent(cb, z)
    return abs((np.conj(ta) * tb).imag) > min_sin


def _cluster_crossings(raw, curves, tol=1e-6):
    clusters: list = []
    for z, a, b in raw:
        for cl in clusters:
            if abs(cl["z"] - z) <= tol:
                cl["ids"].update((a, b))
                cl["pts"].append(z)
                cl["z"] = np.mean(cl["pts"])
                break
        else:
            clusters.append({"z": z, "pts": [z], "ids": {a, b}})
    out = []
    for cl in clusters:
        kinds = {curves[k].kind for k in cl["ids"]}
        if kinds == {"ordinary"}:
            kind = "stokes-crossing"
        elif kinds == {"higher"}:
            kind = "higher-crossing"
        else:
            kind = "mixed"
        out.append(Crossing(complex(cl["z"]), tuple(sorted(cl["ids"])), kind))
    out.sort(key=lambda c: (c.point.real, c.point.imag))
    return out


def build_graph(p: PhaseParams, domain: Domain | None = None) -> StokesGraph:
    """Trace the complete Stokes graph for the given parameters.

    Ordinary curves are seeded at turning and virtual turning points;
    higher-order curves additionally at the ordinary-curve crossing
    points, where they are generated.  Duplicate traces of the same
    locus are merged; crossings are clustered at 1e-6.
    """
    if domain is None:
        domain = Domain.default_for(p)
    turning = sg.turning_points(p)
    virtual = sg.virtual_turning_points(p)
    stop = _special_points(p)

    curves = []
    for tp in turning + virtual:
        seeds = _seed_rays(tp.z, p, _ORDERED_PAIRS)
        curves += _trace_from_seeds(
            seeds, p, domain, stop, {"type": tp.kind, "z": tp.z}
        )
    curves = _dedup_curves(curves)

    ord_cross = _cluster_crossings(
        _pairwise_crossings(curves, stop, p), curves
    )

    higher = []
    for tp in turning + virtual:
        seeds = _seed_rays(tp.z, p, _TRIPLES)
        higher += _trace_from_seeds(
            seeds, p, domain, stop, {"type": tp.kind, "z": tp.z}
        )
    for cr in ord_cross:
        seeds = _seed_rays(cr.point, p, _TRIPLES)
        higher += _trace_from_seeds(
            seeds, p, domain, stop, {"type": "crossing", "z": cr.point}
        )
    higher = _dedup_curves(higher)

    curves = curves + higher
    curves.sort(
        key=lambda c: (
            c.kind != "ordinary",
            c.labels,
            c.points[0].real,
            c.points[0].imag,
        )
    )
    crossings = _cluster_crossings(
        _pairwise_crossings(curves, stop, p), curves
    )
    return StokesGraph(
        p, domain, turning, virtual, curves, crossings, sg.reference_frame(p)
    )


# ---------------------------------------------------------------------------
# path queries


def _polyline_arclengths(path):
    seg = np.abs(np.diff(path))
    return np.concatenate([[0.0], np.cumsum(seg)])


def _point_at(path, cum, s):
    k = int(np.searchsorted(cum, s, side="right") - 1)
    k = min(max(k, 0), len(path) - 2)
    ds = s - cum[k]
    seg = path[k + 1] - path[k]
    L = abs(seg)
    return path[k] + (ds / L) * seg if L > 0 else path[k]


def path_crossings(path, graph: StokesGraph):
    """Ordered crossing events of a query polyline with the graph.

    The path must keep a distance of at least delta_safe =
    1e-4 * domain diameter from every graph crossing point and every
    (virtual) turning point.  Branch labels in the returned events are
    resolved in the frame continued along the path itself and matched
    against the branch data stored on the crossed curve.
    """
    p = graph.params
    path = np.array([complex(w) for w in path])
    if len(path) < 2:
        return []
    delta_safe = 1e-4 * graph.domain.diameter
    guard = np.concatenate(
        [graph.special_points(), np.array([c.point for c in graph.crossings])]
    )
    ls_path = LineString(np.column_stack([path.real, path.imag]))
    for zg in guard:
        if ls_path.distance(Point(zg.real, zg.imag)) < delta_safe:
            raise PathTooCloseToCrossing(
                f"path passes within {delta_safe:.3e} of special point {zg}"
            )

    cum = _polyline_arclengths(path)
    hits = []
    for cid, curve in enumerate(graph.curves):
        inter = ls_path.intersection(curve.as_linestring())
        if inter.is_empty:
            continue
        for gobj in getattr(inter, "geoms", [inter]):
            if gobj.geom_type != "Point":
                raise PathTooCloseToCrossing(
                    f"path runs along curve {cid} (non-transversal contact)"
                )
            z = complex(gobj.x, gobj.y)
            s = ls_path.project(gobj)
            hits.append((s, cid, z))
    hits.sort(key=lambda h: (h[0], h[1]))
    for (s1, c1, z1), (s2, c2, z2) in zip(hits[:-1], hits[1:]):
        if s2 - s1 < 1e-9:
            # distinct curves that coincide as point sets are crossed
            # simultaneously by construction; keep both events (their
            # automorphisms commute), ordered by curve id
            if c1 != c2 and abs(z1 - z2) < 1e-6:
                continue
            raise PathTooCloseToCrossing(
                f"simultaneous events at arclength {s1} (curves {c1}, {c2})"
            )

    # continue the frame along the path once, evaluating around each hit
    events = []
    frame = sg.frame_at(path[0], p)
    s_prev = 0.0
    ds = min(delta_safe / 10, 1e-4 * max(1.0, graph.domain.diameter))
    for s, cid, z_hit in hits:
        curve = graph.curves[cid]
        s0, s1 = max(s - ds, 0.0), min(s + ds, cum[-1])
        z_before = _point_at(path, cum, s0)
        z_after = _point_at(path, cum, s1)
        frame = _walk(frame, path, cum, s_prev, s0, p)
        f_before = frame
        f_after = _walk(frame, path, cum, s0, s1, p)

        # match stored branch taus to the path frame at the hit point
        kv = int(np.argmin(np.abs(curve.points - z_hit)))
        local = _refresh(f_before.tau, z_hit, p, steps=3)
        mapped = []
        for tau_c in curve.branch_tau[kv]:
            m = int(np.argmin(np.abs(local - tau_c)))
            if abs(local[m] - tau_c) > 0.2 * _min_gap(local):
                raise LabelMismatch(
                    f"cannot match curve {cid} branch data at z={z_hit}"
                )
            mapped.append(m + 1)
        if len(set(mapped)) != len(mapped):
            raise LabelMismatch(f"degenerate branch match at z={z_hit}")
        labels = tuple(mapped)

        gfun = _g_func(labels, p)
        g_b = gfun(_refresh(f_before.tau, z_before, p, 3), z_before)[0]
        g_a = gfun(_refresh(f_after.tau, z_after, p, 3), z_after)[0]
        if g_b.imag == 0 or g_a.imag == 0 or g_b.imag * g_a.imag > 0:
            raise PathTooCloseToCrossing(
                f"tangential contact with curve {cid} at z={z_hit}"
            )
        direction = 1 if g_a.imag > 0 else -1
        events.append(
            CrossingEvent(float(s), cid, labels, curve.kind, direction)
        )
        frame = f_after
        s_prev = s1
    return events


def _walk(frame, path, cum, s_from, s_to, p):
    if s_to <= s_from:
        return frame
    n = max(2, int((s_to - s_from) / 0.05) + 2)
    ss = np.linspace(s_from, s_to, n)
    waypoints = [_point_at(path, cum, s) for s in ss]
    cur = frame
    if abs(cur.z - waypoints[0]) > 1e-12:
        waypoints = [cur.z] + waypoints
    return sg.continue_frame(waypoints, p, start=cur)[-1]
