import numpy as np
import pytest
import shapely
from shapely import Point

from swallowtail import singulants as sg
from swallowtail import tracing as tr
from swallowtail.errors import PathTooCloseToCrossing

P_REF = sg.REFERENCE_PARAMS
Z_REF = sg.REFERENCE_POINT

RNG = np.random.default_rng(20240818)


def _sample_idx(n, k=40):
    if n <= k:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, k).astype(int))


def _branch_g(curve, kv, p):
    """Evaluate the curve's defining g at vertex kv from first
    principles: fresh roots at z, matched to the stored branch taus."""
    z = curve.points[kv]
    taus = sg._polish(np.roots(sg._quartic(z, p)), z, p)
    idx = [int(np.argmin(np.abs(taus - t))) for t in curve.branch_tau[kv]]
    if len(set(idx)) != len(idx):
        return None
    labels = tuple(i + 1 for i in idx)
    return tr._g_func(labels, p)(taus, z)


class TestGraphStructure:
    def test_special_point_counts(self, graph31):
        assert len(graph31.turning) == 3
        assert len(graph31.virtual) == 3

    def test_three_rays_per_simple_turning_point(self, graph31):
        # locally chi_j - chi_i ~ (z - z0)^{3/2}: three rays with Re >= 0
        for tp in graph31.turning:
            i, j = tp.pair
            seeds = tr._seed_rays(tp.z, P_REF, [(i, j), (j, i)])
            assert len(seeds) == 3

    def test_four_ordinary_intersection_locations(self, graph31):
        ordinary = [c for c in graph31.curves if c.kind == "ordinary"]
        raw = tr._pairwise_crossings(ordinary, graph31.special_points(), P_REF)
        clusters = tr._cluster_crossings(raw, ordinary)
        assert len(clusters) == 4
        neg = [c for c in clusters if c.point.real < 0]
        pos = [c for c in clusters if c.point.real > 0]
        assert len(neg) == 3 and len(pos) == 1
        # three crossing Stokes lines at each Re < 0 location
        for c in neg:
            labels = {ordinary[k].labels for k in c.curve_ids}
            assert len(labels) == 3
        # six on the positive real axis
        assert abs(pos[0].point.imag) < 1e-6
        labels = {ordinary[k].labels for k in pos[0].curve_ids}
        assert len(labels) == 6

    def test_crossings_lie_on_listed_curves(self, graph31):
        for cr in graph31.crossings:
            z = cr.point
            taus = sg._polish(np.roots(sg._quartic(z, P_REF)), z, P_REF)
            for cid in cr.curve_ids:
                curve = graph31.curves[cid]
                labels = tr._curve_label_roots(curve, z, taus)
                if len(set(labels)) != len(labels):
                    continue
                g, gp, floor = tr._g_func(labels, P_REF)(taus, z)
                # |Im g| / |g'| is the normal distance to the locus
                assert abs(g.imag) / abs(gp) < 1e-8

    def test_deterministic_curve_order(self, graph31):
        keys = [
            (c.kind != "ordinary", c.labels, c.points[0].real, c.points[0].imag)
            for c in graph31.curves
        ]
        assert keys == sorted(keys)

    def test_crossing_kinds(self, graph31):
        kinds = {c.kind for c in graph31.crossings}
        assert kinds <= {"stokes-crossing", "higher-crossing", "mixed"}

    def test_no_intersections_for_most_degenerate_case(self):
        g = tr.build_graph(sg.PhaseParams(0.0, 0.0))
        assert len(g.turning) == 1
        assert g.crossings == []

    def test_no_higher_crossings_for_cuspoidal_case(self):
        g = tr.build_graph(sg.PhaseParams(1.0, 0.0))
        assert not any(c.kind == "higher-crossing" for c in g.crossings)


class TestCurveInvariants:
    def test_vertices_on_locus(self, graph31):
        for curve in graph31.curves:
            # interior vertices; endpoints can sit exactly on special
            # points where a higher-order ratio is 0/0
            for kv in _sample_idx(len(curve.points))[1:-1]:
                out = _branch_g(curve, kv, P_REF)
                if out is None:
                    continue
                g, gp, floor = out
                if not np.isfinite(g) or floor > 0.01 * abs(g):
                    continue
                tol = max(1e-10, 60 * floor)
                assert abs(g.imag) <= tol, (curve.labels, curve.points[kv])

    def test_nonnegative_real_part(self, graph31):
        for curve in graph31.curves:
            for kv in _sample_idx(len(curve.points))[1:-1]:
                out = _branch_g(curve, kv, P_REF)
                if out is None:
                    continue
                g, gp, floor = out
                if not np.isfinite(g) or floor > 0.01 * abs(g):
                    continue
                assert g.real >= -1e-8, (curve.labels, curve.points[kv])

    def test_vertex_spacing(self, graph31):
        for curve in graph31.curves:
            gaps = np.abs(np.diff(curve.points))
            assert np.max(gaps) <= tr.MAX_STEP * 1.001

    def test_branch_continuity(self, graph31):
        for curve in graph31.curves:
            jumps = np.abs(np.diff(curve.branch_tau, axis=0))
            assert np.max(jumps) < 0.5


class TestReciprocalCoincidence:
    def test_reversed_triple_same_locus(self, graph31):
        # h_{i>k;j} and h_{k>i;j}: reciprocal ratios, so the loci agree;
        # measure the normal distance |Im g|/|g'| of each vertex to the
        # reversed-label locus
        for curve in graph31.curves:
            if curve.kind != "higher":
                continue
            for kv in _sample_idx(len(curve.points), 25)[1:-1]:
                z = curve.points[kv]
                taus = sg._polish(np.roots(sg._quartic(z, P_REF)), z, P_REF)
                idx = [
                    int(np.argmin(np.abs(taus - t)))
                    for t in curve.branch_tau[kv]
                ]
                if len(set(idx)) != 3:
                    continue
                i, k, j = (m + 1 for m in idx)
                g, gp, floor = tr._g_higher(taus, z, P_REF, k, i, j)
                if not (np.isfinite(g) and np.isfinite(gp)):
                    continue
                assert abs(g.imag) / abs(gp) < 1e-7

    def test_reversed_triple_normal_negated(self, graph31):
        for curve in graph31.curves:
            if curve.kind != "higher":
                continue
            kv = len(curve.points) // 2
            z = curve.points[kv]
            taus = sg._polish(np.roots(sg._quartic(z, P_REF)), z, P_REF)
            idx = [
                int(np.argmin(np.abs(taus - t))) for t in curve.branch_tau[kv]
            ]
            if len(set(idx)) != 3:
                continue
            i, k, j = (m + 1 for m in idx)
            _, gp_f, _ = tr._g_higher(taus, z, P_REF, i, k, j)
            _, gp_r, _ = tr._g_higher(taus, z, P_REF, k, i, j)
            n_f = 1j * np.conj(gp_f) / abs(gp_f)
            n_r = 1j * np.conj(gp_r) / abs(gp_r)
            assert abs(n_f + n_r) < 1e-6


class TestConjugationSymmetry:
    def test_special_points(self, graph31):
        pts = graph31.special_points()
        for z in pts:
            assert np.min(np.abs(pts - np.conj(z))) < 1e-7

    def test_crossing_points(self, graph31):
        pts = np.array([c.point for c in graph31.crossings])
        for z in pts:
            assert np.min(np.abs(pts - np.conj(z))) < 1e-7

    def test_curves(self, graph31):
        # every traced curve has a conjugate partner in the graph
        by_kind = {}
        for c in graph31.curves:
            by_kind.setdefault(c.kind, []).append(c.as_linestring())
        for curve in graph31.curves:
            partners = by_kind[curve.kind]
            for kv in _sample_idx(len(curve.points), 12)[1:-1]:
                z = np.conj(curve.points[kv])
                d = min(ls.distance(Point(z.real, z.imag)) for ls in partners)
                assert d < 1e-6, (curve.labels, curve.points[kv])


class TestRefinementStability:
    @pytest.mark.parametrize("label_sets", [tr._ORDERED_PAIRS, tr._TRIPLES])
    def test_half_step_hausdorff(self, graph31, label_sets):
        tp = graph31.turning[0]
        seeds = tr._seed_rays(tp.z, P_REF, label_sets)
        stop = tr._special_points(P_REF)
        labels, zm, tm, outward = seeds[0]
        for direction in (outward, -outward):
            full = tr._trace(
                labels, zm, tm, direction, P_REF, graph31.domain, stop, {}
            )
            half = tr._trace(
                labels, zm, tm, direction, P_REF, graph31.domain, stop, {},
                max_step=tr.MAX_STEP / 2,
            )
            d = shapely.hausdorff_distance(
                full.as_linestring(), half.as_linestring(), densify=0.1
            )
            assert d <= 1e-6


class TestPathCrossings:
    def test_empty_far_from_curves(self, graph31):
        z0 = 8 + 8j
        loop = [z0, z0 + 0.2, z0 + 0.2 + 0.2j, z0]
        assert tr.path_crossings(loop, graph31) == []

    def test_forward_backward_opposite_directions(self, graph31):
        # short loop near z* crossing one ordinary curve twice
        loop = [Z_REF, Z_REF + 0.1 + 0.07j, Z_REF + 0.05j]
        evs = tr.path_crossings(loop, graph31)
        assert len(evs) == 2
        assert evs[0].curve_id == evs[1].curve_id
        assert evs[0].direction == -evs[1].direction
        assert {abs(e.direction) for e in evs} == {1}

    def test_events_sorted_and_oriented(self, graph31):
        evs = tr.path_crossings([Z_REF, 0.6 + 2.2j], graph31)
        assert len(evs) >= 4
        ss = [e.arclength for e in evs]
        assert ss == sorted(ss)
        for e in evs:
            assert e.direction in (-1, 1)
            assert e.kind in ("ordinary", "higher")
            assert len(e.labels) == (2 if e.kind == "ordinary" else 3)

    def test_ordinary_labels_oriented_by_positive_real_part(self, graph31):
        # event labels live in the frame continued along the path itself
        evs = tr.path_crossings([Z_REF, 0.6 + 2.2j], graph31)
        path = np.array([Z_REF, 0.6 + 2.2j])
        cum = tr._polyline_arclengths(path)
        frame = sg.frame_at(Z_REF, P_REF)
        for e in evs:
            if e.kind != "ordinary":
                continue
            z = tr._point_at(path, cum, e.arclength)
            frame = sg.continue_frame([frame.z, z], P_REF, start=frame)[-1]
            i, j = e.labels
            chi = sg.chi_from_tau(frame.tau, z, P_REF)
            # labels follow the l_{i>j} convention: Re[chi_j - chi_i] >= 0
            assert (chi[j - 1] - chi[i - 1]).real > 0

    def test_coincident_axis_pair_gives_two_events(self, graph31):
        evs = tr.path_crossings([Z_REF, np.conj(Z_REF)], graph31)
        assert len(evs) == 2
        assert abs(evs[0].arclength - evs[1].arclength) < 1e-9
        pairs = {frozenset(e.labels) for e in evs}
        assert pairs == {frozenset({1, 3}), frozenset({2, 4})}

    def test_event_order_stable_under_perturbation(self, graph31):
        delta = 1e-4 * graph31.domain.diameter / 10
        base = tr.path_crossings([Z_REF, 0.6 + 2.2j], graph31)
        for _ in range(3):
            off = delta * np.exp(2j * np.pi * RNG.uniform(0, 1, 2))
            evs = tr.path_crossings(
                [Z_REF + off[0], 0.6 + 2.2j + off[1]], graph31
            )
            assert [(e.curve_id, e.labels, e.kind, e.direction) for e in evs] \
                == [(e.curve_id, e.labels, e.kind, e.direction) for e in base]

    def test_path_near_crossing_raises(self, graph31):
        cr = next(c for c in graph31.crossings if c.kind == "mixed")
        delta = 1e-4 * graph31.domain.diameter
        z = cr.point + 0.3 * delta
        with pytest.raises(PathTooCloseToCrossing):
            tr.path_crossings([z - 0.5j * delta, z + 0.5j * delta], graph31)

    def test_path_near_turning_point_raises(self, graph31):
        tp = graph31.turning[0]
        delta = 1e-4 * graph31.domain.diameter
        with pytest.raises(PathTooCloseToCrossing):
            tr.path_crossings(
                [tp.z - 0.5 * delta, tp.z + 0.5 * delta], graph31
            )
