import math

import numpy as np
import pytest

from swallowtail import singulants as sg
from swallowtail.errors import PathThroughTurningPoint, RootConditioning, ZeroX1

P_REF = sg.REFERENCE_PARAMS
Z_REF = sg.REFERENCE_POINT

RNG = np.random.default_rng(20240817)


def rand_z(n):
    return RNG.uniform(-4, 4, n) + 1j * RNG.uniform(-4, 4, n)


class TestPhase:
    def test_zero_saddle(self):
        for z in rand_z(10):
            assert sg.phase(0.0, z, P_REF) == 0.0

    def test_phase_equals_closed_form_chi(self):
        # F(t_i, z) with t_i = -tau_i must reproduce the closed-form
        # singulant at random points.
        for z in rand_z(100):
            try:
                taus = sg.saddle_roots(z, P_REF)
            except RootConditioning:
                continue
            for tau in taus:
                chi = sg.chi_from_tau(tau, z, P_REF)
                assert abs(sg.phase(-tau, z, P_REF) - chi) < 1e-10 * max(1, abs(chi))

    def test_reference_chi_values(self):
        f = sg.frame_at(Z_REF, P_REF)
        for got, want in zip(f.chi, sg.REFERENCE_CHI):
            assert abs(got - want) < 5e-5


class TestSaddleRoots:
    def test_quadruple_degenerate(self):
        roots = sg.saddle_roots(0.0, sg.PhaseParams(0, 0))
        assert np.allclose(roots, 0.0)
        assert len(roots) == 4

    def test_vieta(self):
        for z in rand_z(50):
            taus = sg.saddle_roots(z, P_REF)
            assert abs(np.sum(taus)) < 1e-10
            e2 = sum(
                taus[i] * taus[j] for i in range(4) for j in range(i + 1, 4)
            )
            assert abs(e2 - (-3 * P_REF.a / 5)) < 1e-9
            assert abs(np.prod(taus) - z / 5) < 1e-9 * max(1, abs(z))

    def test_residual_bound(self):
        for z in rand_z(50):
            taus = sg.saddle_roots(z, P_REF)
            res = np.abs(sg._quartic_val(taus, z, P_REF))
            assert np.max(res) <= 1e-12 * max(1, abs(z))

    def test_canonical_order(self):
        taus = sg.saddle_roots(1 + 1j, P_REF)
        keys = [(t.real, t.imag) for t in taus]
        assert keys == sorted(keys)

    def test_double_root_at_degenerate_z(self):
        # (a, b) = (1, 0) has a double root tau = 0 at z = 0
        roots = sg.saddle_roots(0.0, sg.PhaseParams(1, 0))
        zero = sorted(np.abs(roots))[:2]
        assert max(zero) < 1e-9
        rest = sorted(np.abs(roots))[2:]
        assert np.allclose(rest, math.sqrt(3 / 5), atol=1e-10)


class TestFrame:
    def test_amp0_finite_and_consistent(self):
        f = sg.frame_at(Z_REF, P_REF)
        assert np.all(np.isfinite(f.amp0))
        for tau, amp in zip(f.tau, f.amp0):
            assert abs(amp**2 * sg.amp_denominator(tau, P_REF) - np.pi) < 1e-10

    def test_contractible_loop_identity(self):
        z0 = Z_REF + 0.4
        loop = [z0 + 0.1 * np.exp(2j * np.pi * k / 60) for k in range(61)]
        start = sg.frame_at(loop[0], P_REF)
        end = sg.continue_frame(loop, P_REF, start=start)[-1]
        assert np.max(np.abs(end.tau - start.tau)) < 1e-9
        assert np.max(np.abs(end.amp0 - start.amp0)) < 1e-8

    def test_turning_loop_transposes_pair(self):
        tp = sg.turning_points(P_REF)[0]
        z0 = tp.z + 0.05
        loop = [tp.z + 0.05 * np.exp(2j * np.pi * k / 120) for k in range(121)]
        start = sg.frame_at(z0, P_REF)
        end = sg.continue_frame(loop, P_REF, start=start)[-1]
        perm = tuple(
            int(np.argmin(np.abs(start.tau - t))) + 1 for t in end.tau
        )
        i, j = tp.pair
        want = [1, 2, 3, 4]
        want[i - 1], want[j - 1] = j, i
        assert perm == tuple(want)

    def test_continuation_matches_fine_oracle(self):
        path = [Z_REF, Z_REF + 4j]
        coarse = sg.continue_frame(path, P_REF)[-1]
        fine_path = [Z_REF + 4j * k / 400 for k in range(401)]
        fine = sg.continue_frame(fine_path, P_REF)[-1]
        assert np.max(np.abs(coarse.tau - fine.tau)) < 1e-9
        res = np.abs(sg._quartic_val(coarse.tau, coarse.z, P_REF))
        assert np.max(res) <= 1e-12 * max(1, abs(coarse.z))

    def test_tau_is_chi_derivative(self):
        # central difference of chi along a short segment
        h = 1e-5
        f0 = sg.frame_at(Z_REF, P_REF)
        fm = sg.frame_at(Z_REF - h, P_REF, ref=f0)
        fp = sg.frame_at(Z_REF + h, P_REF, ref=f0)
        dchi = (fp.chi - fm.chi) / (2 * h)
        assert np.max(np.abs(dchi - f0.tau)) < 1e-7

    def test_path_through_turning_point_raises(self):
        tp = sg.turning_points(P_REF)[0]
        with pytest.raises(PathThroughTurningPoint):
            sg.continue_frame([tp.z - 0.5, tp.z + 0.5], P_REF,
                              start=sg.frame_at(tp.z - 0.5, P_REF))


class TestHamiltonianCurve:
    def test_dw_dz_equals_tau(self):
        taus = 0.3 + 0.2j + 0.5 * np.exp(2j * np.pi * np.arange(12) / 12)
        h = 1e-6
        for tau in taus:
            dz = sg.z_of_tau(tau + h, P_REF) - sg.z_of_tau(tau - h, P_REF)
            dw = sg.w_of_tau(tau + h, P_REF) - sg.w_of_tau(tau - h, P_REF)
            assert abs(dw / dz - tau) < 1e-6

    def test_turning_points_are_critical_values(self):
        for tp in sg.turning_points(P_REF):
            crit = sg._critical_taus(P_REF)
            zc = 1.5 * crit * (P_REF.a * crit - 1j * P_REF.b)
            assert np.min(np.abs(zc - tp.z)) < 1e-10


class TestTurningPoints:
    def test_triple_degenerate(self):
        tps = sg.turning_points(sg.PhaseParams(0, 0))
        assert len(tps) == 1 and abs(tps[0].z) < 1e-12

    def test_b_zero(self):
        zs = sorted(t.z.real for t in sg.turning_points(sg.PhaseParams(1, 0)))
        assert np.allclose(zs, [0.0, 0.45], atol=1e-10)

    def test_cusp_case(self):
        b = math.sqrt(2 / 5)
        zs = sorted(t.z.real for t in sg.turning_points(sg.PhaseParams(-1, b)))
        assert np.allclose(zs, [-0.15, 1.2], atol=1e-10)

    def test_reference_count_and_pairs(self):
        tps = sg.turning_points(P_REF)
        assert len(tps) == 3
        for tp in tps:
            i, j = tp.pair
            assert 1 <= i < j <= 4
        # chi and tau coincide at each turning point
        for tp in tps:
            taus = sg._polish(np.roots(sg._quartic(tp.z, P_REF)), tp.z, P_REF)
            gaps = sorted(
                abs(taus[a] - taus[b]) for a in range(4) for b in range(a + 1, 4)
            )
            assert gaps[0] < 1e-6

    def test_pair_chi_coincide(self):
        # approach each turning point: the labelled pair has the smallest gap
        for tp in sg.turning_points(P_REF):
            f = sg.frame_at(tp.z + 1e-4, P_REF)
            i, j = tp.pair
            gap = abs(f.chi[i - 1] - f.chi[j - 1])
            others = [
                abs(f.chi[a] - f.chi[b])
                for a in range(4)
                for b in range(a + 1, 4)
                if (a + 1, b + 1) != (i, j)
            ]
            assert gap < min(others)


class TestVirtualTurningPoints:
    def test_reference_count(self):
        vps = sg.virtual_turning_points(P_REF)
        assert len(vps) == 3

    def test_definition_tolerances(self):
        for v in sg.virtual_turning_points(P_REF):
            taus = sg.saddle_roots(v.z, P_REF)
            chis = sg.chi_from_tau(taus, v.z, P_REF)
            best = min(
                (abs(chis[a] - chis[b]), abs(taus[a] - taus[b]))
                for a in range(4)
                for b in range(a + 1, 4)
            )
            assert best[0] <= 1e-10 * P_REF.scale**2
            assert best[1] >= 1e-4

    def test_grid_scan_oracle(self):
        # independent coarse scan: local minima of the pair gap, polished
        vps = sorted((v.z for v in sg.virtual_turning_points(P_REF)),
                     key=lambda z: (z.real, z.imag))
        found = set()
        for re in np.linspace(0.5, 3.0, 26):
            for im in np.linspace(-1.5, 1.5, 31):
                z = complex(re, im)
                taus = sg._polish(np.roots(sg._quartic(z, P_REF)), z, P_REF)
                chis = sg.chi_from_tau(taus, z, P_REF)
                pairs = [
                    (a, b) for a in range(4) for b in range(a + 1, 4)
                    if abs(taus[a] - taus[b]) > 0.3
                ]
                if not pairs:
                    continue
                gap, (a, b) = min(
                    (abs(chis[a] - chis[b]), (a, b)) for a, b in pairs
                )
                if gap > 0.15:
                    continue
                t1, t2 = sg._polish_pair(taus[a], taus[b], P_REF)
                if t1 is None or abs(t1 - t2) < 1e-4:
                    continue
                zv = sg.z_of_tau(t1, P_REF)
                found.add(complex(round(zv.real, 6), round(zv.imag, 6)))
        found = sorted(found, key=lambda z: (z.real, z.imag))
        assert len(found) == len(vps)
        for a, b in zip(found, vps):
            assert abs(a - b) < 1e-5

    def test_conjugation_symmetry(self):
        pts = np.array(
            [t.z for t in sg.turning_points(P_REF)]
            + [v.z for v in sg.virtual_turning_points(P_REF)]
        )
        for z in pts:
            assert np.min(np.abs(pts - np.conj(z))) < 1e-7


class TestCoalescenceClass:
    @pytest.mark.parametrize(
        "a,b,cls",
        [
            (0.0, 0.0, 1),
            (1.0, 0.0, 2),
            (-1.0, math.sqrt(2 / 5), 2),
            (3.0, 1.0, 3),
            (1.0, 3.0, 3),
        ],
    )
    def test_classes(self, a, b, cls):
        assert sg.coalescence_class(sg.PhaseParams(a, b)) == cls


class TestFromPhysical:
    def test_unit(self):
        z, p, eps = sg.from_physical(1, 0, 0)
        assert (z, p.a, p.b, eps) == (1.0, 0.0, 0.0, 1.0)

    def test_x1_32(self):
        z, p, eps = sg.from_physical(32, 0, 0)
        assert abs(eps - 32**-1.25) < 1e-15
        assert abs(z - 1) < 1e-12

    def test_round_trip(self):
        z, p, eps = sg.from_physical(2.5, -1.2, 0.7)
        assert abs(z / eps**0.8 - 2.5) < 1e-12
        assert abs(p.b / eps**0.6 - (-1.2)) < 1e-12
        assert abs(p.a / eps**0.4 - 0.7) < 1e-12

    def test_zero_x1(self):
        with pytest.raises(ZeroX1):
            sg.from_physical(0, 1, 1)
