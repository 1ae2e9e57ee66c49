import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundpose import backend, solvers
from groundpose._pykernels import fhf_kernel
from groundpose.errors import DegenerateConfigurationError, InvalidInputError
from groundpose.geom import Correspondence, GroundHomography, Intrinsics, rot_x
from groundpose.metrics import best_candidate, candidate_error, homography_error
from groundpose.solvers import (
    consistency_residual,
    denormalize_solution,
    normalize_inputs,
    solve,
    solve_array,
    solve_calibrated_2pt,
    solve_f1Hf2_3pt,
    solve_fHf_2_5pt,
    solve_Hf_2_5pt,
)
from groundpose.synth import InstanceConfig, generate_instance

MODES = {"2pt": "calibrated", "fhf": "fhf", "hf": "hf", "f1hf2": "f1hf2"}
seeds = st.integers(0, 2**31 - 1)


def instance(kind, seed, **kw):
    return generate_instance(seed, InstanceConfig(focal_mode=MODES[kind], **kw))


def rows_for(kind, inst, **kw):
    m = solvers.SAMPLE_SIZE[kind]
    return solve_array(kind, inst.x1[:m], inst.x2[:m], inst.R1, inst.R2, *inst.focals, **kw)


class TestCalibrated:
    def test_recovers_ground_truth(self, kernels_backend):
        inst = instance("2pt", 0)
        sols = solve_calibrated_2pt(*inst.correspondences([0, 1]), *inst.focals)
        assert len(sols) == 2
        errs = sorted(homography_error(s.h, inst.gt_homography) for s in sols)
        assert errs[0] < 1e-10

    def test_specific_yaw(self):
        # 25 degree yaw between the two rectified frames
        inst = None
        for seed in range(500):
            cand = instance("2pt", seed)
            if abs(abs(math.degrees(cand.gt_rectified_pose.yaw)) - 25) < 5:
                inst = cand
                break
        assert inst is not None
        sols = solve_calibrated_2pt(*inst.correspondences([0, 1]), *inst.focals)
        assert min(homography_error(s.h, inst.gt_homography) for s in sols) < 1e-10

    def test_signs_differ_only_by_sign(self):
        inst = instance("2pt", 3)
        a, b = solve_calibrated_2pt(*inst.correspondences([0, 1]), *inst.focals)
        np.testing.assert_array_equal(a.h.as_vector(), -b.h.as_vector())
        assert a.known == (True, True)

    def test_repeated_point(self):
        inst = instance("2pt", 4)
        c = inst.correspondences([0])[0]
        with pytest.raises(DegenerateConfigurationError):
            solve_calibrated_2pt(c, c, *inst.focals)

    def test_pure_yaw(self, kernels_backend):
        # both cameras share a centre; only yaw changes
        f = 600.0
        A1, A2 = rot_x(math.pi / 2 + 0.2), rot_x(math.pi / 2 - 0.1)
        h = GroundHomography.from_motion(0.6, [0.0, 0.0, 0.0])
        rng = np.random.default_rng(0)
        X = np.column_stack([rng.normal(size=2), np.zeros(2), rng.normal(size=2) + 3])
        # rectified ray of view 1 is X - C; choose C with y = -1 so the floor sits at depth 1
        rays1 = X - np.array([0.0, -1.0, 0.0])
        rays2 = rays1 @ h.matrix().T
        def project(A, rays):
            z = rays @ A.T
            return f * z[:, :2] / z[:, 2:]
        x1, x2 = project(A1, rays1), project(A2, rays2)
        rows = solve_array("2pt", x1, x2, A1, A2, f, f)
        best = rows[np.argmax(rows[:, 3])]
        np.testing.assert_allclose(best[[2, 3, 4]], [0.0, 1.0, 0.0], atol=1e-10)


@pytest.mark.parametrize("kind", ["fhf", "hf", "f1hf2"])
class TestPartiallyCalibrated:
    def test_recovers_ground_truth(self, kind, kernels_backend):
        for seed in range(40):
            inst = instance(kind, seed)
            _, err = best_candidate(inst, rows_for(kind, inst), kind)
            assert err < 1e-6, seed

    @settings(max_examples=60, deadline=None)
    @given(seeds)
    def test_recovery_property(self, kind, seed):
        inst = instance(kind, seed)
        _, err = best_candidate(inst, rows_for(kind, inst), kind)
        assert err < 1e-5

    def test_rows_are_normalized_with_positive_h4(self, kind):
        for seed in range(20):
            rows = rows_for(kind, instance(kind, seed))
            assert np.all(rows[:, 3] > 0)
            np.testing.assert_allclose(np.hypot(rows[:, 0], rows[:, 1]), 1.0, atol=1e-12)
            assert np.all(rows[:, 5:7] > 0)

    def test_candidate_bound(self, kind):
        bound = {"fhf": 4, "hf": 2, "f1hf2": 5}[kind]
        for seed in range(300):
            assert len(rows_for(kind, instance(kind, seed))) <= bound

    def test_backends_agree_on_ground_truth(self, kind):
        if len(backend.available()) < 2:
            pytest.skip("compiled backend not built")
        for seed in range(100):
            inst = instance(kind, seed)
            best = []
            for name in ("python", "compiled"):
                with backend.using(name):
                    rows = rows_for(kind, inst)
                i, err = best_candidate(inst, rows, kind)
                assert err < 1e-6
                best.append(rows[i])
            np.testing.assert_allclose(best[0][:7], best[1][:7], rtol=1e-7, atol=1e-9)

    def test_scale_covariance(self, kind):
        inst = instance(kind, 7)
        m = solvers.SAMPLE_SIZE[kind]
        f1, f2 = inst.focals
        a = solve_array(kind, inst.x1[:m], inst.x2[:m], inst.R1, inst.R2, f1, f2)
        b = solve_array(kind, 1000 * inst.x1[:m], 1000 * inst.x2[:m], inst.R1, inst.R2,
                        1000 * f1, 1000 * f2)
        ia, _ = best_candidate(inst, a, kind)
        jb = int(np.argmin([homography_error(r[:5], GroundHomography.from_vector(a[ia, :5]))
                            for r in b]))
        np.testing.assert_allclose(b[jb, :5], a[ia, :5], atol=1e-8)
        np.testing.assert_allclose(b[jb, 5:7], 1000 * a[ia, 5:7], rtol=1e-8)

    def test_normalization_never_hurts_success(self, kind):
        # raw pixels may trip the degeneracy guard; that is a documented outcome
        ok = {True: 0, False: 0}
        for s in range(100):
            inst = instance(kind, s)
            for flag in ok:
                try:
                    rows = rows_for(kind, inst, normalize=flag)
                except DegenerateConfigurationError:
                    continue
                ok[flag] += best_candidate(inst, rows, kind)[1] < 1e-6
        assert ok[True] == 100
        assert ok[True] >= ok[False]


class TestFhf:
    def test_focal_600(self):
        inst = None
        for seed in range(2000):
            cand = instance("fhf", seed)
            if abs(cand.focals[0] - 600) < 10:
                inst = cand
                break
        rows = rows_for("fhf", inst)
        i, err = best_candidate(inst, rows, "fhf")
        assert err < 1e-6
        assert abs(rows[i, 5] - inst.focals[0]) / inst.focals[0] < 1e-6

    def test_quartic_and_eig_agree(self):
        for seed in range(200):
            inst = instance("fhf", seed)
            a = rows_for("fhf", inst, kernels=None, roots="quartic")
            b = rows_for("fhf", inst, roots="eig")
            ia, ea = best_candidate(inst, a, "fhf")
            ib, eb = best_candidate(inst, b, "fhf")
            assert ea < 1e-6 and eb < 1e-6
            np.testing.assert_allclose(a[ia, :7], b[ib, :7], rtol=1e-8, atol=1e-8)

    def test_sign_symmetry(self):
        # f -> -f is the same as mirroring both image axes
        inst = instance("fhf", 12)
        s = solvers.normalization_scale(inst.x1[:3], inst.x2[:3])
        x1, x2 = inst.x1[:3] / s, inst.x2[:3] / s
        a = fhf_kernel(x1, x2, inst.R1, inst.R2)
        flip = np.diag([-1.0, -1.0, 1.0])
        b = fhf_kernel(-x1, -x2, flip @ inst.R1, flip @ inst.R2)
        np.testing.assert_allclose(np.sort(a[:, 5]), np.sort(b[:, 5]), rtol=1e-9)

    def test_withheld_residual_matches_direct(self):
        inst = instance("fhf", 21, sigma=0.5)
        cs = inst.correspondences([0, 1, 2])
        for sol in solve_fHf_2_5pt(*cs):
            assert sol.residual == pytest.approx(consistency_residual(sol, cs[2]), rel=1e-6,
                                                 abs=1e-9)

    def test_noise_free_residual_vanishes(self):
        inst = instance("fhf", 22)
        cs = inst.correspondences([0, 1, 2])
        sols = solve_fHf_2_5pt(*cs)
        errs = [homography_error(s.h, inst.gt_homography) for s in sols]
        assert sols[int(np.argmin(errs))].residual < 1e-8


class TestHf:
    def test_closed_and_eig_agree(self):
        for seed in range(1000):
            inst = instance("hf", seed)
            try:
                a = rows_for("hf", inst, roots="closed")
                b = rows_for("hf", inst, roots="eig")
            except DegenerateConfigurationError:
                continue
            a = a[np.argsort(a[:, 6])]
            b = b[np.argsort(b[:, 6])]
            assert len(a) == len(b)
            np.testing.assert_allclose(a[:, :7], b[:, :7], rtol=1e-8, atol=1e-8)

    def test_focal_error_tight(self):
        for seed in range(50):
            inst = instance("hf", seed)
            rows = rows_for("hf", inst)
            i, _ = best_candidate(inst, rows, "hf")
            assert abs(rows[i, 6] - inst.focals[1]) / inst.focals[1] < 1e-8

    def test_needs_known_focal(self):
        inst = instance("hf", 0)
        with pytest.raises(InvalidInputError):
            solve_array("hf", inst.x1[:3], inst.x2[:3], inst.R1, inst.R2)

    def test_wrapper_marks_known_focal(self):
        inst = instance("hf", 1)
        sols = solve_Hf_2_5pt(*inst.correspondences([0, 1, 2]), Intrinsics(inst.focals[0]))
        assert sols and all(s.known == (True, False) for s in sols)
        assert all(s.f1 == pytest.approx(inst.focals[0]) for s in sols)


class TestF1Hf2:
    def test_two_focals(self):
        inst = None
        for seed in range(5000):
            cand = instance("f1hf2", seed)
            f1, f2 = cand.focals
            if abs(f1 - 400) < 20 and abs(f2 - 800) < 40:
                inst = cand
                break
        assert inst is not None
        rows = rows_for("f1hf2", inst)
        i, _ = best_candidate(inst, rows, "f1hf2")
        assert abs(rows[i, 5] - inst.focals[0]) / inst.focals[0] < 1e-6
        assert abs(rows[i, 6] - inst.focals[1]) / inst.focals[1] < 1e-6

    @pytest.mark.parametrize("roots", ["eig", "companion"])
    def test_root_methods_agree(self, roots):
        for seed in range(200):
            inst = instance("f1hf2", seed)
            a = rows_for("f1hf2", inst, roots="bracket")
            b = rows_for("f1hf2", inst, roots=roots)
            ia, ea = best_candidate(inst, a, "f1hf2")
            ib, eb = best_candidate(inst, b, "f1hf2")
            assert ea < 1e-6 and eb < 1e-6
            np.testing.assert_allclose(a[ia, :7], b[ib, :7], rtol=1e-7, atol=1e-9)

    def test_collinear_view_one(self):
        inst = instance("f1hf2", 0)
        x1 = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(DegenerateConfigurationError):
            solve_array("f1hf2", x1, inst.x2[:3], inst.R1, inst.R2)

    def test_wrapper(self):
        inst = instance("f1hf2", 2)
        sols = solve_f1Hf2_3pt(*inst.correspondences([0, 1, 2]))
        assert min(candidate_error(inst, [*s.h.as_vector(), s.f1, s.f2], "f1hf2")
                   for s in sols) < 1e-6


class TestNormalization:
    def test_unit_scale_is_identity(self):
        inst = instance("fhf", 0)
        sol = solve_fHf_2_5pt(*inst.correspondences([0, 1, 2]))[0]
        from groundpose.solvers import NormalizationState
        assert denormalize_solution(sol, NormalizationState(1.0)) == sol

    def test_normalize_inputs_mean_abs_one(self):
        inst = instance("fhf", 1)
        cs, state = normalize_inputs(inst.correspondences([0, 1, 2]))
        pts = np.array([[c.x1.u, c.x1.v, c.x2.u, c.x2.v] for c in cs])
        assert np.mean(np.abs(pts)) == pytest.approx(1.0)
        assert state.scale > 0

    def test_zero_spread_falls_back(self):
        assert solvers.normalization_scale(np.zeros((3, 2)), np.zeros((3, 2))) == 1.0

    def test_normalization_improves_focal_median(self):
        errs = {True: [], False: []}
        for seed in range(300):
            inst = instance("fhf", seed)
            for flag in (True, False):
                try:
                    rows = rows_for("fhf", inst, normalize=flag)
                except DegenerateConfigurationError:
                    rows = np.empty((0, 8))
                i, _ = best_candidate(inst, rows, "fhf")
                e = math.inf if i is None else abs(rows[i, 5] - inst.focals[0]) / inst.focals[0]
                errs[flag].append(e)
        assert np.median(errs[True]) <= np.median(errs[False])


def test_unknown_kind():
    with pytest.raises(InvalidInputError):
        solve("7pt", np.zeros((3, 2)), np.zeros((3, 2)), np.eye(3), np.eye(3))


def test_solution_pixel_homography_maps_points():
    inst = instance("f1hf2", 30, n_planar=10)
    sols = solve_f1Hf2_3pt(*inst.correspondences([0, 1, 2]))
    errs = [candidate_error(inst, [*s.h.as_vector(), s.f1, s.f2], "f1hf2") for s in sols]
    H = sols[int(np.argmin(errs))].pixel_homography(inst.R1, inst.R2)
    z = np.column_stack([inst.x1, np.ones(inst.n)]) @ H.T
    np.testing.assert_allclose(z[:, :2] / z[:, 2:], inst.x2, atol=1e-6)


def test_sample_correspondence_type():
    inst = instance("2pt", 1)
    c = inst.correspondences([0])[0]
    assert isinstance(c, Correspondence)
