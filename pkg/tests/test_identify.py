import math
import warnings

import numpy as np
import pytest

from designspace.errors import BracketInvalid, MaxIterationsWarning, NoUnifiedShape
from designspace.identify import (
    DesignSpaceResult,
    audit_extras,
    find_alpha_radius,
    identify_combinatorial,
    identify_resolution_support,
    identify_tolerance,
)
from designspace.models import (
    benchmark_kpis,
    benchmark_margin_threshold,
    benchmark_quality_threshold,
)
from designspace.problem import Constraint, DesignProblem, classify
from designspace.sampling import Bounds, sobol, unit_sobol

DUMBBELL_CENTERS = ((0.35, 0.35, 0.35), (0.65, 0.65, 0.65))


def ball_problem(radius, centers, sp):
    return DesignProblem(
        decision_names=["x1", "x2", "x3"],
        decision_units=["", "", ""],
        bounds=Bounds(lower=np.zeros(3), upper=np.ones(3)),
        kpi_names=["quality", "margin"],
        kpi_units=["", ""],
        constraints=[
            Constraint("quality", ">=", benchmark_quality_threshold(radius)),
            Constraint("margin", ">=", benchmark_margin_threshold(radius)),
        ],
        model={"kind": "benchmark", "centers": [list(c) for c in centers]},
        sampling={"sp": sp, "skip": 0},
    )


def ball_cloud(radius, centers, sp):
    problem = ball_problem(radius, centers, sp)
    x = sobol(3, problem.bounds, sp=sp).inputs
    return classify(x, benchmark_kpis(x, centers), problem)


class ExactInterpolator:
    """Perfect surrogate: the analytic benchmark itself."""

    def __init__(self, centers):
        self.centers = centers

    def predict(self, x):
        return benchmark_kpis(x, self.centers)


def c_shape_fixture(rng, n_sat=400, n_vio=150):
    """2D C-shaped satisfied cloud with violated points plugging the notch."""
    theta = rng.uniform(math.radians(40), math.radians(320), n_sat)
    radius = rng.uniform(0.6, 1.0, n_sat)
    sat = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    theta_v = rng.uniform(math.radians(-35), math.radians(35), n_vio)
    radius_v = rng.uniform(0.45, 1.1, n_vio)
    vio = np.column_stack([radius_v * np.cos(theta_v), radius_v * np.sin(theta_v)])
    return sat, vio


class TestFindAlphaRadius:
    def test_convex_cloud_saturates_to_hull(self, rng):
        sat = rng.random((150, 3))
        res = find_alpha_radius(sat, np.empty((0, 3)), 0.0)
        assert res.saturated and res.converged
        assert res.n_regions == 1
        assert res.v_num == 0
        # hull topology: every input on or inside the boundary
        assert bool(np.all(res.shape.contains_many(sat)))

    def test_c_shape_zero_tolerance_excludes_all_violations(self, rng):
        sat, vio = c_shape_fixture(rng)
        res = find_alpha_radius(sat, vio, 0.0)
        assert res.v_num == 0
        # exhaustive containment check against every violated point
        assert not np.any(res.shape.contains_many(vio))

    def test_tolerance_enlarges_radius(self, rng):
        # sparse notch: each admitted violation frees a strictly larger radius
        sat, vio = c_shape_fixture(rng, n_vio=40)
        res0 = find_alpha_radius(sat, vio, 0.0)
        res1 = find_alpha_radius(sat, vio, 1.0)
        assert res1.alpha_radius > res0.alpha_radius
        assert res1.v_num >= res0.v_num

    def test_admissible_radius_nondecreasing_in_tolerance(self, rng):
        for trial in range(5):
            sat, vio = c_shape_fixture(rng, n_sat=200, n_vio=80)
            radii = [find_alpha_radius(sat, vio, v).alpha_radius
                     for v in (0.0, 0.5, 1.0, 2.0, 4.0)]
            assert all(b >= a - 1e-15 for a, b in zip(radii, radii[1:]))

    def test_violation_bound_holds_on_termination(self, rng):
        sat, vio = c_shape_fixture(rng)
        for v_max in (0.0, 0.5, 1.5):
            res = find_alpha_radius(sat, vio, v_max)
            assert res.converged
            allowed = v_max * (len(sat) + res.v_num) / 100.0
            assert res.v_num <= allowed
            if not res.saturated:
                assert res.alpha_m_high - res.alpha_m_low <= 1e-3

    def test_max_iterations_flagged(self, rng):
        sat, vio = c_shape_fixture(rng)
        with pytest.warns(MaxIterationsWarning):
            res = find_alpha_radius(sat, vio, 0.0, iter_max=3)
        assert not res.converged
        # even a capped search returns an admissible shape
        assert res.v_num == 0

    def test_invalid_bracket_raises(self, rng):
        sat = rng.random((50, 2))
        with pytest.raises(BracketInvalid):
            find_alpha_radius(sat, np.empty((0, 2)), 0.0, alpha_m_bounds=(1.0, 0.5))


class TestIdentifyTolerance:
    def test_convex_zero_tolerance_suffices(self, rng):
        cloud = ball_cloud(0.35, ((0.5, 0.5, 0.5),), sp=10)
        result = identify_tolerance(cloud)
        assert result.v_max_pct == 0.0
        assert result.n_regions == 1
        assert result.n_violations == 0

    def test_dumbbell_grid_nonincreasing_regions(self):
        # two barely-disjoint balls: unification requires a small tolerance
        cloud = ball_cloud(0.25, DUMBBELL_CENTERS, sp=10)
        result = identify_tolerance(cloud)
        counts = [g["n_regions"] for g in result.tolerance_grid]
        assert result.n_regions == 1
        assert len(counts) > 1
        assert all(b <= a for a, b in zip(counts, counts[1:]))
        assert result.n_violations <= result.v_max_pct / 100.0 * (
            cloud.n_sat + result.n_violations)

    def test_violation_records_mirror_cloud_rows(self):
        cloud = ball_cloud(0.25, DUMBBELL_CENTERS, sp=10)
        result = identify_tolerance(cloud)
        for rec in result.in_shape_violations:
            row = rec["index"]
            assert not cloud.satisfied[row]
            assert np.allclose(rec["decisions"], cloud.decisions[row])
            assert rec["violated_constraints"]

    def test_separated_clusters_fail(self, rng):
        sat = np.vstack([rng.random((120, 2)) * np.array([0.25, 1.0]),
                         rng.random((120, 2)) * np.array([0.25, 1.0]) + np.array([0.75, 0.0])])
        vio = rng.random((400, 2)) * np.array([0.34, 1.0]) + np.array([0.33, 0.0])
        problem = DesignProblem(
            decision_names=["a", "b"], decision_units=["", ""],
            bounds=Bounds(lower=[0.0, 0.0], upper=[1.0, 1.0]),
            kpi_names=["y"], kpi_units=[""],
            constraints=[Constraint("y", ">=", 0.5)])
        decisions = np.vstack([sat, vio])
        kpis = np.concatenate([np.ones(len(sat)), np.zeros(len(vio))])[:, None]
        cloud = classify(decisions, kpis, problem)
        with pytest.raises(NoUnifiedShape):
            identify_tolerance(cloud, cap=0.5)


class TestIdentifyWithSupport:
    def test_rs_sphere_volume_oracle(self, benchmark_problem):
        # densified sphere cloud inside user-tightened bounds
        from designspace.problem import refine_bounds

        refined = refine_bounds(benchmark_problem,
                                Bounds(lower=[0.15] * 3, upper=[0.85] * 3))
        x = sobol(3, refined.bounds, sp=12).inputs
        cloud = classify(x, benchmark_kpis(x), refined)
        result = identify_resolution_support(
            cloud, ExactInterpolator(((0.5, 0.5, 0.5),)), start_power=10)
        assert result.n_regions == 1
        assert result.n_violations == 0
        analytic = 4.0 / 3.0 * math.pi * 0.35**3
        assert result.size_physical == pytest.approx(analytic, rel=0.10)

    def test_extras_nested_across_powers(self):
        from designspace.identify import EXTRA_POINT_SKIP

        small = unit_sobol(3, 10, skip=EXTRA_POINT_SKIP)
        big = unit_sobol(3, 11, skip=EXTRA_POINT_SKIP)
        assert np.array_equal(big[: len(small)], small)

    def test_exact_interpolator_matches_truth_classification(self):
        # a perfect surrogate labels extras exactly as the model would
        from designspace.identify import EXTRA_POINT_SKIP

        cloud = ball_cloud(0.266, DUMBBELL_CENTERS, sp=11)
        interp = ExactInterpolator(DUMBBELL_CENTERS)
        extras = unit_sobol(3, 10, skip=EXTRA_POINT_SKIP)
        predicted = classify(extras, interp.predict(extras), cloud.problem)
        truth = classify(extras, benchmark_kpis(extras, DUMBBELL_CENTERS), cloud.problem)
        assert np.array_equal(predicted.satisfied, truth.satisfied)

    def test_combinatorial_zero_tolerance_reduces_to_rs(self):
        cloud = ball_cloud(0.266, DUMBBELL_CENTERS, sp=11)
        interp = ExactInterpolator(DUMBBELL_CENTERS)
        rs = identify_resolution_support(cloud, interp, start_power=10)
        comb = identify_combinatorial(cloud, interp, v_max_pct=0.0, start_power=10)
        assert comb.extra_power == rs.extra_power
        assert comb.alpha_radius == rs.alpha_radius
        assert np.array_equal(comb.shape.simplices, rs.shape.simplices)

    def test_combinatorial_needs_no_more_points_than_rs(self):
        cloud = ball_cloud(0.266, DUMBBELL_CENTERS, sp=11)
        interp = ExactInterpolator(DUMBBELL_CENTERS)
        rs = identify_resolution_support(cloud, interp, start_power=10)
        comb = identify_combinatorial(cloud, interp, start_power=10)
        assert comb.extra_power <= rs.extra_power
        assert rs.n_violations == 0
        # admitted violations are reported for post-analysis
        allowed = comb.v_max_pct / 100.0 * (comb.n_shape_points + comb.n_violations)
        assert comb.n_violations <= allowed

    def test_power_cap_exhaustion_raises(self):
        cloud = ball_cloud(0.25, DUMBBELL_CENTERS, sp=10)  # disjoint balls
        interp = ExactInterpolator(DUMBBELL_CENTERS)
        with pytest.raises(NoUnifiedShape):
            identify_resolution_support(cloud, interp, start_power=10, power_cap=11)

    def test_audit_with_exact_truth_is_clean(self):
        cloud = ball_cloud(0.266, DUMBBELL_CENTERS, sp=11)
        interp = ExactInterpolator(DUMBBELL_CENTERS)
        result = identify_combinatorial(cloud, interp, start_power=10)
        audit = audit_extras(result, lambda dec: benchmark_kpis(dec, DUMBBELL_CENTERS))
        assert audit["n_audited"] > 0
        assert audit["n_misclassified"] == 0


class TestResultSerialization:
    def test_round_trip(self, tmp_path):
        cloud = ball_cloud(0.35, ((0.5, 0.5, 0.5),), sp=9)
        result = identify_tolerance(cloud)
        path = tmp_path / "dsp.json"
        result.to_json(path)
        back = DesignSpaceResult.from_json(path)
        assert back.method == result.method
        assert back.alpha_radius == result.alpha_radius
        assert back.size_physical == result.size_physical
        assert np.array_equal(back.shape.simplices, result.shape.simplices)
        queries = np.random.default_rng(0).random((200, 3))
        assert np.array_equal(back.shape.contains_many(queries),
                              result.shape.contains_many(queries))
